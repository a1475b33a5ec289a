"""Speech affect recognition with cross-corpus parameter transfer."""

from .audio_io import AudioClip, load_wav, resample, write_wav
from .corpus import (CLASSES, CorpusManifest, LabelMap, SplitPlan, make_splits, map_labels,
                     read_manifest, scan_corpus, write_manifest)
from .features import (FeatureExtractor, FeatureSequence, FeatureStats, FrameSpec,
                       assemble_features)
from .harness import ExperimentConfig, evaluate, run_experiment
from .metrics import ConfusionMatrix, EvalReport, uar
from .model import (Hyperparams, ParameterSet, TrainConfig, TrainingLog, classify,
                    init_params, loss_and_grads, train)
from .transfer import (Checkpoint, TransferPolicy, finetune, load_checkpoint, save_checkpoint,
                       transfer_parameters)

__version__ = "0.1.0"
