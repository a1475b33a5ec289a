"""
Transfer to a low-resource domain
=================================

Domain B uses a higher pitch register, more harmonics and more noise
than domain A, but the same contour per affect.  With only 20 labeled B
clips, start from a model trained on A (encoder and attention copied,
decoder fresh) and compare against training from scratch.

This is the experiment runner doing the work; the same thing runs from
the shell with ``affectlab experiment tests/fixtures/transfer_ab.ini``.
"""

import json
import os
import tempfile

from affectlab import run_experiment
from affectlab.synthetic import generate_corpus

here = os.path.dirname(os.path.abspath(__file__))
config = os.path.join(here, "..", "tests", "fixtures", "transfer_ab.ini")

root = tempfile.mkdtemp()
generate_corpus(os.path.join(root, "synth_a"), 50, seed=100, domain="A")
generate_corpus(os.path.join(root, "synth_b"), 50, seed=200, domain="B")

# fewer epochs than the fixture so the demo finishes in about a minute
out = run_experiment(config, os.path.join(root, "out"),
                     overrides={"experiment.data_root": root, "experiment.seeds": "0, 1",
                                "transfer.pretrain_epochs": "40",
                                "transfer.finetune_epochs": "40"})

summary = json.load(open(os.path.join(out, "summary.json")))
print("transfer UAR", summary["mean_transfer_uar"])
print("scratch UAR ", summary["mean_scratch_uar"])
print()
print(open(os.path.join(out, "results.txt")).read())
