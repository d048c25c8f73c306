"""Anchored neighborhood regression: precomputed projections vs online ridge.

Run:  python3 demos/anchored_regression.py
"""

import time

import numpy as np

from boostsr import boost, corpus, imageops, pipeline
from boostsr.dictionary import nearest_atoms
from boostsr.sparse import ridge_solve

config = pipeline.Config(dict_size=128, ksvd_iterations=12).validate()
faces = corpus.generate_corpus(30, seed=0)
pair, anchors = pipeline.train_dict_stage(faces, config)
print(f"{pair.atom_count} atoms, {config.k_nn} neighbors per anchor, "
      f"lambda {config.lam}")

# Each atom owns a ridge projection built offline from its neighborhood.
# Applying it must reproduce the online ridge solve exactly.
test = corpus.generate_corpus(2, seed=900)
degradation = config.degradation()
lr = imageops.degrade(test[0], degradation)
prep = boost.prepare_image(lr, pair)
assign = nearest_atoms(prep.features.patches, pair)
worst = 0.0
for f, a in zip(prep.features.patches, assign):
    offline = anchors.projections[a] @ f
    nb = anchors.neighbors[a]
    online = pair.d_hr[:, nb] @ ridge_solve(f, pair.d_lr[:, nb], config.lam)
    worst = max(worst, float(np.abs(offline - online).max()))
print(f"offline vs online reconstruction, worst patch deviation: {worst:.2e}")

# The point of the precomputation: reconstruction is a nearest-atom lookup
# plus one matrix multiply, far cheaper than iterative coding.
for hr in test:
    lr = imageops.degrade(hr, degradation)
    pipeline.sr_anr(lr, pair, anchors)          # warm up
    pipeline.sr_sparse(lr, pair, config.lam)
    t0 = time.perf_counter()
    anr_img = pipeline.sr_anr(lr, pair, anchors)
    t_anr = time.perf_counter() - t0
    t0 = time.perf_counter()
    sparse_img = pipeline.sr_sparse(lr, pair, config.lam)
    t_sparse = time.perf_counter() - t0
    print(f"anchored {imageops.psnr(hr, anr_img):6.2f} dB in {t_anr*1e3:7.1f} ms   "
          f"l1 coding {imageops.psnr(hr, sparse_img):6.2f} dB in "
          f"{t_sparse*1e3:7.1f} ms")
