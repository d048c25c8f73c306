"""Train coupled dictionaries on the synthetic corpus and inspect the result.

Run:  python3 demos/dictionary_training.py   (about half a minute)
"""

import numpy as np

from boostsr import corpus, imageops, pipeline

config = pipeline.Config(dict_size=128, ksvd_iterations=12).validate()
faces = corpus.generate_corpus(30, seed=0)
print(f"training corpus: {len(faces)} faces, dictionary of {config.dict_size} atoms")

# Coupled samples: PCA-reduced gradient features of the blurry upscale paired
# with the mean-removed detail the upscale is missing.
raw_feats, targets = pipeline.collect_training_pairs(faces, config)
extractor = imageops.fit_pca(raw_feats, config.pca_energy)
print(f"features: {raw_feats.shape[0]} samples, "
      f"{raw_feats.shape[1]} dims -> {extractor.pca_basis.shape[1]} after PCA "
      f"({config.pca_energy:.1%} energy)")

pair, anchors = pipeline.train_dict_stage(faces, config)
errs = pair.training_errors
print(f"dictionary training objective: {errs[0]:.2f} -> {errs[-1]:.2f} "
      f"(non-increasing at every step: "
      f"{all(b <= a * (1 + 1e-9) for a, b in zip(errs, errs[1:]))})")

# The trained pair turns a low-resolution face it has never seen into detail.
test = corpus.generate_corpus(3, seed=900)
degradation = config.degradation()
for i, hr in enumerate(test):
    lr = imageops.degrade(hr, degradation)
    bicubic = pipeline.sr_bicubic(lr, config)
    sparse_sr = pipeline.sr_sparse(lr, pair, config.lam)
    print(f"face {i}: bicubic {imageops.psnr(hr, bicubic):6.2f} dB   "
          f"sparse coding {imageops.psnr(hr, sparse_sr):6.2f} dB")

# Atom norms stay exactly unit through all the update rounds.
norms = np.linalg.norm(pair.d_lr, axis=0)
print(f"atom norm deviation from 1: {np.abs(norms - 1).max():.2e}")
