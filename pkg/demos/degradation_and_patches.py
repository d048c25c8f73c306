"""Walk through the image plumbing: degradation, interpolation, patches, PSNR.

Run:  python3 demos/degradation_and_patches.py
"""

import numpy as np

from boostsr import corpus, imageops

# A synthetic 64x64 face stands in for an aligned photo crop.
face = corpus.generate_corpus(1, seed=42)[0]
print(f"face: {face.shape}, intensities in [{face.min():.2f}, {face.max():.2f}]")

# The observation model: Gaussian blur, then take every 4th pixel.
model = imageops.DegradationModel(imageops.gaussian_taps(7, 1.2), scale_factor=4)
low = imageops.degrade(face, model)
print(f"degraded to {low.shape}; a constant image would pass through unchanged")

# Bicubic interpolation is the classical baseline for undoing the subsampling.
up = imageops.bicubic_upscale(low, 4)
print(f"bicubic upscale back to {up.shape}: PSNR {imageops.psnr(face, up):.2f} dB")

# All reconstruction happens on overlapping patches.  16x16 patches with a
# 4-pixel overlap tile a 64x64 image with a 5x5 lattice of origins.
grid = imageops.extract_patches(face, patch_size=16, overlap=4)
print(f"{len(grid)} patches of {grid.patch_size}x{grid.patch_size}, "
      f"stride {grid.stride}")

# The matching low-resolution lattice has the same patch count, which is what
# couples the two domains.
lr_grid = imageops.extract_patches(low, patch_size=4, overlap=1)
print(f"coupled LR grid: {len(lr_grid)} patches (equal count by construction)")

# Averaging the overlaps reassembles the image exactly.
back = imageops.aggregate_patches(grid)
print(f"round-trip max error: {np.abs(back - face).max():.2e}")

# Gradient features of the upscaled image feed the dictionary methods; a flat
# image produces an all-zero feature vector.
feats = imageops.extract_features(up, imageops.FeatureExtractor(), 16, 4)
print(f"raw feature vectors: {feats.patches.shape[1]} dims per patch")
