"""Image carriers and the operators built on them.

Images are plain 2D float64 arrays with intensities in [0, 1]; quantization
to 8 bits happens only at file I/O and inside the PSNR metric.  The blur /
subsample degradation uses a periodic boundary so that a unit-sum kernel is
exactly mean-preserving and so that correlation with the flipped kernel is
the exact adjoint of the blur (the back-projection gradient relies on this).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy.ndimage import convolve1d, correlate1d

# First- and second-order gradient taps, applied along both axes.
GRAD_FILTERS = (
    np.array([-1.0, 0.0, 1.0]),
    np.array([1.0, 0.0, -2.0, 0.0, 1.0]),
)


def as_image(data) -> np.ndarray:
    """Validate and return a finite, non-empty 2D float64 array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("image must be a non-empty 2D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image intensities must be finite")
    return arr


def clamp(img: np.ndarray) -> np.ndarray:
    """Clip intensities back into [0, 1] after a reconstruction."""
    return np.clip(img, 0.0, 1.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Read a grayscale PNG/PGM as floats in [0, 1]; color collapses to luminance."""
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0


def save_image(path, img: np.ndarray) -> None:
    """Write an 8-bit grayscale image; the format follows the extension."""
    PILImage.fromarray(to_uint8(as_image(img)), mode="L").save(path)


# ---------------------------------------------------------------------------
# degradation model: blur + subsample (+ optional noise)

def gaussian_taps(size: int, sigma: float) -> np.ndarray:
    """Unit-sum 1D Gaussian taps; `size` must be odd."""
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd and positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-0.5 * (x / sigma) ** 2)
    return taps / taps.sum()


@dataclass
class DegradationModel:
    """Separable blur + integer subsampling + additive Gaussian noise."""

    taps: np.ndarray
    scale_factor: int
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 1 or self.taps.size % 2 == 0:
            raise ValueError("blur taps must be a 1D odd-length vector")
        if abs(self.taps.sum() - 1.0) > 1e-12:
            raise ValueError("blur taps must sum to 1")
        if self.scale_factor < 2:
            raise ValueError("scale_factor must be >= 2")
        if self.noise_sigma < 0:
            raise ValueError("noise level must be nonnegative")


def blur(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable blur with periodic boundary."""
    out = convolve1d(np.asarray(img, dtype=np.float64), taps, axis=0, mode="wrap")
    return convolve1d(out, taps, axis=1, mode="wrap")


def blur_adjoint(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Exact adjoint of `blur`: correlation with the same taps, same boundary."""
    out = correlate1d(np.asarray(img, dtype=np.float64), taps, axis=0, mode="wrap")
    return correlate1d(out, taps, axis=1, mode="wrap")


def degrade(img: np.ndarray, model: DegradationModel) -> np.ndarray:
    """Blur, subsample at indices 0, r, 2r, ... and optionally add noise.

    Deterministic whenever the noise level is zero.
    """
    img = as_image(img)
    r = model.scale_factor
    h, w = img.shape
    if h % r or w % r:
        raise ValueError(
            f"image dimensions {h}x{w} are not divisible by scale factor {r}"
        )
    low = blur(img, model.taps)[::r, ::r]
    if model.noise_sigma > 0:
        rng = np.random.default_rng(model.seed)
        low = low + rng.normal(0.0, model.noise_sigma, size=low.shape)
    return low


def zero_upsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Adjoint of the subsampling step: place values on the coarse lattice."""
    img = as_image(img)
    out = np.zeros((img.shape[0] * factor, img.shape[1] * factor))
    out[::factor, ::factor] = img
    return out


# ---------------------------------------------------------------------------
# bicubic interpolation (Catmull-Rom), corner-aligned with the subsampler

def _catrom(s: float) -> float:
    s = abs(s)
    if s <= 1.0:
        return 1.5 * s**3 - 2.5 * s**2 + 1.0
    if s < 2.0:
        return -0.5 * s**3 + 2.5 * s**2 - 4.0 * s + 2.0
    return 0.0


def _upscale_matrix(n_in: int, factor: int) -> np.ndarray:
    """One-axis interpolation matrix with border replication."""
    n_out = n_in * factor
    w = np.zeros((n_out, n_in))
    for i in range(n_out):
        src = i / factor
        i0 = math.floor(src)
        t = src - i0
        for d in (-1, 0, 1, 2):
            j = min(max(i0 + d, 0), n_in - 1)
            w[i, j] += _catrom(t - d)
    return w


def bicubic_upscale(img: np.ndarray, factor: int) -> np.ndarray:
    """Catmull-Rom upscaling anchored so LR pixel i lands on HR pixel factor*i."""
    img = as_image(img)
    if factor < 2:
        raise ValueError("factor must be >= 2")
    wr = _upscale_matrix(img.shape[0], factor)
    wc = _upscale_matrix(img.shape[1], factor)
    return wr @ img @ wc.T


# ---------------------------------------------------------------------------
# overlapping patches

@dataclass
class PatchGrid:
    """Vectorized overlapping patches plus the geometry to reassemble them.

    `patches` holds one row-major vector per patch.  For plain image patches
    the vector length is patch_size**2; feature grids carry longer vectors
    and cannot be aggregated back into an image.
    """

    patch_size: int
    overlap: int
    origins: np.ndarray          # (n, 2) top-left row/col corners
    patches: np.ndarray          # (n, d)
    image_shape: tuple[int, int]

    @property
    def stride(self) -> int:
        return self.patch_size - self.overlap

    def __len__(self) -> int:
        return len(self.origins)


def _axis_origins(length: int, patch: int, stride: int) -> list[int]:
    starts = list(range(0, length - patch + 1, stride))
    if starts[-1] != length - patch:
        starts.append(length - patch)  # clamp the last origin to the border
    return starts


def extract_patches(img: np.ndarray, patch_size: int, overlap: int) -> PatchGrid:
    """Tile the image with overlapping patches, last row/column clamped."""
    img = as_image(img)
    h, w = img.shape
    if not 0 <= overlap < patch_size:
        raise ValueError("overlap must satisfy 0 <= overlap < patch_size")
    if patch_size > min(h, w):
        raise ValueError("patch size exceeds image dimensions")
    stride = patch_size - overlap
    rows = _axis_origins(h, patch_size, stride)
    cols = _axis_origins(w, patch_size, stride)
    origins = np.array([(r, c) for r in rows for c in cols], dtype=np.int64)
    patches = np.stack(
        [img[r : r + patch_size, c : c + patch_size].ravel() for r, c in origins]
    )
    return PatchGrid(patch_size, overlap, origins, patches, (h, w))


def aggregate_patches(grid: PatchGrid) -> np.ndarray:
    """Average overlapping patches back into an image.

    Exact inverse of extract_patches on any image (round-trip identity).
    """
    p = grid.patch_size
    if grid.patches.shape != (len(grid.origins), p * p):
        raise ValueError("patch vectors do not match the grid geometry")
    h, w = grid.image_shape
    acc = np.zeros((h, w))
    cnt = np.zeros((h, w))
    for (r, c), vec in zip(grid.origins, grid.patches):
        if r < 0 or c < 0 or r + p > h or c + p > w:
            raise ValueError("patch origin lies outside the image")
        acc[r : r + p, c : c + p] += vec.reshape(p, p)
        cnt[r : r + p, c : c + p] += 1.0
    if np.any(cnt == 0):
        raise ValueError("patch grid does not cover every pixel")
    return acc / cnt


# ---------------------------------------------------------------------------
# gradient features with optional PCA reduction

@dataclass
class FeatureExtractor:
    """Gradient filter bank plus an optional PCA basis fitted on training features.

    The PCA is uncentered, so feature extraction stays linear and the zero
    signal maps to the zero feature vector.
    """

    pca_basis: np.ndarray | None = None   # (raw_dim, k), orthonormal columns
    energy: float = 1.0                   # training-energy fraction the basis keeps

    def __post_init__(self):
        if self.pca_basis is not None:
            self.pca_basis = np.asarray(self.pca_basis, dtype=np.float64)
            gram = self.pca_basis.T @ self.pca_basis
            if not np.allclose(gram, np.eye(gram.shape[0]), atol=1e-10):
                raise ValueError("PCA basis columns must be orthonormal")


def gradient_maps(img: np.ndarray) -> list[np.ndarray]:
    """First/second-order gradient responses, horizontal then vertical."""
    img = as_image(img)
    maps = []
    for taps in GRAD_FILTERS:
        maps.append(convolve1d(img, taps, axis=1, mode="nearest"))
        maps.append(convolve1d(img, taps, axis=0, mode="nearest"))
    return maps


def raw_feature_patches(img: np.ndarray, patch_size: int, overlap: int) -> PatchGrid:
    """Concatenated gradient-filter responses per patch, before any projection."""
    grids = [extract_patches(m, patch_size, overlap) for m in gradient_maps(img)]
    raw = np.hstack([g.patches for g in grids])
    first = grids[0]
    return PatchGrid(patch_size, overlap, first.origins, raw, first.image_shape)


def extract_features(
    img: np.ndarray, fe: FeatureExtractor, patch_size: int, overlap: int
) -> PatchGrid:
    """Per-patch feature vectors of the mid-resolution (bicubic-upscaled) image."""
    grid = raw_feature_patches(img, patch_size, overlap)
    if fe.pca_basis is not None:
        if fe.pca_basis.shape[0] != grid.patches.shape[1]:
            raise ValueError(
                f"PCA basis expects raw dimension {fe.pca_basis.shape[0]}, "
                f"got {grid.patches.shape[1]}"
            )
        grid.patches = grid.patches @ fe.pca_basis
    return grid


def fit_pca(features: np.ndarray, energy: float = 0.999) -> FeatureExtractor:
    """Fit an uncentered PCA keeping the leading axes holding `energy` of the signal."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 1:
        raise ValueError("need a (samples, dim) feature matrix")
    if not 0 < energy <= 1:
        raise ValueError("energy fraction must lie in (0, 1]")
    cov = f.T @ f
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order]
    total = vals.sum()
    if total <= 0:
        k = 1
    else:
        frac = np.cumsum(vals) / total
        k = int(np.searchsorted(frac, energy - 1e-12) + 1)
        k = min(k, f.shape[1])
    return FeatureExtractor(pca_basis=np.ascontiguousarray(vecs[:, :k]), energy=energy)


# ---------------------------------------------------------------------------
# quality metric

def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB on 8-bit quantized intensities.

    Identical images report math.inf.
    """
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise ValueError("images must share dimensions")
    qa = to_uint8(a).astype(np.float64)
    qb = to_uint8(b).astype(np.float64)
    mse = np.mean((qa - qb) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)
