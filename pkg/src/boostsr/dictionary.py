"""Coupled dictionary training and anchored neighborhood regression.

The low-resolution feature dictionary is learned by K-SVD (alternating OMP
coding and per-atom rank-1 SVD updates); the high-resolution patch dictionary
follows from the final codes by least squares.  Anchored regression
precomputes one ridge projection matrix per atom so that reconstruction is a
nearest-atom search plus a matrix multiply.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .imageops import FeatureExtractor, PatchGrid
from .sparse import _omp_core, check_unit_columns

log = logging.getLogger(__name__)


@dataclass
class CoupledGeometry:
    """Patch parameters tying the LR and HR domains together."""

    scale_factor: int = 4
    hr_patch: int = 16
    hr_overlap: int = 4
    lr_patch: int = 4
    lr_overlap: int = 1

    def __post_init__(self):
        if self.hr_patch != self.lr_patch * self.scale_factor:
            raise ValueError("hr_patch must equal lr_patch * scale_factor")
        hr_stride = self.hr_patch - self.hr_overlap
        lr_stride = self.lr_patch - self.lr_overlap
        if hr_stride != lr_stride * self.scale_factor:
            raise ValueError("hr stride must equal lr stride * scale_factor")
        if lr_stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class DictionaryPair:
    """Coupled LR-feature / HR-patch dictionaries sharing sparse codes."""

    d_lr: np.ndarray                 # (feature_dim, k), unit-norm columns
    d_hr: np.ndarray                 # (hr_patch_dim, k)
    feature_extractor: FeatureExtractor
    geometry: CoupledGeometry
    training_errors: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.d_lr = check_unit_columns(self.d_lr)
        self.d_hr = np.asarray(self.d_hr, dtype=np.float64)
        if self.d_hr.ndim != 2 or self.d_hr.shape[1] != self.d_lr.shape[1]:
            raise ValueError("coupled dictionaries must share the atom count")

    @property
    def atom_count(self) -> int:
        return self.d_lr.shape[1]


@dataclass
class AnchorSet:
    """Per-atom neighbor lists and offline ridge projection matrices."""

    neighbors: np.ndarray            # (k, k_nn) atom indices, best first
    projections: np.ndarray          # (k, hr_patch_dim, feature_dim)

    def __post_init__(self):
        self.neighbors = np.asarray(self.neighbors, dtype=np.int64)
        self.projections = np.asarray(self.projections, dtype=np.float64)
        if self.neighbors.ndim != 2 or self.projections.ndim != 3:
            raise ValueError("malformed anchor set")
        if self.neighbors.shape[0] != self.projections.shape[0]:
            raise ValueError("neighbor lists and projections must align")
        if not np.all(np.isfinite(self.projections)):
            raise ValueError("projection matrices must be finite")


# ---------------------------------------------------------------------------
# K-SVD

def _init_atoms(samples: np.ndarray, k: int) -> np.ndarray:
    """Seed atoms from a deterministic spread of nonzero training samples."""
    norms = np.linalg.norm(samples, axis=0)
    usable = np.where(norms > 1e-12)[0]
    if len(usable) < k:
        raise ValueError(f"need at least {k} training samples with nonzero features")
    picks = usable[np.linspace(0, len(usable) - 1, k).round().astype(int)]
    # linspace rounding can collide for small sample counts; make picks unique
    picks = np.unique(picks)
    extra = [i for i in usable if i not in set(picks.tolist())]
    picks = np.concatenate([picks, np.array(extra[: k - len(picks)], dtype=int)])
    atoms = samples[:, picks[:k]].astype(np.float64).copy()
    return atoms / np.linalg.norm(atoms, axis=0)


def _code_samples(samples, d, budget, codes, residual_norms, tol=1e-10):
    """OMP-code every sample, keeping a previous code when it fits better.

    The keep-better rule makes the coding stage non-increasing in the training
    objective, which standard greedy OMP alone does not guarantee.
    """
    for s in range(samples.shape[1]):
        y = samples[:, s]
        support, coef, residual = _omp_core(y, d, budget, tol)
        new_norm = np.linalg.norm(residual)
        if new_norm <= residual_norms[s]:
            codes[:, s] = 0.0
            codes[support, s] = coef
            residual_norms[s] = new_norm
    return codes, residual_norms


def _update_atoms(samples, d, codes):
    """Per-atom rank-1 SVD updates; returns indices of atoms nobody uses."""
    dead = []
    for k_atom in range(d.shape[1]):
        users = np.nonzero(np.abs(codes[k_atom]) > 1e-12)[0]
        if len(users) == 0:
            dead.append(k_atom)
            continue
        sub_codes = codes[:, users]
        err = samples[:, users] - d @ sub_codes + np.outer(d[:, k_atom], sub_codes[k_atom])
        u, s, vt = np.linalg.svd(err, full_matrices=False)
        d[:, k_atom] = u[:, 0]
        codes[k_atom, users] = s[0] * vt[0]
    return dead


def _reseed_dead_atoms(samples, d, codes, dead):
    """Replace unused atoms by the worst-represented (largest-residual) samples."""
    if not dead:
        return
    residuals = np.linalg.norm(samples - d @ codes, axis=0)
    order = np.argsort(-residuals, kind="stable")
    for k_atom, s in zip(dead, order):
        atom = samples[:, s]
        norm = np.linalg.norm(atom)
        if norm <= 1e-12:
            continue  # flat sample cannot seed an atom; leave it dead
        d[:, k_atom] = atom / norm
        codes[k_atom, :] = 0.0


def train_dictionary(
    features: np.ndarray,
    targets: np.ndarray,
    k: int,
    extractor: FeatureExtractor,
    geometry: CoupledGeometry,
    iterations: int = 20,
    omp_budget: int = 3,
) -> DictionaryPair:
    """Train the coupled pair from (sample, dim) feature/target matrices.

    K-SVD fits the LR feature dictionary; the HR dictionary is the least
    squares map from the final codes onto the HR target patches.  The recorded
    training errors (coding and update stage alternating) are non-increasing.
    """
    a_l = np.asarray(features, dtype=np.float64).T   # (dim, n) column samples
    c_h = np.asarray(targets, dtype=np.float64).T
    if a_l.shape[1] != c_h.shape[1]:
        raise ValueError("feature and target sample counts must match")
    n = a_l.shape[1]
    if n < k:
        raise ValueError(f"need at least {k} training samples, got {n}")
    d = _init_atoms(a_l, k)
    codes = np.zeros((k, n))
    residual_norms = np.linalg.norm(a_l, axis=0).astype(np.float64)
    errors: list[float] = []
    for _ in range(iterations):
        codes, residual_norms = _code_samples(a_l, d, omp_budget, codes, residual_norms)
        errors.append(float(np.sum(residual_norms**2)))
        dead = _update_atoms(a_l, d, codes)
        _reseed_dead_atoms(a_l, d, codes, dead)
        residual_norms = np.linalg.norm(a_l - d @ codes, axis=0)
        errors.append(float(np.sum(residual_norms**2)))

    # HR dictionary: least-squares fit of the final codes onto the HR targets
    aat = codes @ codes.T
    rhs = codes @ c_h.T
    try:
        d_hr = np.linalg.solve(aat, rhs).T
    except np.linalg.LinAlgError:
        log.warning("code Gram matrix singular; solving with Tikhonov damping 1e-8")
        d_hr = np.linalg.solve(aat + 1e-8 * np.eye(k), rhs).T

    return DictionaryPair(d, d_hr, extractor, geometry, training_errors=errors)


# ---------------------------------------------------------------------------
# anchored neighborhood regression

def build_anchors(pair: DictionaryPair, k_nn: int, lam: float) -> AnchorSet:
    """Precompute per-atom neighborhoods and ridge projection matrices."""
    k = pair.atom_count
    if not 1 <= k_nn <= k:
        raise ValueError("k_nn must lie in [1, atom count]")
    corr = pair.d_lr.T @ pair.d_lr
    hr_dim, feat_dim = pair.d_hr.shape[0], pair.d_lr.shape[0]
    neighbors = np.zeros((k, k_nn), dtype=np.int64)
    projections = np.zeros((k, hr_dim, feat_dim))
    eye = lam * np.eye(k_nn)
    for a in range(k):
        order = np.argsort(-corr[a], kind="stable")  # descending, ties to low index
        nb = order[:k_nn]
        neighbors[a] = nb
        n_l = pair.d_lr[:, nb]
        n_h = pair.d_hr[:, nb]
        gram = n_l.T @ n_l + eye
        try:
            projections[a] = n_h @ np.linalg.solve(gram, n_l.T)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular neighborhood system; use lam > 0") from exc
    return AnchorSet(neighbors, projections)


def nearest_atoms(features: np.ndarray, pair: DictionaryPair) -> np.ndarray:
    """Index of the best-matching atom per feature row, by absolute correlation."""
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    scores = np.abs(f @ pair.d_lr)   # |d' f|; the 1/||f|| factor is rank-neutral
    return np.argmax(scores, axis=1)


def anr_reconstruct(
    lr_features: PatchGrid, anchors: AnchorSet, pair: DictionaryPair
) -> PatchGrid:
    """Map each feature vector through its anchor's projection matrix.

    Output is a grid of HR residual patches on the same origins.
    """
    feats = lr_features.patches
    if feats.shape[1] != pair.d_lr.shape[0]:
        raise ValueError("feature dimension does not match the dictionary")
    assign = nearest_atoms(feats, pair)
    hr_dim = pair.d_hr.shape[0]
    out = np.zeros((feats.shape[0], hr_dim))
    for i, (a, f) in enumerate(zip(assign, feats)):
        out[i] = anchors.projections[a] @ f
    geo = pair.geometry
    return PatchGrid(
        geo.hr_patch,
        geo.hr_overlap,
        lr_features.origins,
        out,
        lr_features.image_shape,
    )
