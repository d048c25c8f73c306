"""Boosted patch-position weighting for coupled-dictionary super-resolution.

Patch positions are reweighted round by round: positions the current coder
reconstructs poorly gain weight, the next round's coder spends more fidelity
on them (a larger per-patch scale shrinks the effective l1 penalty), and the
per-round reconstructions combine into a convex ensemble.  A gradient-descent
refinement then pulls the ensemble output toward consistency with the
observed low-resolution image.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import imageops
from .dictionary import DictionaryPair
from .imageops import DegradationModel, PatchGrid
from .sparse import NumericalError, cd_lasso_batch

log = logging.getLogger(__name__)

LOSS_KINDS = ("linear", "square", "exponential")
ERROR_CLAMP = 1e-6


# ---------------------------------------------------------------------------
# bounded loss functions

def loss_values(residual_norms, max_residual_norm: float, kind: str) -> np.ndarray:
    """Bounded [0, 1] loss of residual magnitudes relative to the worst one.

    A zero normalizer means perfect reconstruction everywhere: all losses 0.
    """
    if kind not in LOSS_KINDS:
        raise ValueError(f"loss kind must be one of {LOSS_KINDS}")
    r = np.asarray(residual_norms, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("residual norms must be nonnegative")
    if max_residual_norm < 0:
        raise ValueError("normalizer must be nonnegative")
    if max_residual_norm == 0:
        return np.zeros_like(r)
    t = np.minimum(r / max_residual_norm, 1.0)
    if kind == "linear":
        return t
    if kind == "square":
        return t**2
    return 1.0 - np.exp(-t)


# ---------------------------------------------------------------------------
# model containers

@dataclass
class BoostRound:
    """One boosting round: the weights it coded with and its vote strength."""

    index: int
    weights: np.ndarray
    error_rate: float
    beta: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("round weights must lie on the probability simplex")
        if not 0.0 < self.error_rate < 1.0:
            raise ValueError("error rate must lie in (0, 1)")
        if not np.isfinite(self.beta):
            raise ValueError("round coefficient must be finite")


@dataclass
class BoostModel:
    """Ordered boosting rounds plus the coding parameters they were trained with."""

    rounds: list[BoostRound]
    loss_kind: str
    lam: float
    theta: float = 0.0
    gamma: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rounds:
            raise ValueError("a boost model needs at least one round")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}")

    @property
    def betas(self) -> np.ndarray:
        return np.array([r.beta for r in self.rounds])

    @property
    def patch_count(self) -> int:
        return len(self.rounds[0].weights)


# ---------------------------------------------------------------------------
# weighted coding of one image

@dataclass
class PreparedImage:
    """Cached per-image data reused across boosting rounds."""

    mid: np.ndarray          # bicubic-upscaled LR image
    features: PatchGrid      # PCA-projected gradient features, HR grid


def prepare_image(x_lr: np.ndarray, pair: DictionaryPair) -> PreparedImage:
    geo = pair.geometry
    mid = imageops.bicubic_upscale(x_lr, geo.scale_factor)
    feats = imageops.extract_features(
        mid, pair.feature_extractor, geo.hr_patch, geo.hr_overlap
    )
    return PreparedImage(mid, feats)


def residual_targets(hr: np.ndarray, prep: PreparedImage, pair: DictionaryPair):
    """Mean-removed HR-minus-baseline patches, the coding targets."""
    geo = pair.geometry
    diff = imageops.as_image(hr) - prep.mid
    grid = imageops.extract_patches(diff, geo.hr_patch, geo.hr_overlap)
    return grid.patches - grid.patches.mean(axis=1, keepdims=True)


def code_prepared(
    prep: PreparedImage,
    pair: DictionaryPair,
    weights: np.ndarray,
    lam: float,
    gamma: float = 1.0,
    gram: np.ndarray | None = None,
) -> np.ndarray:
    """Weighted l1 coding of every patch; returns predicted HR residual patches.

    The per-patch fidelity scale exp(gamma * w_i) folds into the penalty as
    lam / exp(gamma * w_i)**2.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n = len(prep.features)
    if len(weights) != n:
        raise ValueError(
            f"weight vector length {len(weights)} does not match patch count {n}"
        )
    scales = np.exp(gamma * weights)
    lam_eff = lam / scales**2
    codes, _, converged = cd_lasso_batch(
        pair.d_lr, prep.features.patches.T, lam_eff, gram=gram
    )
    if not converged.all():
        log.debug("coordinate descent hit the sweep cap on %d patches",
                  int((~converged).sum()))
    return (pair.d_hr @ codes).T


def assemble(prep: PreparedImage, pred_patches: np.ndarray, pair: DictionaryPair):
    """Aggregate predicted residual patches and restore the bicubic baseline."""
    geo = pair.geometry
    grid = PatchGrid(
        geo.hr_patch,
        geo.hr_overlap,
        prep.features.origins,
        pred_patches,
        prep.features.image_shape,
    )
    return imageops.clamp(imageops.aggregate_patches(grid) + prep.mid)


def reconstruct_with_weights(
    x_lr: np.ndarray,
    pair: DictionaryPair,
    weights: np.ndarray,
    lam: float,
    gamma: float = 1.0,
) -> np.ndarray:
    """One weighted-coding super-resolution pass (a single round's output)."""
    prep = prepare_image(x_lr, pair)
    pred = code_prepared(prep, pair, weights, lam, gamma)
    return assemble(prep, pred, pair)


# ---------------------------------------------------------------------------
# training

def boosted_code_round(
    lr_images,
    hr_images,
    pair: DictionaryPair,
    weights: np.ndarray,
    lam: float,
    gamma: float = 1.0,
    theta: float = 0.0,
):
    """Code every training image with the given patch weights.

    Returns (reconstructions, residual norms (images, patches), coupling
    diagnostics).  The theta-weighted whole-image coupling term is evaluated
    and reported, never optimized: overlap averaging couples all patches and
    the reconstruction constraint is enforced downstream instead.
    """
    if len(lr_images) != len(hr_images) or not lr_images:
        raise ValueError("need matching, non-empty LR/HR training sets")
    gram = pair.d_lr.T @ pair.d_lr
    recons = []
    residuals = []
    coupling = []
    n_expected = None
    for x_lr, hr in zip(lr_images, hr_images):
        prep = prepare_image(x_lr, pair)
        n = len(prep.features)
        if n_expected is None:
            n_expected = n
            if len(weights) != n:
                raise ValueError("weight vector does not match the patch grid")
        elif n != n_expected:
            raise ValueError("training images must share one patch geometry")
        targets = residual_targets(hr, prep, pair)
        pred = code_prepared(prep, pair, weights, lam, gamma, gram=gram)
        recon = assemble(prep, pred, pair)
        recons.append(recon)
        residuals.append(np.linalg.norm(pred - targets, axis=1))
        coupling.append(theta * float(np.sum((recon - hr) ** 2)))
    return recons, np.array(residuals), coupling


def round_error(residual_norms: np.ndarray, weights: np.ndarray, loss_kind: str):
    """Weighted mean loss, averaged over images, clamped inside (0, 1)."""
    r = np.atleast_2d(np.asarray(residual_norms, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    per_image = [
        float(loss_values(row, row.max(), loss_kind) @ weights) for row in r
    ]
    return float(np.clip(np.mean(per_image), ERROR_CLAMP, 1.0 - ERROR_CLAMP))


def update_weights(
    weights: np.ndarray, error_rate: float, mean_losses: np.ndarray
) -> np.ndarray:
    """Reweight patch positions: hard (high-loss) patches gain relative mass.

    The factor (e/(1-e))^(1-L) is largest for L near 1 whenever e < 1/2, so
    poorly reconstructed positions dominate the next round.
    """
    if not 0.0 < error_rate < 1.0:
        raise ValueError("error rate must lie strictly inside (0, 1)")
    weights = np.asarray(weights, dtype=np.float64)
    mean_losses = np.asarray(mean_losses, dtype=np.float64)
    factor = (error_rate / (1.0 - error_rate)) ** (1.0 - mean_losses)
    unnorm = weights * factor
    return unnorm / unnorm.sum()


def train_boost(
    hr_images,
    degradation: DegradationModel,
    pair: DictionaryPair,
    rounds: int = 5,
    loss_kind: str = "linear",
    lam: float = 1e-4,
    theta: float = 0.0,
    gamma: float = 1.0,
) -> BoostModel:
    """Run the boosting rounds over a held-out training set.

    Each round codes with the current position weights, scores the per-image
    losses, keeps the round if its error rate stays below 1/2, and reweights.
    Training fails if even the first round is no better than chance.
    """
    if not hr_images:
        raise ValueError("need at least one training image")
    if rounds < 1:
        raise ValueError("need at least one round")
    lr_images = [imageops.degrade(hr, degradation) for hr in hr_images]

    prep0 = prepare_image(lr_images[0], pair)
    n = len(prep0.features)
    weights = np.full(n, 1.0 / n)

    kept: list[BoostRound] = []
    couplings = []
    for m in range(1, rounds + 1):
        _, residuals, coupling = boosted_code_round(
            lr_images, hr_images, pair, weights, lam, gamma, theta
        )
        e_m = round_error(residuals, weights, loss_kind)
        if e_m >= 0.5:
            log.warning("round %d error rate %.4f >= 1/2; stopping early", m, e_m)
            break
        beta = 0.5 * np.log((1.0 - e_m) / e_m)
        kept.append(BoostRound(m, weights.copy(), e_m, beta))
        couplings.append(coupling)
        mean_losses = np.mean(
            [loss_values(row, row.max(), loss_kind) for row in residuals], axis=0
        )
        weights = update_weights(weights, e_m, mean_losses)
    if not kept:
        raise NumericalError(
            "boost training produced no usable round (first error rate >= 1/2)"
        )
    return BoostModel(
        kept,
        loss_kind,
        lam,
        theta=theta,
        gamma=gamma,
        diagnostics={"coupling": couplings},
    )


# ---------------------------------------------------------------------------
# inference

def apply_boost(
    x_lr: np.ndarray, model: BoostModel, pair: DictionaryPair
) -> np.ndarray:
    """Convex combination of the per-round weighted reconstructions."""
    prep = prepare_image(x_lr, pair)
    if len(prep.features) != model.patch_count:
        raise ValueError("input geometry does not match the trained model")
    gram = pair.d_lr.T @ pair.d_lr
    outputs = [
        assemble(
            prep,
            code_prepared(prep, pair, r.weights, model.lam, model.gamma, gram=gram),
            pair,
        )
        for r in model.rounds
    ]
    mix = model.betas / model.betas.sum()
    combined = mix[0] * outputs[0]
    for c, img in zip(mix[1:], outputs[1:]):
        combined = combined + c * img
    return combined


# ---------------------------------------------------------------------------
# reconstruction-constraint refinement

def bp_objective(
    y: np.ndarray,
    x_lr: np.ndarray,
    f_x: np.ndarray,
    degradation: DegradationModel,
    c: float,
) -> float:
    """||S H y - x||^2 + c ||y - f_x||^2."""
    data = imageops.blur(y, degradation.taps)[:: degradation.scale_factor,
                                              :: degradation.scale_factor] - x_lr
    prior = y - f_x
    return float(np.sum(data**2) + c * np.sum(prior**2))


def bp_gradient(
    y: np.ndarray,
    x_lr: np.ndarray,
    f_x: np.ndarray,
    degradation: DegradationModel,
    c: float,
) -> np.ndarray:
    """Exact gradient of bp_objective (adjoint blur after zero-upsampling)."""
    r = degradation.scale_factor
    data = imageops.blur(y, degradation.taps)[::r, ::r] - x_lr
    back = imageops.blur_adjoint(imageops.zero_upsample(data, r), degradation.taps)
    return 2.0 * back + 2.0 * c * (y - f_x)


def back_project(
    f_x: np.ndarray,
    x_lr: np.ndarray,
    degradation: DegradationModel,
    c: float = 1.0,
    tau: float = 0.5,
    iterations: int = 30,
    return_trace: bool = False,
):
    """Gradient descent toward the reconstruction constraint, started at f_x.

    Trial steps that would increase the objective are rejected; three
    consecutive rejections halve the step size.  If the step underflows the
    best iterate seen is returned and flagged in the trace.
    """
    f_x = imageops.as_image(f_x)
    x_lr = imageops.as_image(x_lr)
    r = degradation.scale_factor
    if (f_x.shape[0], f_x.shape[1]) != (x_lr.shape[0] * r, x_lr.shape[1] * r):
        raise ValueError("prior image dimensions must be LR dimensions * scale")
    y = f_x.copy()
    f_cur = bp_objective(y, x_lr, f_x, degradation, c)
    trace = {"objectives": [f_cur], "step_underflow": False}
    rejects = 0
    for _ in range(iterations):
        grad = bp_gradient(y, x_lr, f_x, degradation, c)
        cand = y - tau * grad
        f_cand = bp_objective(cand, x_lr, f_x, degradation, c)
        if f_cand <= f_cur:
            rel = (f_cur - f_cand) / max(f_cur, 1e-300)
            y, f_cur = cand, f_cand
            trace["objectives"].append(f_cur)
            rejects = 0
            if rel < 1e-5:
                break
        else:
            rejects += 1
            if rejects >= 3:
                tau *= 0.5
                rejects = 0
                if tau < 1e-14:
                    trace["step_underflow"] = True
                    log.warning("back-projection step size underflow; "
                                "returning best iterate")
                    break
    out = imageops.clamp(y)
    if return_trace:
        return out, trace
    return out
