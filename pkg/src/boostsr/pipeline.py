"""End-to-end orchestration: configuration, dataset ingestion, the four
super-resolution methods, and the PSNR benchmark harness."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import boost, imageops, storage
from .dictionary import (
    AnchorSet,
    CoupledGeometry,
    DictionaryPair,
    anr_reconstruct,
    build_anchors,
    train_dictionary,
)
from .imageops import DegradationModel

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# configuration

@dataclass
class Config:
    """Run parameters; the defaults follow the reference experimental setup."""

    scale_factor: int = 4
    hr_patch_size: int = 16
    hr_overlap: int = 4
    lr_patch_size: int = 4
    lr_overlap: int = 1
    dict_size: int = 512
    k_nn: int = 40
    lam: float = 0.0001
    theta: float = 0.0
    rounds: int = 5
    loss: str = "linear"
    bp_weight: float = 1.0
    bp_step: float = 0.5
    bp_iterations: int = 30
    blur_size: int = 7
    blur_sigma: float = 1.2
    noise_sigma: float = 0.0
    seed: int = 0
    image_size: int = 64
    pca_energy: float = 0.999
    omp_budget: int = 3
    ksvd_iterations: int = 20
    boost_train_count: int = 10
    train_patch_cap: int = 0
    boost_gamma: float = 1.0

    def validate(self) -> "Config":
        # geometry consistency ties the LR and HR patch lattices together
        self.geometry()
        if self.loss not in boost.LOSS_KINDS:
            raise ValueError(f"loss must be one of {boost.LOSS_KINDS}")
        if self.image_size % self.scale_factor:
            raise ValueError("image_size must be a multiple of scale_factor")
        if self.blur_size % 2 == 0 or self.blur_size < 1:
            raise ValueError("blur_size must be odd")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.dict_size < 1 or self.k_nn < 1 or self.k_nn > self.dict_size:
            raise ValueError("need 1 <= k_nn <= dict_size")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        return self

    def geometry(self) -> CoupledGeometry:
        return CoupledGeometry(
            scale_factor=self.scale_factor,
            hr_patch=self.hr_patch_size,
            hr_overlap=self.hr_overlap,
            lr_patch=self.lr_patch_size,
            lr_overlap=self.lr_overlap,
        )

    def degradation(self) -> DegradationModel:
        return DegradationModel(
            imageops.gaussian_taps(self.blur_size, self.blur_sigma),
            self.scale_factor,
            noise_sigma=self.noise_sigma,
            seed=self.seed,
        )


def save_config(path, config: Config) -> None:
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in fields(Config)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_config(path) -> Config:
    """Parse the flat key = value format; unknown keys are rejected."""
    known = {f.name: f.type for f in fields(Config)}
    casts = {"int": int, "float": float, "str": str}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown config key '{key}'")
        values[key] = casts[known[key]](value)
    return Config(**values).validate()


# ---------------------------------------------------------------------------
# dataset ingestion

def _normalize_size(img: np.ndarray, config: Config) -> np.ndarray:
    target = config.image_size
    h, w = img.shape
    if (h, w) != (target, target):
        if h >= target and w >= target:
            top, left = (h - target) // 2, (w - target) // 2
            img = img[top : top + target, left : left + target]
        else:
            side = min(h, w)
            top, left = (h - side) // 2, (w - side) // 2
            pil = PILImage.fromarray(imageops.to_uint8(img[top : top + side,
                                                           left : left + side]))
            img = np.asarray(
                pil.resize((target, target), PILImage.BICUBIC), dtype=np.float64
            ) / 255.0
    # force divisibility by the scale factor
    r = config.scale_factor
    h, w = img.shape
    return img[: h - h % r, : w - w % r]


def ingest_dataset(folder, role: str, config: Config):
    """Load a folder of images in deterministic (lexicographic) order.

    Returns (names, images).  Unreadable files are skipped with a warning;
    an empty or fully unreadable folder is an error.  The train-boost role
    keeps only the first `boost_train_count` images.
    """
    if role not in ("train-dict", "train-boost", "test"):
        raise ValueError("role must be train-dict, train-boost, or test")
    folder = Path(folder)
    if not folder.is_dir():
        raise ValueError(f"{folder} is not a directory")
    names, images = [], []
    for path in sorted(p for p in folder.iterdir() if p.is_file()):
        try:
            img = imageops.load_image(path)
        except Exception as exc:  # unreadable file: warn and move on
            log.warning("skipping unreadable file %s (%s)", path.name, exc)
            continue
        names.append(path.stem)
        images.append(_normalize_size(img, config))
    if not images:
        raise ValueError(f"no readable images in {folder}")
    if role == "train-boost" and config.boost_train_count > 0:
        names = names[: config.boost_train_count]
        images = images[: config.boost_train_count]
    return names, images


# ---------------------------------------------------------------------------
# training stages

def collect_training_pairs(hr_images, config: Config):
    """Coupled (raw feature, mean-removed HR residual) patches over the corpus."""
    geo = config.geometry()
    model = config.degradation()
    feats, targets = [], []
    for hr in hr_images:
        lr = imageops.degrade(hr, model)
        mid = imageops.bicubic_upscale(lr, geo.scale_factor)
        fgrid = imageops.raw_feature_patches(mid, geo.hr_patch, geo.hr_overlap)
        tgrid = imageops.extract_patches(hr - mid, geo.hr_patch, geo.hr_overlap)
        feats.append(fgrid.patches)
        targets.append(tgrid.patches - tgrid.patches.mean(axis=1, keepdims=True))
    feats = np.vstack(feats)
    targets = np.vstack(targets)
    cap = config.train_patch_cap
    if cap and feats.shape[0] > cap:
        keep = np.linspace(0, feats.shape[0] - 1, cap).round().astype(int)
        feats, targets = feats[keep], targets[keep]
    return feats, targets


def train_dict_stage(hr_images, config: Config):
    """Train the coupled dictionaries and the anchor projections."""
    raw_feats, targets = collect_training_pairs(hr_images, config)
    extractor = imageops.fit_pca(raw_feats, config.pca_energy)
    feats = raw_feats @ extractor.pca_basis
    log.info("PCA kept %d of %d feature dimensions",
             feats.shape[1], raw_feats.shape[1])
    pair = train_dictionary(
        feats,
        targets,
        config.dict_size,
        extractor,
        config.geometry(),
        iterations=config.ksvd_iterations,
        omp_budget=config.omp_budget,
    )
    anchors = build_anchors(pair, config.k_nn, config.lam)
    return pair, anchors


def train_boost_stage(hr_images, pair: DictionaryPair, config: Config):
    return boost.train_boost(
        hr_images,
        config.degradation(),
        pair,
        rounds=config.rounds,
        loss_kind=config.loss,
        lam=config.lam,
        theta=config.theta,
        gamma=config.boost_gamma,
    )


def save_model(directory, config: Config, pair: DictionaryPair,
               anchors: AnchorSet | None = None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = storage.model_paths(d)
    storage.save_matrix(paths["d_lr"], storage.TAG_D_LR, pair.d_lr)
    storage.save_matrix(paths["d_hr"], storage.TAG_D_HR, pair.d_hr)
    storage.save_matrix(paths["pca"], storage.TAG_PCA, pair.feature_extractor.pca_basis)
    if anchors is not None:
        storage.save_anchors(paths["anchors"], anchors)
    save_config(paths["config"], config)


def load_model(directory):
    """Load (config, pair, anchors or None, boost model or None)."""
    paths = storage.model_paths(directory)
    if not paths["config"].exists():
        raise ValueError(f"no config.txt in model directory {directory}")
    config = load_config(paths["config"])
    basis = storage.load_matrix(paths["pca"], storage.TAG_PCA)
    extractor = imageops.FeatureExtractor(pca_basis=basis, energy=config.pca_energy)
    pair = DictionaryPair(
        storage.load_matrix(paths["d_lr"], storage.TAG_D_LR),
        storage.load_matrix(paths["d_hr"], storage.TAG_D_HR),
        extractor,
        config.geometry(),
    )
    anchors = (
        storage.load_anchors(paths["anchors"]) if paths["anchors"].exists() else None
    )
    model = None
    if paths["boost"].exists():
        model, _ = storage.load_boost(paths["boost"])
    return config, pair, anchors, model


# ---------------------------------------------------------------------------
# the four methods

def sr_bicubic(x_lr: np.ndarray, config: Config) -> np.ndarray:
    return imageops.clamp(imageops.bicubic_upscale(x_lr, config.scale_factor))


def sr_sparse(x_lr: np.ndarray, pair: DictionaryPair, lam: float,
              gamma: float = 1.0) -> np.ndarray:
    """Single uniform-weight coding pass: the plain sparse-coding baseline."""
    prep = boost.prepare_image(x_lr, pair)
    n = len(prep.features)
    weights = np.full(n, 1.0 / n)
    pred = boost.code_prepared(prep, pair, weights, lam, gamma)
    return boost.assemble(prep, pred, pair)


def sr_anr(x_lr: np.ndarray, pair: DictionaryPair, anchors: AnchorSet) -> np.ndarray:
    prep = boost.prepare_image(x_lr, pair)
    hr_grid = anr_reconstruct(prep.features, anchors, pair)
    return imageops.clamp(imageops.aggregate_patches(hr_grid) + prep.mid)


def sr_boost(
    x_lr: np.ndarray,
    model: boost.BoostModel,
    pair: DictionaryPair,
    degradation: DegradationModel,
    bp_weight: float = 1.0,
    bp_step: float = 0.5,
    bp_iterations: int = 30,
) -> np.ndarray:
    """The full method: boosted ensemble plus reconstruction-constraint descent."""
    f_x = boost.apply_boost(x_lr, model, pair)
    return boost.back_project(
        f_x, x_lr, degradation, c=bp_weight, tau=bp_step, iterations=bp_iterations
    )


# ---------------------------------------------------------------------------
# evaluation harness

@dataclass
class EvalReport:
    methods: list[str]
    image_names: list[str]
    rows: list[dict]                      # per image: method -> PSNR or None
    means: dict[str, float]
    runtimes: dict[str, float]            # total seconds per method
    config_snapshot: str = ""
    errors: list[str] = field(default_factory=list)


def _fmt(value) -> str:
    if value is None:
        return "error"
    if np.isinf(value):
        return "inf"
    return f"{value:.6f}"


def report_csv(report: EvalReport) -> str:
    lines = ["image," + ",".join(report.methods)]
    for name, row in zip(report.image_names, report.rows):
        lines.append(name + "," + ",".join(_fmt(row[m]) for m in report.methods))
    lines.append("mean," + ",".join(_fmt(report.means[m]) for m in report.methods))
    return "\n".join(lines) + "\n"


def report_table(report: EvalReport) -> str:
    width = max(12, max((len(n) for n in report.image_names), default=12) + 2)
    cols = [f"{'image':<{width}}"] + [f"{m:>12}" for m in report.methods]
    lines = ["".join(cols)]
    for name, row in zip(report.image_names, report.rows):
        cells = [f"{name:<{width}}"] + [f"{_fmt(row[m]):>12}" for m in report.methods]
        lines.append("".join(cells))
    lines.append("".join(
        [f"{'mean':<{width}}"] + [f"{_fmt(report.means[m]):>12}" for m in report.methods]
    ))
    return "\n".join(lines) + "\n"


def evaluate(names, hr_images, methods: dict, config: Config, out_dir=None) -> EvalReport:
    """Degrade each ground-truth image, run every method, score PSNR.

    `methods` maps a method name to a callable taking the LR image.  Failures
    are recorded as row-level errors and the run continues.  Reconstructions
    and the CSV/table reports are written when out_dir is given.
    """
    degradation = config.degradation()
    method_names = list(methods)
    rows, errors = [], []
    runtimes = {m: 0.0 for m in method_names}
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for name, hr in zip(names, hr_images):
        lr = imageops.degrade(hr, degradation)
        row = {}
        for m in method_names:
            start = time.perf_counter()
            try:
                recon = methods[m](lr)
                row[m] = imageops.psnr(hr, recon)
                if out is not None:
                    imageops.save_image(out / f"{name}_{m}.png", recon)
            except Exception as exc:
                row[m] = None
                errors.append(f"{name}/{m}: {exc}")
                log.warning("method %s failed on %s: %s", m, name, exc)
            runtimes[m] += time.perf_counter() - start
        rows.append(row)
    means = {}
    for m in method_names:
        vals = [r[m] for r in rows if r[m] is not None]
        means[m] = float(np.mean(vals)) if vals else None
    snapshot = "\n".join(f"{f.name} = {getattr(config, f.name)}" for f in fields(Config))
    report = EvalReport(method_names, list(names), rows, means, runtimes, snapshot, errors)
    if out is not None:
        (out / "results.csv").write_text(report_csv(report))
        (out / "results.txt").write_text(report_table(report))
    return report


def build_methods(config: Config, pair=None, anchors=None, model=None,
                  selected=None) -> dict:
    """Assemble the method callables the evaluation harness runs."""
    available = {}
    available["bicubic"] = lambda lr: sr_bicubic(lr, config)
    if pair is not None:
        available["sparse"] = lambda lr: sr_sparse(lr, pair, config.lam,
                                                   config.boost_gamma)
        if anchors is not None:
            available["anr"] = lambda lr: sr_anr(lr, pair, anchors)
        if model is not None:
            available["boost"] = lambda lr: sr_boost(
                lr, model, pair, config.degradation(),
                bp_weight=config.bp_weight, bp_step=config.bp_step,
                bp_iterations=config.bp_iterations,
            )
    if selected is None:
        return available
    missing = [m for m in selected if m not in available]
    if missing:
        raise ValueError(f"methods unavailable with the loaded model: {missing}")
    return {m: available[m] for m in selected}
