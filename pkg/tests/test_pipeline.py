import math
import time

import numpy as np
import pytest

from boostsr import boost, corpus, imageops, pipeline
from boostsr.cli import main as cli_main


# ---------------------------------------------------------------------------
# configuration

def test_defaults_match_reference_setup():
    cfg = pipeline.Config()
    assert cfg.scale_factor == 4
    assert cfg.hr_patch_size == 16 and cfg.hr_overlap == 4
    assert cfg.lr_patch_size == 4 and cfg.lr_overlap == 1
    assert cfg.k_nn == 40
    assert cfg.lam == 0.0001
    assert cfg.rounds == 5 and cfg.loss == "linear"
    cfg.validate()


def test_config_roundtrip(tmp_path):
    cfg = pipeline.Config(dict_size=128, lam=0.01, loss="square", rounds=2)
    path = tmp_path / "config.txt"
    pipeline.save_config(path, cfg)
    back = pipeline.load_config(path)
    assert back == cfg


def test_config_unknown_key_rejected(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("scale_factor = 4\nwibble = 3\n")
    with pytest.raises(ValueError, match="unknown config key"):
        pipeline.load_config(path)


def test_config_geometry_invariant_enforced(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("hr_patch_size = 12\n")
    with pytest.raises(ValueError):
        pipeline.load_config(path)


# ---------------------------------------------------------------------------
# ingestion

def test_ingest_corpus_folder(tmp_path, small_config):
    corpus.write_corpus(tmp_path, count=6, seed=3)
    names, images = pipeline.ingest_dataset(tmp_path, "test", small_config)
    assert len(images) == 6
    assert all(img.shape == (64, 64) for img in images)
    assert names == sorted(names)


def test_ingest_crops_odd_sizes(tmp_path, small_config):
    img = np.random.default_rng(0).random((65, 65))
    imageops.save_image(tmp_path / "odd.png", img)
    _, images = pipeline.ingest_dataset(tmp_path, "test", small_config)
    assert images[0].shape == (64, 64)


def test_ingest_deterministic_ordering(tmp_path, small_config):
    corpus.write_corpus(tmp_path, count=5, seed=4)
    a = pipeline.ingest_dataset(tmp_path, "test", small_config)
    b = pipeline.ingest_dataset(tmp_path, "test", small_config)
    assert a[0] == b[0]
    assert all(np.array_equal(x, y) for x, y in zip(a[1], b[1]))


def test_ingest_skips_unreadable_and_fails_empty(tmp_path, small_config):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ValueError, match="not a directory|no readable"):
        pipeline.ingest_dataset(empty, "test", small_config)
    corpus.write_corpus(tmp_path / "mixed", count=2, seed=5)
    (tmp_path / "mixed" / "junk.png").write_bytes(b"this is not an image")
    names, images = pipeline.ingest_dataset(tmp_path / "mixed", "test", small_config)
    assert len(images) == 2 and "junk" not in names


def test_ingest_boost_role_caps_count(tmp_path, small_config):
    corpus.write_corpus(tmp_path, count=8, seed=6)
    _, images = pipeline.ingest_dataset(tmp_path, "train-boost", small_config)
    assert len(images) == small_config.boost_train_count


# ---------------------------------------------------------------------------
# methods

def test_sr_bicubic_delegates(small_config):
    rng = np.random.default_rng(1)
    lr = rng.random((16, 16))
    out = pipeline.sr_bicubic(lr, small_config)
    assert out.shape == (64, 64)
    expect = imageops.clamp(imageops.bicubic_upscale(lr, 4))
    assert np.array_equal(out, expect)
    const = pipeline.sr_bicubic(np.full((16, 16), 0.6), small_config)
    assert np.allclose(const, 0.6, atol=1e-12)


def test_sr_sparse_constant_input_is_bicubic(small_config, small_model):
    pair, _ = small_model
    lr = np.full((16, 16), 0.4)
    out = pipeline.sr_sparse(lr, pair, small_config.lam)
    assert np.abs(out - pipeline.sr_bicubic(lr, small_config)).max() < 1e-12


def test_sr_sparse_equals_single_uniform_boost_round(small_config, small_model):
    pair, _ = small_model
    cfg = small_config
    hr = corpus.generate_corpus(1, seed=401)[0]
    lr = imageops.degrade(hr, cfg.degradation())
    model = boost.train_boost([hr], cfg.degradation(), pair, rounds=1, lam=cfg.lam)
    assert np.array_equal(
        boost.apply_boost(lr, model, pair), pipeline.sr_sparse(lr, pair, cfg.lam)
    )


def test_sr_anr_faster_than_sparse(small_config, small_model):
    pair, anchors = small_model
    cfg = small_config
    faces = corpus.generate_corpus(3, seed=402)
    lrs = [imageops.degrade(h, cfg.degradation()) for h in faces]
    for lr in lrs:  # warm both paths once (JIT, caches)
        pipeline.sr_anr(lr, pair, anchors)
        pipeline.sr_sparse(lr, pair, cfg.lam)
    t0 = time.perf_counter()
    for lr in lrs:
        pipeline.sr_anr(lr, pair, anchors)
    t_anr = time.perf_counter() - t0
    t0 = time.perf_counter()
    for lr in lrs:
        pipeline.sr_sparse(lr, pair, cfg.lam)
    t_sparse = time.perf_counter() - t0
    assert t_anr < t_sparse


def test_sr_boost_degenerate_matches_sparse(small_config, small_model):
    # one round and an overwhelming prior weight: back-projection stays put
    pair, _ = small_model
    cfg = small_config
    hr = corpus.generate_corpus(1, seed=403)[0]
    degr = cfg.degradation()
    lr = imageops.degrade(hr, degr)
    model = boost.train_boost([hr], degr, pair, rounds=1, lam=cfg.lam)
    out = pipeline.sr_boost(lr, model, pair, degr, bp_weight=1e9)
    assert np.abs(out - pipeline.sr_sparse(lr, pair, cfg.lam)).max() < 1e-4


def test_sr_boost_improves_data_fidelity(small_config, small_model, small_boost):
    pair, _ = small_model
    cfg = small_config
    degr = cfg.degradation()
    hr = corpus.generate_corpus(1, seed=404)[0]
    lr = imageops.degrade(hr, degr)
    ensemble = boost.apply_boost(lr, small_boost, pair)
    refined = pipeline.sr_boost(lr, small_boost, pair, degr)

    def data_dist(img):
        return float(np.sum((imageops.degrade(img, degr) - lr) ** 2))

    assert data_dist(refined) <= data_dist(ensemble) + 1e-12


def test_method_outputs_scale_dims(small_config, small_model, small_boost):
    pair, anchors = small_model
    cfg = small_config
    lr = imageops.degrade(corpus.generate_corpus(1, seed=405)[0], cfg.degradation())
    methods = pipeline.build_methods(cfg, pair, anchors, small_boost)
    for name, fn in methods.items():
        out = fn(lr)
        assert out.shape == (64, 64), name
        assert out.min() >= 0.0 and out.max() <= 1.0, name


# ---------------------------------------------------------------------------
# evaluation harness

def test_evaluate_identity_oracle(tmp_path, small_config):
    faces = corpus.generate_corpus(3, seed=406)
    names = [f"face{i}" for i in range(3)]
    # oracle "method" that returns the ground truth via closure state
    truth = dict(zip(names, faces))
    state = {"i": 0}

    def identity(_lr):
        name = names[state["i"]]
        state["i"] += 1
        return truth[name]

    report = pipeline.evaluate(names, faces, {"oracle": identity}, small_config,
                               out_dir=tmp_path)
    assert all(math.isinf(r["oracle"]) for r in report.rows)
    assert (tmp_path / "results.csv").read_text().count("inf") == 4  # 3 rows + mean


def test_evaluate_mean_recomputable(small_config, small_model):
    pair, anchors = small_model
    faces = corpus.generate_corpus(4, seed=407)
    names = [f"f{i}" for i in range(4)]
    methods = pipeline.build_methods(small_config, pair, anchors)
    report = pipeline.evaluate(names, faces, methods, small_config)
    for m in report.methods:
        vals = [r[m] for r in report.rows]
        assert report.means[m] == pytest.approx(np.mean(vals))


def test_evaluate_method_failure_recorded(small_config):
    faces = corpus.generate_corpus(2, seed=408)

    def broken(_lr):
        raise RuntimeError("boom")

    report = pipeline.evaluate(["a", "b"], faces, {"broken": broken}, small_config)
    assert all(r["broken"] is None for r in report.rows)
    assert len(report.errors) == 2
    assert report.means["broken"] is None


def test_evaluate_deterministic_csv(tmp_path, small_config, small_model):
    pair, anchors = small_model
    faces = corpus.generate_corpus(3, seed=409)
    names = [f"f{i}" for i in range(3)]
    outs = []
    for run in ("a", "b"):
        methods = pipeline.build_methods(small_config, pair, anchors)
        pipeline.evaluate(names, faces, methods, small_config,
                          out_dir=tmp_path / run)
        outs.append((tmp_path / run / "results.csv").read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# model persistence through the pipeline

def test_model_save_load_roundtrip(tmp_path, small_config, small_model):
    pair, anchors = small_model
    pipeline.save_model(tmp_path, small_config, pair, anchors)
    cfg, pair2, anchors2, model2 = pipeline.load_model(tmp_path)
    assert cfg == small_config
    assert np.array_equal(pair2.d_lr, pair.d_lr)
    assert np.array_equal(pair2.d_hr, pair.d_hr)
    assert np.array_equal(pair2.feature_extractor.pca_basis,
                          pair.feature_extractor.pca_basis)
    assert np.array_equal(anchors2.neighbors, anchors.neighbors)
    assert model2 is None

    # reconstructions from the reloaded model are bit-identical
    lr = imageops.degrade(corpus.generate_corpus(1, seed=410)[0],
                          small_config.degradation())
    a = pipeline.sr_sparse(lr, pair, small_config.lam)
    b = pipeline.sr_sparse(lr, pair2, small_config.lam)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# CLI

@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = pipeline.Config(dict_size=64, ksvd_iterations=6, rounds=2,
                          boost_train_count=3)
    pipeline.save_config(root / "config.txt", cfg)
    assert cli_main(["gen-corpus", "--count", "10", "--seed", "11",
                     "--out", str(root / "train")]) == 0
    assert cli_main(["gen-corpus", "--count", "3", "--seed", "12",
                     "--out", str(root / "held")]) == 0
    assert cli_main(["gen-corpus", "--count", "2", "--seed", "13",
                     "--out", str(root / "test")]) == 0
    return root


def test_cli_full_workflow(cli_workspace):
    root = cli_workspace
    model_dir = root / "model"
    assert cli_main(["train-dict", "--train", str(root / "train"),
                     "--config", str(root / "config.txt"),
                     "--out", str(model_dir)]) == 0
    assert (model_dir / "dict_lr.bsr").exists()
    assert (model_dir / "anchors.bsr").exists()

    assert cli_main(["train-boost", "--train", str(root / "held"),
                     "--dict", str(model_dir), "--out", str(model_dir)]) == 0
    assert (model_dir / "boost.bsr").exists()

    # build low-resolution inputs for the sr command
    cfg = pipeline.load_config(root / "config.txt")
    lr_dir = root / "lr"
    lr_dir.mkdir()
    for png in sorted((root / "test").glob("*.png")):
        lr = imageops.degrade(imageops.load_image(png), cfg.degradation())
        imageops.save_image(lr_dir / png.name, lr)
    assert cli_main(["sr", "--input", str(lr_dir),
                     "--model", str(model_dir), "--method", "boost",
                     "--out", str(root / "sr_out")]) == 0
    outs = list((root / "sr_out").glob("*_boost.png"))
    assert len(outs) == 2
    assert imageops.load_image(outs[0]).shape == (64, 64)

    assert cli_main(["eval", "--test", str(root / "test"),
                     "--model", str(model_dir),
                     "--methods", "bicubic,sparse,anr,boost",
                     "--out", str(root / "eval_out")]) == 0
    csv = (root / "eval_out" / "results.csv").read_text()
    assert csv.splitlines()[0] == "image,bicubic,sparse,anr,boost"
    assert len(csv.splitlines()) == 4  # header + 2 images + mean


def test_cli_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        cli_main(["sr", "--method", "warp"])
    assert exc.value.code == 1


def test_cli_data_error_exits_2(tmp_path):
    assert cli_main(["train-dict", "--train", str(tmp_path / "missing"),
                     "--out", str(tmp_path / "m")]) == 2


def test_cli_unknown_config_key_exits_2(cli_workspace, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("nonsense = 1\n")
    assert cli_main(["train-dict", "--train", str(cli_workspace / "train"),
                     "--config", str(bad), "--out", str(tmp_path / "m")]) == 2
