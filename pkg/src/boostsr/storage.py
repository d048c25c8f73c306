"""Flat binary model persistence.

Every file is: magic "BSR1", a 4-byte object tag, the dimension count and
dimensions as 64-bit little-endian unsigned integers, then one row-major
64-bit little-endian float block.  Integer payloads (neighbor lists) are
stored as exact float64 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .boost import LOSS_KINDS, BoostModel, BoostRound
from .dictionary import AnchorSet

MAGIC = b"BSR1"

TAG_D_LR = b"DLOW"
TAG_D_HR = b"DHIG"
TAG_PCA = b"PCAB"
TAG_ANCHORS = b"ANCH"
TAG_BOOST = b"BOOS"

DICT_LR_FILE = "dict_lr.bsr"
DICT_HR_FILE = "dict_hr.bsr"
PCA_FILE = "pca.bsr"
ANCHORS_FILE = "anchors.bsr"
BOOST_FILE = "boost.bsr"
CONFIG_FILE = "config.txt"


def write_block(path, tag: bytes, dims, payload: np.ndarray) -> None:
    payload = np.ascontiguousarray(payload, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(tag)
        fh.write(struct.pack("<Q", len(dims)))
        for d in dims:
            fh.write(struct.pack("<Q", int(d)))
        fh.write(payload.tobytes())


def read_block(path, expect_tag: bytes):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a BSR1 model file")
        tag = fh.read(4)
        if tag != expect_tag:
            raise ValueError(
                f"{path}: expected object tag {expect_tag!r}, found {tag!r}"
            )
        (ndims,) = struct.unpack("<Q", fh.read(8))
        dims = struct.unpack(f"<{ndims}Q", fh.read(8 * ndims))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    return dims, payload


def save_matrix(path, tag: bytes, matrix: np.ndarray) -> None:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2D matrix")
    write_block(path, tag, m.shape, m)


def load_matrix(path, tag: bytes) -> np.ndarray:
    dims, payload = read_block(path, tag)
    if len(dims) != 2 or payload.size != dims[0] * dims[1]:
        raise ValueError(f"{path}: corrupt matrix block")
    return payload.reshape(dims).copy()


def save_anchors(path, anchors: AnchorSet) -> None:
    k, k_nn = anchors.neighbors.shape
    _, hr_dim, feat_dim = anchors.projections.shape
    payload = np.concatenate(
        [anchors.neighbors.ravel().astype(np.float64), anchors.projections.ravel()]
    )
    write_block(path, TAG_ANCHORS, (k, k_nn, hr_dim, feat_dim), payload)


def load_anchors(path) -> AnchorSet:
    dims, payload = read_block(path, TAG_ANCHORS)
    if len(dims) != 4:
        raise ValueError(f"{path}: corrupt anchor block")
    k, k_nn, hr_dim, feat_dim = dims
    split = k * k_nn
    if payload.size != split + k * hr_dim * feat_dim:
        raise ValueError(f"{path}: anchor payload size mismatch")
    neighbors = payload[:split].reshape(k, k_nn).astype(np.int64)
    projections = payload[split:].reshape(k, hr_dim, feat_dim).copy()
    return AnchorSet(neighbors, projections)


def save_boost(path, model: BoostModel, bp_weight: float) -> None:
    """Round count, loss tag, config scalars, then one (beta, weights) per round."""
    m = len(model.rounds)
    n = model.patch_count
    loss_code = LOSS_KINDS.index(model.loss_kind)
    scalars = [model.lam, model.theta, model.gamma, bp_weight]
    parts = [np.asarray(scalars, dtype=np.float64)]
    for rnd in model.rounds:
        parts.append(np.asarray([rnd.error_rate, rnd.beta]))
        parts.append(rnd.weights)
    write_block(path, TAG_BOOST, (m, n, loss_code), np.concatenate(parts))


def load_boost(path) -> tuple[BoostModel, float]:
    dims, payload = read_block(path, TAG_BOOST)
    if len(dims) != 3:
        raise ValueError(f"{path}: corrupt boost block")
    m, n, loss_code = dims
    if loss_code >= len(LOSS_KINDS) or payload.size != 4 + m * (2 + n):
        raise ValueError(f"{path}: boost payload size mismatch")
    lam, theta, gamma, bp_weight = payload[:4]
    rounds = []
    off = 4
    for i in range(m):
        error_rate, beta = payload[off], payload[off + 1]
        weights = payload[off + 2 : off + 2 + n].copy()
        rounds.append(BoostRound(i + 1, weights, float(error_rate), float(beta)))
        off += 2 + n
    model = BoostModel(rounds, LOSS_KINDS[loss_code], float(lam),
                       theta=float(theta), gamma=float(gamma))
    return model, float(bp_weight)


def model_paths(directory) -> dict[str, Path]:
    d = Path(directory)
    return {
        "d_lr": d / DICT_LR_FILE,
        "d_hr": d / DICT_HR_FILE,
        "pca": d / PCA_FILE,
        "anchors": d / ANCHORS_FILE,
        "boost": d / BOOST_FILE,
        "config": d / CONFIG_FILE,
    }
