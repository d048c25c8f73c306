"""Deterministic synthetic face-like corpus.

FERET/AR are restricted-license datasets, so the harness ships its own
generator: a smoothly shaded oval (no sharp outline) with crisp, localized
structures (eyes, brows, nose, mouth) at fixed positions.  The positions are
aligned across the corpus while intensities, sizes, and phases vary, so the
reconstruction difficulty concentrates at a few patch positions, exactly the
structure the positional patch weighting exploits.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import imageops


def _disc(rows, cols, cy, cx, ry, rx):
    return ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0


def _soft_oval(rows, cols, cy, cx, ry, rx, softness):
    """1 inside the oval, 0 outside, smooth sigmoid transition across the rim."""
    d = np.sqrt(((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2)
    return 1.0 / (1.0 + np.exp((d - 1.0) / softness))


def synth_face(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """One aligned synthetic face in [0, 1]."""
    s = size / 64.0
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.full((size, size), 0.08 + 0.03 * rng.random())

    # smooth shaded head oval; the rim fades over several pixels so the base
    # carries no high frequencies of its own
    cy, cx = 33 * s + rng.uniform(-1, 1), 32 * s + rng.uniform(-0.8, 0.8)
    ry, rx = (27 + rng.uniform(-1.5, 1.5)) * s, (21 + rng.uniform(-1.5, 1.5)) * s
    mask = _soft_oval(rows, cols, cy, cx, ry, rx, softness=0.08)
    skin = 0.62 + 0.1 * rng.random()
    shade = 1.0 - 0.22 * ((rows - cy) / ry) ** 2 - 0.14 * ((cols - cx) / rx) ** 2
    img = img * (1 - mask) + skin * shade * mask

    # eyes: sharp dark discs with ring texture and a bright catchlight
    phase = rng.uniform(0, 2 * np.pi)
    for ex in (20.0, 44.0):
        ecy = 24 * s + rng.uniform(-0.6, 0.6)
        ecx = ex * s + rng.uniform(-0.6, 0.6)
        er = (3.6 + rng.uniform(-0.4, 0.4)) * s
        dist = np.sqrt(((rows - ecy) / er) ** 2 + ((cols - ecx) / (er * 1.3)) ** 2)
        eye = dist <= 1.0
        rings = 0.10 * np.cos(2 * np.pi * 1.8 * dist + phase)
        img[eye] = 0.16 + 0.05 * rng.random() + rings[eye]
        iris = _disc(rows, cols, ecy, ecx, er * 0.45, er * 0.45)
        img[iris] = 0.32 + 0.08 * rng.random()
        light = _disc(rows, cols, ecy - er * 0.3, ecx + er * 0.3, 0.9 * s, 0.9 * s)
        img[light] = 0.88

    # eyebrows: thin sharp bars with a random tilt
    tilt = rng.uniform(-0.15, 0.15)
    for ex in (20.0, 44.0):
        mid = 18.0 * s + tilt * (cols - ex * s)
        bar = (np.abs(rows - mid) <= 1.0 * s) & (np.abs(cols - ex * s) <= 5.0 * s)
        img[bar] = 0.24 + 0.06 * rng.random()

    # nose: narrow ridge with crisp nostril dots
    ridge = (np.abs(cols - 32 * s) <= 1.0 * s) & (rows >= 28 * s) & (rows <= 37 * s)
    img[ridge] *= 0.86
    for dx in (-2.8, 2.8):
        dot = _disc(rows, cols, 38.0 * s, (32 + dx) * s, 1.2 * s, 1.4 * s)
        img[dot] = 0.26

    # mouth: sharp dark bow with a bright teeth line
    half_w = (9.5 + rng.uniform(-1.5, 1.5)) * s
    bow = 1.2 * s * np.cos(np.clip((cols - 32 * s) / half_w, -1, 1) * np.pi / 2)
    mouth = (np.abs(rows - (47.0 * s - bow)) <= 1.5 * s) & (
        np.abs(cols - 32 * s) <= half_w
    )
    img[mouth] = 0.18 + 0.07 * rng.random()
    teeth = (np.abs(rows - (45.3 * s - bow)) <= 0.5 * s) & (
        np.abs(cols - 32 * s) <= half_w * 0.7
    )
    img[teeth] = 0.72

    return np.clip(img, 0.0, 1.0)


def generate_corpus(count: int, seed: int, size: int = 64) -> list[np.ndarray]:
    """Deterministic list of faces: same (count, seed, size) -> same pixels."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return [synth_face(rng, size) for _ in range(count)]


def write_corpus(directory, count: int, seed: int, size: int = 64) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(generate_corpus(count, seed, size)):
        p = out / f"face_{i:04d}.png"
        imageops.save_image(p, img)
        paths.append(p)
    return paths
