"""Desk-scale data: procedural toy images and binary PGM (P5) files.

The generator emits small grayscale images in [-1, 1], one randomly placed
shape per image, class-balanced and bit-reproducible from the seed.  PGM
is the one mandatory raster format; values map linearly between [0, 255]
and [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linop import RealSignal

CLASSES = ("bars", "boxes", "discs", "gradients")


@dataclass(frozen=True)
class ToyDatasetSpec:
    count: int
    image_size: tuple[int, int] = (16, 16)
    classes: tuple[str, ...] = CLASSES
    seed: int = 0


def _bar(img, rng, intensity):
    h, w = img.shape
    thickness = int(rng.integers(2, 5))
    if rng.random() < 0.5:
        r0 = int(rng.integers(0, h - thickness + 1))
        img[r0:r0 + thickness, :] = intensity
    else:
        c0 = int(rng.integers(0, w - thickness + 1))
        img[:, c0:c0 + thickness] = intensity


def _box(img, rng, intensity):
    h, w = img.shape
    bh = int(rng.integers(4, h // 2 + 3))
    bw = int(rng.integers(4, w // 2 + 3))
    r0 = int(rng.integers(0, h - bh + 1))
    c0 = int(rng.integers(0, w - bw + 1))
    img[r0:r0 + bh, c0:c0 + bw] = intensity


def _disc(img, rng, intensity):
    h, w = img.shape
    radius = float(rng.uniform(2.0, min(h, w) / 3.0))
    cy = float(rng.uniform(radius, h - 1 - radius))
    cx = float(rng.uniform(radius, w - 1 - radius))
    yy, xx = np.mgrid[0:h, 0:w]
    img[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2] = intensity


def _gradient(img, rng, _intensity):
    h, w = img.shape
    theta = float(rng.uniform(0, 2 * np.pi))
    yy, xx = np.mgrid[0:h, 0:w]
    ramp = np.cos(theta) * xx / (w - 1) + np.sin(theta) * yy / (h - 1)
    lo, hi = ramp.min(), ramp.max()
    img[:] = -1.0 + 2.0 * (ramp - lo) / (hi - lo)


_PAINTERS = {"bars": _bar, "boxes": _box, "discs": _disc, "gradients": _gradient}


def generate(spec: ToyDatasetSpec) -> list[RealSignal]:
    """Class-balanced toy images, deterministic for a given seed.

    Classes are interleaved round-robin so every prefix stays balanced;
    count is split as evenly as the class count allows.
    """
    h, w = spec.image_size
    if spec.count < 1:
        raise ValueError("count must be at least 1")
    if min(h, w) < 8:
        raise ValueError(f"{h}x{w} image too small for the shape generators")
    unknown = set(spec.classes) - set(_PAINTERS)
    if unknown:
        raise ValueError(f"unknown classes: {sorted(unknown)}")

    rng = np.random.default_rng(spec.seed)
    out = []
    for i in range(spec.count):
        cls = spec.classes[i % len(spec.classes)]
        img = np.full((h, w), -1.0)
        intensity = float(rng.uniform(0.25, 1.0))
        _PAINTERS[cls](img, rng, intensity)
        out.append(RealSignal(img.ravel(), shape=(h, w)))
    return out


def to_bytes(values: np.ndarray) -> np.ndarray:
    """[-1, 1] floats to uint8 via the linear [0, 255] map."""
    scaled = np.rint((np.clip(values, -1.0, 1.0) + 1.0) / 2.0 * 255.0)
    return scaled.astype(np.uint8)


def from_bytes(raw: np.ndarray) -> np.ndarray:
    """uint8 to [-1, 1] floats."""
    return raw.astype(np.float64) / 255.0 * 2.0 - 1.0


def save_pgm(signal, path) -> None:
    """Write a grayscale image as binary 8-bit PGM (P5, maxval 255)."""
    img = signal.image() if isinstance(signal, RealSignal) else np.asarray(signal)
    if img.ndim != 2:
        raise ValueError("PGM output expects a 2-D grayscale image")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(to_bytes(img).tobytes())


def _read_token(f) -> bytes:
    # One whitespace-delimited token, skipping '#' comments.
    tok = b""
    while True:
        ch = f.read(1)
        if not ch:
            if tok:
                return tok
            raise ValueError("truncated PGM header")
        if ch == b"#":
            while ch and ch != b"\n":
                ch = f.read(1)
            continue
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def load_pgm(path) -> RealSignal:
    """Read a binary 8-bit PGM into a [-1, 1] RealSignal."""
    with open(path, "rb") as f:
        if _read_token(f) != b"P5":
            raise ValueError("not a binary PGM (P5) file")
        try:
            w = int(_read_token(f))
            h = int(_read_token(f))
            maxval = int(_read_token(f))
        except ValueError as e:
            raise ValueError(f"malformed PGM header: {e}") from None
        if maxval != 255:
            raise ValueError(f"unsupported PGM depth {maxval} (need 8-bit, 255)")
        raw = f.read(w * h)
        if len(raw) != w * h:
            raise ValueError("truncated PGM pixel data")
    values = from_bytes(np.frombuffer(raw, dtype=np.uint8))
    return RealSignal(values, shape=(h, w))
