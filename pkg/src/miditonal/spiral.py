"""Spiral-array geometry.

Pitch classes sit on a helix indexed by the line of fifths (C=0, G=1,
F=-1, ...). Chords and keys are convex combinations of helix points, so
every position here is a plain ``numpy`` array of shape ``(3,)``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import EmptyCloud

Point3 = np.ndarray

# sin/cos of k*pi/2 by k mod 4, exact so that rotations stay exact
_SIN_QUARTER = (0.0, 1.0, 0.0, -1.0)
_COS_QUARTER = (1.0, 0.0, -1.0, 0.0)


class Mode(str, Enum):
    MAJOR = "major"
    MINOR = "minor"


@dataclass(frozen=True)
class SpiralParams:
    r: float = 1.0
    h: float = math.sqrt(2.0 / 15.0)
    w1: float = 0.536
    w2: float = 0.274
    w3: float = 0.19
    u1: float = 0.536
    u2: float = 0.274
    u3: float = 0.19
    omega1: float = 0.536
    omega2: float = 0.274
    omega3: float = 0.19
    nu1: float = 0.536
    nu2: float = 0.274
    nu3: float = 0.19
    alpha: float = 0.75
    beta: float = 0.75

    def __post_init__(self):
        if not (self.r > 0 and self.h > 0):
            raise ValueError("r and h must be positive")
        for name in ("w", "u", "omega", "nu"):
            triple = [getattr(self, f"{name}{i}") for i in (1, 2, 3)]
            if any(v < 0 for v in triple) or abs(sum(triple) - 1.0) > 1e-9:
                raise ValueError(f"{name} weights must be non-negative and sum to 1, got {triple}")
        for name in ("alpha", "beta"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def w(self):
        return (self.w1, self.w2, self.w3)

    @property
    def u(self):
        return (self.u1, self.u2, self.u3)

    @property
    def omega(self):
        return (self.omega1, self.omega2, self.omega3)

    @property
    def nu(self):
        return (self.nu1, self.nu2, self.nu3)

    @classmethod
    def from_mapping(cls, values: dict) -> "SpiralParams":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown spiral parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in values.items()})

    @classmethod
    def from_config(cls, path, section: str = "spiral") -> "SpiralParams":
        """Read overrides from the ``[spiral]`` section of an INI-style file."""
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        if not parser.has_section(section):
            return cls()
        return cls.from_mapping(dict(parser.items(section)))

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_PARAMS = SpiralParams()


@dataclass(frozen=True, order=True)
class KeyId:
    fifth_index: int
    mode: Mode

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def tonic_name(self) -> str:
        return fifth_name(self.fifth_index)

    def __str__(self):
        return f"{self.tonic_name} {self.mode.value}"


def fifth_name(k: int) -> str:
    """Spelled name of a line-of-fifths index, e.g. 6 -> 'F#', -6 -> 'Gb'."""
    letter = "FCGDAEB"[(k + 1) % 7]
    accidentals = (k + 1) // 7
    return letter + ("#" * accidentals if accidentals > 0 else "b" * -accidentals)


def fifth_to_pitch_class(k: int) -> int:
    return (7 * k) % 12


def pitch_position(k: int, params: SpiralParams = DEFAULT_PARAMS) -> Point3:
    q = k % 4
    return np.array([params.r * _SIN_QUARTER[q], params.r * _COS_QUARTER[q], k * params.h])


def pitch_positions(ks, params: SpiralParams = DEFAULT_PARAMS) -> np.ndarray:
    """Vectorised ``pitch_position`` for an integer array; returns shape (n, 3)."""
    ks = np.asarray(ks, dtype=np.int64)
    q = ks % 4
    out = np.empty((ks.size, 3))
    out[:, 0] = params.r * np.take(_SIN_QUARTER, q)
    out[:, 1] = params.r * np.take(_COS_QUARTER, q)
    out[:, 2] = ks * params.h
    return out


def chord_center(root: int, quality: Mode | str, params: SpiralParams = DEFAULT_PARAMS) -> Point3:
    quality = Mode(quality)
    if quality is Mode.MAJOR:
        a, b, c = params.w
        return a * pitch_position(root, params) + b * pitch_position(root + 1, params) + c * pitch_position(root + 4, params)
    a, b, c = params.u
    return a * pitch_position(root, params) + b * pitch_position(root + 1, params) + c * pitch_position(root - 3, params)


def key_center(key: KeyId, params: SpiralParams = DEFAULT_PARAMS) -> Point3:
    k = key.fifth_index
    if key.mode is Mode.MAJOR:
        a, b, c = params.omega
        return (
            a * chord_center(k, Mode.MAJOR, params)
            + b * chord_center(k + 1, Mode.MAJOR, params)
            + c * chord_center(k - 1, Mode.MAJOR, params)
        )
    a, b, c = params.nu
    dominant = params.alpha * chord_center(k + 1, Mode.MAJOR, params) + (1 - params.alpha) * chord_center(k + 1, Mode.MINOR, params)
    subdominant = params.beta * chord_center(k - 1, Mode.MINOR, params) + (1 - params.beta) * chord_center(k - 1, Mode.MAJOR, params)
    return a * chord_center(k, Mode.MINOR, params) + b * dominant + c * subdominant


def center_of_effect(weighted: Iterable[tuple[Point3, float]]) -> Point3:
    weighted = list(weighted)
    if not weighted:
        raise EmptyCloud("center of effect of an empty cloud")
    total = 0.0
    acc = np.zeros(3)
    for p, w in weighted:
        if not w > 0:
            raise ValueError("weights must be positive")
        acc += w * np.asarray(p, dtype=float)
        total += w
    return acc / total


def distance(a: Point3, b: Point3) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def fifth_step_distance(params: SpiralParams = DEFAULT_PARAMS) -> float:
    """Closed-form distance between adjacent fifths on the pitch helix."""
    return math.sqrt(2 * params.r**2 + params.h**2)
