"""Density fields over the coverage region.

Every field is callable on coordinate arrays: ``phi(x, y)`` returns an array
of the same shape.  ``is_uniform`` lets the geometry code switch to exact
polygon formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DensityError(ValueError):
    pass


@dataclass(frozen=True)
class UniformDensity:
    value: float = 1.0

    def __post_init__(self):
        if not self.value > 0:
            raise DensityError("uniform density must be positive")

    is_uniform = True

    def __call__(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.value, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "uniform", "value": float(self.value)}


@dataclass(frozen=True)
class GridDensity:
    """Bilinear interpolation of samples on a rectangular lattice.

    ``values[i, j]`` is the density at ``(xmin + j*dx, ymin + i*dy)``.  Points
    outside the lattice are clamped to its border.
    """

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    values: np.ndarray = field(repr=False)

    is_uniform = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 2 or vals.shape[1] < 2:
            raise DensityError("grid density needs at least a 2x2 sample array")
        if not np.all(vals > 0):
            raise DensityError("grid density samples must be positive")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise DensityError("grid density bounds are empty")
        object.__setattr__(self, "values", vals)

    def __call__(self, x, y):
        ny, nx = self.values.shape
        fx = (np.clip(x, self.xmin, self.xmax) - self.xmin) / (self.xmax - self.xmin) * (nx - 1)
        fy = (np.clip(y, self.ymin, self.ymax) - self.ymin) / (self.ymax - self.ymin) * (ny - 1)
        j = np.minimum(np.floor(fx).astype(int), nx - 2)
        i = np.minimum(np.floor(fy).astype(int), ny - 2)
        tx = fx - j
        ty = fy - i
        v = self.values
        return ((1 - tx) * (1 - ty) * v[i, j] + tx * (1 - ty) * v[i, j + 1]
                + (1 - tx) * ty * v[i + 1, j] + tx * ty * v[i + 1, j + 1])

    def to_dict(self) -> dict:
        return {
            "kind": "grid",
            "xmin": float(self.xmin), "xmax": float(self.xmax),
            "ymin": float(self.ymin), "ymax": float(self.ymax),
            "values": self.values.tolist(),
        }


@dataclass(frozen=True)
class GaussianDensity:
    """``base + amplitude * exp(-|q - center|^2 / (2 sigma^2))``."""

    center: complex
    sigma: float
    amplitude: float = 1.0
    base: float = 0.0

    is_uniform = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise DensityError("gaussian sigma must be positive")
        if not self.amplitude > 0 or self.base < 0:
            raise DensityError("gaussian density must be positive")

    def __call__(self, x, y):
        d2 = (np.asarray(x) - self.center.real) ** 2 + (np.asarray(y) - self.center.imag) ** 2
        return self.base + self.amplitude * np.exp(-0.5 * d2 / self.sigma**2)

    def to_dict(self) -> dict:
        return {
            "kind": "gaussian",
            "center": [self.center.real, self.center.imag],
            "sigma": float(self.sigma),
            "amplitude": float(self.amplitude),
            "base": float(self.base),
        }


@dataclass(frozen=True)
class LinearDensity:
    """``c0 + cx * x + cy * y``; used for closed-form checks of the quadrature."""

    c0: float = 0.0
    cx: float = 1.0
    cy: float = 0.0

    is_uniform = False

    def __call__(self, x, y):
        return self.c0 + self.cx * np.asarray(x, dtype=float) + self.cy * np.asarray(y, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "linear", "c0": self.c0, "cx": self.cx, "cy": self.cy}


DensityField = UniformDensity | GridDensity | GaussianDensity | LinearDensity


def density_from_dict(spec: dict) -> DensityField:
    try:
        kind = spec["kind"]
        if kind == "uniform":
            return UniformDensity(float(spec.get("value", 1.0)))
        if kind == "grid":
            return GridDensity(float(spec["xmin"]), float(spec["xmax"]),
                               float(spec["ymin"]), float(spec["ymax"]),
                               np.asarray(spec["values"], dtype=float))
        if kind == "gaussian":
            cx, cy = spec["center"]
            return GaussianDensity(complex(float(cx), float(cy)), float(spec["sigma"]),
                                   float(spec.get("amplitude", 1.0)), float(spec.get("base", 0.0)))
        if kind == "linear":
            return LinearDensity(float(spec.get("c0", 0.0)), float(spec.get("cx", 1.0)),
                                 float(spec.get("cy", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DensityError):
            raise
        raise DensityError(f"bad density spec: {exc}") from exc
    raise DensityError(f"unknown density kind {spec.get('kind')!r}")
