import numpy as np
import pytest

from cvt_sim.density import UniformDensity
from cvt_sim.geometry import ConvexPolygon

RECT = ConvexPolygon.rectangle(0.0, 0.0, 4.0, 2.8)
UNIT = ConvexPolygon.rectangle(0.0, 0.0, 1.0, 1.0)


@pytest.fixture
def rect():
    return RECT


@pytest.fixture
def unit_square():
    return UNIT


@pytest.fixture
def uniform():
    return UniformDensity(1.0)


def random_generators(rng, n=4, region=RECT, margin=0.05):
    x0, y0, x1, y1 = region.bounds()
    xs = rng.uniform(x0 + margin, x1 - margin, n)
    ys = rng.uniform(y0 + margin, y1 - margin, n)
    return [complex(x, y) for x, y in zip(xs, ys)]


def nearest_generator_raster(generators, region=RECT, nx=400, ny=280):
    """Pixel-centre nearest-generator labels over the region's bounding box."""
    x0, y0, x1, y1 = region.bounds()
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    X, Y = np.meshgrid(xs, ys)
    g = np.array(generators)
    d2 = (X[..., None] - g.real) ** 2 + (Y[..., None] - g.imag) ** 2
    return X, Y, np.argmin(d2, axis=-1)


def inside_convex(poly, X, Y):
    v = np.array(poly.vertices)
    inside = np.ones(X.shape, dtype=bool)
    for a, b in zip(v, np.roll(v, -1)):
        inside &= (b.real - a.real) * (Y - a.imag) - (b.imag - a.imag) * (X - a.real) >= -1e-12
    return inside


def midpoint_cost(generators, region=RECT, phi=None, nx=1000, ny=1000):
    """Midpoint rule for the coverage cost over a rectangle, Richardson
    extrapolated from grids (nx, ny) and (nx/2, ny/2)."""

    def mid(nx, ny):
        x0, y0, x1, y1 = region.bounds()
        hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
        xs = x0 + (np.arange(nx) + 0.5) * hx
        ys = y0 + (np.arange(ny) + 0.5) * hy
        X, Y = np.meshgrid(xs, ys)
        g = np.array(generators)
        d2 = ((X[..., None] - g.real) ** 2 + (Y[..., None] - g.imag) ** 2).min(axis=-1)
        w = phi(X, Y) if phi is not None else 1.0
        return float((d2 * w).sum() * hx * hy)

    fine, coarse = mid(nx, ny), mid(nx // 2, ny // 2)
    return fine, (4 * fine - coarse) / 3


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
