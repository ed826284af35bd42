"""Importance-sampling weights ``f(x) / g(x)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distributions import (
    BoxUniformParams,
    TruncNormParams,
    box_uniform_pdf,
    truncnorm_pdf,
)


class SupportError(ValueError):
    """The proposal density vanishes where the target density does not."""

    def __init__(self, row: int, f_value: float):
        self.row = row
        super().__init__(
            f"g(x) = 0 but f(x) = {f_value!r} > 0 at input row {row}; "
            "the proposal must cover the support of the target density"
        )


@dataclass(frozen=True)
class DensityModel:
    """A probability density on R^dim.

    ``eval`` maps an ``(n, dim)`` array to ``n`` nonnegative densities.
    ``support`` maps an ``(n, dim)`` array to a boolean mask which is False
    only where the density is zero.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    support: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __call__(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.eval(pts), dtype=float).reshape(len(pts))

    @classmethod
    def from_pointwise(cls, fn: Callable[[np.ndarray], float], dim: int,
                       support: Callable[[np.ndarray], bool] | None = None) -> "DensityModel":
        """Wrap a function of a single point (slow path, one call per row)."""

        def eval_rows(pts):
            return np.array([float(fn(row)) for row in pts])

        if support is None:
            def support_rows(pts):
                return eval_rows(pts) > 0
        else:
            def support_rows(pts):
                return np.array([bool(support(row)) for row in pts])

        return cls(eval_rows, support_rows, dim)

    def scaled(self, c: float) -> "DensityModel":
        """Same support, density multiplied by ``c`` (not a probability density)."""
        base = self.eval
        return DensityModel(lambda pts: c * base(pts), self.support, self.dim)


def truncnorm_product_density(params: Sequence[TruncNormParams]) -> DensityModel:
    """Independent truncated normals, one per coordinate."""
    params = tuple(params)
    lower = np.array([p.a for p in params])
    upper = np.array([p.b for p in params])

    def eval_rows(pts):
        out = np.ones(len(pts))
        for i, p in enumerate(params):
            out = out * truncnorm_pdf(pts[:, i], p)
        return out

    def support_rows(pts):
        return np.all((pts >= lower) & (pts <= upper), axis=1)

    return DensityModel(eval_rows, support_rows, len(params))


def box_uniform_density(params: BoxUniformParams) -> DensityModel:
    lower = np.asarray(params.lower)
    upper = np.asarray(params.upper)

    def support_rows(pts):
        return np.all((pts >= lower) & (pts <= upper), axis=1)

    return DensityModel(lambda pts: box_uniform_pdf(pts, params), support_rows, params.dim)


def compute_density_ratio(f: DensityModel, g: DensityModel, inputs) -> np.ndarray:
    """IS weights ``w_k = f(x_k) / g(x_k)`` for each row of ``inputs``.

    Rows where both densities vanish get weight 0. Raises
    :class:`SupportError` on the first row where ``g`` vanishes but ``f``
    does not.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if f.dim == 1 else x.reshape(1, -1)
    if f.dim != g.dim:
        raise ValueError(f"density dimensions differ: f.dim={f.dim}, g.dim={g.dim}")
    if x.ndim != 2 or x.shape[1] != f.dim:
        raise ValueError(f"inputs must have shape (n, {f.dim}), got {x.shape}")
    if len(x) == 0:
        raise ValueError("inputs must contain at least one row")

    fx = f(x)
    gx = g(x)
    bad = ~(np.isfinite(fx) & np.isfinite(gx))
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise ValueError(f"non-finite density value at input row {row}")
    if np.any(fx < 0) or np.any(gx < 0):
        raise ValueError("density values must be nonnegative")
    uncovered = (gx == 0) & (fx > 0)
    if np.any(uncovered):
        row = int(np.flatnonzero(uncovered)[0])
        raise SupportError(row, float(fx[row]))

    w = np.zeros(len(x))
    pos = gx > 0
    w[pos] = fx[pos] / gx[pos]
    if not np.all(np.isfinite(w)):
        row = int(np.flatnonzero(~np.isfinite(w))[0])
        raise ValueError(f"weight overflow at input row {row}")
    return w
