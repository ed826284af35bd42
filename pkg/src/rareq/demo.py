"""Rare-event toy problem: plain Monte Carlo versus importance sampling.

Inputs are two independent N(0, sigma^2) laws truncated to [-1, 1]. The code

    H(x) = (0, 0)                   if |x1| <= alpha
           (|x1| - alpha, |x2|)     otherwise

sends a fraction ``p_zero`` of the input mass to the origin. The proposal is
uniform on [-1, 1]^2.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .diagnostics import CentroidStdReport, estimate_cell_masses, std_centroid
from .distributions import (
    BoxUniformParams,
    TruncNormParams,
    sample_box_uniform,
    sample_truncnorm,
    truncnorm_cdf,
)
from .quantizer import LloydConfig, QuantizationResult, SampleBatch, find_prototypes
from .weights import box_uniform_density, compute_density_ratio, truncnorm_product_density

PROPOSAL_BOX = BoxUniformParams((-1.0, -1.0), (1.0, 1.0))


@dataclass(frozen=True)
class DemoConfig:
    sigma1: float = 0.25
    sigma2: float = 0.25
    p_zero: float = 0.99
    n_fit: int = 1000
    n_eval: int = 100_000
    nb_cells: int = 5
    multistart: int = 3
    nv: int = 1000
    seed: int = 0
    threads: int = 1
    max_iter: int = 100
    tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.p_zero < 1:
            raise ValueError(f"p_zero must lie in (0, 1), got {self.p_zero}")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("sigma1 and sigma2 must be positive")
        for name in ("n_fit", "n_eval", "nb_cells", "multistart", "nv", "threads", "max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def marginals(self) -> tuple[TruncNormParams, TruncNormParams]:
        return (TruncNormParams(0.0, self.sigma1, -1.0, 1.0),
                TruncNormParams(0.0, self.sigma2, -1.0, 1.0))

    def to_dict(self) -> dict:
        return asdict(self)


def solve_alpha(p_zero: float, p: TruncNormParams, xtol: float = 1e-14) -> float:
    """Half-width ``alpha`` with ``P(|X - mu| <= alpha) = p_zero`` for X ~ ``p``.

    Solved by Brent's method on ``[0, b - mu]``; raises if the root is not
    bracketed there.
    """
    if not 0 < p_zero < 1:
        raise ValueError(f"p_zero must lie in (0, 1), got {p_zero}")
    hi = p.b - p.mu

    def excess(a):
        return truncnorm_cdf(p.mu + a, p) - truncnorm_cdf(p.mu - a, p) - p_zero

    if hi <= 0 or excess(0.0) * excess(hi) > 0:
        raise ValueError(f"no root for p_zero={p_zero} on [0, {hi}]")
    return brentq(excess, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


def computer_code_H(x, alpha: float) -> np.ndarray:
    """Apply ``H`` to one point ``(2,)`` or to rows of an ``(n, 2)`` array."""
    arr = np.asarray(x, dtype=float)
    pts = np.atleast_2d(arr)
    if pts.shape[1] != 2:
        raise ValueError(f"H is defined on R^2, got shape {arr.shape}")
    ax = np.abs(pts)
    out = np.column_stack([ax[:, 0] - alpha, ax[:, 1]])
    out[ax[:, 0] <= alpha] = 0.0
    return out[0] if arr.ndim == 1 else out


def sample_inputs_fx(n: int, cfg: DemoConfig, rng: np.random.Generator) -> np.ndarray:
    m1, m2 = cfg.marginals
    return np.column_stack([sample_truncnorm(n, m1, rng), sample_truncnorm(n, m2, rng)])


@dataclass
class PathReport:
    """One sampling strategy: fit sample, fitted quantizer, evaluation stats."""

    fit_inputs: np.ndarray
    fit_batch: SampleBatch
    result: QuantizationResult
    std_report: CentroidStdReport
    masses: np.ndarray
    masses_unnormalized: np.ndarray


@dataclass
class DemoReport:
    config: DemoConfig
    alpha: float
    mc: PathReport
    is_: PathReport
    zero_mass_is: float  # (1/n) sum w 1{Y = (0,0)} on the IS evaluation sample


def _streams(seed: int):
    # fit-MC, fit-IS, eval-MC, eval-IS
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]


def run_demo(cfg: DemoConfig) -> DemoReport:
    """Fit both quantizers on ``n_fit`` points and evaluate on ``n_eval`` points.

    The plain path draws from f_X with unit weights; the IS path draws from
    the uniform proposal with weights f_X/g. Each path's std report uses a
    fresh evaluation sample from its own sampling law and its own codebook.
    """
    m1, _ = cfg.marginals
    alpha = solve_alpha(cfg.p_zero, m1)
    fx = truncnorm_product_density(cfg.marginals)
    g = box_uniform_density(PROPOSAL_BOX)
    rng_fit_mc, rng_fit_is, rng_eval_mc, rng_eval_is = _streams(cfg.seed)
    qseeds = np.random.SeedSequence(cfg.seed).generate_state(2)

    def path(inputs_fit, inputs_eval, weighted, qseed):
        def batch_of(inputs):
            w = compute_density_ratio(fx, g, inputs) if weighted else np.ones(len(inputs))
            return SampleBatch(computer_code_H(inputs, alpha), w)

        fit = batch_of(inputs_fit)
        lcfg = LloydConfig(cfg.nb_cells, cfg.multistart, cfg.max_iter, cfg.tol,
                           int(qseed), cfg.threads)
        res = find_prototypes(fit, lcfg)
        ev = batch_of(inputs_eval)
        rep = std_centroid(ev, [res.codebook], nv=cfg.nv, threads=cfg.threads)
        masses, raw = estimate_cell_masses(ev, res.codebook, cfg.threads)
        return PathReport(inputs_fit, fit, res, rep, masses, raw), ev

    mc, _ = path(sample_inputs_fx(cfg.n_fit, cfg, rng_fit_mc),
                 sample_inputs_fx(cfg.n_eval, cfg, rng_eval_mc), False, qseeds[0])
    is_, ev_is = path(sample_box_uniform(cfg.n_fit, PROPOSAL_BOX, rng_fit_is),
                      sample_box_uniform(cfg.n_eval, PROPOSAL_BOX, rng_eval_is), True, qseeds[1])
    at_zero = np.all(ev_is.points == 0.0, axis=1)
    zero_mass = float(np.sum(ev_is.weights[at_zero]) / ev_is.n)
    return DemoReport(cfg, alpha, mc, is_, zero_mass)
