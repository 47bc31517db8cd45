"""Euler-Maruyama simulation of the overdamped dynamics and its estimators.

The plain process solves dX = sqrt(2) dB - grad V(X) dt.  The perturbed
process replaces the drift by grad V + 2 grad a / a (the gradient of the
tilted potential V_a = V + log a^2).  Alongside the state we integrate

  * the tangent flow J, dJ = -J hess V(X) dt, J_0 = I.  The Hessian of
    the *unperturbed* potential enters in both variants.
  * the reweighting martingale R on perturbed paths, accumulated through
    its pathwise exponent

        log R_T = log a(X_T) - log a(X_0) - int_0^T psi_a(X_s) ds,

    with the time integral discretized by the trapezoid rule on the step
    values.  The equivalent stochastic-integral form

        log R_T = sqrt(2) int (grad a / a) . dB - int |grad a / a|^2 ds

    (left-endpoint Ito sums) can be accumulated in parallel as a
    discretization cross-check.

Determinism: the Gaussian increment for (path, step) is a fixed function
of (seed, path block, step) through the Philox streams of
:mod:`logsob.rng`, so path records are bit-identical for a given
``SdeConfig`` no matter how many workers run, and runs sharing a config
share their Brownian increments (common random numbers).

Paths whose state leaves |x| <= 1e8 or turns non-finite are frozen,
flagged divergent, and excluded from estimates; estimates with more than
0.1% divergent paths are marked unreliable instead of being silently
averaged.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng
from .errors import EstimationError, ParameterError
from .perturbations import Perturbation
from .potentials import Potential

DIVERGENCE_RADIUS = 1e8
MAX_DIVERGENT_FRACTION = 1e-3


@dataclass(frozen=True)
class SdeConfig:
    dt: float
    horizon: float
    n_paths: int
    seed: int
    x0: tuple

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ParameterError("horizon must be at least dt")
        if self.n_paths < 1:
            raise ParameterError("n_paths must be positive")
        x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        if not all(math.isfinite(v) for v in x0):
            raise ParameterError("x0 must be finite")
        object.__setattr__(self, "x0", x0)

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-12))

    @property
    def dt_eff(self) -> float:
        """Step actually used: dt shrunk so that n_steps * dt_eff = horizon."""
        return self.horizon / self.n_steps

    @property
    def dim(self) -> int:
        return len(self.x0)


@dataclass(frozen=True)
class SmoothFunction:
    """A scalar test function with its gradient (both batched over (..., d))."""

    name: str
    value: Callable
    gradient: Callable


@dataclass(frozen=True)
class PathRecord:
    x_t: np.ndarray
    j_t: np.ndarray
    girsanov_log_weight: float
    psi_integral: float
    divergent: bool


class PathBatch:
    """Terminal data of a family of paths, stored columnwise.

    Iterating yields :class:`PathRecord` views; estimators work on the
    arrays directly.  ``checkpoint_log_weights`` maps requested times to
    the log-weight arrays recorded there.
    """

    def __init__(self, x_t, j_t, log_weight, psi_integral, divergent,
                 cfg, variant, checkpoint_log_weights=None, log_weight_stochastic=None,
                 observed_sup_log_grad=0.0, g_condition_exceeded=False):
        self.x_t = x_t
        self.j_t = j_t
        self.girsanov_log_weight = log_weight
        self.psi_integral = psi_integral
        self.divergent = divergent
        self.cfg = cfg
        self.variant = variant
        self.checkpoint_log_weights = checkpoint_log_weights or {}
        self.log_weight_stochastic = log_weight_stochastic
        self.observed_sup_log_grad = observed_sup_log_grad
        self.g_condition_exceeded = g_condition_exceeded

    def __len__(self):
        return self.x_t.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> PathRecord:
        return PathRecord(
            x_t=self.x_t[i],
            j_t=self.j_t[i],
            girsanov_log_weight=float(self.girsanov_log_weight[i]),
            psi_integral=float(self.psi_integral[i]),
            divergent=bool(self.divergent[i]),
        )

    @property
    def n_divergent(self) -> int:
        return int(np.sum(self.divergent))

    def weights(self) -> np.ndarray:
        return np.exp(self.girsanov_log_weight)


def simulate(p: Potential, a: Perturbation, cfg: SdeConfig, variant: str = "plain",
             track_stochastic_weight: bool = False,
             checkpoint_times: Sequence[float] = (),
             max_workers: Optional[int] = None) -> PathBatch:
    """Run all paths of ``cfg`` and return their terminal records."""
    if variant not in ("plain", "perturbed"):
        raise ParameterError("variant must be 'plain' or 'perturbed'")
    if cfg.dim != p.dim:
        raise ParameterError(f"x0 has dimension {cfg.dim}, potential has {p.dim}")
    n, d, n_steps = cfg.n_paths, cfg.dim, cfg.n_steps
    checkpoint_steps = {}
    for t in checkpoint_times:
        k = int(round(t / cfg.dt_eff))
        if not 0 < k <= n_steps:
            raise ParameterError(f"checkpoint time {t} outside (0, horizon]")
        checkpoint_steps[float(t)] = k

    x_t = np.empty((n, d))
    j_t = np.empty((n, d, d))
    log_w = np.zeros(n)
    psi_int = np.zeros(n)
    divergent = np.zeros(n, dtype=bool)
    cp_logs = {t: np.zeros(n) for t in checkpoint_steps}
    stoch = np.zeros(n) if track_stochastic_weight else None

    blocks = rng.block_ranges(n)
    args = [(p, a, cfg, variant, b, lo, hi, checkpoint_steps, track_stochastic_weight)
            for b, lo, hi in blocks]
    observed_lg = [0.0] * len(blocks)

    def run_and_store(idx_arg):
        idx, arg = idx_arg
        _, _, _, _, b, lo, hi, _, _ = arg
        out = _run_block(*arg)
        x_t[lo:hi] = out["x_t"]
        j_t[lo:hi] = out["j_t"]
        log_w[lo:hi] = out["log_w"]
        psi_int[lo:hi] = out["psi_int"]
        divergent[lo:hi] = out["divergent"]
        for t, arr in out["checkpoints"].items():
            cp_logs[t][lo:hi] = arr
        if stoch is not None:
            stoch[lo:hi] = out["stoch"]
        observed_lg[idx] = out["observed_lg"]

    workers = max_workers if max_workers is not None else _worker_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_and_store, enumerate(args)))
    else:
        for idx_arg in enumerate(args):
            run_and_store(idx_arg)

    observed = max(observed_lg)
    # post hoc admissibility: the visited states must not reveal a larger
    # |grad a|/a than the norm the weights were justified with
    exceeded = observed > a.sup_log_grad.value * (1.0 + 1e-9) + 1e-12
    return PathBatch(x_t, j_t, log_w, psi_int, divergent, cfg, variant,
                     checkpoint_log_weights=cp_logs, log_weight_stochastic=stoch,
                     observed_sup_log_grad=observed, g_condition_exceeded=exceeded)


def _run_block(p, a, cfg, variant, block, lo, hi, checkpoint_steps, track_stoch):
    n = hi - lo
    d = cfg.dim
    dt = cfg.dt_eff
    sqrt_2dt = math.sqrt(2.0 * dt)
    sqrt_dt = math.sqrt(dt)
    n_steps = cfg.n_steps
    perturbed = variant == "perturbed"
    weighted = perturbed and a.family != "identity"

    x = np.tile(np.asarray(cfg.x0, dtype=float), (n, 1))
    j = np.tile(np.eye(d), (n, 1, 1))
    alive = np.ones(n, dtype=bool)
    grad = np.asarray(p.gradient(x), dtype=float)
    lg = np.asarray(a.log_grad(x), dtype=float) if weighted else None
    observed_lg = 0.0
    # running trapezoid sum: half weight on the initial state, full weights
    # after each step; the half weight of the current endpoint is removed
    # whenever the integral is materialized
    if weighted:
        psi_x = _psi_from_parts(a, p, x, lg, grad)
        psi_sum = 0.5 * psi_x
        psi_last = psi_x
        log_a0 = np.log(np.asarray(a.value(x), dtype=float))
        observed_lg = float(np.max(np.einsum("ni,ni->n", lg, lg))) ** 0.5
    else:
        psi_sum = np.zeros(n)
        psi_last = np.zeros(n)
        log_a0 = np.zeros(n)
    stoch = np.zeros(n) if track_stoch else None
    checkpoints = {}
    step_of = {}
    for t, k in checkpoint_steps.items():
        step_of.setdefault(k, []).append(t)

    for k in range(n_steps):
        xi = rng.step_normals(cfg.seed, block, k, n, d)
        hess = np.asarray(p.hessian(x), dtype=float)
        j_new = j - dt * (j @ hess)
        drift = grad + 2.0 * lg if weighted else grad
        if track_stoch and weighted:
            stoch_inc = (math.sqrt(2.0) * sqrt_dt * np.einsum("ni,ni->n", lg, xi)
                         - dt * np.einsum("ni,ni->n", lg, lg))
            stoch = stoch + np.where(alive, stoch_inc, 0.0)
        x_new = x + sqrt_2dt * xi - dt * drift

        with np.errstate(invalid="ignore", over="ignore"):
            bad = ~np.all(np.isfinite(x_new), axis=1)
            bad |= np.einsum("ni,ni->n", x_new, x_new) > DIVERGENCE_RADIUS**2
        alive = alive & ~bad
        keep = alive[:, None]
        x = np.where(keep, x_new, x)
        j = np.where(keep[:, :, None], j_new, j)
        grad = np.asarray(p.gradient(x), dtype=float)
        if weighted:
            lg = np.asarray(a.log_grad(x), dtype=float)
            lg_norm2 = np.einsum("ni,ni->n", lg, lg)
            observed_lg = max(observed_lg, float(np.max(lg_norm2[alive], initial=0.0)) ** 0.5)
            psi_x = np.asarray(a.lap_over_a(x), dtype=float) - 2.0 * lg_norm2 \
                - np.einsum("ni,ni->n", grad, lg)
            alive = alive & np.isfinite(psi_x)
            psi_sum = psi_sum + np.where(alive, psi_x, 0.0)
            psi_last = np.where(alive, psi_x, psi_last)
        if (k + 1) in step_of:
            for t in step_of[k + 1]:
                if weighted:
                    integral = dt * (psi_sum - 0.5 * psi_last)
                    checkpoints[t] = np.log(np.asarray(a.value(x), dtype=float)) - log_a0 - integral
                else:
                    checkpoints[t] = np.zeros(n)

    if weighted:
        psi_int = dt * (psi_sum - 0.5 * psi_last)
        log_w = np.log(np.asarray(a.value(x), dtype=float)) - log_a0 - psi_int
    else:
        psi_int = np.zeros(n)
        log_w = np.zeros(n)
    return {
        "x_t": x, "j_t": j, "log_w": log_w, "psi_int": psi_int,
        "divergent": ~alive, "checkpoints": checkpoints,
        "stoch": stoch, "observed_lg": observed_lg,
    }


def _psi_from_parts(a, p, x, lg, grad):
    return (np.asarray(a.lap_over_a(x), dtype=float)
            - 2.0 * np.einsum("ni,ni->n", lg, lg)
            - np.einsum("ni,ni->n", grad, lg))


# --- estimators ---------------------------------------------------------------


@dataclass(frozen=True)
class EstimateResult:
    mean: np.ndarray
    std_error: np.ndarray
    n_valid: int
    n_divergent: int
    reliable: bool = True

    def __iter__(self):
        yield self.mean
        yield self.std_error


def _reduce(values: np.ndarray, batch: PathBatch) -> EstimateResult:
    valid = ~batch.divergent
    n_valid = int(np.sum(valid))
    if n_valid < 2:
        raise EstimationError(f"only {n_valid} valid paths; cannot estimate")
    vals = np.asarray(values)[valid]
    mean = np.mean(vals, axis=0)
    se = np.std(vals, axis=0, ddof=1) / math.sqrt(n_valid)
    frac_div = batch.n_divergent / len(batch)
    return EstimateResult(mean=mean, std_error=se, n_valid=n_valid,
                          n_divergent=batch.n_divergent,
                          reliable=frac_div <= MAX_DIVERGENT_FRACTION)


def estimate_expectation(p: Potential, a: Perturbation, cfg: SdeConfig,
                         payoff: Callable[[PathBatch], np.ndarray],
                         variant: str = "plain",
                         max_workers: Optional[int] = None) -> EstimateResult:
    """Sample mean and standard error of a path functional."""
    batch = simulate(p, a, cfg, variant=variant, max_workers=max_workers)
    return _reduce(payoff(batch), batch)


def payoff_terminal(f: SmoothFunction):
    return lambda batch: np.asarray(f.value(batch.x_t), dtype=float)


def payoff_weight():
    return lambda batch: batch.weights()


def payoff_weighted_terminal(f: SmoothFunction):
    return lambda batch: batch.weights() * np.asarray(f.value(batch.x_t), dtype=float)


def payoff_tangent_gradient(f: SmoothFunction):
    return lambda batch: np.einsum(
        "nij,nj->ni", batch.j_t, np.asarray(f.gradient(batch.x_t), dtype=float)
    )


def payoff_weighted_tangent_gradient(f: SmoothFunction):
    def fn(batch):
        jg = np.einsum("nij,nj->ni", batch.j_t, np.asarray(f.gradient(batch.x_t), dtype=float))
        return batch.weights()[:, None] * jg

    return fn


def estimate_fk_gradient(p: Potential, a: Perturbation, f: SmoothFunction,
                         cfg: SdeConfig, max_workers: Optional[int] = None) -> EstimateResult:
    """Monte Carlo estimate of E[R J grad f(X_T)] on perturbed paths."""
    batch = simulate(p, a, cfg, variant="perturbed", max_workers=max_workers)
    return _reduce(payoff_weighted_tangent_gradient(f)(batch), batch)


def estimate_gradient_fd(p: Potential, cfg: SdeConfig, f: SmoothFunction, h: float,
                         max_workers: Optional[int] = None) -> EstimateResult:
    """Central differences of x0 -> E[f(X_T^x0)] with common random numbers.

    Both shifted runs reuse the Brownian increments of ``cfg.seed``, so the
    difference is computed pathwise and its variance stays O(1) in h.
    """
    if not h > 0:
        raise ParameterError("h must be positive")
    d = cfg.dim
    x0 = np.asarray(cfg.x0, dtype=float)
    a_id = _identity()
    diffs = []
    divergent = None
    for i in range(d):
        shift = np.zeros(d)
        shift[i] = h
        cfg_p = SdeConfig(cfg.dt, cfg.horizon, cfg.n_paths, cfg.seed, tuple(x0 + shift))
        cfg_m = SdeConfig(cfg.dt, cfg.horizon, cfg.n_paths, cfg.seed, tuple(x0 - shift))
        bp = simulate(p, a_id, cfg_p, max_workers=max_workers)
        bm = simulate(p, a_id, cfg_m, max_workers=max_workers)
        fp = np.asarray(f.value(bp.x_t), dtype=float)
        fm = np.asarray(f.value(bm.x_t), dtype=float)
        diffs.append((fp - fm) / (2.0 * h))
        div = bp.divergent | bm.divergent
        divergent = div if divergent is None else (divergent | div)
    values = np.stack(diffs, axis=1)
    carrier = PathBatch(values, None, None, None, divergent, cfg, "plain")
    return _reduce(values, carrier)


def _identity():
    from .perturbations import identity_perturbation

    return identity_perturbation()


def _worker_count() -> int:
    import os

    env = os.environ.get("LOGSOB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)
