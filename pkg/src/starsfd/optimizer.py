"""Projected gradient ascent on the surface coefficients with Barzilai-Borwein steps."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gradients import grad_objective
from .pbm import PBM, project, project_unit_modulus
from .spectral_efficiency import make_variant

MAX_ITER = 500
CHECKPOINT_EVERY = 50
TRACE_SCHEMA = "trace-v1"


@dataclass
class OptTrace:
    """Per-iteration record of one ascent run.

    Row ``i`` of ``iterates`` is ``(iteration, objective, step, grad_norm)``;
    iteration 0 is the initial point.
    """

    iterates: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    terminated_by: str = ""
    best_iteration: int = 0

    @property
    def objectives(self):
        return np.array([row[1] for row in self.iterates])

    @property
    def best_seen(self):
        return np.maximum.accumulate(self.objectives)

    @property
    def n_iter(self):
        return len(self.iterates) - 1

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["schema", "iteration", "objective", "step", "grad_norm"])
        for it, f, mu, gn in self.iterates:
            writer.writerow([TRACE_SCHEMA, it, repr(float(f)), repr(float(mu)), repr(float(gn))])
        return buf.getvalue()


def bb_step(theta_prev, theta_cur, grad_prev, grad_cur, mu_prev, mu_1=500.0, rule="bb2"):
    """Barzilai-Borwein step from two consecutive iterates.

    ``bb2`` gives ``|Re<dtheta, dg>| / <dg, dg>`` and ``bb1`` gives
    ``<dtheta, dtheta> / |Re<dtheta, dg>|``. A denominator below 1e-18 keeps
    ``mu_prev``; the result is clamped to ``[1e-6 mu_1, 1e3 mu_1]``.
    """
    d_theta = np.asarray(theta_cur) - np.asarray(theta_prev)
    d_grad = np.asarray(grad_cur) - np.asarray(grad_prev)
    cross = abs(float(np.real(np.vdot(d_theta, d_grad))))
    if rule == "bb2":
        num, den = cross, float(np.real(np.vdot(d_grad, d_grad)))
    elif rule == "bb1":
        num, den = float(np.real(np.vdot(d_theta, d_theta))), cross
    else:
        raise ValueError(f"unknown step rule {rule!r}")
    if den < 1e-18:
        return mu_prev
    return float(np.clip(num / den, 1e-6 * mu_1, 1e3 * mu_1))


def _relative_improvement(f_new, f_old):
    if f_old == 0:
        return 0.0 if f_new == f_old else np.inf
    return (f_new - f_old) / abs(f_old)


def prog_ram(cfg, corr, init, variant=None, max_iter=MAX_ITER, step_rule="bb2",
             epsilon=None, mu_1=None, checkpoint_dir=None, clock=time.perf_counter):
    """Maximize the closed-form sum SE from ``init``.

    Each iteration moves along the Wirtinger gradient, ``theta + mu grad f``,
    and projects back onto the feasible set (energy-splitting pairs, or unit
    modulus for the cRIS variant). ``step_rule`` is ``"bb2"``, ``"bb1"`` or
    ``"fixed"`` (always ``mu_1``). The run stops once
    ``0 <= (f_new - f_old) / f_old < epsilon`` or after ``max_iter``
    iterations and returns the best iterate seen.
    """
    variant = variant or make_variant(cfg, corr, "FD_STARS")
    epsilon = cfg.epsilon if epsilon is None else epsilon
    mu_1 = cfg.mu_1 if mu_1 is None else mu_1
    if variant.unit_modulus:
        def proj(r, t):
            return PBM(project_unit_modulus(r), project_unit_modulus(t))
        feasible = all(np.allclose(np.abs(v), 1.0, atol=1e-10) for v in (init.theta_r, init.theta_t))
    else:
        proj = project
        feasible = init.is_feasible()
    if not feasible:
        raise ValueError("initial coefficients are not feasible")

    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
    trace = OptTrace()
    start = clock()
    pbm = init
    f, g_r, g_t = grad_objective(cfg, corr, pbm, variant)
    if not np.isfinite(f):
        raise FloatingPointError("objective is not finite at the initial point")
    grad = np.concatenate([g_r, g_t])
    mu = mu_1
    trace.iterates.append((0, f, mu, float(np.linalg.norm(grad))))
    trace.wall_time.append(clock() - start)
    best, best_f = pbm, f
    trace.terminated_by = "max_iter"

    for it in range(1, max_iter + 1):
        new = proj(pbm.theta_r + mu * g_r, pbm.theta_t + mu * g_t)
        f_new, g_r_new, g_t_new = grad_objective(cfg, corr, new, variant)
        if not np.isfinite(f_new):
            raise FloatingPointError(f"objective is not finite at iteration {it}")
        grad_new = np.concatenate([g_r_new, g_t_new])
        trace.iterates.append((it, f_new, mu, float(np.linalg.norm(grad_new))))
        trace.wall_time.append(clock() - start)
        if f_new > best_f:
            best, best_f, trace.best_iteration = new, f_new, it
        if checkpoint_dir is not None and it % CHECKPOINT_EVERY == 0:
            checkpoint_dir.mkdir(parents=True, exist_ok=True)
            (checkpoint_dir / f"checkpoint_{it:04d}.json").write_text(best.to_json())
        rel = _relative_improvement(f_new, f)
        if 0 <= rel < epsilon:
            trace.terminated_by = "relative_improvement"
            break
        if step_rule != "fixed":
            mu = bb_step(pbm.stacked(), new.stacked(), grad, grad_new, mu, mu_1, step_rule)
        pbm, f, g_r, g_t, grad = new, f_new, g_r_new, g_t_new, grad_new
    return best, trace


def kkt_residual(cfg, corr, pbm, variant=None):
    """Norm of the objective gradient's component tangent to the feasible set.

    For each element pair the tangent space of ``|r|^2 + |t|^2 = 1`` is the
    orthogonal complement of the pair itself (in the real inner product).
    """
    variant = variant or make_variant(cfg, corr, "FD_STARS")
    _, g_r, g_t = grad_objective(cfg, corr, pbm, variant)
    pair = np.stack([pbm.theta_r, pbm.theta_t])
    grad = np.stack([g_r, g_t])
    radial = np.real(np.sum(pair.conj() * grad, axis=0)) / np.sum(np.abs(pair) ** 2, axis=0)
    return float(np.linalg.norm(grad - radial * pair))


def random_start(cfg, variant, seed):
    """Feasible random starting point for the given variant."""
    from .pbm import random_pbm, random_unit_modulus
    if variant.unit_modulus:
        rng = np.random.default_rng(seed)
        n = variant.R_s_r.shape[0]
        return PBM(random_unit_modulus(n, rng), random_unit_modulus(n, rng))
    return random_pbm(cfg.N, seed)


def trace_summary(trace):
    return json.dumps({"terminated_by": trace.terminated_by, "iterations": trace.n_iter,
                       "best_iteration": trace.best_iteration,
                       "best_objective": float(trace.objectives.max())}, sort_keys=True)


@dataclass
class RestartResult:
    seed: int
    restart: int
    pbm: PBM
    trace: OptTrace

    @property
    def objective(self):
        return float(self.trace.objectives.max())


def _one_restart(args):
    cfg, corr, variant, seed, i, kwargs = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
    pbm, trace = prog_ram(cfg, corr, random_start(cfg, variant, rng), variant, **kwargs)
    return RestartResult(seed, i, pbm, trace)


def multi_start(cfg, corr, variant=None, restarts=5, seed=None, jobs=1, **kwargs):
    """Run :func:`prog_ram` from ``restarts`` random points; results in restart order.

    Start ``i`` draws from the stream keyed by ``(seed, i)``, so the outcome
    does not depend on ``jobs``.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    variant = variant or make_variant(cfg, corr, "FD_STARS")
    seed = cfg.seed if seed is None else seed
    tasks = [(cfg, corr, variant, seed, i, kwargs) for i in range(restarts)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_one_restart, tasks))
    return [_one_restart(t) for t in tasks]


def best_restart(results):
    """Highest objective; ties go to the lowest restart index."""
    return max(results, key=lambda r: (r.objective, -r.restart))
