"""Seeded closed-loop rollouts and Monte Carlo estimation.

Every trial draws its initial state and noise from its own counter-based
streams (see :mod:`stlrisk.sim.rng`), so a trial's trace depends only on the
master seed and the trial index. Batches are simulated with vectorised numpy;
each row's arithmetic is independent of the batch it sits in, which makes
serial, batched and parallel execution bit-identical.
"""
from __future__ import annotations

import dataclasses
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from ..risk import SampleSet
from ..stl.constraint import ConstraintSpec, batch_trace_robustness
from ..stl.formula import Formula, formula_length, is_bounded
from ..stl.semantics import TraceTooShort, robustness_signal
from ..stl.trace import Trace
from .models import SystemModel
from .rng import Channel, stream

Controller = Callable[[np.ndarray], np.ndarray]


class TrialError(RuntimeError):
    """A trial failed; ``trial_index`` names it and ``__cause__`` holds the reason."""

    def __init__(self, trial_index: int, message: str):
        super().__init__(f"trial {trial_index}: {message}")
        self.trial_index = trial_index
        self.message = message

    def __reduce__(self):
        return type(self), (self.trial_index, self.message)


class NumericBlowup(TrialError):
    pass


@dataclasses.dataclass(frozen=True)
class TrialConfig:
    master_seed: int = 0
    horizon: int = 100
    trial_index: int = 0  # first trial index; Monte Carlo uses trial_index .. trial_index + n - 1
    chunk_size: int = 512  # trials per batch; fixed so results never depend on the worker count

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master seed must be an unsigned 64-bit integer")
        if self.trial_index < 0 or self.chunk_size < 1:
            raise ValueError("trial_index must be nonnegative and chunk_size positive")


def _draws(model: SystemModel, cfg: TrialConfig, indices: Sequence[int]):
    sys_ = model.system
    h = cfg.horizon
    x0, v, w, ctxs = [], [], [], []
    for i in indices:
        x0.append(sys_.initial_state(stream(cfg.master_seed, i, Channel.INITIAL)))
        v.append(sys_.process_noise(stream(cfg.master_seed, i, Channel.PROCESS), h))
        w.append(sys_.measurement_noise(stream(cfg.master_seed, i, Channel.MEASUREMENT), h))
        ctxs.append(model.perturbation.setup(sys_, stream(cfg.master_seed, i, Channel.PERTURBATION), h))
    ctx = {k: np.stack([c[k] for c in ctxs]) for k in ctxs[0]} if ctxs else {}
    return np.stack(x0).astype(float), np.stack(v), np.stack(w), ctx


def simulate(model: SystemModel, controller: Controller, cfg: TrialConfig, indices: Sequence[int],
             record_controls: bool = False):
    """Roll out the trials ``indices`` together.

    Returns states shaped ``(len(indices), horizon + 1, state_dim)`` and, with
    ``record_controls``, the controls ``(len(indices), horizon, control_dim)``.
    Trials that hit a terminal event keep their last state.
    """
    indices = [int(i) for i in indices]
    sys_, pert = model.system, model.perturbation
    x, v_all, w_all, ctx = _draws(model, cfg, indices)
    x = pert.initial(x, ctx)
    batch = len(indices)
    states = np.empty((batch, cfg.horizon + 1, sys_.state_dim))
    states[:, 0] = x
    controls = [] if record_controls else None
    alive = np.ones(batch, dtype=bool)
    for t in range(cfg.horizon):
        try:
            y = sys_.observe(x, pert.measurement(w_all[:, t], ctx, t))
        except Exception as exc:
            rows = getattr(exc, "rows", [0])
            raise TrialError(indices[int(rows[0])], str(exc)) from exc
        y = pert.observe(sys_, y, x, ctx, t)
        u = np.asarray(controller(y), dtype=float).reshape(batch, -1)
        nxt = sys_.step(x, u, pert.process(v_all[:, t], ctx, t))
        nxt = pert.step(sys_, nxt, x, u, ctx, t)
        nxt, ended = sys_.settle(x, nxt)
        nxt = np.where(alive[:, None], nxt, x)
        alive &= ~ended
        bad = ~np.all(np.isfinite(nxt), axis=1)
        if np.any(bad):
            raise NumericBlowup(indices[int(np.flatnonzero(bad)[0])], f"non-finite state at step {t + 1}")
        states[:, t + 1] = nxt
        if record_controls:
            controls.append(u)
        x = nxt
    if record_controls:
        return states, np.stack(controls, axis=1)
    return states


def run_trial(model: SystemModel, controller: Controller, cfg: TrialConfig) -> Trace:
    """The single trial ``cfg.trial_index``."""
    return Trace(simulate(model, controller, cfg, [cfg.trial_index])[0], dt=model.system.dt)


def _check_pair(nominal: SystemModel, perturbed: SystemModel):
    if nominal.state_dim != perturbed.state_dim:
        raise ValueError(
            f"paired models differ in state dimension: {nominal.state_dim} vs {perturbed.state_dim}"
        )


def run_paired(nominal: SystemModel, perturbed: SystemModel, controller: Controller,
               cfg: TrialConfig) -> Tuple[Trace, Trace]:
    """Nominal and perturbed rollouts of the same trial with common random numbers."""
    _check_pair(nominal, perturbed)
    return run_trial(nominal, controller, cfg), run_trial(perturbed, controller, cfg)


def trace_costs(spec: Union[Formula, ConstraintSpec], states: np.ndarray,
                until_inner: str = "open") -> np.ndarray:
    """Robustness costs ``Z = -rho`` for a stack of traces ``(batch, steps, dim)``."""
    if isinstance(spec, ConstraintSpec):
        return -batch_trace_robustness(spec, states)
    if is_bounded(spec):
        needed = formula_length(spec) + 1
        if needed > states.shape[1]:
            raise TraceTooShort(needed, states.shape[1])
    return -robustness_signal(spec, states, until_inner)[:, 0]


# Work shared with forked workers; set before the pool starts so nothing is pickled.
_JOB = None


def _chunk_costs(chunk: Tuple[int, int]) -> np.ndarray:
    kind, models, controller, spec, cfg, until_inner = _JOB
    idx = range(*chunk)
    if kind == "costs":
        return trace_costs(spec, simulate(models[0], controller, cfg, idx), until_inner)
    nom = simulate(models[0], controller, cfg, idx)
    per = simulate(models[1], controller, cfg, idx)
    out = [trace_costs(spec, nom, until_inner), trace_costs(spec, per, until_inner)]
    diff = per - nom
    if models[2] is not None:
        diff = diff * np.sqrt(models[2])
    out.append(np.max(np.linalg.norm(diff, axis=-1), axis=-1))
    return np.stack(out)


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def _run_chunks(job, n_trials: int, cfg: TrialConfig, jobs: Optional[int]):
    global _JOB
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    start = cfg.trial_index
    chunks = [(a, min(a + cfg.chunk_size, start + n_trials))
              for a in range(start, start + n_trials, cfg.chunk_size)]
    jobs = default_jobs() if jobs is None else int(jobs)
    _JOB = job
    try:
        if jobs <= 1 or len(chunks) == 1:
            parts = [_chunk_costs(c) for c in chunks]
        else:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=min(jobs, len(chunks)), mp_context=ctx) as pool:
                parts = list(pool.map(_chunk_costs, chunks))
    finally:
        _JOB = None
    return np.concatenate(parts, axis=-1)


def monte_carlo(model: SystemModel, controller: Controller, spec: Union[Formula, ConstraintSpec],
                n_trials: int, cfg: TrialConfig, jobs: Optional[int] = 1,
                support_bound: Optional[float] = None, until_inner: str = "open") -> SampleSet:
    """Robustness costs of ``n_trials`` independent seeded trials."""
    costs = _run_chunks(("costs", (model,), controller, spec, cfg, until_inner), n_trials, cfg, jobs)
    return SampleSet(costs, support_bound)


@dataclasses.dataclass(frozen=True)
class PairedResult:
    nominal: SampleSet
    perturbed: SampleSet
    gamma: SampleSet  # per-trial max_t ||x_bar(t) - x(t)||


def paired_monte_carlo(nominal: SystemModel, perturbed: SystemModel, controller: Controller,
                       spec: Union[Formula, ConstraintSpec], n_trials: int, cfg: TrialConfig,
                       jobs: Optional[int] = 1, support_bound: Optional[float] = None,
                       weights=None, until_inner: str = "open") -> PairedResult:
    """Common-random-number rollouts of both models: costs of each plus trace differences."""
    _check_pair(nominal, perturbed)
    w = None if weights is None else np.asarray(weights, dtype=float)
    out = _run_chunks(("paired", (nominal, perturbed, w), controller, spec, cfg, until_inner),
                      n_trials, cfg, jobs)
    return PairedResult(SampleSet(out[0], support_bound), SampleSet(out[1], support_bound), SampleSet(out[2]))
