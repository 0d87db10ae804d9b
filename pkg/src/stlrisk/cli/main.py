"""Command-line entry point: ``stlrisk {verify,sweep-beta,gap,paired-gamma,wasserstein}``.

Every command reads a JSON experiment config, runs its Monte Carlo trials and
writes CSV tables plus a short text report into the output directory. Exit
codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import gap as gapmod
from .. import risk
from ..risk import InsufficientSamples, RiskQuery, SampleSet
from ..sim.engine import TrialConfig, default_jobs, monte_carlo, paired_monte_carlo, simulate
from ..stl.constraint import ConstraintSpec
from ..stl.formula import formula_length, is_bounded, to_pnf
from . import config as cfgmod
from .config import ConfigError, Experiment, RiskEntry
from .tables import histogram, wasserstein_1d, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
INSUFFICIENT = "InsufficientSamples"
NO_SUPPORT = "NoSupportBound"

VERIFY_HEADER = ["controller", "variant", "metric", "beta", "delta", "point", "upper_bound", "n"]


class RuntimeFailure(RuntimeError):
    pass


@dataclasses.dataclass
class Run:
    exp: Experiment
    jobs: int
    out: Path
    command: str
    files: List[str] = dataclasses.field(default_factory=list)
    _costs: Dict[Tuple[str, str], SampleSet] = dataclasses.field(default_factory=dict)

    def trial_config(self) -> TrialConfig:
        return TrialConfig(self.exp.master_seed, self.exp.horizon, 0, self.exp.chunk_size)

    def costs(self, controller: str, variant: str) -> SampleSet:
        key = (controller, variant)
        if key not in self._costs:
            self._costs[key] = monte_carlo(
                self.exp.variants[variant], self.exp.controllers[controller], self.exp.spec,
                self.exp.trials, self.trial_config(), jobs=self.jobs, until_inner=self.exp.until_inner,
            )
        return self._costs[key]

    def paired(self, controller: str, variant: str):
        weights = self.exp.gamma.get("weights")
        res = paired_monte_carlo(
            self.exp.variants["nominal"], self.exp.variants[variant], self.exp.controllers[controller],
            self.exp.spec, self.exp.trials, self.trial_config(), jobs=self.jobs, weights=weights,
            until_inner=self.exp.until_inner,
        )
        self._costs.setdefault((controller, "nominal"), res.nominal)
        self._costs.setdefault((controller, variant), res.perturbed)
        return res

    def write(self, name: str, header, rows) -> None:
        write_csv(self.out / name, header, rows)
        self.files.append(name)

    def report(self, lines: List[str]) -> None:
        exp = self.exp
        conventions = sorted({r.convention for r in exp.risk if r.metric == "CVaR"})
        head = [
            f"command: {self.command}",
            f"system: {exp.system_name}",
            f"variants: {', '.join(exp.variants)}",
            f"controllers: {', '.join(exp.controllers)}",
            f"specification: {exp.spec_text}",
            f"trials: {exp.trials}",
            f"master_seed: {exp.master_seed}",
            f"horizon: {exp.horizon} steps",
            f"until_inner: {exp.until_inner}",
            f"horizon_clipping: {'on (unbounded operators cut at the trace end)' if exp.horizon_clipped else 'off'}",
            f"cvar_bound_convention: {', '.join(conventions) if conventions else 'n/a'}",
            "robustness cost: Z = -rho (larger is riskier)",
        ]
        text = "\n".join(head + [""] + lines + ["", "files: " + ", ".join(self.files)]) + "\n"
        path = self.out / f"report_{self.command.replace('-', '_')}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _with_support(costs: SampleSet, entry: RiskEntry) -> SampleSet:
    if entry.support_bound is None:
        return costs
    values = costs.values
    if entry.clip_to_support:
        values = np.minimum(values, entry.support_bound)
    elif np.max(values) > entry.support_bound:
        raise RuntimeFailure(
            f"robustness costs reach {np.max(values):.6g}, above the support bound "
            f"{entry.support_bound:.6g}; raise the bound or set clip_to_support"
        )
    return SampleSet(values, entry.support_bound)


def _estimate(s: SampleSet, entry: RiskEntry):
    """``(point, upper)`` with ``upper`` possibly a marker string or ``None``."""
    q = RiskQuery(entry.beta, entry.delta)
    point = risk.point_estimate(s, entry.metric, entry.beta)
    if entry.metric == "CVaR" and s.support_bound is None:
        return point, NO_SUPPORT
    try:
        est = risk.estimate(s, entry.metric, q, entry.convention)
    except InsufficientSamples:
        return point, INSUFFICIENT
    return est.point, est.upper_bound


def _perturbed_variants(exp: Experiment, command: str) -> List[str]:
    names = [v for v in exp.variants if v != "nominal"]
    if not names:
        raise ConfigError(f"config field 'perturbations': {command} needs at least one perturbation")
    return names


def cmd_verify(run: Run) -> None:
    exp = run.exp
    rows = []
    for c in exp.controllers:
        for v in exp.variants:
            costs = run.costs(c, v)
            for entry in exp.risk:
                point, upper = _estimate(_with_support(costs, entry), entry)
                rows.append([c, v, entry.metric, entry.beta, entry.delta, point, upper, len(costs)])
    run.write("verify.csv", VERIFY_HEADER, rows)
    marked = sum(1 for r in rows if r[6] == INSUFFICIENT)
    run.report([f"rows: {len(rows)}", f"rows marked {INSUFFICIENT}: {marked}"])


def cmd_sweep_beta(run: Run, betas: Optional[List[float]]) -> None:
    exp = run.exp
    betas = exp.betas if betas is None else betas
    if not betas:
        raise ConfigError("config field 'betas': give at least one beta")
    if any(not 0 < b < 1 for b in betas):
        raise ConfigError("config field 'betas': every beta must lie in (0, 1)")
    rows = []
    for c in exp.controllers:
        for v in exp.variants:
            costs = run.costs(c, v)
            for b in betas:
                rows.append([c, v, b, risk.empirical_var(costs, b), risk.empirical_cvar(costs, b)])
    run.write("sweep_beta.csv", ["controller", "variant", "beta", "VaR", "CVaR"], rows)
    run.report([f"betas: {', '.join(format(b, '.6g') for b in betas)}", "values are plug-in estimates"])


def _deterministic_delta(exp: Experiment) -> Tuple[float, str]:
    g = exp.gap
    if g["method"] == "lipschitz":
        schedule = gapmod.lipschitz_delta(
            gapmod.LipschitzConstants(**g["constants"]),
            gapmod.DisturbanceBounds(g["v_star"], g["w_star"]),
            exp.horizon,
        )
        if isinstance(exp.spec, ConstraintSpec) or not is_bounded(exp.spec):
            return schedule.at(exp.horizon), f"Delta(T) with T = {exp.horizon}"
        length = formula_length(to_pnf(exp.spec))
        try:
            return gapmod.gap_bound_stl(0.0, schedule, 0, length), f"Delta(L) with formula length L = {length}"
        except gapmod.HorizonExceeded as exc:
            raise RuntimeFailure(str(exc)) from exc
    if "k" in g:
        gain = gapmod.IissGain(k=g["k"])
    else:
        try:
            gain = gapmod.linear_iiss_gain(g["a_cl"])
        except gapmod.NormNotContractive as exc:
            raise RuntimeFailure(f"gap: {exc}") from exc
    bound = gapmod.iiss_delta(gain, g["diameter"])
    return bound.delta, f"gamma(diameter) = {gain.k:.6g} * {g['diameter']:.6g}"


def _gamma_set(gamma: SampleSet, exp: Experiment) -> SampleSet:
    b = exp.gap.get("gamma_support_bound") if exp.gap else None
    b = exp.gamma.get("support_bound", b)
    return gamma if b is None else _with_support(gamma, RiskEntry("CVaR", support_bound=b))


def _gamma_risk(gamma: SampleSet, entry: RiskEntry, estimator: str) -> float:
    q = RiskQuery(entry.beta, entry.delta)
    if estimator == "upper" and entry.metric == "CVaR" and gamma.support_bound is None:
        raise ConfigError("config field 'gap/gamma_support_bound': the CVaR upper bound of Gamma needs a support bound")
    try:
        return gapmod.stochastic_gap(gamma, entry.metric, q, estimator, entry.convention)
    except InsufficientSamples as exc:
        raise RuntimeFailure(f"gap: R(Gamma) upper bound unavailable: {exc}") from exc


def cmd_gap(run: Run) -> None:
    exp = run.exp
    if not exp.gap:
        raise ConfigError("config field 'gap': the gap command needs a gap section")
    method = exp.gap["method"]
    estimator = exp.gap.get("estimator", "point")
    variants = _perturbed_variants(exp, "gap")
    notes = [f"gap method: {method}", f"estimator: {estimator} (empirical column is always the plug-in estimate)"]
    delta = None
    if method != "stochastic":
        delta, how = _deterministic_delta(exp)
        notes.append(f"Delta = {delta:.6g} from {how}")
    rows = []
    nominal_risk: Dict[Tuple[str, str, int], object] = {}
    gaps: Dict[Tuple[str, str, int], float] = {}
    for c in exp.controllers:
        for v in variants:
            if method == "stochastic":
                gamma = _gamma_set(run.paired(c, v).gamma, exp)
            nom, per = run.costs(c, "nominal"), run.costs(c, v)
            for i, entry in enumerate(exp.risk):
                point, upper = _estimate(_with_support(nom, entry), entry)
                r_nom = point if estimator == "point" else upper
                g = delta if method != "stochastic" else _gamma_risk(gamma, entry, estimator)
                empirical = risk.point_estimate(per, entry.metric, entry.beta)
                if isinstance(r_nom, str) or r_nom is None:
                    bound, verdict = None, r_nom or "no upper bound"
                else:
                    bound = r_nom + g
                    verdict = "holds" if bound >= empirical else "violated"
                nominal_risk[(c, v, i)] = r_nom
                gaps[(c, v, i)] = g
                rows.append([c, v, entry.metric, entry.beta, entry.delta, method, estimator,
                             r_nom, g, bound, empirical, verdict])
    run.write("gap.csv", ["controller", "variant", "metric", "beta", "delta", "method", "estimator",
                          "nominal_risk", "gap", "bound", "empirical", "verdict"], rows)
    violated = sum(1 for r in rows if r[-1] == "violated")
    notes.append(f"soundness: {'holds in every row' if violated == 0 else f'violated in {violated} row(s)'}")
    comparisons = []
    for c1, c2 in exp.gap.get("compare", []):
        for v in variants:
            for i, entry in enumerate(exp.risk):
                r1, r2 = nominal_risk[(c1, v, i)], nominal_risk[(c2, v, i)]
                g = max(gaps[(c1, v, i)], gaps[(c2, v, i)])
                if isinstance(r1, str) or isinstance(r2, str) or r1 is None or r2 is None:
                    result = "Inconclusive"
                else:
                    result = gapmod.compare_controllers(r1, r2, g).value
                comparisons.append([c1, c2, v, entry.metric, entry.beta, r1, r2, g, result])
    if comparisons:
        run.write("comparisons.csv", ["controller_1", "controller_2", "variant", "metric", "beta",
                                      "risk_1", "risk_2", "gap", "result"], comparisons)
        notes.append("comparison: Certified when risk_1 <= risk_2 - 2 * gap")
    run.report(notes)


def cmd_paired_gamma(run: Run) -> None:
    exp = run.exp
    hist_rows, risk_rows = [], []
    support = exp.gamma.get("support_bound")
    for c in exp.controllers:
        for v in _perturbed_variants(exp, "paired-gamma"):
            gamma = run.paired(c, v).gamma
            for b, lo, hi, count in histogram(gamma.values):
                hist_rows.append([c, v, b, lo, hi, count])
            gset = gamma if support is None else _with_support(gamma, RiskEntry("CVaR", support_bound=support))
            for entry in exp.risk:
                point, upper = _estimate(gset, entry)
                risk_rows.append([c, v, entry.metric, entry.beta, entry.delta, risk.worst_case_risk(gamma),
                                  point, upper, len(gamma)])
    run.write("gamma_hist.csv", ["controller", "variant", "bin", "lo", "hi", "count"], hist_rows)
    run.write("gamma_risk.csv", ["controller", "variant", "metric", "beta", "delta", "sup", "point",
                                 "upper_bound", "n"], risk_rows)
    run.report(["Gamma = max_t ||x_perturbed(t) - x_nominal(t)|| per paired trial (common random numbers)",
                "histogram: 40 equal-width bins over [0, max Gamma]; a single [0, 0] bin when Gamma is identically 0"])


def _commands(run: Run, variant: str, controller: str, channel: int) -> np.ndarray:
    exp = run.exp
    cfg = run.trial_config()
    out = []
    for start in range(0, exp.trials, exp.chunk_size):
        idx = range(start, min(start + exp.chunk_size, exp.trials))
        _, u = simulate(exp.variants[variant], exp.controllers[controller], cfg, idx, record_controls=True)
        if channel >= u.shape[-1]:
            raise ConfigError(f"config field 'wasserstein/channel': controller has {u.shape[-1]} outputs")
        out.append(u[..., channel].ravel())
    return np.concatenate(out)


def cmd_wasserstein(run: Run, a_path: Optional[str], b_path: Optional[str]) -> None:
    exp = run.exp
    w = exp.wasserstein or {}
    if a_path or b_path:
        if not (a_path and b_path):
            raise ConfigError("give both --a and --b")
        w = {"a": a_path, "b": b_path}
    if not w:
        raise ConfigError("config field 'wasserstein': missing (or pass --a and --b)")
    if "a" in w:
        try:
            a = SampleSet.from_csv(exp.base_dir / w["a"])
            b = SampleSet.from_csv(exp.base_dir / w["b"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config field 'wasserstein': {exc}") from exc
        label_a, label_b = Path(w["a"]).name, Path(w["b"]).name
    else:
        va, vb = w["variants"]
        ch = w.get("channel", 0)
        a = SampleSet(_commands(run, va, w["controller"], ch))
        b = SampleSet(_commands(run, vb, w["controller"], ch))
        label_a, label_b = f"{w['controller']}/{va}", f"{w['controller']}/{vb}"
    run.write("wasserstein.csv", ["a", "b", "n_a", "n_b", "w1"],
              [[label_a, label_b, len(a), len(b), wasserstein_1d(a, b)]])
    run.report(["W1 between the empirical distributions (quantile-function integral)"])


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stlrisk", description="Risk verification of STL robustness under model perturbations.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="experiment config (JSON)")
        sp.add_argument("--seed", type=int, help="master seed, overrides the config")
        sp.add_argument("--jobs", type=int, help="worker processes (default: available CPUs)")
        sp.add_argument("--out", help="output directory, overrides the config")
        return sp

    common(sub.add_parser("verify", help="risk estimates and bounds per controller and model variant"))
    sw = common(sub.add_parser("sweep-beta", help="VaR and CVaR over a list of risk levels"))
    sw.add_argument("--betas", help="comma-separated risk levels, overrides the config")
    common(sub.add_parser("gap", help="perturbed-risk bounds from a trajectory-error bound"))
    common(sub.add_parser("paired-gamma", help="trace-difference samples, histogram and risk"))
    ws = common(sub.add_parser("wasserstein", help="W1 distance between two sample sets"))
    ws.add_argument("--a", help="first sample file (CSV)")
    ws.add_argument("--b", help="second sample file (CSV)")
    return p


def _parse_betas(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"--betas: {exc}") from exc


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        exp = cfgmod.load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            exp.master_seed = args.seed
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out = Path(args.out) if args.out else exp.output
        run = Run(exp, args.jobs or default_jobs(), out, args.command)
        if args.command == "verify":
            cmd_verify(run)
        elif args.command == "sweep-beta":
            cmd_sweep_beta(run, _parse_betas(args.betas))
        elif args.command == "gap":
            cmd_gap(run)
        elif args.command == "paired-gamma":
            cmd_paired_gamma(run)
        else:
            cmd_wasserstein(run, args.a, args.b)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything raised while running the experiment
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name in run.files:
        print(out / name)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
