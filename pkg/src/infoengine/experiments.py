"""Named experiments run by the command-line tool.

Each runner receives validated parameters and writes its artifacts into
``out``; it returns a :class:`RunReport` that sets closed-form targets next
to the empirical results.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import continuous as ct
from . import gambling as gb
from . import memory as mem
from . import szilard as sz
from . import universal as uv
from .ledger import Ledger, dumps_json, format_float
from .prob_core import ChannelKernel, FinitePmf, JointPmf, mutual_information, symmetric_channel


@dataclass
class BoundCheck:
    """A named inequality ``value <= bound``."""

    name: str
    value: float
    bound: float

    @property
    def holds(self) -> bool:
        return bool(self.value <= self.bound)

    def to_dict(self):
        return {"name": self.name, "value": self.value, "bound": self.bound, "holds": self.holds}


@dataclass
class RunReport:
    experiment: str
    units: str = "nats"
    closed_form: float = math.nan
    empirical_mean: float = math.nan
    std_error: float = math.nan
    bound_checks: list = field(default_factory=list)
    artifact_paths: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.bound_checks)

    def check(self, name, value, bound):
        self.bound_checks.append(BoundCheck(name, float(value), float(bound)))

    def within_se(self, name, mean, target, se, k=3.0):
        self.check(name, abs(mean - target), k * se)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "units": self.units,
            "closed_form": self.closed_form,
            "empirical_mean": self.empirical_mean,
            "std_error": self.std_error,
            "bound_checks": [c.to_dict() for c in self.bound_checks],
            "artifact_paths": list(self.artifact_paths),
            "all_hold": self.ok,
            **self.extra,
        }


def emit_plot_data(ledger: Ledger, target: float, path) -> Path:
    """Write ``round, running_mean, target`` rows for plotting convergence."""
    if ledger.rounds == 0:
        raise ValueError("cannot emit plot data for an empty ledger")
    path = Path(path)
    cum = ledger.cumulative
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "running_mean_nats", "target_nats"])
        for i, c in enumerate(cum, start=1):
            w.writerow([i, format_float(c / i), format_float(target)])
    return path


def _save_ledger(report: RunReport, ledger: Ledger, out: Path, stem: str, target: float):
    report.artifact_paths.append(ledger.write_csv(out / f"{stem}.csv").name)
    report.artifact_paths.append(
        ledger.write_metadata(out / f"{stem}.meta.json", closed_form_nats=target).name)
    if ledger.rounds:
        report.artifact_paths.append(emit_plot_data(ledger, target, out / f"{stem}.plot.csv").name)


def _binary_joint(p):
    return JointPmf.from_channel(FinitePmf(p["prior"]), symmetric_channel(p["q"], len(p["prior"])))


def run_kelly(p, seed, rounds, out):
    joint = _binary_joint(p)
    strat = gb.kelly_strategy(joint)
    odds = gb.fair_odds(joint)
    target = mutual_information(joint)
    ledger = gb.simulate_gamble(strat, odds, joint, rounds, seed)
    r = RunReport("kelly", closed_form=target, empirical_mean=ledger.mean(), std_error=ledger.std_error())
    r.check("growth_rate_minus_mi", abs(gb.growth_rate(strat, odds, joint) - target), 1e-12)
    r.within_se("mc_mean_vs_mi", ledger.mean(), target, ledger.std_error())
    _save_ledger(r, ledger, out, "ledger", target)
    return r


def run_constrained(p, seed, rounds, out):
    joint = _binary_joint(p)
    res = gb.constrained_strategy(joint, p["candidates"])
    odds = gb.fair_odds(joint)
    target = mutual_information(joint) - res.loss
    ledger = gb.simulate_gamble(res.strategy, odds, joint, rounds, seed)
    r = RunReport("constrained", closed_form=target, empirical_mean=ledger.mean(), std_error=ledger.std_error(),
                  extra={"choices": list(res.choices), "loss_nats": res.loss})
    r.check("growth_identity", abs(gb.growth_rate(res.strategy, odds, joint) - target), 1e-12)
    r.within_se("mc_mean_vs_target", ledger.mean(), target, ledger.std_error())
    _save_ledger(r, ledger, out, "ledger", target)
    return r


def run_szilard(p, seed, rounds, out):
    config = sz.EngineConfig(FinitePmf(p["split"]), symmetric_channel(p["q"], len(p["split"])))
    joint = config.joint()
    proto = sz.optimal_protocol(joint.x_given_y())
    target = mutual_information(joint)
    ledger = sz.simulate_engine(config, proto, rounds, seed)
    r = RunReport("szilard", units="kBT", closed_form=target, empirical_mean=ledger.mean(),
                  std_error=ledger.std_error())
    r.check("expected_work_minus_mi", abs(sz.expected_work(config, proto) - target), 1e-12)
    r.within_se("mc_mean_vs_mi", ledger.mean(), target, ledger.std_error())
    _save_ledger(r, ledger, out, "ledger", target)
    return r


def run_multi_divider(p, seed, rounds, out):
    channel = ChannelKernel(p["channel"]) if p["channel"] is not None else symmetric_channel(p["q"], p["parts"])
    cap = sz.optimize_initial_split(channel, p["tolerance"])
    config = sz.EngineConfig(cap.split, channel)
    proto = sz.optimal_protocol(config.joint().x_given_y())
    ledger = sz.simulate_engine(config, proto, rounds, seed)
    r = RunReport("multi_divider", units="kBT", closed_form=cap.value, empirical_mean=ledger.mean(),
                  std_error=ledger.std_error(),
                  extra={"initial_split": cap.split.probs.tolist(), "split_unique": cap.unique})
    r.check("expected_work_minus_capacity", abs(sz.expected_work(config, proto) - cap.value), 1e-9)
    r.within_se("mc_mean_vs_capacity", ledger.mean(), cap.value, ledger.std_error())
    _save_ledger(r, ledger, out, "ledger", cap.value)
    return r


def run_continuous(p, seed, rounds, out):
    sys_ = ct.GaussianSystem(p["sigma_x_sq"], p["sigma_n_sq"])
    target = ct.gaussian_mi(sys_)
    chain = []
    for k in range(1, int(math.log2(p["bins"])) + 1):
        chain.append((2 ** k, mutual_information(ct.quantize(sys_, 2 ** k, p["span"]))))
    path = out / "refinement.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bins", "mi_nats", "closed_form_nats"])
        for b, v in chain:
            w.writerow([b, format_float(v), format_float(target)])
    final = chain[-1][1]
    r = RunReport("continuous", closed_form=target, empirical_mean=final, std_error=0.0,
                  artifact_paths=[path.name])
    r.check("relative_gap_to_closed_form", abs(final - target) / target, p["rel_tol"])
    r.check("quantized_above_closed_form", final - target, 1e-9)
    r.check("refinement_decrease", max([0.0] + [a[1] - b[1] for a, b in zip(chain, chain[1:])]), 0.0)
    return r


def run_spread(p, seed, rounds, out):
    sys_ = ct.GaussianSystem(p["sigma_x_sq"], p["sigma_n_sq"])
    joint = ct.quantize(sys_, p["bins"], p["span"])
    grid = ct.bin_edges(sys_.sigma_x, p["bins"], p["span"])
    market = ct.fair_spread_market(joint.px(), grid)
    alloc = ct.kelly_allocation(joint)
    target = mutual_information(joint)
    ledger = ct.simulate_spread_gamble(market, alloc, joint, rounds, seed)
    mpath = out / "market.json"
    mpath.write_text(dumps_json(market.to_dict()) + "\n")
    r = RunReport("spread", closed_form=target, empirical_mean=ledger.mean(), std_error=ledger.std_error(),
                  artifact_paths=[mpath.name])
    r.within_se("mc_mean_vs_quantized_mi", ledger.mean(), target, ledger.std_error())
    _save_ledger(r, ledger, out, "ledger", target)
    return r


def run_universal(p, seed, rounds, out):
    prior = FinitePmf(p["prior"])
    m = prior.size
    if p["sequences"]:
        xs, ys = uv.read_sequences(p["sequences"])
        k = p["k"] if p["k"] else (int(ys.max()) + 1 if ys.size else 1)
    else:
        k = p["k"] or m
        joint = JointPmf.from_channel(prior, symmetric_channel(p["q"], m).rows[:, :k]
                                      / symmetric_channel(p["q"], m).rows[:, :k].sum(axis=1, keepdims=True))
        xs, ys = uv.sample_sequences(joint, rounds, seed)
    odds = gb.fair_odds(prior)
    ledger = uv.run_universal(xs, ys, odds, k)
    rep = uv.regret_check(xs, ys, odds, k)
    engine = uv.run_universal_engine(xs, ys, prior, k)
    best = uv.best_constant_hindsight(xs, ys, odds, k)
    r = RunReport("universal", closed_form=best, empirical_mean=ledger.total, std_error=0.0,
                  extra={"regret": rep.to_dict()})
    r.check("regret_vs_bound", rep.regret, rep.bound + uv.REGRET_SLACK)
    r.check("engine_vs_gamble_ledger", float(np.max(np.abs(engine.increments - ledger.increments), initial=0.0)), 1e-12)
    r.artifact_paths.append(uv.write_sequences(out / "sequences.csv", xs, ys).name)
    rpath = out / "regret.json"
    rpath.write_text(dumps_json(rep.to_dict()) + "\n")
    r.artifact_paths.append(rpath.name)
    _save_ledger(r, ledger, out, "ledger", best / max(1, ledger.rounds))
    return r


def run_imperfect(p, seed, rounds, out):
    joint = _binary_joint(p)
    loss = np.asarray(p["loss"], dtype=float)
    odds = gb.unfair_odds(joint.px(), loss)
    skip = gb.unfair_skip_policy(joint, loss)
    never = gb.kelly_strategy(joint)
    with_skip = gb.simulate_gamble(skip, odds, joint, rounds, seed)
    without = gb.simulate_gamble(never, odds, joint, rounds, seed)
    diff = Ledger(with_skip.increments - without.increments, seed=seed)
    target = gb.growth_rate(skip, odds, joint)
    r = RunReport("imperfect", closed_form=target, empirical_mean=with_skip.mean(),
                  std_error=with_skip.std_error(),
                  extra={"skipped": skip.skip.tolist(), "no_skip_closed_form": gb.growth_rate(never, odds, joint)})
    r.check("skip_deficit_vs_noskip", -diff.mean(), 3 * diff.std_error() if diff.rounds > 1 else 0.0)
    r.within_se("mc_mean_vs_closed_form", with_skip.mean(), target, with_skip.std_error())
    _save_ledger(r, with_skip, out, "ledger", target)
    _save_ledger(r, without, out, "ledger_noskip", gb.growth_rate(never, odds, joint))
    return r


def run_memory(p, seed, rounds, out):
    model = mem.MarkovEngineModel(p["p"], p["q"])
    closed = mem.markov_engine_gain(model, p["n"])
    joint = mem.markov_engine_joint(model, p["n"])
    di = mem.directed_information(joint)
    gain = mem.causal_gain(joint)
    r = RunReport("memory", closed_form=closed, empirical_mean=di, std_error=0.0,
                  extra={"causal_gain_nats": gain, "per_cycle_nats": closed / p["n"]})
    r.check("enumeration_vs_closed_form", abs(di - closed), 1e-9)
    r.check("work_gain_vs_directed_information", abs(gain - di), 1e-12)
    return r


def run_hysteresis(p, seed, rounds, out):
    n = p["n"]
    if p["device"] == "noiseless":
        meas = mem.iid_laws([0.5, 0.5], np.eye(2), n)[1]
    elif p["device"] == "good_bad":
        meas = mem.good_bad_device_law(n, p["stay"])
    else:
        raise ValueError(f"unknown device {p['device']!r}")
    res = mem.hysteresis_maximize(meas, n, p["grid_step"])
    iid = mem.iid_laws([0.5, 0.5], np.eye(2), n)[0]
    base = mem.hysteresis_objective(iid, meas)
    di = mem.directed_information(mem.assemble_joint(iid, meas))
    lpath = out / "law.json"
    lpath.write_text(dumps_json(res.law.to_dict()) + "\n")
    r = RunReport("hysteresis", units="kBT", closed_form=res.value, empirical_mean=base, std_error=0.0,
                  artifact_paths=[lpath.name], extra={"iid_uniform_directed_information": di})
    r.check("iid_value_not_above_max", base - res.value, 1e-12)
    r.check("iid_value_vs_directed_information", abs(base - di), 1e-12)
    return r


def run_concavity(p, seed, rounds, out):
    rows = mem.concavity_sweep(p["instances"], p["n"], seed)
    path = out / "concavity.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "lambda", "lhs", "rhs", "slack"])
        for row in rows:
            w.writerow([row["seed"], format_float(row["lambda"]), format_float(row["lhs"]),
                        format_float(row["rhs"]), format_float(row["slack"])])
    worst = min((row["slack"] for row in rows), default=0.0)
    r = RunReport("concavity", closed_form=0.0, empirical_mean=worst, std_error=0.0,
                  artifact_paths=[path.name],
                  extra={"instances": len(rows), "all_instances_hold": all(row["holds"] for row in rows)})
    r.check("max_violation", -worst, 1e-9)
    return r


def run_analogy(p, seed, rounds, out):
    joint = _binary_joint(p)
    protocols = {"kelly": joint.x_given_y().rows}
    if p["protocol"] is not None:
        protocols["custom"] = ChannelKernel(p["protocol"]).rows
    r = RunReport("analogy", closed_form=mutual_information(joint), std_error=0.0)
    for name, rows_ in protocols.items():
        gamble, engine = gb.per_round_tables(joint, rows_)
        diff = np.abs(gamble - engine)
        with np.errstate(invalid="ignore"):
            r.check(f"{name}_per_round_gap", float(np.nan_to_num(diff, nan=0.0).max()), 1e-12)
        r.extra[f"{name}_agrees"] = gb.analogy_check(joint, rows_)
    r.empirical_mean = gb.growth_rate(gb.kelly_strategy(joint), gb.fair_odds(joint), joint)
    return r


@dataclass(frozen=True)
class Experiment:
    runner: Callable
    defaults: dict
    rounds: int = 10_000


BINARY = {"prior": [0.5, 0.5], "q": 0.25}

EXPERIMENTS = {
    "kelly": Experiment(run_kelly, dict(BINARY)),
    "constrained": Experiment(run_constrained, {**BINARY, "candidates": [[0.5, 0.5], [0.9, 0.1], [0.1, 0.9]]}),
    "szilard": Experiment(run_szilard, {"split": [0.5, 0.5], "q": 0.25}),
    "multi_divider": Experiment(run_multi_divider, {"parts": 3, "q": 0.1, "channel": None, "tolerance": 1e-10}),
    "continuous": Experiment(run_continuous, {"sigma_x_sq": 1.0, "sigma_n_sq": 1.0, "bins": 256, "span": 8.0,
                                              "rel_tol": 0.01}, rounds=0),
    "spread": Experiment(run_spread, {"sigma_x_sq": 1.0, "sigma_n_sq": 1.0, "bins": 32, "span": 4.0}),
    "universal": Experiment(run_universal, {**BINARY, "k": 0, "sequences": ""}, rounds=1000),
    "imperfect": Experiment(run_imperfect, {"prior": [0.7, 0.3], "q": 0.25, "loss": [0.1, 0.1]}),
    "memory": Experiment(run_memory, {"p": 0.1, "q": 0.2, "n": 4}, rounds=0),
    "hysteresis": Experiment(run_hysteresis, {"device": "good_bad", "stay": 0.9, "n": 2, "grid_step": 0.01}, rounds=0),
    "concavity": Experiment(run_concavity, {"instances": 1000, "n": 2}, rounds=0),
    "analogy": Experiment(run_analogy, {**BINARY, "protocol": None}, rounds=0),
}
