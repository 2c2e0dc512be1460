"""``planverify`` command line.

Defaults come from ``data/defaults.json``; ``--config FILE`` overlays a
partial document of the same shape and flags override both.  Every run
writes ``manifest-<command>.json`` into ``--out`` with the argv, the
effective config and its digest, input digests, the seed protocol and the
SHA-256 of each output file.  Exit status: 0 success, 1 domain error,
2 usage error.

Scenarios are file paths or built-ins: ``builtin:easy``,
``builtin:difficult`` or ``builtin:suite`` (the 10-scenario jittered suite).
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from planverify import __version__, canonical
from planverify.dataset import DatasetConfig, EvaConfig, build_prediction_dataset, write_dataset
from planverify.engine import event_log_bytes, run_rollout, trajectory_csv
from planverify.errors import LoadError, PlanVerifyError
from planverify.harness.metrics import MetricWeights
from planverify.harness.plot import write_plot
from planverify.harness.report import rank_and_report, seed_spec
from planverify.harness.rubric import static_score
from planverify.harness.verify import monte_carlo_verify
from planverify.model import CandidatePlan, Intent, Scenario
from planverify.mpha import ABLATIONS, GeneratorConfig, PathfinderConfig, PlannerConfig, generate_candidates
from planverify.opponents import KINDS, OpponentConfig
from planverify.rng import ALGORITHM_ID
from planverify.scenarios import TEMPLATES, load_template, scenario_suite
from planverify.schema import (
    load_intent,
    load_plan,
    load_scenario,
    parse_seed_list,
    read_json,
    save_plan,
    scenario_digest,
)

BUILTIN = "builtin:"


class UsageError(Exception):
    pass


# -- config ---------------------------------------------------------------------


def default_config() -> dict:
    return json.loads(resources.files("planverify.data").joinpath("defaults.json").read_text("utf-8"))


def _merge(base: dict, over: dict, path: str = "$") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise LoadError(f"unknown config key {k!r}", path)
        out[k] = _merge(out[k], v, f"{path}.{k}") if isinstance(out[k], dict) and isinstance(v, dict) else v
    return out


def effective_config(args: argparse.Namespace) -> dict:
    cfg = default_config()
    if getattr(args, "config", None):
        cfg = _merge(cfg, read_json(args.config))
    opp = cfg["opponent"]
    for flag, key in (("opponent", "kind"), ("endpoint", "endpoint"), ("w_B", "w_B"), ("w_F", "w_F")):
        if getattr(args, flag, None) is not None:
            opp[key] = getattr(args, flag)
    if getattr(args, "seeds", None) is not None:
        cfg["seeds"] = args.seeds
    if getattr(args, "workers", None) is not None:
        cfg["workers"] = args.workers
    for key in ("window", "horizon", "stride"):
        if getattr(args, key, None) is not None:
            cfg["dataset"][key] = getattr(args, key)
    if getattr(args, "n", None) is not None:
        cfg["generator"]["n"] = args.n
    return cfg


def opponent_config(cfg: dict) -> OpponentConfig:
    try:
        return OpponentConfig(**cfg["opponent"])
    except (TypeError, ValueError) as exc:
        raise LoadError(str(exc), "$.opponent") from None


def metric_weights(cfg: dict) -> MetricWeights:
    m = {k: v for k, v in cfg["metrics"].items() if v is not None}
    try:
        return MetricWeights(**m)
    except (TypeError, ValueError) as exc:
        raise LoadError(str(exc), "$.metrics") from None


def generator_config(cfg: dict) -> GeneratorConfig:
    g = dict(cfg["generator"])
    g.pop("n", None)
    try:
        planner = dict(g.pop("planner"))
        planner["escort_offsets"] = tuple(tuple(o) for o in planner["escort_offsets"])
        return GeneratorConfig(pathfinder=PathfinderConfig(**g.pop("pathfinder")),
                               planner=PlannerConfig(**planner), **g)
    except (TypeError, ValueError, KeyError) as exc:
        raise LoadError(str(exc), "$.generator") from None


def seeds_of(cfg: dict) -> tuple[int, ...]:
    return parse_seed_list(cfg["seeds"], "$.seeds")


# -- inputs ---------------------------------------------------------------------------


def load_scenarios(specs: Sequence[str]) -> list[Scenario]:
    out: list[Scenario] = []
    for spec in specs:
        if spec.startswith(BUILTIN):
            name = spec[len(BUILTIN):]
            if name == "suite":
                out.extend(scenario_suite())
            elif name in TEMPLATES:
                out.append(load_template(name))
            else:
                raise UsageError(f"unknown built-in scenario {name!r}; expected suite or one of {TEMPLATES}")
        else:
            out.append(load_scenario(spec))
    return out


def load_plans(paths: Sequence[str]) -> list[CandidatePlan]:
    return [load_plan(p) for p in paths]


def file_digest(path: str | Path) -> str:
    return canonical.sha256_hex(Path(path).read_bytes())


class Run:
    """Collects outputs and writes the run manifest."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str], cfg: dict | None) -> None:
        self.args = args
        self.argv = list(argv)
        self.cfg = cfg
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []
        self.inputs: dict[str, str] = {}
        self.scenarios: dict[str, str] = {}
        self.seeds: tuple[int, ...] | None = None

    def input(self, path: str) -> None:
        if not path.startswith(BUILTIN):
            self.inputs[str(path)] = file_digest(path)

    def add_scenarios(self, scenarios: Sequence[Scenario]) -> None:
        for s in scenarios:
            self.scenarios[s.name] = scenario_digest(s)

    def write_bytes(self, name: str, data: bytes) -> Path:
        p = self.out / name
        p.write_bytes(data)
        self.outputs.append(p)
        return p

    def write_json(self, name: str, obj: Any) -> Path:
        return self.write_bytes(name, canonical.dump_bytes(obj) + b"\n")

    def finish(self) -> Path:
        manifest = {
            "command": self.argv,
            "tool_version": __version__,
            "config": self.cfg,
            "config_digest": canonical.digest(self.cfg) if self.cfg is not None else None,
            "inputs": self.inputs,
            "scenario_digests": self.scenarios,
            "seed_protocol": None if self.seeds is None else
            {"seeds": seed_spec(self.seeds), "algorithm_id": ALGORITHM_ID, "rollout_index": 0},
            "outputs": {str(p): file_digest(p) for p in self.outputs},
        }
        path = self.out / f"manifest-{self.args.command}.json"
        path.write_bytes(canonical.dump_bytes(manifest) + b"\n")
        return path


# -- subcommands ------------------------------------------------------------------


def cmd_plan(run: Run) -> int:
    a = run.args
    scenarios = load_scenarios([a.scenario])
    if len(scenarios) != 1:
        raise UsageError("plan takes exactly one scenario")
    scenario = scenarios[0]
    run.input(a.scenario)
    run.add_scenarios(scenarios)
    if a.intent:
        run.input(a.intent)
        intent = load_intent(a.intent)
    else:
        intent = Intent(a.target or scenario.core_target_id)
    plans = generate_candidates(intent, scenario, run.cfg["generator"]["n"], ablate=a.ablate,
                                config=generator_config(run.cfg))
    for plan in plans:
        path = run.out / f"plan-{plan.plan_id}.json"
        save_plan(plan, path)
        run.outputs.append(path)
        print(path)
    return 0


def cmd_verify(run: Run) -> int:
    a = run.args
    scenarios = load_scenarios(a.scenario)
    for s in a.scenario:
        run.input(s)
    for p in a.plans:
        run.input(p)
    run.add_scenarios(scenarios)
    run.seeds = seeds_of(run.cfg)
    report = rank_and_report(load_plans(a.plans), scenarios, opponent_config(run.cfg),
                             metric_weights(run.cfg), run.seeds, workers=run.cfg["workers"],
                             config={k: v for k, v in run.cfg.items() if k != "workers"})
    run.write_bytes("report.json", report.to_bytes() + b"\n")
    text = report.to_text()
    run.write_bytes("report.txt", text.encode("utf-8"))
    print(text, end="")
    return 0


def _single(run: Run) -> tuple[Scenario, CandidatePlan]:
    a = run.args
    scenarios = load_scenarios([a.scenario])
    if len(scenarios) != 1:
        raise UsageError("this command takes exactly one scenario")
    run.input(a.scenario)
    run.input(a.plan)
    run.add_scenarios(scenarios)
    run.seeds = (a.seed,)
    return scenarios[0], load_plan(a.plan)


def cmd_simulate(run: Run) -> int:
    scenario, plan = _single(run)
    rec = run_rollout(scenario, plan, opponent_config(run.cfg).build(), run.args.seed)
    run.write_json("record.json", rec.summary())
    run.write_bytes("events.jsonl", event_log_bytes(rec.events))
    run.write_bytes("trajectory.csv", trajectory_csv(rec).encode("utf-8"))
    print(f"{rec.outcome.value} at tick {rec.end_tick}  log_hash {rec.log_hash}")
    return 0


def cmd_replay(run: Run) -> int:
    a = run.args
    events = Path(a.events)
    record = Path(a.record) if a.record else events.with_name("record.json")
    run.input(str(events))
    expected = read_json(record).get("log_hash")
    if not isinstance(expected, str):
        raise LoadError("missing log_hash", str(record))
    actual = file_digest(events)
    if actual != expected:
        print(f"hash mismatch: expected {expected}, got {actual}")
        return 1
    if a.scenario and a.plan:
        a.seed = read_json(record)["seed"]["base_seed"]
        scenario, plan = _single(run)
        rec = run_rollout(scenario, plan, opponent_config(run.cfg).build(), a.seed)
        if rec.log_hash != expected:
            print(f"hash mismatch on re-simulation: expected {expected}, got {rec.log_hash}")
            return 1
    print("hash OK")
    return 0


def cmd_export_dataset(run: Run) -> int:
    a = run.args
    scenarios = load_scenarios(a.scenario)
    for s in a.scenario:
        run.input(s)
    for p in a.plans:
        run.input(p)
    run.add_scenarios(scenarios)
    run.seeds = seeds_of(run.cfg)
    opp = opponent_config(run.cfg)
    records = []
    for plan in load_plans(a.plans):
        for s in scenarios:
            records.extend(monte_carlo_verify(plan, s, opp, run.seeds, workers=run.cfg["workers"]).records)
    dcfg = DatasetConfig(**run.cfg["dataset"])
    eva = EvaConfig(**run.cfg["eva"])
    build = build_prediction_dataset(records, dcfg)
    for p in write_dataset(build, run.out, dcfg, eva):
        run.outputs.append(p)
    print(f"{len(build.samples)} samples, {build.skip_count} rollouts skipped (too short)")
    return 0


def cmd_score(run: Run) -> int:
    a = run.args
    scenarios = load_scenarios([a.scenario])
    if len(scenarios) != 1:
        raise UsageError("score takes exactly one scenario")
    run.input(a.scenario)
    run.add_scenarios(scenarios)
    rows = []
    for path in a.plans:
        run.input(path)
        plan = load_plan(path)
        rows.append({"plan_id": plan.plan_id, **static_score(plan, scenarios[0]).to_dict()})
    run.write_json("scores.json", rows)
    for r in rows:
        print(f"{r['plan_id']}: {r['total']:.4f}")
    return 0


def cmd_plot(run: Run) -> int:
    scenario, plan = _single(run)
    rec = run_rollout(scenario, plan, opponent_config(run.cfg).build(), run.args.seed)
    for p in write_plot(run.out, scenario, plan, rec):
        run.outputs.append(p)
        print(p)
    return 0


COMMANDS = {
    "plan": cmd_plan, "verify": cmd_verify, "simulate": cmd_simulate, "replay": cmd_replay,
    "export-dataset": cmd_export_dataset, "score": cmd_score, "plot": cmd_plot,
}


def _seed_arg(text: str) -> str:
    try:
        parse_seed_list(text)
    except PlanVerifyError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="planverify", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"planverify {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p: argparse.ArgumentParser, *, opponent: bool = False, seeds: bool = False) -> None:
        p.add_argument("--out", default="planverify_out", help="output directory")
        p.add_argument("--config", help="JSON overlay on the built-in defaults")
        if opponent:
            p.add_argument("--opponent", choices=KINDS)
            p.add_argument("--endpoint", help="external opponent endpoint (or $PLANVERIFY_OPPONENT_ENDPOINT)")
            p.add_argument("--w-B", dest="w_B", type=float, help="predictive opponent HighValue weight")
            p.add_argument("--w-F", dest="w_F", type=float, help="predictive opponent Ordinary weight")
        if seeds:
            p.add_argument("--seeds", type=_seed_arg, help="inclusive range a..b or comma list")
            p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("plan", help="generate candidate plans")
    p.add_argument("--scenario", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--intent", help="intent JSON file")
    g.add_argument("--target", help="core target id (default: the scenario's)")
    p.add_argument("-n", type=int, help="number of candidates")
    p.add_argument("--ablate", choices=ABLATIONS)
    common(p)

    p = sub.add_parser("verify", help="Monte-Carlo verification and PQS ranking")
    p.add_argument("--scenario", required=True, nargs="+")
    p.add_argument("--plans", required=True, nargs="+")
    common(p, opponent=True, seeds=True)

    for name, text in (("simulate", "one rollout with full event log"),
                       ("plot", "trajectory overlay SVG and CSV")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", required=True)
        p.add_argument("--plan", required=True)
        p.add_argument("--seed", type=int, default=1)
        common(p, opponent=True)

    p = sub.add_parser("replay", help="recheck an event log against its log_hash")
    p.add_argument("--events", required=True)
    p.add_argument("--record", help="record.json (default: next to the event log)")
    p.add_argument("--scenario", help="also re-simulate with this scenario")
    p.add_argument("--plan", help="also re-simulate with this plan")
    common(p, opponent=True)

    p = sub.add_parser("export-dataset", help="trajectory-prediction dataset from rollouts")
    p.add_argument("--scenario", required=True, nargs="+")
    p.add_argument("--plans", required=True, nargs="+")
    p.add_argument("--window", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--stride", type=int)
    common(p, opponent=True, seeds=True)

    p = sub.add_parser("score", help="static rubric only")
    p.add_argument("--scenario", required=True)
    p.add_argument("--plans", required=True, nargs="+")
    common(p)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = effective_config(args)
        if args.command == "replay" and not (args.scenario and args.plan):
            cfg = None
        run = Run(args, argv, cfg)
        if args.command == "replay" and bool(args.scenario) != bool(args.plan):
            raise UsageError("replay re-simulation needs both --scenario and --plan")
        status = COMMANDS[args.command](run)
        run.finish()
        return status
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"planverify: usage error: {exc}", file=sys.stderr)
        return 2
    except (PlanVerifyError, ValueError, OSError) as exc:
        print(f"planverify: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
