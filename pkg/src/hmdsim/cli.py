"""Command-line front end."""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import bandit, config, engine
from .policies import Bandit, Oracle
from .report import RunReport, table, to_csv
from .workload import TraceFormatError, save_trace

ABLATIONS = {
    "full": {},
    "no-burst": {"use_burst": False},
    "no-network": {"use_network": False},
    "no-alloc": {"use_alloc": False},
}


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config (default: $HMDSIM_CONFIG)")
    common.add_argument("--seed", type=int, help="workload and agent seed")
    common.add_argument("--policy", help="none | static | ewma | adaptive | bandit | oracle")
    common.add_argument("--local-alloc", type=float, help="local allocation, fraction of working set")
    common.add_argument("--contention", type=float, help="background contention phi")
    common.add_argument("--trace", help="trace file to replay")
    common.add_argument("--out", help="output path")
    common.add_argument("--agent", help="agent weight file")
    common.add_argument("--max-train", type=int, help="episodes per curriculum allocation")

    p = argparse.ArgumentParser(prog="hmdsim", description="Tiered-memory page migration simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a synthetic trace")
    sub.add_parser("run", parents=[common], help="simulate one configuration")
    sw = sub.add_parser("sweep", parents=[common], help="allocation x contention grid")
    sw.add_argument("--allocations", type=_floats, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    sw.add_argument("--contentions", type=_floats, default=[0.0])
    sw.add_argument("--jobs", type=int, help="worker processes")
    tr = sub.add_parser("train", parents=[common], help="train a bandit agent over the allocation curriculum")
    tr.add_argument("--cache", help="reward cache file, loaded if present and saved afterwards")
    sub.add_parser("eval", parents=[common], help="run a trained agent's greedy thresholds")
    orc = sub.add_parser("oracle", parents=[common], help="clairvoyant matching planner")
    orc.add_argument("--swaps", help="write the planned swaps as CSV")
    ab = sub.add_parser("ablate", parents=[common], help="bandit component ablation")
    ab.add_argument("--no-burst", action="store_true", help="disable burst-duration gating")
    ab.add_argument("--no-network", action="store_true", help="zero the network-traffic context feature")
    ab.add_argument("--no-alloc", action="store_true", help="zero the allocation context feature")
    ab.add_argument("--jobs", type=int, help="worker processes")
    sub.add_parser("keys", help="print the config key reference")
    return p


def _settings(args) -> configparser.ConfigParser:
    cp = config.load(args.config)
    if args.seed is not None:
        for section in ("workload", "bandit", "engine"):
            config.override(cp, section, "seed", args.seed)
    config.override(cp, "policy", "kind", args.policy)
    config.override(cp, "engine", "local_alloc", args.local_alloc)
    config.override(cp, "link", "background_fraction", args.contention)
    config.override(cp, "workload", "trace", args.trace)
    config.override(cp, "bandit", "max_train", args.max_train)
    return cp


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _report(label: str, sim: engine.SimConfig, result: engine.SimResult, baseline: float, **extra) -> RunReport:
    return RunReport(
        label=label,
        result=result,
        baseline_time=baseline,
        local_alloc=sim.tenants[0].local_alloc,
        contention=sim.link.background_fraction,
        capacity=sim.link.capacity,
        extra=extra,
    )


FAULT_NOTE = "hint-fault handling overhead is not charged separately; it is folded into cost.bookkeeping_k_time"


def _finish(reports: list[RunReport], cp, out: str | None, notes=()) -> None:
    print(table(reports))
    if out:
        Path(out).write_text(to_csv(reports, config.dump(cp), (FAULT_NOTE, *notes)))


def cmd_generate(args, cp) -> None:
    trace = config.build_trace(cp)
    if not args.out:
        raise config.ConfigError("generate needs --out")
    save_trace(trace, args.out)
    print(f"wrote {len(trace)} accesses over {trace.n_pages} pages to {args.out}")


def cmd_run(args, cp) -> None:
    sim = config.build_sim_config(cp)
    result = engine.run(sim)
    baseline = engine.full_local_baseline(sim).completion_time
    _finish([_report(sim.tenants[0].policy.name, sim, result, baseline)], cp, args.out)


def cmd_sweep(args, cp) -> None:
    sim = config.build_sim_config(cp)
    jobs = args.jobs if args.jobs is not None else int(cp.get("engine", "jobs"))
    rows = engine.sweep(sim, args.allocations, args.contentions, jobs=jobs)
    baseline = engine.full_local_baseline(sim).completion_time
    reports = [
        RunReport(sim.tenants[0].policy.name, row.result, baseline, row.allocation, row.contention, sim.link.capacity)
        for row in rows
    ]
    _finish(reports, cp, args.out)


def _env(cp, **flags) -> bandit.BanditEnv:
    sim = config.build_sim_config(cp, policy=Bandit())
    return bandit.BanditEnv(sim, **flags)


def cmd_train(args, cp) -> None:
    if not args.agent:
        raise config.ConfigError("train needs --agent for the weight file")
    env = _env(cp)
    agent = bandit.BanditAgent(config.build_agent_config(cp))
    cache = bandit.RewardCache.load(args.cache) if args.cache and Path(args.cache).is_file() else bandit.RewardCache()
    log = bandit.train_curriculum(agent, env, int(cp.get("bandit", "max_train")), cache)
    bandit.save_agent(agent, args.agent)
    if args.cache:
        cache.save(args.cache)
    lines = [config.REPORT_PREFIX + ln for ln in config.dump(cp).splitlines()] + log.records()
    _emit("\n".join(lines) + "\n", args.out)
    if args.out:
        print(f"trained {len(log.allocations)} allocations, {log.distinct_simulations} simulations, hit rate {log.hit_rate:.3f}")


def _evaluate(agent: bandit.BanditAgent, env: bandit.BanditEnv, allocation: float) -> tuple[int, engine.SimResult]:
    arm = agent.greedy(env.context(allocation))
    return arm, env.simulate(allocation, agent.action(arm))


def cmd_eval(args, cp) -> None:
    if not args.agent:
        raise config.ConfigError("eval needs --agent")
    agent = bandit.load_agent(args.agent)
    env = _env(cp)
    alloc = float(cp.get("engine", "local_alloc"))
    arm, result = _evaluate(agent, env, alloc)
    action = agent.action(arm)
    sim = env.base.with_tenant(local_alloc=alloc, policy=env.policy(action))
    rep = _report("bandit", sim, result, env.baseline_time, arm=arm, theta_burst=action.theta_burst, theta_rate=action.theta_rate)
    _finish([rep], cp, args.out)


def cmd_oracle(args, cp) -> None:
    sim = config.build_sim_config(cp, policy=Oracle())
    result = engine.run(sim)
    baseline = engine.full_local_baseline(sim).completion_time
    if args.swaps:
        lines = ["time_ps,promoted,demoted"] + [f"{t},{p},{d}" for t, p, d in result.swap_log]
        Path(args.swaps).write_text("\n".join(lines) + "\n")
    _finish([_report("oracle", sim, result, baseline, planned_swaps=len(result.swap_log))], cp, args.out)


def _ablation_cell(job: tuple[str, str, dict]) -> tuple[str, int, engine.SimResult, float]:
    config_text, label, flags = job
    cp = config.defaults()
    cp.read_string(config_text)
    env = _env(cp, **flags)
    agent = bandit.BanditAgent(config.build_agent_config(cp))
    bandit.train_curriculum(agent, env, int(cp.get("bandit", "max_train")))
    arm, result = _evaluate(agent, env, float(cp.get("engine", "local_alloc")))
    return label, arm, result, env.baseline_time


def cmd_ablate(args, cp) -> None:
    chosen = [name for name, on in (("no-burst", args.no_burst), ("no-network", args.no_network), ("no-alloc", args.no_alloc)) if on]
    labels = ["full"] + (chosen or ["no-burst", "no-network", "no-alloc"])
    text = config.dump(cp)
    jobs_list = [(text, label, ABLATIONS[label]) for label in labels]
    jobs = args.jobs if args.jobs is not None else int(cp.get("engine", "jobs"))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_ablation_cell, jobs_list))
    else:
        cells = [_ablation_cell(j) for j in jobs_list]
    sim = config.build_sim_config(cp, policy=Bandit())
    reports = [_report(label, sim, result, base, arm=arm) for label, arm, result, base in cells]
    _finish(reports, cp, args.out)


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "train": cmd_train,
    "eval": cmd_eval,
    "oracle": cmd_oracle,
    "ablate": cmd_ablate,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "keys":
        print(config.reference())
        return 0
    try:
        cp = _settings(args)
        COMMANDS[args.command](args, cp)
    except (OSError, ValueError, configparser.Error, TraceFormatError, bandit.AgentFileError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"hmdsim: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
