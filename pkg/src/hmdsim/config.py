"""INI configuration: defaults, key reference, and builders.

Every key has a default here, so a config file only lists what it changes.
The resolved settings (defaults + file + command-line overrides) are what
reports embed, which is what makes them replayable.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass
from pathlib import Path

from . import policies
from .bandit import AgentConfig
from .engine import LinkSettings, SimConfig, TenantConfig
from .memory import Placement
from .telemetry import TelemetryConfig
from .workload import GENERATORS, Trace, load_trace

ENV_VAR = "HMDSIM_CONFIG"
REPORT_PREFIX = "#! "


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    default: str
    help: str


KEYS: tuple[Key, ...] = (
    Key("workload", "trace", "", "trace file; empty means generate from the keys below"),
    Key("workload", "generator", "shifting", "stationary | shifting | zipf"),
    Key("workload", "n_pages", "512", "working-set size in pages"),
    Key("workload", "length", "200000", "number of accesses"),
    Key("workload", "seed", "1", "generator seed"),
    Key("workload", "compute_ns_per_access", "100", "compute time between accesses, ns"),
    Key("workload", "hot_fraction", "0.1", "stationary: fraction of pages that are hot"),
    Key("workload", "hot_prob", "0.9", "stationary: probability an access hits the hot set"),
    Key("workload", "window_pages", "64", "shifting: window size in pages"),
    Key("workload", "shift_every", "16000", "shifting: accesses between window moves"),
    Key("workload", "s", "1.1", "zipf: exponent"),
    Key("telemetry", "marking_interval", "0.001", "seconds between page markings"),
    Key("telemetry", "delta1", "0.2", "rate closeness for burst coalescing"),
    Key("telemetry", "delta2", "", "max mark gap for coalescing, seconds; empty = 2 x interval"),
    Key("telemetry", "ewma_alpha", "0.5", "EWMA weight of the newest rate sample"),
    Key("telemetry", "relative_delta1", "true", "delta1 is relative (true) or absolute accesses/s"),
    Key("link", "capacity", "12.5e9", "link capacity, bytes/s"),
    Key("link", "background_fraction", "0.0", "background contention phi in [0, 1)"),
    Key("link", "local_latency", "100", "local access latency, ns"),
    Key("link", "remote_base_latency", "900", "remote access latency before serialization, ns"),
    Key("link", "cacheline", "64", "bytes moved per remote access"),
    Key("cost", "page_size", "4096", "page size, bytes"),
    Key("cost", "bookkeeping_k_time", "1000", "fixed cost per migration, ns"),
    Key("cost", "lookahead", "", "seconds of future accesses a rate stands for; empty = marking interval"),
    Key("policy", "kind", "static", "none | static | ewma | adaptive | bandit | oracle"),
    Key("policy", "rate_cutoff", "1.0", "static/ewma: promote above this many accesses per lookahead"),
    Key("policy", "alpha", "0.5", "ewma: smoothing weight"),
    Key("policy", "threshold", "", "adaptive: benefit threshold, bytes; empty = one page"),
    Key("policy", "theta_burst", "0", "bandit: minimum burst duration, epochs"),
    Key("policy", "theta_rate", "0.0", "bandit: minimum accesses per lookahead"),
    Key("policy", "lookahead_epochs", "1", "oracle: epochs of future accesses weighed per swap"),
    Key("policy", "fill_epochs", "64", "oracle: epochs weighed per promotion into a free frame"),
    Key("bandit", "max_train", "2000", "episodes per curriculum allocation"),
    Key("bandit", "learning_rate", "0.0005", "optimizer step size"),
    Key("bandit", "batch_size", "32", "minibatch size"),
    Key("bandit", "buffer_size", "10000", "replay buffer length"),
    Key("bandit", "exploration_fraction", "0.1", "share of each allocation's budget spent decaying epsilon"),
    Key("bandit", "optimizer", "adam", "adam | sgd"),
    Key("bandit", "seed", "0", "agent initialization and exploration seed"),
    Key("engine", "local_alloc", "0.1", "local allocation, fraction of working set"),
    Key("engine", "placement", "all_remote", "all_remote | fill_local"),
    Key("engine", "contention", "", "schedule of t:phi steps, e.g. 0.01:0.5"),
    Key("engine", "slack_bytes", str(10 * 1024 * 1024), "gap between low and high watermark"),
    Key("engine", "seed", "0", "experiment seed recorded with results"),
    Key("engine", "jobs", "1", "worker processes for sweeps"),
)

SECTIONS = tuple(dict.fromkeys(k.section for k in KEYS))
_KNOWN = {(k.section, k.name) for k in KEYS}


class ConfigError(ValueError):
    pass


def defaults() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    for key in KEYS:
        if not cp.has_section(key.section):
            cp.add_section(key.section)
        cp.set(key.section, key.name, key.default)
    return cp


def _check(cp: configparser.ConfigParser, origin: str) -> None:
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for name in cp[section]:
            if (section, name) not in _KNOWN:
                raise ConfigError(f"{origin}: unknown key {section}.{name}")


def load(path: str | Path | None = None) -> configparser.ConfigParser:
    """Defaults, then the file (explicit path, else $HMDSIM_CONFIG).

    A report file is accepted too: its embedded config lines are used.
    """
    cp = defaults()
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return cp
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    embedded = [line[len(REPORT_PREFIX):] for line in text.splitlines() if line.startswith(REPORT_PREFIX)]
    if embedded:
        text = "\n".join(embedded)
    extra = configparser.ConfigParser(interpolation=None)
    try:
        extra.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}".splitlines()[0]) from None
    _check(extra, str(path))
    cp.read_dict(extra)
    return cp


def override(cp: configparser.ConfigParser, section: str, name: str, value) -> None:
    if (section, name) not in _KNOWN:
        raise ConfigError(f"unknown key {section}.{name}")
    if value is not None:
        cp.set(section, name, str(value))


def dump(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue().strip()


def reference() -> str:
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for key in KEYS:
            if key.section == section:
                lines.append(f"  {key.name:<22} default={key.default!r:<14} {key.help}")
    return "\n".join(lines)


def _opt_float(cp, section: str, name: str) -> float | None:
    raw = cp.get(section, name).strip()
    return float(raw) if raw else None


def _get(cp, section: str, name: str, conv):
    raw = cp.get(section, name).strip()
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"bad value for {section}.{name}: {raw!r}") from None


def build_trace(cp: configparser.ConfigParser) -> Trace:
    path = cp.get("workload", "trace").strip()
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"trace file not found: {path}")
        return load_trace(path)
    gen = cp.get("workload", "generator").strip()
    if gen not in GENERATORS:
        raise ConfigError(f"unknown generator {gen!r}")
    w = lambda name, conv: _get(cp, "workload", name, conv)  # noqa: E731
    common = dict(length=w("length", int), seed=w("seed", int), compute_ns_per_access=w("compute_ns_per_access", float))
    if gen == "stationary":
        return GENERATORS[gen](w("n_pages", int), w("hot_fraction", float), w("hot_prob", float), **common)
    if gen == "shifting":
        return GENERATORS[gen](w("n_pages", int), w("window_pages", int), w("shift_every", int), **common)
    return GENERATORS[gen](w("n_pages", int), w("s", float), **common)


def build_policy(cp: configparser.ConfigParser) -> policies.PolicyKind:
    kind = cp.get("policy", "kind").strip()
    p = lambda name, conv: _get(cp, "policy", name, conv)  # noqa: E731
    if kind == "none":
        return policies.NoMigration()
    if kind == "static":
        return policies.StaticThreshold(p("rate_cutoff", float))
    if kind == "ewma":
        return policies.EwmaThreshold(p("alpha", float), p("rate_cutoff", float))
    if kind == "adaptive":
        return policies.NetworkAdaptive(_opt_float(cp, "policy", "threshold"))
    if kind == "bandit":
        return policies.Bandit(p("theta_burst", int), p("theta_rate", float))
    if kind == "oracle":
        return policies.Oracle(p("lookahead_epochs", int), p("fill_epochs", int))
    raise ConfigError(f"unknown policy kind {kind!r}")


def parse_schedule(text: str) -> tuple[tuple[float, float], ...]:
    steps = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        t, sep, phi = item.partition(":")
        if not sep:
            raise ConfigError(f"bad contention step {item!r}; expected t:phi")
        steps.append((float(t), float(phi)))
    return tuple(steps)


def build_sim_config(cp: configparser.ConfigParser, trace: Trace | None = None, policy=None) -> SimConfig:
    trace = trace if trace is not None else build_trace(cp)
    policy = policy if policy is not None else build_policy(cp)
    f = lambda s, n: _get(cp, s, n, float)  # noqa: E731
    telemetry = TelemetryConfig(
        marking_interval=f("telemetry", "marking_interval"),
        delta1=f("telemetry", "delta1"),
        delta2=_opt_float(cp, "telemetry", "delta2"),
        ewma_alpha=f("telemetry", "ewma_alpha"),
        relative_delta1=cp.getboolean("telemetry", "relative_delta1"),
    )
    link = LinkSettings(
        capacity=f("link", "capacity"),
        background_fraction=f("link", "background_fraction"),
        local_latency=f("link", "local_latency"),
        remote_base_latency=f("link", "remote_base_latency"),
        cacheline=_get(cp, "link", "cacheline", int),
    )
    tenant = TenantConfig(
        trace=trace,
        policy=policy,
        local_alloc=f("engine", "local_alloc"),
        placement=Placement(cp.get("engine", "placement").strip()),
    )
    return SimConfig(
        tenants=(tenant,),
        telemetry=telemetry,
        link=link,
        page_size=_get(cp, "cost", "page_size", int),
        bookkeeping_k_time=f("cost", "bookkeeping_k_time"),
        lookahead=_opt_float(cp, "cost", "lookahead"),
        contention=parse_schedule(cp.get("engine", "contention")),
        slack_bytes=_get(cp, "engine", "slack_bytes", int),
        seed=_get(cp, "engine", "seed", int),
    )


def build_agent_config(cp: configparser.ConfigParser) -> AgentConfig:
    b = lambda name, conv: _get(cp, "bandit", name, conv)  # noqa: E731
    return AgentConfig(
        learning_rate=b("learning_rate", float),
        batch_size=b("batch_size", int),
        buffer_size=b("buffer_size", int),
        exploration_fraction=b("exploration_fraction", float),
        optimizer=cp.get("bandit", "optimizer").strip(),
        seed=b("seed", int),
    )
