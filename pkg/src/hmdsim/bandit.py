"""Contextual bandit agent that picks (burst, rate) promotion thresholds.

The value network is a small numpy MLP trained as a one-step DQN: the
regression target for a transition is just its observed reward. Training
walks a curriculum of shrinking local allocations and memoises every
simulated (context, arm) reward, so each distinct pair is simulated once.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import PolicyContext, SimConfig, SimResult, run
from .memory import Placement
from .policies import Bandit, NoMigration

BURST_GRID: tuple[int, ...] = (0, 1, 2, 4, 8, 16)
RATE_GRID: tuple[float, ...] = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
CURRICULUM: tuple[float, ...] = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)
N_FEATURES = 4
MAGIC = b"HMDQ"
FILE_VERSION = 1
NORMALIZATION = "reward = -completion / completion(100% local, no migration)"


class AgentFileError(ValueError):
    pass


@dataclass(frozen=True)
class Context:
    """Normalized context features, in network input order."""

    local_alloc: float
    local_usage_peak: float
    remote_usage_peak: float
    network_traffic: float

    @classmethod
    def from_policy_context(cls, pc: PolicyContext) -> Context:
        return cls(*pc.vector().tolist())

    def vector(self) -> np.ndarray:
        return np.array(
            [self.local_alloc, self.local_usage_peak, self.remote_usage_peak, self.network_traffic],
            dtype=np.float64,
        )

    def key(self, decimals: int = 2) -> tuple[float, ...]:
        # +0.0 folds -0.0 into 0.0 so equal keys hash equally
        return tuple(round(float(v), decimals) + 0.0 for v in self.vector())

    def masked(self, alloc: bool = True, network: bool = True) -> Context:
        return dataclasses.replace(
            self,
            local_alloc=self.local_alloc if alloc else 0.0,
            network_traffic=self.network_traffic if network else 0.0,
        )


@dataclass(frozen=True)
class ActionPair:
    theta_burst: int
    theta_rate: float

    def policy(self) -> Bandit:
        return Bandit(self.theta_burst, self.theta_rate)


def arm_action(arm: int, bursts: Sequence[int] = BURST_GRID, rates: Sequence[float] = RATE_GRID) -> ActionPair:
    if not 0 <= arm < len(bursts) * len(rates):
        raise IndexError(f"arm {arm} out of range")
    return ActionPair(int(bursts[arm // len(rates)]), float(rates[arm % len(rates)]))


def action_arm(action: ActionPair, bursts: Sequence[int] = BURST_GRID, rates: Sequence[float] = RATE_GRID) -> int:
    return list(bursts).index(action.theta_burst) * len(rates) + list(rates).index(action.theta_rate)


class QNet:
    """Fully connected ReLU network with a linear output layer."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator) -> None:
        self.sizes = tuple(int(s) for s in sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(np.atleast_2d(x))[0]

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        grads: list[np.ndarray] = []
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            grads = [acts[i].T @ g, g.sum(axis=0)] + grads
            if i > 0:
                g = (g @ self.weights[i].T) * (acts[i] > 0)
        return grads


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params: list[np.ndarray], lr: float) -> None:
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


@dataclass(frozen=True)
class AgentConfig:
    hidden: tuple[int, ...] = (64, 64)
    learning_rate: float = 5e-4
    batch_size: int = 32
    buffer_size: int = 10_000
    exploration_fraction: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    optimizer: str = "adam"
    bursts: tuple[int, ...] = BURST_GRID
    rates: tuple[float, ...] = RATE_GRID
    seed: int = 0

    @property
    def n_arms(self) -> int:
        return len(self.bursts) * len(self.rates)


class BanditAgent:
    def __init__(self, config: AgentConfig = AgentConfig()) -> None:
        if config.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {config.optimizer!r}")
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.net = QNet((N_FEATURES, *config.hidden, config.n_arms), self.rng)
        self._reset_optimizer()
        self.buffer: deque[tuple[np.ndarray, int, float]] = deque(maxlen=config.buffer_size)

    def _reset_optimizer(self) -> None:
        opt = Adam if self.config.optimizer == "adam" else SGD
        self.optimizer = opt(self.net.params, self.config.learning_rate)

    @property
    def n_arms(self) -> int:
        return self.config.n_arms

    def action(self, arm: int) -> ActionPair:
        return arm_action(arm, self.config.bursts, self.config.rates)

    def q_values(self, context) -> np.ndarray:
        return self.net(_as_vector(context))[0]

    def greedy(self, context) -> int:
        return int(np.argmax(self.q_values(context)))  # first max wins

    def epsilon(self, episode: int, budget: int) -> float:
        """Linear decay over the first exploration_fraction of a budget."""
        cfg = self.config
        span = max(1.0, cfg.exploration_fraction * budget)
        frac = min(1.0, episode / span)
        return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)

    def remember(self, context, arm: int, reward: float) -> None:
        self.buffer.append((_as_vector(context), int(arm), float(reward)))

    def sample(self) -> list[tuple[np.ndarray, int, float]]:
        idx = self.rng.integers(0, len(self.buffer), self.config.batch_size)
        return [self.buffer[i] for i in idx]


def _as_vector(context) -> np.ndarray:
    if isinstance(context, Context):
        return context.vector()
    return np.asarray(context, dtype=np.float64)


def select_action(agent: BanditAgent, context, epsilon: float) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and agent.rng.random() < epsilon:
        return int(agent.rng.integers(agent.n_arms))
    return agent.greedy(context)


def update(agent: BanditAgent, transitions: Sequence[tuple]) -> float:
    """One gradient step on mean squared error of the chosen arms' values."""
    if not transitions:
        raise ValueError("empty batch")
    x = np.stack([_as_vector(c) for c, _, _ in transitions])
    arms = np.array([a for _, a, _ in transitions], dtype=np.int64)
    rewards = np.array([r for _, _, r in transitions], dtype=np.float64)
    if not np.all(np.isfinite(rewards)):
        raise ValueError("non-finite reward in batch")
    out, acts = agent.net.forward(x)
    rows = np.arange(len(arms))
    err = out[rows, arms] - rewards
    loss = float(np.mean(err**2))
    grad = np.zeros_like(out)
    grad[rows, arms] = 2.0 * err / len(arms)
    agent.optimizer.step(agent.net.params, agent.net.backward(acts, grad))
    return loss


def episode_reward(result: SimResult, baseline_time: float, requests: int | None = None, baseline_requests: int | None = None) -> float:
    """Negative normalized completion time.

    In request-serving mode ``requests`` is the number of requests the run
    served; the mock completion time is then 1 / throughput, normalized the
    same way against the baseline's 1 / throughput.
    """
    if baseline_time <= 0:
        raise ValueError("baseline_time must be positive")
    if requests is None:
        return -(result.completion_time / baseline_time)
    if requests <= 0:
        raise ValueError("requests must be positive")
    base_req = requests if baseline_requests is None else baseline_requests
    mock = result.completion_time / requests
    return -(mock / (baseline_time / base_req))


class RewardCache:
    """(quantized context, arm) -> reward; single writer, many readers."""

    def __init__(self) -> None:
        self._data: dict[tuple, float] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key) -> bool:
        return key in self._data

    def lookup(self, key: tuple, arm: int) -> float | None:
        value = self._data.get((key, arm))
        if value is None:
            self.misses += 1
        else:
            self.hits += 1
        return value

    def store(self, key: tuple, arm: int, reward: float) -> None:
        self._data[(key, arm)] = reward

    def items(self):
        return self._data.items()

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    def save(self, path: str | Path) -> None:
        rows = [{"context": list(k), "arm": a, "reward": r} for (k, a), r in self._data.items()]
        Path(path).write_text(json.dumps(rows))

    @classmethod
    def load(cls, path: str | Path) -> RewardCache:
        cache = cls()
        for row in json.loads(Path(path).read_text()):
            cache.store(tuple(row["context"]), int(row["arm"]), float(row["reward"]))
        return cache


@dataclass
class BanditEnv:
    """Simulation environment for one workload at a fixed background load.

    The context at an allocation is measured once with a probe run (local
    pages filled, no migration), so it only depends on the allocation and
    the environment. Ablation switches zero a feature or disable burst
    gating.
    """

    base: SimConfig
    use_burst: bool = True
    use_network: bool = True
    use_alloc: bool = True
    _contexts: dict = field(default_factory=dict, repr=False)
    _baseline: float | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if len(self.base.tenants) != 1:
            raise ValueError("bandit environment takes a single-tenant config")
        if len(self.base.tenants[0].trace) == 0:
            raise ValueError("workload trace is empty")

    @property
    def baseline_time(self) -> float:
        if self._baseline is None:
            full = self.base.with_tenant(local_alloc=1.0, placement=Placement.FILL_LOCAL, policy=NoMigration())
            self._baseline = run(full).completion_time
        return self._baseline

    def context(self, allocation: float) -> Context:
        if allocation not in self._contexts:
            probe = self.base.with_tenant(local_alloc=allocation, placement=Placement.FILL_LOCAL, policy=NoMigration())
            ctx = Context.from_policy_context(run(probe).context)
            self._contexts[allocation] = ctx.masked(self.use_alloc, self.use_network)
        return self._contexts[allocation]

    def policy(self, action: ActionPair) -> Bandit:
        burst = action.theta_burst if self.use_burst else 0
        return Bandit(burst, action.theta_rate)

    def simulate(self, allocation: float, action: ActionPair) -> SimResult:
        return run(self.base.with_tenant(local_alloc=allocation, policy=self.policy(action)))

    def reward(self, allocation: float, action: ActionPair) -> float:
        return episode_reward(self.simulate(allocation, action), self.baseline_time)


@dataclass
class AllocationLog:
    allocation: float
    context: Context
    arms: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    hits: int = 0
    misses: int = 0
    final_arm: int = -1

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    @property
    def distinct_simulations(self) -> int:
        return self.misses


@dataclass
class TrainingLog:
    allocations: list[AllocationLog] = field(default_factory=list)
    baseline_time: float = 0.0
    normalization: str = NORMALIZATION

    @property
    def distinct_simulations(self) -> int:
        return sum(a.misses for a in self.allocations)

    @property
    def hit_rate(self) -> float:
        hits = sum(a.hits for a in self.allocations)
        total = hits + self.distinct_simulations
        return hits / total if total else 0.0

    def records(self) -> list[str]:
        lines = [f"# normalization: {self.normalization}", f"# baseline_time={self.baseline_time!r}"]
        for a in self.allocations:
            ctx = ",".join(f"{v:.6g}" for v in a.context.vector())
            lines.append(
                f"allocation={a.allocation} episodes={len(a.arms)} hit_rate={a.hit_rate:.4f} "
                f"distinct_simulations={a.misses} final_arm={a.final_arm} context={ctx}"
            )
        return lines


def train_curriculum(
    agent: BanditAgent,
    env: BanditEnv,
    max_train: int,
    cache: RewardCache | None = None,
    allocations: Sequence[float] = CURRICULUM,
) -> TrainingLog:
    if max_train < 1:
        raise ValueError("max_train must be at least 1")
    cache = cache if cache is not None else RewardCache()
    log = TrainingLog(baseline_time=env.baseline_time)
    for allocation in allocations:
        ctx = env.context(allocation)
        key = ctx.key()
        entry = AllocationLog(allocation, ctx)
        for episode in range(max_train):
            arm = select_action(agent, ctx, agent.epsilon(episode, max_train))
            reward = cache.lookup(key, arm)
            if reward is None:
                reward = env.reward(allocation, agent.action(arm))
                cache.store(key, arm, reward)
                entry.misses += 1
            else:
                entry.hits += 1
            agent.remember(ctx, arm, reward)
            update(agent, agent.sample())
            entry.arms.append(arm)
            entry.rewards.append(reward)
        entry.final_arm = agent.greedy(ctx)
        log.allocations.append(entry)
    return log


def exhaustive_rewards(env: BanditEnv, allocation: float, n_arms: int, agent: BanditAgent, cache: RewardCache | None = None) -> np.ndarray:
    """Reward of every arm at one allocation, reusing cached entries."""
    key = env.context(allocation).key()
    out = np.empty(n_arms)
    for arm in range(n_arms):
        value = cache._data.get((key, arm)) if cache is not None else None
        if value is None:
            value = env.reward(allocation, agent.action(arm))
            if cache is not None:
                cache.store(key, arm, value)
        out[arm] = value
    return out


def save_agent(agent: BanditAgent, path: str | Path) -> None:
    cfg = agent.config
    parts = [MAGIC, struct.pack("<III", FILE_VERSION, len(cfg.bursts), len(cfg.rates))]
    parts.append(np.asarray(cfg.bursts, dtype="<f8").tobytes())
    parts.append(np.asarray(cfg.rates, dtype="<f8").tobytes())
    parts.append(struct.pack("<I", len(agent.net.weights)))
    for w in agent.net.weights:
        parts.append(struct.pack("<II", *w.shape))
    for w, b in zip(agent.net.weights, agent.net.biases):
        parts.append(w.astype("<f8").tobytes())
        parts.append(b.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_agent(path: str | Path, seed: int = 0) -> BanditAgent:
    data = Path(path).read_bytes()
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(data):
            raise AgentFileError(f"{path}: truncated agent file")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise AgentFileError(f"{path}: not an agent file")
    version, nb, nr = struct.unpack("<III", take(12))
    if version != FILE_VERSION:
        raise AgentFileError(f"{path}: unsupported version {version}")
    bursts = np.frombuffer(take(8 * nb), dtype="<f8")
    rates = np.frombuffer(take(8 * nr), dtype="<f8")
    (n_layers,) = struct.unpack("<I", take(4))
    shapes = [struct.unpack("<II", take(8)) for _ in range(n_layers)]
    sizes = [shapes[0][0]] + [s[1] for s in shapes]
    if sizes[0] != N_FEATURES or sizes[-1] != nb * nr or any(a[1] != b[0] for a, b in zip(shapes, shapes[1:])):
        raise AgentFileError(f"{path}: inconsistent layer shapes {shapes}")
    config = AgentConfig(
        hidden=tuple(sizes[1:-1]),
        bursts=tuple(int(b) for b in bursts),
        rates=tuple(float(r) for r in rates),
        seed=seed,
    )
    agent = BanditAgent(config)
    for i, (fan_in, fan_out) in enumerate(shapes):
        agent.net.weights[i][...] = np.frombuffer(take(8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out)
        agent.net.biases[i][...] = np.frombuffer(take(8 * fan_out), dtype="<f8")
    if pos != len(data):
        raise AgentFileError(f"{path}: trailing bytes after weights")
    agent._reset_optimizer()
    return agent
