"""Attack generators: SIR worm spread, DDoS flooding, reward poisoning and
black-box adversarial perturbation of the agent's observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kernel import RngStream
from .network import Infection, Topology
from .orchestration import Action, AgentModel, Discretizer, StateVector, features, with_features
from .trust import Packet

# compact state codes used by the vectorized SIR step
S, I, R = 0, 1, 2
_CODE = {Infection.SUSCEPTIBLE: S, Infection.INFECTED: I, Infection.RECOVERED: R}
_STATE = {v: k for k, v in _CODE.items()}


@dataclass
class SirConfig:
    p_inf: float = 0.05
    p_rec: float = 0.01
    tick: float = 100.0
    contact_graph: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))
    initial_infected: frozenset[int] = frozenset({0})

    def __post_init__(self):
        for name in ("p_inf", "p_rec"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        g = np.asarray(self.contact_graph, dtype=bool)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("contact_graph must be a square adjacency matrix")
        self.contact_graph = g
        self.initial_infected = frozenset(self.initial_infected)
        n = g.shape[0]
        if any(not 0 <= u < n for u in self.initial_infected):
            raise ValueError("initial_infected must be UE ids of the population")

    @property
    def n(self) -> int:
        return self.contact_graph.shape[0]

    def initial_states(self) -> np.ndarray:
        st = np.full(self.n, S, dtype=np.int8)
        st[list(self.initial_infected)] = I
        return st


def shared_bs_graph(topology: Topology) -> np.ndarray:
    """UEs are in contact iff they attach to the same base station."""
    bs = np.array([-1 if u.attached_bs is None else u.attached_bs for u in topology.ues])
    g = (bs[:, None] == bs[None, :]) & (bs[:, None] >= 0)
    np.fill_diagonal(g, False)
    return g


def sir_step(states: np.ndarray, cfg: SirConfig, rng: RngStream) -> np.ndarray:
    """One synchronous SIR tick on the contact graph.

    Susceptibles with ``k`` infected neighbours become infected with
    probability ``1 - (1 - p_inf)**k``; infected nodes recover with
    probability ``p_rec``. Both use the pre-step snapshot. One uniform is
    drawn per node per tick so stream consumption does not depend on state.

    >>> cfg = SirConfig(p_inf=1.0, p_rec=0.0, contact_graph=~np.eye(3, dtype=bool), initial_infected={0})
    >>> from es3asim.kernel import derive_stream
    >>> sir_step(cfg.initial_states(), cfg, derive_stream(1, "sir")).tolist()
    [1, 1, 1]
    """
    st = np.asarray(states)
    u = rng.vector(st.shape[0])
    k = cfg.contact_graph[:, st == I].sum(axis=1)
    p_catch = 1.0 - (1.0 - cfg.p_inf) ** k
    out = st.copy()
    out[(st == S) & (u < p_catch)] = I
    out[(st == I) & (u < cfg.p_rec)] = R
    return out


def sir_counts(states: np.ndarray) -> tuple[int, int, int]:
    return int((states == S).sum()), int((states == I).sum()), int((states == R).sum())


def apply_states(topology: Topology, states: np.ndarray) -> None:
    for ue, c in zip(topology.ues, states.tolist()):
        ue.infection = _STATE[c]


def states_of(topology: Topology) -> np.ndarray:
    return np.array([_CODE[u.infection] for u in topology.ues], dtype=np.int8)


@dataclass(frozen=True)
class AttackProfile:
    kind: str
    intensity: float
    start: float
    end: float
    target: int | None = None
    scope: str = "infected"

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("attack start must precede end")
        if self.kind == "Ddos" and self.intensity < 0:
            raise ValueError("DDoS rate must be >= 0")
        if self.kind == "Poisoning" and not 0 <= self.intensity <= 1:
            raise ValueError("poisoning intensity is a probability")
        if self.kind == "Adversarial" and self.intensity not in (0, 1, 2):
            raise ValueError("adversarial shift must be 0, 1 or 2 buckets")

    def active(self, t: float) -> bool:
        return self.start <= t < self.end

    @classmethod
    def from_spec(cls, a) -> "AttackProfile":
        return cls(a.kind, a.intensity, a.start, a.end, a.target, a.scope)


def ddos_generate(infected: Iterable[int], target, profile: AttackProfile, rng: RngStream,
                  t0: float | None = None, t1: float | None = None, first_id: int = 0) -> list[Packet]:
    """Flood packets from each infected UE toward ``target`` in ``[t0, t1)``.

    The window defaults to the profile's and is always clipped to it.
    Arrivals are Poisson at ``intensity`` packets/s per UE; UEs are visited
    in id order so the stream is reproducible.
    """
    lo = max(profile.start, profile.start if t0 is None else t0)
    hi = min(profile.end, profile.end if t1 is None else t1)
    rate_per_ms = profile.intensity / 1000.0
    out: list[Packet] = []
    if hi <= lo or rate_per_ms <= 0:
        return out
    dom = getattr(target, "id", target)
    pid = first_id
    for u in sorted(infected):
        t = lo + rng.exponential(1.0 / rate_per_ms)
        while t < hi:
            out.append(Packet(pid, u, t, dom, malicious=True, honest=False))
            pid += 1
            t += rng.exponential(1.0 / rate_per_ms)
    out.sort(key=lambda p: (p.time, p.ue_id))
    return out


def poison_feedback(reward: float, profile: AttackProfile, rng: RngStream) -> float:
    """Flip the reward's sign with probability ``intensity``."""
    if rng.random() < profile.intensity:
        return -reward
    return reward


def perturb_observation(state: StateVector, profile: AttackProfile, rng: RngStream | None,
                        model: AgentModel, actions: Sequence[Action], disc: Discretizer | None = None) -> StateVector:
    """Shift bucketed features by +/- intensity to lower the victim's greedy value.

    Features are visited in order. For each, both shifts are clamped and
    evaluated with the victim's Q-table and the one with the lowest greedy
    value is kept if it does not exceed the current one. This is a
    black-box stand-in for a gradient-sign attack. ``rng`` is unused; the
    attack is deterministic given the Q-table.
    """
    eps = int(profile.intensity)
    if eps == 0:
        return state
    d = disc or Discretizer()
    hi = d.ranges(len(state.load_buckets))
    f = features(state)
    best = model.value(state, actions)
    cur = state
    for i, top in enumerate(hi):
        pick = None
        for shift in (eps, -eps):
            g = list(f)
            g[i] = min(top - 1, max(0, g[i] + shift))
            if g[i] == f[i]:
                continue
            cand = with_features(cur, g)
            v = model.value(cand, actions)
            if v < best:
                best, pick = v, (g, cand)
        if pick is not None:
            f, cur = pick
    return cur
