"""One simulated run: kernel handlers wiring topology, services, trust,
orchestration and attacks together.

Request life cycle (all times in ms)::

    AccessRequest --overhead--> PolicyDecision --offset--> PolicyDistributed
        [--> DomainSwitch] --> admission, NF slot or FIFO wait --> AuthComplete
        --> FeedbackDelivered (learning modes only)

Every access request draws the same bundle from the ``channel`` and
``latency`` streams whatever the architecture, so the modes differ only in
policy generation and action-space restriction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import ArchitectureMode, admission_threshold, centralized_policy
from .config import ScenarioConfig
from .kernel import EventKind, SimEvent, Simulator
from .metrics import MetricsReport, collect
from .network import Infection, SecurityDomain, Topology, build_topology, sample_channel_quality
from .orchestration import (
    AgentModel,
    Discretizer,
    MetricsWindow,
    SecurityAutomationManager,
    TokenVerificationFailed,
    agent_decide,
    feasible_actions,
    feedback,
    observe_state,
    switch_domain,
)
from .security import (
    AuthOutcome,
    AuthStatus,
    NfPool,
    ServiceParams,
    UnknownUe,
    draw_aka,
    draw_pls,
    resolve_auth,
)
from .threats import (
    AttackProfile,
    SirConfig,
    apply_states,
    ddos_generate,
    perturb_observation,
    poison_feedback,
    shared_bs_graph,
    sir_counts,
    sir_step,
)
from .trust import FilterParams, Packet, TrustRecord, apply_deferred, filter_packets, fuse_trust

# streams whose consumption must not depend on the architecture mode
MODE_INDEPENDENT_STREAMS = ("arrival", "channel", "latency", "traffic", "sir", "ddos")


class _Request:
    __slots__ = ("id", "ue", "t0", "policy", "state", "action", "overhead", "pls", "aka", "qf",
                 "infected", "enqueued_at", "done", "timeout_ev", "wait", "outcome", "is_packet")

    def __init__(self, rid, ue, t0):
        self.id = rid
        self.ue = ue
        self.t0 = t0
        self.enqueued_at = None
        self.done = False
        self.timeout_ev = None
        self.wait = 0.0
        self.outcome = None
        self.is_packet = False


class _QueuedPacket:
    __slots__ = ("enqueued_at", "done", "is_packet")

    def __init__(self, t):
        self.enqueued_at = t
        self.done = False
        self.is_packet = True


@dataclass
class RunOutput:
    trace: list[SimEvent]
    report: MetricsReport
    topology: Topology
    simulator: Simulator
    model: AgentModel | None
    # digest of the topology as built, before any mode flag or run state
    topology_digest: str = ""


class Simulation:
    def __init__(self, cfg: ScenarioConfig, mode: str | None = None, seed: int | None = None,
                 model: AgentModel | None = None):
        self.cfg = cfg
        self.mode = ArchitectureMode.of(mode or cfg.run.mode)
        self.seed = cfg.run.seed if seed is None else int(seed)
        self.sim = Simulator(self.seed)
        self.topology = build_topology(cfg, self.seed)
        self.topology_digest = self.topology.digest()
        self.params = ServiceParams.from_config(cfg.services)
        self.disc = Discretizer.from_config(cfg.agent)
        self.duration = cfg.run.duration_ms
        self.offsets = [float(o) for o in cfg.agent.slot_offsets]
        self.horizon = self.duration + self.params.nf_timeout_ms + max(self.offsets) + 1000.0

        tr = cfg.trust
        self.fparams = FilterParams(tr.t_th, tr.rate_cap_pps, tr.batch_ms, tr.w_mal, tr.decay_per_ms,
                                    tr.prior_alpha, tr.prior_beta)
        self.prior_mean = tr.prior_alpha / (tr.prior_alpha + tr.prior_beta)

        topo = self.topology
        self.dom_ids = sorted(topo.domains)
        m = self.mode
        for d in topo.domains.values():
            d.closed_loop = d.closed_loop and m.closed_loop
            d.customized_security = d.customized_security and m.customized_security
            d.interdomain_collab = d.interdomain_collab and m.interdomain_collab
        self.pools = {d: NfPool(topo.domains[d]) for d in self.dom_ids}
        self.batches: dict[int, list[Packet]] = {d: [] for d in self.dom_ids}
        self.queued_pkts = {d: 0 for d in self.dom_ids}
        self.central = SecurityDomain(-1, "central", closed_loop=False)
        self.deferred: list = []
        self.last_sync = 0.0

        self.thresholds = {u.id: admission_threshold(u, m, tr.t_th, tr.t_th_robust) for u in topo.ues}
        self.candidates = [[topo.candidate_bs(u, d) for d in self.dom_ids] for u in topo.ues]
        self.actions = []
        for u in topo.ues:
            if m.interdomain_collab:
                doms = [d for d in self.dom_ids if topo.domains[d].interdomain_collab or d == u.home_domain]
            else:
                doms = [u.home_domain]
            self.actions.append(feasible_actions(u, doms, self.offsets))

        self.model = None
        if m.uses_agent:
            self.model = model if model is not None else AgentModel.from_config(cfg.agent)
        self.window = MetricsWindow(weight=cfg.agent.delay_ewma)
        self.manager = SecurityAutomationManager(self.sim, topo)
        self.pending: dict[int, tuple] = {}
        self.requests: dict[int, _Request] = {}
        self._next_req = 0
        self._next_pkt = 0

        th = cfg.threat
        self.attacks = [AttackProfile.from_spec(a) for a in th.attacks if a.enabled]
        self.ddos = [a for a in self.attacks if a.kind == "Ddos"]
        self.poison = [a for a in self.attacks if a.kind == "Poisoning"]
        self.adversarial = [a for a in self.attacks if a.kind == "Adversarial"]
        self.sir_enabled = th.sir.enabled
        self.sir_cfg = SirConfig(th.sir.p_inf, th.sir.p_rec, th.sir.tick_ms, shared_bs_graph(topo),
                                 frozenset(th.sir.initial_infected) if topo.ues else frozenset())
        self.sir_states = np.zeros(len(topo.ues), dtype=np.int8)
        if self.sir_enabled or self.attacks:
            self.sir_states = self.sir_cfg.initial_states()
            apply_states(topo, self.sir_states)

        s = self.sim
        self.r_arrival = s.stream("arrival")
        self.r_channel = s.stream("channel")
        self.r_latency = s.stream("latency")
        self.r_traffic = s.stream("traffic")
        self.r_sir = s.stream("sir")
        self.r_ddos = s.stream("ddos")
        self.r_agent = s.stream("agent")
        self.r_attack = s.stream("attack")

        r = cfg.run
        self.per_iteration = r.requests_per_ue * r.scale
        self.mean_gap = None
        if r.arrival == "poisson" and self.per_iteration > 0:
            self.mean_gap = r.iteration_ms / self.per_iteration
        self.pkt_gap = 1000.0 / tr.benign_pps if tr.benign_pps > 0 else None

        K = EventKind
        for kind, h in (
            (K.ACCESS_REQUEST, self._on_access),
            (K.POLICY_DECISION, self._on_decision),
            (K.POLICY_DISTRIBUTED, self._on_distributed),
            (K.DOMAIN_SWITCH, self._on_switch),
            (K.AUTH_COMPLETE, self._on_complete),
            (K.FEEDBACK_DELIVERED, self._on_feedback),
            (K.PACKET_ARRIVAL, self._on_packet),
            (K.FILTER_BATCH, self._on_filter),
            (K.NF_RELEASE, self._on_release),
            (K.SIR_TICK, self._on_sir),
            (K.METRIC_SAMPLE, self._on_sample),
        ):
            s.on(kind, h)

    # --- setup -----------------------------------------------------------
    def _prime(self) -> None:
        s, dur = self.sim, self.duration
        if self.cfg.run.arrival == "rounds":
            self._schedule_rounds()
        for u in self.topology.ues:
            if self.mean_gap is not None:
                t = self.r_arrival.exponential(self.mean_gap)
                if t < dur:
                    s.schedule(t, EventKind.ACCESS_REQUEST, {"ue": u.id})
            if self.pkt_gap is not None:
                t = self.r_traffic.exponential(self.pkt_gap)
                if t < dur:
                    s.schedule(t, EventKind.PACKET_ARRIVAL, {"ue": u.id, "dom": u.home_domain, "mal": False})
        if self.topology.domains:
            s.schedule(self.fparams.window_ms, EventKind.FILTER_BATCH, {})
        if self.sir_enabled or self.ddos:
            s.schedule(0.0, EventKind.SIR_TICK, {})
        s.schedule(0.0, EventKind.METRIC_SAMPLE, {})

    def _schedule_rounds(self) -> None:
        # every UE issues floor(n) requests per iteration plus one more with
        # probability frac(n), at uniform times inside the spread window
        r = self.cfg.run
        whole = int(self.per_iteration)
        frac = self.per_iteration - whole
        arrivals = []
        start = 0.0
        while start < self.duration:
            for u in self.topology.ues:
                k = whole + (1 if frac > 0 and self.r_arrival.random() < frac else 0)
                for _ in range(k):
                    t = start + self.r_arrival.uniform(0.0, r.spread_ms)
                    if t < self.duration:
                        arrivals.append((t, u.id))
            start += r.iteration_ms
        arrivals.sort()
        for t, u in arrivals:
            self.sim.schedule(t, EventKind.ACCESS_REQUEST, {"ue": u})

    def run(self) -> RunOutput:
        self._prime()
        self.sim.run_until(self.horizon)
        deadline = self.cfg.topology.requirements["Sensor"].max_latency
        report = collect(self.sim.trace, deadline)
        return RunOutput(self.sim.trace, report, self.topology, self.sim, self.model, self.topology_digest)

    # --- trust helpers ---------------------------------------------------
    def _remote(self, u: int, dom: int) -> list[TrustRecord]:
        out = []
        for d in self.dom_ids:
            if d != dom:
                r = self.topology.domains[d].trust_store.get(u)
                if r is not None and r.own_evidence:
                    out.append(r)
        return out

    def _trust(self, u: int, dom: int, now: float) -> float:
        if not self.mode.distributed_trust:
            r = self.central.trust_store.get(u)
            return r.t_d if r is not None else self.prior_mean
        own = self.topology.domains[dom].trust_store.get(u)
        recs = ([own] if own is not None else []) + self._remote(u, dom)
        if not recs:
            return self.prior_mean
        return fuse_trust(recs, now, self.fparams.decay_per_ms).t_ue

    # --- request path ----------------------------------------------------
    def _on_access(self, ev: SimEvent) -> None:
        now = ev.time
        u = ev.payload["ue"]
        ue = self.topology.ues[u]
        rid = self._next_req
        self._next_req += 1
        ev.payload["req"] = rid
        req = _Request(rid, u, now)

        # fixed draw bundle, identical across modes
        jitter = self.cfg.topology.channel.jitter_sd
        f = ue.rf_fingerprint_quality
        req.qf = {d: sample_channel_quality(ue, bs, self.r_channel, jitter) * f
                  for d, bs in zip(self.dom_ids, self.candidates[u])}
        p = self.params
        req.pls = draw_pls(self.r_latency, p)
        req.aka = draw_aka(self.r_latency, p)
        req.overhead = self.r_latency.truncated_normal(p.overhead.mean, p.overhead.sd, 0.0)
        req.infected = ue.infection is Infection.INFECTED

        t_th = self.thresholds[u]
        req.state = req.action = None
        if self.model is None:
            req.policy = centralized_policy(ue, self.topology, t_th)
            explored = False
        else:
            model = self.model
            model.set_progress(now / self.duration)
            acts = self.actions[u]
            state = observe_state(ue, self.topology, self.window, self.disc)
            seen = state
            for a in self.adversarial:
                if a.active(now) and (a.scope == "all" or req.infected):
                    seen = perturb_observation(seen, a, None, model, acts, self.disc)
            dec = agent_decide(seen, model, self.r_agent, acts, u, t_th, req.overhead)
            req.policy, req.state, req.action = dec.policy, seen, dec.action
            explored = dec.explored
            self.pending[rid] = (seen, dec.action)
        self.requests[rid] = req

        if self.mean_gap is not None:
            t = now + self.r_arrival.exponential(self.mean_gap)
            if t < self.duration:
                self.sim.schedule(t, EventKind.ACCESS_REQUEST, {"ue": u})
        pol = req.policy
        self.sim.schedule(now + req.overhead, EventKind.POLICY_DECISION, {
            "req": rid, "ue": u, "method": pol.method.value, "domain": pol.domain_id,
            "offset": pol.slot_offset, "overhead": req.overhead, "explored": explored,
        })

    def _on_decision(self, ev: SimEvent) -> None:
        req = self.requests[ev.payload["req"]]
        self.manager.distribute(req.policy, ev.time, req.id)

    def _on_distributed(self, ev: SimEvent) -> None:
        req = self.requests[ev.payload["req"]]
        ue = self.topology.ues[req.ue]
        dst = req.policy.domain_id
        if self.mode.distributed_trust and ue.serving_domain != dst:
            self.sim.schedule(ev.time, EventKind.DOMAIN_SWITCH,
                              {"req": req.id, "ue": req.ue, "from": ue.serving_domain, "to": dst})
            return
        ue.serving_domain = dst
        self._admit(req, ev.time)

    def _on_switch(self, ev: SimEvent) -> None:
        req = self.requests[ev.payload["req"]]
        ue = self.topology.ues[req.ue]
        doms = self.topology.domains
        dst = doms[req.policy.domain_id]
        src = doms[ue.serving_domain]
        token = self.manager.tokens.pop(req.id, None)
        if token is not None and token.issuing_domain != src.id:
            token = None
        ok = True
        if ue.serving_domain != dst.id:
            try:
                switch_domain(ue, src, dst, ev.time, token, self.params.token_freshness_ms)
            except UnknownUe:
                # nothing to transfer yet
                ue.serving_domain = dst.id
            except TokenVerificationFailed:
                ok = False
        ev.payload["ok"] = ok
        if ok:
            self._admit(req, ev.time)
        else:
            self._finish_now(req, ev.time, AuthStatus.ACCESS_DENIED)

    def _admit(self, req: _Request, now: float) -> None:
        dom = req.policy.domain_id
        if self._trust(req.ue, dom, now) < req.policy.t_th:
            self._finish_now(req, now, AuthStatus.ACCESS_DENIED)
            return
        pool = self.pools[dom]
        if pool.try_acquire():
            self._start(req, now)
        else:
            req.enqueued_at = now
            pool.enqueue(req)
            req.timeout_ev = self.sim.schedule(now + self.params.nf_timeout_ms, EventKind.AUTH_COMPLETE,
                                               {"req": req.id, "status": AuthStatus.TIMEOUT.value})

    def _finish_now(self, req: _Request, now: float, status: AuthStatus) -> None:
        self.sim.schedule(now, EventKind.AUTH_COMPLETE, {"req": req.id, "status": status.value})

    def _start(self, req: _Request, now: float) -> None:
        if req.enqueued_at is not None:
            req.wait = now - req.enqueued_at
        dom = req.policy.domain_id
        out = resolve_auth(req.policy.method, req.qf[dom], req.pls, req.aka, self.params, dom, req.ue)
        req.outcome = out
        self.sim.schedule(now + out.service_ms, EventKind.AUTH_COMPLETE,
                          {"req": req.id, "status": AuthStatus.OK.value})

    def _on_complete(self, ev: SimEvent) -> None:
        now = ev.time
        p = ev.payload
        req = self.requests[p["req"]]
        status = AuthStatus(p["status"])
        pol = req.policy
        dom = pol.domain_id
        latency = now - req.t0
        if status is AuthStatus.OK:
            o = req.outcome
            method, service = o.method_used, o.service_ms
            self.pools[dom].release()
            self._drain(dom, now)
        else:
            if status is AuthStatus.TIMEOUT:
                req.done = True
                req.wait = now - req.enqueued_at
            method, service = pol.method, 0.0
        req.outcome = AuthOutcome(method, status is AuthStatus.OK, latency, dom, status, req.ue, req.id,
                                  service, req.wait, pol.slot_offset, req.overhead)
        ue = self.topology.ues[req.ue]
        p.update({
            "ue": req.ue, "cls": ue.ue_class.value, "method": method.value, "domain": dom,
            "home": ue.home_domain, "t0": req.t0, "latency": latency, "overhead": req.overhead,
            "offset": pol.slot_offset, "wait": req.wait, "service": service, "infected": req.infected,
        })
        self.window.push(latency)
        if self.model is not None:
            self.sim.schedule(now, EventKind.FEEDBACK_DELIVERED, {"req": req.id})
        else:
            del self.requests[req.id]

    def _on_feedback(self, ev: SimEvent) -> None:
        now = ev.time
        req = self.requests.pop(ev.payload["req"])
        ue = self.topology.ues[req.ue]
        transform = None
        for a in self.poison:
            if a.active(now) and (a.scope == "all" or ue.infection is Infection.INFECTED):
                transform = lambda r, a=a: poison_feedback(r, a, self.r_attack)  # noqa: E731
        if self.cfg.agent.episode == "continuing":
            nxt, acts = observe_state(ue, self.topology, self.window, self.disc), self.actions[req.ue]
        else:
            nxt, acts = None, ()
        feedback(req.outcome, self.model, self.pending, nxt, acts, transform)

    # --- NF pool ---------------------------------------------------------
    def _drain(self, dom: int, now: float) -> None:
        pool = self.pools[dom]
        svc = self.params.packet_service_ms
        while True:
            item = pool.pop_waiting(now)
            if item is None:
                return
            if item.is_packet:
                self.queued_pkts[dom] -= 1
                self.sim.schedule(now + svc, EventKind.NF_RELEASE, {"domain": dom})
            else:
                self.sim.cancel(item.timeout_ev)
                self._start(item, now)

    def _on_release(self, ev: SimEvent) -> None:
        dom = ev.payload["domain"]
        self.pools[dom].release()
        self._drain(dom, ev.time)

    # --- data plane ------------------------------------------------------
    def _on_packet(self, ev: SimEvent) -> None:
        p = ev.payload
        u = p["ue"]
        ue = self.topology.ues[u]
        pid = p.get("pkt")
        if pid is None:
            pid = p["pkt"] = self._next_pkt
            self._next_pkt += 1
        mal = p["mal"]
        honest = (not mal) and ue.infection is Infection.SUSCEPTIBLE
        p["honest"] = honest
        self.batches[p["dom"]].append(Packet(pid, u, ev.time, p["dom"], mal, honest))
        if not mal and self.pkt_gap is not None:
            t = ev.time + self.r_traffic.exponential(self.pkt_gap)
            if t < self.duration:
                self.sim.schedule(t, EventKind.PACKET_ARRIVAL, {"ue": u, "dom": ue.home_domain, "mal": False})

    def _on_filter(self, ev: SimEvent) -> None:
        now = ev.time
        fp = self.fparams
        thresholds = self.thresholds if self.mode.customized_security else None
        svc = self.params.packet_service_ms
        limit = self.params.packet_queue_limit
        rows = []
        for d in self.dom_ids:
            batch = self.batches[d]
            self.batches[d] = []
            if self.mode.distributed_trust:
                remote = {u: self._remote(u, d) for u in {pk.ue_id for pk in batch}}
                res = filter_packets(self.topology.domains[d], batch, now, fp, remote, thresholds)
            else:
                res = filter_packets(self.central, batch, now, fp, None, thresholds, self.deferred)
            pool = self.pools[d]
            tail = 0
            if svc > 0:
                for _ in res.passed:
                    if pool.try_acquire():
                        self.sim.schedule(now + svc, EventKind.NF_RELEASE, {"domain": d})
                    elif self.queued_pkts[d] < limit:
                        pool.enqueue(_QueuedPacket(now))
                        self.queued_pkts[d] += 1
                    else:
                        tail += 1
            rows.append({
                "id": d,
                "passed": len(res.passed),
                "tail_dropped": tail,
                "dropped": len(res.dropped),
                "mal_total": sum(1 for pk in batch if pk.malicious),
                "mal_dropped": sum(1 for pk in res.dropped if pk.malicious),
                "honest_total": sum(1 for pk in batch if pk.honest),
                "honest_dropped": sum(1 for pk in res.dropped if pk.honest),
            })
        if not self.mode.closed_loop and now - self.last_sync >= self.cfg.trust.central_sync_ms:
            apply_deferred(self.central.trust_store, self.deferred, self.central.id, fp.w_mal,
                           fp.prior_alpha, fp.prior_beta)
            self.last_sync = now
        ev.payload["domains"] = rows
        if now < self.duration:
            self.sim.schedule(now + fp.window_ms, EventKind.FILTER_BATCH, {})

    # --- threats ---------------------------------------------------------
    def _on_sir(self, ev: SimEvent) -> None:
        now = ev.time
        if self.sir_enabled and now > 0:
            self.sir_states = sir_step(self.sir_states, self.sir_cfg, self.r_sir)
            apply_states(self.topology, self.sir_states)
        s, i, r = sir_counts(self.sir_states)
        ev.payload.update({"S": s, "I": i, "R": r})
        tick = self.sir_cfg.tick
        t1 = min(now + tick, self.duration)
        for a in self.ddos:
            if a.scope == "all":
                senders = range(len(self.topology.ues))
            else:
                senders = np.flatnonzero(self.sir_states == 1).tolist()
            target = a.target if a.target is not None else self.dom_ids[0]
            pkts = ddos_generate(senders, target, a, self.r_ddos, now, t1, self._next_pkt)
            self._next_pkt += len(pkts)
            for pk in pkts:
                self.sim.schedule(pk.time, EventKind.PACKET_ARRIVAL,
                                  {"pkt": pk.id, "ue": pk.ue_id, "dom": target, "mal": True})
        if now + tick < self.duration:
            self.sim.schedule(now + tick, EventKind.SIR_TICK, {})

    def _on_sample(self, ev: SimEvent) -> None:
        ev.payload["domains"] = [
            {"id": d, "in_use": self.topology.domains[d].nf_in_use, "waiting": self.pools[d].waiting}
            for d in self.dom_ids
        ]
        nxt = ev.time + self.cfg.run.sample_ms
        if nxt < self.duration:
            self.sim.schedule(nxt, EventKind.METRIC_SAMPLE, {})


def simulate(cfg: ScenarioConfig, mode: str | None = None, seed: int | None = None,
             model: AgentModel | None = None) -> RunOutput:
    return Simulation(cfg, mode, seed, model).run()
