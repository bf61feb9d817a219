import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from es3asim.network import SecurityDomain
from es3asim.trust import (
    EmptyRecordSet,
    FilterParams,
    MixedUeError,
    Observation,
    Packet,
    TrustRecord,
    access_decision,
    apply_deferred,
    dump_trust_csv,
    filter_packets,
    fuse_trust,
    update_trust,
)

B, M = Observation.BENIGN, Observation.MALICIOUS
obs_lists = st.lists(st.sampled_from([B, M]), max_size=60)
weights = st.floats(0.1, 10.0)


def _play(obs, w_mal=2.0, a=1.0, b=1.0):
    r = TrustRecord(0, 1, a, b)
    for i, o in enumerate(obs):
        r = update_trust(r, o, float(i), w_mal)
    return r


def test_benign_update():
    r = update_trust(TrustRecord(0, 1), B, 5.0)
    assert (r.alpha, r.beta, r.last_update) == (2.0, 1.0, 5.0)
    assert r.t_d == pytest.approx(2 / 3)


def test_malicious_update():
    r = update_trust(TrustRecord(0, 1), M, 5.0, w_mal=2.0)
    assert (r.alpha, r.beta) == (1.0, 3.0)
    assert r.t_d == pytest.approx(0.25)


def test_record_rejects_nonpositive():
    with pytest.raises(ValueError):
        TrustRecord(0, 1, 0.0, 1.0)


@given(obs_lists, weights, st.floats(0.01, 10), st.floats(0.01, 10))
def test_bounds(obs, w, a, b):
    r = _play(obs, w, a, b)
    assert r.alpha > 0 and r.beta > 0
    assert 0.0 < r.t_d < 1.0


@given(obs_lists, weights)
def test_monotone_damage(obs, w):
    r = _play(obs, w)
    assert update_trust(r, M, 99.0, w).t_d <= r.t_d
    assert update_trust(r, B, 99.0, w).t_d >= r.t_d


def test_convergence_under_sustained_attack():
    r = _play([M] * 200, 2.0)
    assert r.t_d < 0.05


@given(st.lists(st.tuples(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(0, 5000)), min_size=1, max_size=6),
       st.floats(0, 5000), st.floats(0, 0.01))
def test_fusion_sandwich(recs, now, lam):
    records = [TrustRecord(7, i, a, b, t) for i, (a, b, t) in enumerate(recs)]
    f = fuse_trust(records, now, lam)
    tds = [r.t_d for r in records]
    assert min(tds) <= f.t_ue <= max(tds)
    assert 0 < f.t_ue < 1
    ws = [w for _, w in f.contributing_domains]
    assert all(w > 0 for w in ws) and sum(ws) == pytest.approx(1.0)


def test_fusion_identity_and_symmetric():
    assert fuse_trust([TrustRecord(0, 1, 7, 3)], 0).t_ue == pytest.approx(0.7)
    two = [TrustRecord(0, 1, 4, 6, 10.0), TrustRecord(0, 2, 8, 2, 10.0)]
    assert fuse_trust(two, 50.0).t_ue == pytest.approx(0.6)


def test_fusion_staggered_matches_hand_computation():
    recs = [TrustRecord(0, 1, 3, 1, 0.0), TrustRecord(0, 2, 1, 4, 400.0), TrustRecord(0, 3, 2, 2, 900.0)]
    now, lam = 1000.0, 0.001
    raw = [math.exp(-lam * (now - r.last_update)) for r in recs]
    expect = sum(w * r.t_d for w, r in zip(raw, recs)) / sum(raw)
    f = fuse_trust(recs, now, lam)
    assert f.t_ue == pytest.approx(expect, rel=1e-12)
    assert [w for _, w in f.contributing_domains] == pytest.approx([w / sum(raw) for w in raw])


def test_fusion_errors():
    with pytest.raises(EmptyRecordSet):
        fuse_trust([], 0.0)
    with pytest.raises(MixedUeError):
        fuse_trust([TrustRecord(0, 1), TrustRecord(1, 2)], 0.0)


def test_access_boundary():
    assert access_decision(0.5, 0.5).allowed
    assert not access_decision(0.49, 0.5).allowed


@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_access_monotone(t1, t2, th):
    lo, hi = sorted((t1, t2))
    if access_decision(lo, th).allowed:
        assert access_decision(hi, th).allowed
    assert access_decision(t1, th).allowed == (t1 >= th)


# --- filtering -----------------------------------------------------------

def _dom():
    return SecurityDomain(1, "d")


def _pkts(ue, n, t0=0.0, dt=0.1, start_id=0, mal=False):
    return [Packet(start_id + i, ue, t0 + i * dt, 1, malicious=mal, honest=not mal) for i in range(n)]


def test_compliant_sources_pass():
    d = _dom()
    batch = _pkts(0, 5) + _pkts(1, 3, start_id=10)
    res = filter_packets(d, batch, 100.0, FilterParams())
    assert len(res.passed) == 8 and not res.dropped
    assert d.trust_store[0].alpha == 6.0


def test_flooder_hand_iteration():
    # 100x the 50 pkt/s cap inside one 100 ms batch is 500 packets; the first
    # five are within the allowance, then every packet adds w_mal to beta
    p = FilterParams()
    res = filter_packets(_dom(), _pkts(0, 500, dt=0.0002, mal=True), 100.0, p)
    a, b, dropped = p.prior_alpha, p.prior_beta, 0
    for n in range(1, 501):
        if a / (a + b) < p.t_th:
            dropped += 1
        if n > p.allowance:
            b += p.w_mal
        else:
            a += 1
    assert len(res.dropped) == dropped == 490


def test_flooder_blocked_within_one_batch_then_stays_blocked():
    d, p = _dom(), FilterParams()
    filter_packets(d, _pkts(0, 500, dt=0.0002, mal=True), 100.0, p)
    res = filter_packets(d, _pkts(0, 5, t0=100.0, start_id=1000, mal=True), 200.0, p)
    assert len(res.dropped) == 5


def test_filter_decision_consistency():
    d, p = _dom(), FilterParams()
    batch = _pkts(0, 50, dt=1.0, mal=True) + _pkts(1, 3, start_id=100)
    res = filter_packets(d, batch, 100.0, p)
    dropped = {k.id for k in res.dropped}
    for pid, t_ue in res.decisions:
        assert (pid in dropped) == (not access_decision(t_ue, p.t_th).allowed)


@given(st.lists(st.tuples(st.integers(0, 4), st.booleans()), max_size=120), st.integers(0, 2**16))
def test_filter_ignores_ground_truth(plan, salt):
    def run(flip):
        d = _dom()
        batch = [Packet(i, u, i * 0.5, 1, malicious=m ^ flip, honest=not (m ^ flip)) for i, (u, m) in enumerate(plan)]
        res = filter_packets(d, batch, 100.0, FilterParams())
        return [k.id for k in res.passed], res.decisions, {u: (r.alpha, r.beta) for u, r in d.trust_store.items()}

    assert run(False) == run(True)


def test_thresholds_override_default():
    d = _dom()
    d.trust_store[0] = TrustRecord(0, 1, 9, 11)  # 0.45
    res = filter_packets(d, _pkts(0, 1), 0.0, FilterParams(), thresholds={0: 0.5})
    assert len(res.dropped) == 1


def test_deferred_mode_does_not_touch_store_until_applied():
    d, p = _dom(), FilterParams()
    pending = []
    res = filter_packets(d, _pkts(0, 50, dt=1.0), 100.0, p, deferred=pending)
    assert len(res.passed) == 50
    assert (d.trust_store[0].alpha, d.trust_store[0].beta) == (1.0, 1.0)
    assert apply_deferred(d.trust_store, pending, 1, p.w_mal) == 50
    assert d.trust_store[0].alpha == 6.0 and d.trust_store[0].beta == 1.0 + 45 * 2.0
    assert pending == []


def test_remote_evidence_is_fused():
    d, p = _dom(), FilterParams()
    remote = {0: [TrustRecord(0, 2, 1, 30, 100.0)]}
    res = filter_packets(d, _pkts(0, 1), 100.0, p, remote=remote)
    assert len(res.dropped) == 1


def test_trust_csv_dump():
    d = _dom()
    d.trust_store[3] = TrustRecord(3, 1, 2.0, 2.0, 5.0)
    lines = dump_trust_csv([d]).splitlines()
    assert lines[0] == "ue_id,domain_id,alpha,beta,t_d,last_update"
    assert lines[1] == "3,1,2.0,2.0,0.5,5.0"
