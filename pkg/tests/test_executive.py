import io
import json
import random
import threading

import pytest

from drcom.bodies import calculation_descriptor, display_descriptor
from drcom.descriptor import serialize_descriptor
from drcom.executive import (
    AdmissionRejected,
    EventLoop,
    Executive,
    WrongState,
    read_log,
    replay,
)
from drcom.lifecycle import TRANSITIONS, EventKind, LifecycleEvent, is_legal
from drcom.lifecycle import LifecycleState as S
from drcom.registry import DuplicateName, UnknownId
from drcom.resolver import RejectAll
from drcom.rtsim import TaskBody, VirtualContainer

from conftest import FIGURE_XML
from helpers import comp, random_events, random_pool
from oracles import exact_sum


@pytest.fixture
def ex():
    return Executive(check_invariants=True)


def calc_disp(ex):
    return ex.install(calculation_descriptor(1000)), ex.install(display_descriptor(4))


# ----------------------------------------------------------------- install


def test_install_states(ex):
    c, d = calc_disp(ex)
    assert ex.state(c) is S.SATISFIED
    assert ex.state(d) is S.UNSATISFIED
    off = ex.install(comp("off", enabled=False))
    assert ex.state(off) is S.REGISTERED


def test_install_from_xml_text(ex):
    h = ex.install(FIGURE_XML)
    # camera needs xysize, which nothing provides
    assert ex.state(h) is S.UNSATISFIED
    assert "xysize" in ex.status(h)["reason"]


def test_install_duplicate_name(ex):
    ex.install(comp("a"))
    with pytest.raises(DuplicateName):
        ex.install(comp("a"))


# ------------------------------------------------------------------ enable


def test_enable(ex):
    p = ex.install(comp("p", provides=["x"]))
    ex.start(p)
    h = ex.install(comp("q", needs=["x"], enabled=False))
    assert ex.enable(h) is S.SATISFIED
    lonely = ex.install(comp("r", needs=["nothing"], enabled=False))
    assert ex.enable(lonely) is S.UNSATISFIED
    with pytest.raises(WrongState):
        ex.enable(p)


def test_disable_and_reenable(ex):
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    assert ex.disable(c) is S.UNSATISFIED
    assert ex.state(d) is S.UNSATISFIED
    assert ex.status(c)["enabled"] is False
    assert ex.enable(c) is S.SATISFIED
    # explicit disable clears the start intent, so nothing restarts
    assert ex.state(c) is S.SATISFIED


# ------------------------------------------------------------------- start


def test_start_calc_then_display(ex):
    c, d = calc_disp(ex)
    assert ex.start(c) is S.ACTIVE
    assert ex.state(d) is S.SATISFIED
    assert ex.start(d) is S.ACTIVE
    assert ex.registry.get(d).bindings[0].provider == c


def test_start_over_budget(ex):
    a = ex.install(comp("a", usage=0.7))
    b = ex.install(comp("b", usage=0.5))
    assert ex.state(b) is S.SATISFIED
    ex.start(a)
    with pytest.raises(AdmissionRejected):
        ex.start(b)
    assert ex.state(b) is S.UNSATISFIED
    assert "cpu-budget" in ex.status(b)["reason"]


def test_start_unsatisfied_is_wrong_state(ex):
    _, d = calc_disp(ex)
    with pytest.raises(WrongState):
        ex.start(d)


def test_external_reject_keeps_everything_unsatisfied():
    ex = Executive(external=RejectAll(), check_invariants=True)
    c = ex.install(calculation_descriptor())
    assert ex.state(c) is S.UNSATISFIED
    assert "external" in ex.status(c)["reason"]


# -------------------------------------------------------------------- stop


def test_stop_cascades(ex):
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    result = ex.dispatch(LifecycleEvent(EventKind.STOP, c))
    assert [(x.handle, x.old, x.new) for x in result.changes] == [
        (c, S.ACTIVE, S.SATISFIED),
        (d, S.ACTIVE, S.UNSATISFIED),
    ]
    assert ex.ledger.load(0) == 0.0


def test_stop_leaf_only_changes_itself(ex):
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    result = ex.dispatch(LifecycleEvent(EventKind.STOP, d))
    assert [x.handle for x in result.changes] == [d]
    assert ex.state(c) is S.ACTIVE


def test_stop_chain(ex):
    a = ex.install(comp("a", provides=["x"]))
    b = ex.install(comp("b", needs=["x"], provides=["y"]))
    c = ex.install(comp("c", needs=["y"]))
    for h in (a, b, c):
        ex.start(h)
    ex.stop(a)
    assert (ex.state(b), ex.state(c)) == (S.UNSATISFIED, S.UNSATISFIED)


def test_stop_terminates_tasks(ex):
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    ex.container.run_for(50_000_000)
    ex.stop(c)
    # the 4 Hz display drains its Terminate at its next 250 ms boundary
    ex.container.run_for(260_000_000)
    assert not ex.container.live_tasks()


def test_sticky_intent_restarts_consumer(ex):
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    ex.stop(c)
    ex.start(c)
    assert ex.state(d) is S.ACTIVE


def test_auto_restart_off():
    ex = Executive(auto_restart=False, check_invariants=True)
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    ex.stop(c)
    ex.start(c)
    assert ex.state(d) is S.SATISFIED


def test_display_started_first_follows_provider(ex):
    c, d = calc_disp(ex)
    with pytest.raises(WrongState):
        ex.start(d)
    ex.start(c)
    assert ex.state(d) is S.ACTIVE


def test_provider_swap_rebinds_survivor(ex):
    a = ex.install(comp("a", provides=["x"]))
    b = ex.install(comp("b", provides=["x"]))
    d = ex.install(comp("d", needs=["x"]))
    ex.start(a)
    ex.start(b)
    ex.start(d)
    assert ex.registry.get(d).bindings[0].provider == a
    result = ex.dispatch(LifecycleEvent(EventKind.STOP, a))
    assert ex.state(d) is S.ACTIVE
    assert [r.provider for r in result.rebinds] == [b]
    assert ex.registry.get(d).bindings[0].provider == b


# --------------------------------------------------------------- uninstall


def test_uninstall_active_cascades(ex):
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    ex.uninstall(c)
    assert c not in ex.registry
    assert ex.state(d) is S.UNSATISFIED
    assert ex.history[-1].changes[0].new is S.UNINSTALLED


def test_uninstall_registered_and_unknown(ex):
    h = ex.install(comp("x", enabled=False))
    result = ex.dispatch(LifecycleEvent(EventKind.UNINSTALL, h))
    assert [(c.old, c.new) for c in result.changes] == [(S.REGISTERED, S.UNINSTALLED)]
    with pytest.raises(UnknownId):
        ex.uninstall(h)


# -------------------------------------------------------- suspend / resume


def test_suspend_resume_keeps_binding_and_budget(ex):
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    assert ex.suspend(c) is S.SUSPENDED
    assert ex.state(d) is S.ACTIVE
    assert ex.ledger.load(0) == pytest.approx(0.35)
    assert ex.resume(c) is S.ACTIVE
    with pytest.raises(WrongState):
        ex.resume(c)


def test_set_property_reaches_task(ex):
    h = ex.install(FIGURE_XML.replace('<inport name="xysize" interface="RTAI.SHM" type="Integer"\nsize="400"/>', ""))
    ex.start(h)
    ex.set_property(h, "prox00", "7")
    assert ex.query([("prox00", "7")])[0].component_id == h
    ex.container.run_for(20_000_000)
    assert ex.container.context(h).properties["prox00"] == "7"


def test_set_property_type_checked(ex):
    h = ex.install(comp("x", props=[("p", "0")]))
    from drcom.descriptor import InvalidValue

    h2 = ex.install(FIGURE_XML)
    with pytest.raises(InvalidValue):
        ex.set_property(h2, "prox00", "seven")
    ex.set_property(h, "p", "anything")


# -------------------------------------------------------------- dispatch


def test_dispatch_empty_registry(ex):
    assert ex.dispatch(LifecycleEvent(EventKind.PROVIDER_APPEARED, None)).changes == []


def test_provider_appeared_reresolves(ex):
    c, d = calc_disp(ex)
    ex.registry.get(d).start_intent = True
    # force the provider active without settling, then announce it
    ex.ledger.commit(c, 0, 0.3)
    ex.container.activate(c, ex.registry.get(c).descriptor, [], {}, TaskBody())
    ex.registry.set_state(c, S.ACTIVE)
    result = ex.dispatch(LifecycleEvent(EventKind.PROVIDER_APPEARED, c))
    assert [(x.handle, x.new) for x in result.changes] == [(d, S.SATISFIED), (d, S.ACTIVE)]


def test_fault_in_task_body_departs_provider():
    class Boom(TaskBody):
        def step(self, ctx):
            if ctx.job == 3:
                raise RuntimeError("overrun")

    ex = Executive(implementations={"t.Boom": Boom}, check_invariants=True)
    p = ex.install(comp("p", provides=["x"], bincode="t.Boom"))
    q = ex.install(comp("q", needs=["x"]))
    ex.start(p)
    ex.start(q)
    ex.container.run_for(100_000_000)
    fault = ex.history[-1]
    assert fault.event.kind is EventKind.PROVIDER_DEPARTED
    assert (fault.changes[0].old, fault.changes[0].new) == (S.ACTIVE, S.UNSATISFIED)
    assert "overrun" in fault.changes[0].reason
    # the fault cleared the start intent: p is resolvable again but not restarted
    assert ex.state(p) is S.SATISFIED
    assert ex.state(q) is S.UNSATISFIED
    assert not ex.container.has_task(p) or ex.container.task(p).status.value != "Running"


def test_sequence_numbers_increase(ex):
    calc_disp(ex)
    seqs = [r.sequence_no for r in ex.history]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)


# ------------------------------------------------------------- invariants


def _assert_global(ex):
    for i in ex.registry:
        if i.state is S.ACTIVE:
            assert {b.consumer_port for b in i.bindings} == {p.name for p in i.descriptor.inports}
    for cpu in range(4):
        active = [i.descriptor.cpu_usage for i in ex.registry
                  if i.state in (S.ACTIVE, S.SUSPENDED) and i.descriptor.cpu == cpu]
        assert ex.ledger.load(cpu) == exact_sum(active)
        assert ex.ledger.load(cpu) <= ex.ledger.cap
    published = {i.id for i in ex.registry if i.state in (S.SATISFIED, S.ACTIVE, S.SUSPENDED)}
    assert {r.component_id for r in ex.registry.records()} == published
    tasks = {t.tcb.component_id for t in ex.container.live_tasks() if t.tcb.status.value != "Terminating"}
    assert tasks == {i.id for i in ex.registry if i.state in (S.ACTIVE, S.SUSPENDED)}


def test_randomized_sequences_keep_invariants():
    rng = random.Random(7)
    for _ in range(150):
        ex = Executive(cap=rng.choice([0.5, 0.8, 1.0]), policy=rng.choice(["util", "rm"]))
        for e in random_events(rng, random_pool(rng), 40):
            result = ex.dispatch(e)
            for change in result.changes:
                assert is_legal(change.old, change.new), change
            _assert_global(ex)
            if rng.random() < 0.2:
                ex.container.run_for(rng.randint(1, 30) * 1_000_000)


def test_liveness_single_consumer(ex):
    p = ex.install(comp("p", provides=["x"], usage=0.2))
    q = ex.install(comp("q", needs=["x"], usage=0.2))
    assert ex.state(q) is S.UNSATISFIED
    result = ex.dispatch(LifecycleEvent(EventKind.START, p))
    assert any(c.handle == q and c.old is S.UNSATISFIED for c in result.changes)


def test_transition_table_is_closed():
    for old, targets in TRANSITIONS.items():
        for new in S:
            assert is_legal(old, new) == (new in targets)
    assert TRANSITIONS[S.UNINSTALLED] == frozenset()


# ----------------------------------------------------------------- replay


def test_log_and_replay(tmp_path):
    path = tmp_path / "events.jsonl"
    ex = Executive(log=str(path), cap=0.9, policy="rm")
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    ex.stop(c)
    ex.log.close()
    config, records = read_log(str(path))
    assert config == {"cap": 0.9, "policy": "rm", "auto_restart": True, "strict_six": False, "resolver": None}
    assert len(records) == 5
    report = replay(str(path))
    assert report.identical, report.first_mismatch()


def test_replay_detects_divergence(tmp_path):
    ex = Executive()
    calc_disp(ex)
    lines = ex.log.lines[:]
    rec = json.loads(lines[1])
    rec["changes"][0]["new"] = "ACTIVE"
    lines[1] = json.dumps(rec, sort_keys=True)
    report = replay(lines)
    assert not report.identical
    assert report.first_mismatch() == 0


def test_replay_random_logs():
    rng = random.Random(11)
    for _ in range(30):
        ex = Executive(cap=rng.choice([0.6, 1.0]))
        for e in random_events(rng, random_pool(rng), 30):
            ex.dispatch(e)
        assert replay(ex.log.text()).identical


# -------------------------------------------------------------- event loop


def test_event_loop_matches_sequential_calls():
    rng = random.Random(3)
    pool = random_pool(rng)
    events = random_events(rng, pool, 60)

    direct = Executive()
    for e in events:
        direct.dispatch(e)

    looped = Executive()
    with EventLoop(looped) as loop:
        futures = [loop.submit(e) for e in events]
        results = [f.result() for f in futures]
    assert [r.transcript_line() for r in results] == [r.transcript_line() for r in direct.history]


def test_event_loop_concurrent_submitters_are_serialized():
    ex = Executive(check_invariants=True)
    descs = [comp(f"c{i}", usage=0.01) for i in range(40)]
    with EventLoop(ex) as loop:
        futures = []
        lock = threading.Lock()

        def worker(chunk):
            for d in chunk:
                f = loop.submit(LifecycleEvent(EventKind.INSTALL, d))
                with lock:
                    futures.append(f)

        threads = [threading.Thread(target=worker, args=(descs[i::4],)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        results = [f.result() for f in futures]
    by_seq = sorted(results, key=lambda r: r.sequence_no)
    assert [r.sequence_no for r in ex.history] == [r.sequence_no for r in by_seq]
    # handles follow processing order, which follows sequence numbers
    assert [r.handle for r in by_seq] == list(range(1, 41))
    assert replay(ex.log.text()).identical


def test_event_loop_call_runs_on_loop_thread():
    ex = Executive()
    with EventLoop(ex) as loop:
        name = loop.call(lambda: threading.current_thread().name).result()
    assert name == "drcom-executive"


# ---------------------------------------------------- reference trajectory


def test_settled_trajectory():
    ex = Executive(check_invariants=True)
    c, d = calc_disp(ex)
    ex.start(c)
    ex.start(d)
    ex.stop(c)
    assert ex.settled_states(d) == [S.UNSATISFIED, S.SATISFIED, S.ACTIVE, S.UNSATISFIED]
    assert ex.settled_states(c) == [S.SATISFIED, S.ACTIVE, S.SATISFIED]
