import pytest

from tvss import codec
from tvss.backend import BackendMonitor
from tvss.records import RevokeResult, TokenReport

from conftest import REGION_A, REGION_B, SPAN, W0, seeded


def rep(token, rsu=b"rsu-a", region=REGION_A, w=W0, pc=0, seq=1):
    return TokenReport(seeded(token), rsu, region, w, seeded(("pc", pc)), seq)


class Sink:
    def __init__(self, fail=0):
        self.commands, self.notices, self.snaps = [], [], []
        self.fail = fail

    def revoke(self, cmd):
        if self.fail:
            self.fail -= 1
            raise ConnectionError("ca down")
        self.commands.append(cmd)
        return RevokeResult(None, [])


def monitor(sink, **kw):
    m = BackendMonitor(sink.revoke, sink.notices.append, sink.snaps.append, 15, 4,
                       sleep=lambda s: None, **kw)
    m.advance_window(W0)
    return m


def test_clone_across_regions_detected_once():
    sink = Sink()
    m = monitor(sink)
    assert not m.ingest(rep("t", seq=1)).clone
    res = m.ingest(rep("t", rsu=b"rsu-b", region=REGION_B, pc=1, seq=1))
    assert res.clone and res.regions == (REGION_A, REGION_B)
    assert not m.ingest(rep("t", rsu=b"rsu-c", region=REGION_B, pc=2, seq=1)).clone
    assert m.stats.clones == 1


def test_retransmit_is_not_a_clone():
    m = monitor(Sink())
    m.ingest(rep("t", seq=1))
    assert not m.ingest(rep("t", seq=1)).clone
    assert m.stats.duplicates == 1


def test_same_rsu_second_pc_flags():
    m = monitor(Sink())
    m.ingest(rep("t", seq=1))
    assert m.ingest(rep("t", pc=9, seq=2)).clone


def test_sequence_gaps_counted():
    m = monitor(Sink())
    m.ingest(rep("a", seq=1))
    m.ingest(rep("b", seq=4))
    assert m.stats.seq_gaps == 2


def test_old_reports_dropped():
    m = monitor(Sink())
    m.advance_window(W0 + 10)
    m.ingest(rep("a", w=W0))
    assert m.stats.dropped == 1


def test_process_pending_revokes_with_offending_entries():
    sink = Sink()
    m = monitor(sink)
    m.enqueue(codec.encode(rep("t", seq=1)))
    m.enqueue(rep("t", rsu=b"rsu-b", region=REGION_B, pc=1, seq=1))
    m.enqueue(b"\xffgarbage")
    results = m.process_pending()
    assert sum(r.clone for r in results) == 1
    assert m.stats.dropped == 1
    (cmd,) = sink.commands
    assert cmd.token_id == seeded("t")
    assert {e.region for e in cmd.entries} == {REGION_A, REGION_B}
    assert all(e.expires_s == (W0 + 1) * SPAN for e in cmd.entries)


def test_revocation_retried_then_queued():
    sink = Sink(fail=7)
    m = monitor(sink, retries=5)
    m.ingest(rep("t", seq=1))
    m.on_clone(seeded("t"))
    assert m.pending_revocations == 1 and m.stats.revoke_failures == 1
    m.process_pending()
    assert m.pending_revocations == 0 and len(sink.commands) == 1


def test_backoff_doubles():
    sleeps = []
    sink = Sink(fail=3)
    m = BackendMonitor(sink.revoke, sink.notices.append, sink.snaps.append, 15, 4,
                       retries=5, backoff_s=0.1, sleep=sleeps.append)
    m.on_clone(seeded("t"))
    assert sleeps == pytest.approx([0.1, 0.2, 0.4])
