import pytest

from tvss import codec, core, crypto
from tvss.ca import CAError, CertificateAuthority
from tvss.records import PcrlEntry, ValidityRequest
from tvss.tokenchain import derive_revoked, RevealPair

from conftest import REGION_A, REGION_B, SPAN, W0, World


def test_enroll_issues_valid_ec(world):
    key, ec = world.vehicle()
    assert core.verify_ec(ec, world.ca.vk)
    with pytest.raises(CAError) as e:
        world.ca.enroll(key.verification_key)
    assert e.value.code == "already_enrolled"


def test_token_gen_one_per_window(world):
    key, ec = world.vehicle()
    toks = world.tokens(key, ec, W0, 96)
    assert len(toks) == 96
    assert [t.tw.index for t in toks] == list(range(W0, W0 + 96))
    assert len({t.id for t in toks}) == 96
    assert all(core.validate_token(t, t.tw.start_s, world.ca.vk) is core.TokenStatus.OK
               for t in toks)


def test_token_ids_never_contain_ec_material(world):
    key, ec = world.vehicle()
    for t in world.tokens(key, ec, W0, 8):
        blob = codec.encode(t)
        assert ec.vk_v not in blob and ec.sigma_v not in blob


def test_token_gen_error_order(world):
    key, ec = world.vehicle()
    other_key, other_ec = world.vehicle()
    req = ValidityRequest(W0 * SPAN, (W0 + 2) * SPAN)
    proof = crypto.sign(key, codec.encode(req))

    def code(*args):
        with pytest.raises(CAError) as e:
            world.ca.token_gen(*args)
        return e.value.code

    stranger = core.setup(crypto.keygen(bytes(32)).verification_key, world.ca.key)
    assert code(stranger, req, proof) == "unknown_ec"
    assert code(ec, req, crypto.sign(other_key, codec.encode(req))) == "bad_proof"
    bad = ValidityRequest(W0 * SPAN + 1, (W0 + 2) * SPAN)
    assert code(ec, bad, crypto.sign(key, codec.encode(bad))) == "invalid_request"
    past = ValidityRequest((W0 - 1) * SPAN, W0 * SPAN)
    assert code(ec, past, crypto.sign(key, codec.encode(past))) == "stale_window"
    world.ca.token_gen(ec, req, proof)
    assert code(ec, req, proof) == "overlap"
    world.ca.revoke_vehicle(ec.vk_v)
    later = ValidityRequest((W0 + 5) * SPAN, (W0 + 6) * SPAN)
    assert code(ec, later, crypto.sign(key, codec.encode(later))) == "ec_revoked"


def test_sybil_overlap_partial(world):
    key, ec = world.vehicle()
    world.tokens(key, ec, W0, 10)
    with pytest.raises(CAError):
        world.tokens(key, ec, W0 + 9, 3)
    assert len(world.tokens(key, ec, W0 + 10, 3)) == 3


def test_gap_between_batches_skips_chain_positions(world):
    key, ec = world.vehicle()
    a = world.tokens(key, ec, W0, 2)
    b = world.tokens(key, ec, W0 + 5, 2)
    assert len({t.id for t in a + b}) == 4
    rec = world.ca.vehicles[ec.vk_v]
    assert rec.issued_ranges == [(W0, W0 + 1), (W0 + 5, W0 + 6)]


def test_find_owner_current_and_lookback(world):
    key, ec = world.vehicle()
    toks = world.tokens(key, ec, W0, 8)
    assert world.ca.find_owner(toks[0].id) == ec.vk_v
    assert world.ca.find_owner(toks[1].id) is None  # only the current window is indexed
    for _ in range(2):
        world.advance()
    assert world.ca.find_owner(toks[2].id) == ec.vk_v
    assert world.ca.find_owner(toks[0].id) == ec.vk_v  # from the look-back ring
    for _ in range(world.ca.lookback + 1):
        world.advance()
    assert world.ca.find_owner(toks[0].id) is None


def test_revoke_notice_covers_current_through_last(world):
    key, ec = world.vehicle()
    toks = world.tokens(key, ec, W0, 10)
    world.advance()
    world.advance()
    notice, snaps = world.ca.revoke_by_token(toks[2].id)
    assert (notice.first_index, notice.last_index) == (W0 + 2, W0 + 9)
    pair = RevealPair(notice.x_prev, notice.r_prev, notice.first_index, notice.last_index)
    assert derive_revoked(pair) == [t.id for t in toks[2:]]
    assert crypto.verify(world.ca.vk, notice.signed_part(), notice.sigma)
    assert world.ca.is_blacklisted(ec)
    assert snaps == []


def test_revoke_without_remaining_tokens_gives_no_notice(world):
    key, ec = world.vehicle()
    toks = world.tokens(key, ec, W0, 1)
    notice, _ = world.ca.revoke_by_token(toks[0].id)
    assert notice is not None  # current window still counts
    key2, ec2 = world.vehicle()
    assert world.ca.revoke_vehicle(ec2.vk_v) is None


def test_unknown_token_revocation(world):
    with pytest.raises(CAError) as e:
        world.ca.revoke_by_token(bytes(32))
    assert e.value.code == "unknown_token"


def test_pcrl_entries_by_region_and_expiry(world):
    key, ec = world.vehicle()
    toks = world.tokens(key, ec, W0, 3)
    e_now = PcrlEntry(b"\x01" * 32, REGION_A, (W0 + 1) * SPAN)
    e_b = PcrlEntry(b"\x02" * 32, REGION_B, (W0 + 1) * SPAN)
    _, snaps = world.ca.revoke_by_token(toks[0].id, [e_now, e_b])
    assert {(s.region, len(s)) for s in snaps} == {(REGION_A, 1), (REGION_B, 1)}
    assert all(crypto.verify(world.ca.vk, s.signed_part(), s.sigma) for s in snaps)
    world.advance()
    assert len(world.ca.pcrl_snapshot(REGION_A)) == 0


def test_pcrl_expiry_must_end_a_window(world):
    key, ec = world.vehicle()
    toks = world.tokens(key, ec, W0, 1)
    with pytest.raises(CAError):
        world.ca.revoke_by_token(toks[0].id, [PcrlEntry(bytes(32), REGION_A, W0 * SPAN + 5)])


def test_advance_window_must_step_by_one(world):
    with pytest.raises(CAError):
        world.ca.advance_window(W0 + 2)


def test_log_replay_restores_state(tmp_path):
    w = World(seed=3, log_path=tmp_path / "ca.log")
    key, ec = w.vehicle()
    toks = w.tokens(key, ec, W0, 6)
    w.advance()
    w.ca.close()
    again = CertificateAuthority(w.ca.key, 15, W0, log_path=tmp_path / "ca.log")
    assert again.window_index == W0 + 1
    assert again.find_owner(toks[1].id) == ec.vk_v
    assert again.find_owner(toks[0].id) == ec.vk_v
    notice, _ = again.revoke_by_token(toks[1].id)
    pair = RevealPair(notice.x_prev, notice.r_prev, notice.first_index, notice.last_index)
    assert derive_revoked(pair) == [t.id for t in toks[1:]]
    with pytest.raises(CAError):
        again.enroll(key.verification_key)


def test_log_tolerates_torn_tail(tmp_path):
    w = World(seed=4, log_path=tmp_path / "ca.log")
    key, ec = w.vehicle()
    w.ca.close()
    with open(tmp_path / "ca.log", "ab") as fh:
        fh.write(b"\x00\x00\x01\x00\x31abc")
    again = CertificateAuthority(w.ca.key, 15, W0, log_path=tmp_path / "ca.log")
    assert ec.vk_v in again.vehicles
    key2 = crypto.keygen(b"\x07" * 32)
    again.enroll(key2.verification_key)
    again.close()
    third = CertificateAuthority(w.ca.key, 15, W0, log_path=tmp_path / "ca.log")
    assert {ec.vk_v, key2.verification_key} <= set(third.vehicles)


def test_open_state_persists_key(tmp_path):
    a = CertificateAuthority.open_state(tmp_path, window_index=W0)
    vk = a.vk
    a.close()
    b = CertificateAuthority.open_state(tmp_path, window_index=W0)
    assert b.vk == vk
