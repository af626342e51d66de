from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manetsim.core.errors import ConfigError, TrustError
from manetsim.core.geometry import Position
from manetsim.core.models import AggregationRule, GateAction, Role, SignerKind, Verdict, VerdictReason
from manetsim.core.nodes import NodeState
from manetsim.core.pki import (
    Ed25519Signer,
    KeyDirectory,
    KeyedHashSigner,
    issue_certificate,
    make_signer,
    verify_certificate,
)
from manetsim.core.trust import (
    TrustLedger,
    aggregate_paths,
    chain_trust,
    detect_malicious,
    introduce,
    introduce_all,
    is_misbehaving,
    ra_gate,
    update_behaviour,
    update_trust,
    verify_reply,
)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)

REQUESTER, RA1, RA2, TARGET = 1, 10, 20, 99


def make_node(node_id, role=Role.MEMBER):
    return NodeState(node_id, Position(node_id, 0), Position(node_id, 0), 0.0, role=role)


@pytest.fixture(params=list(SignerKind), ids=lambda kind: kind.value)
def directory(request):
    signer = make_signer(request.param, seed=7)
    directory = KeyDirectory(signer)
    for node_id in (REQUESTER, RA1, RA2, TARGET, 2, 3, 4):
        directory.register(signer.generate_keypair(node_id))
    return directory


@pytest.fixture
def ledger():
    return TrustLedger()


@pytest.mark.parametrize(
    "observer_introducer, introducer_target, expected",
    [(1.0, 0.8, 0.8), (0.0, 0.8, 0.0), (0.5, 0.75, 0.5)],
)
def test_chain_trust_examples(observer_introducer, introducer_target, expected):
    assert chain_trust(observer_introducer, introducer_target) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("bad", [(-0.1, 0.5), (0.5, 1.1)])
def test_chain_trust_rejects_out_of_range(bad):
    with pytest.raises(TrustError):
        chain_trust(*bad)


def test_chain_trust_grid():
    grid = np.linspace(0.0, 1.0, 100)
    table = np.array([[chain_trust(a, b) for b in grid] for a in grid])
    assert table.min() >= 0.0 and table.max() <= 1.0
    assert np.all(np.diff(table, axis=0) >= -1e-12)
    assert np.all(np.diff(table, axis=1) >= -1e-12)
    for v in grid:
        assert chain_trust(1.0, v) == pytest.approx(v, abs=1e-12)
        assert chain_trust(v, 0.0) == 0.0


@given(unit, unit, unit)
def test_chain_trust_is_monotone_in_the_introducer_link(a, b, target):
    low, high = sorted((a, b))
    assert chain_trust(low, target) <= chain_trust(high, target) + 1e-12


@given(st.floats(min_value=1e-6, max_value=1.0, allow_nan=False))
def test_full_trust_in_the_target_passes_through_any_trusted_introducer(v):
    assert chain_trust(v, 1.0) == 1.0


@pytest.mark.parametrize(
    "values, expected", [([0.8], 0.8), ([0.4, 0.6], 0.5), ([0.2, 0.2, 0.8], 0.4)]
)
def test_aggregate_mean(values, expected):
    assert aggregate_paths(values) == pytest.approx(expected)


def test_aggregate_rules_and_errors():
    assert aggregate_paths([0.2, 0.9], AggregationRule.MIN) == 0.2
    assert aggregate_paths([0.2, 0.9], AggregationRule.MAX) == 0.9
    with pytest.raises(TrustError):
        aggregate_paths([])


@given(st.lists(unit, min_size=1, max_size=8))
def test_aggregate_stays_between_extremes(values):
    mean = aggregate_paths(values)
    assert min(values) - 1e-12 <= mean <= max(values) + 1e-12


def test_introduce_returns_signed_trust(directory, ledger):
    ledger.set_trust(RA1, TARGET, 0.9)
    reply = introduce(make_node(RA1, Role.RA), REQUESTER, TARGET, ledger, directory)
    assert reply.trust_value == 0.9
    assert reply.target_public_key == directory.public_key(TARGET)
    assert verify_reply(reply, directory)


def test_tampered_reply_fails_verification(directory, ledger):
    reply = introduce(make_node(RA1, Role.RA), REQUESTER, TARGET, ledger, directory)
    flipped = bytes([reply.signature[0] ^ 0xFF]) + reply.signature[1:]
    assert not verify_reply(replace(reply, signature=flipped), directory)
    assert not verify_reply(replace(reply, trust_value=0.1), directory)


def test_introduce_preconditions(directory, ledger):
    with pytest.raises(TrustError):
        introduce(make_node(2), REQUESTER, TARGET, ledger, directory)
    with pytest.raises(TrustError):
        introduce(make_node(RA1, Role.RA), REQUESTER, 12345, ledger, directory)


def test_introduce_all_concatenates_both_sector_replies(directory, ledger):
    ras = {1: make_node(RA1, Role.RA), 4: make_node(RA2, Role.RA)}
    bundle = introduce_all(ras, 1, 4, REQUESTER, TARGET, ledger, directory)
    assert [r.introducer_id for r in bundle] == [RA1, RA2]
    same_sector = introduce_all(ras, 1, 1, REQUESTER, TARGET, ledger, directory)
    assert [r.introducer_id for r in same_sector] == [RA1]


def votes_for(directory, agree, total):
    honest_key = directory.public_key(TARGET)
    return [(100 + k, honest_key if k < agree else bytes(32)) for k in range(total)]


def detect(directory, ledger, trust, agree, total=3):
    ledger.set_trust(RA1, TARGET, trust)
    reply = introduce(make_node(RA1, Role.RA), REQUESTER, TARGET, ledger, directory)
    return detect_malicious(
        make_node(REQUESTER), TARGET, [reply], votes_for(directory, agree, total), 0.5, ledger, directory
    )


def test_detect_honest(directory, ledger):
    detection = detect(directory, ledger, 0.9, 3)
    assert detection.verdict == Verdict.HONEST
    assert detection.aggregate_trust == pytest.approx(0.9)
    assert (detection.votes_for, detection.votes_total) == (3, 3)


def test_detect_low_trust(directory, ledger):
    detection = detect(directory, ledger, 0.2, 3)
    assert detection.verdict == Verdict.MALICIOUS
    assert detection.reason == VerdictReason.LOW_TRUST


def test_detect_key_dispute(directory, ledger):
    detection = detect(directory, ledger, 0.9, 1)
    assert detection.verdict == Verdict.MALICIOUS
    assert detection.reason == VerdictReason.KEY_DISPUTE


def test_tie_is_not_a_majority(directory, ledger):
    assert detect(directory, ledger, 0.9, 2, total=4).verdict == Verdict.MALICIOUS


def test_detect_without_valid_replies(directory, ledger):
    reply = introduce(make_node(RA1, Role.RA), REQUESTER, TARGET, ledger, directory)
    forged = replace(reply, signature=bytes(32))
    with pytest.raises(TrustError):
        detect_malicious(make_node(REQUESTER), TARGET, [forged], votes_for(directory, 3, 3), 0.5, ledger, directory)


def test_detection_row(directory, ledger):
    row = detect(directory, ledger, 0.2, 3).as_row()
    assert row["verdict"] == "malicious"
    assert row["reason"] == "low trust"


def _voting_case():
    signer = KeyedHashSigner(seed=11)
    directory = KeyDirectory(signer)
    for node_id in (REQUESTER, RA1, RA2, 30, TARGET):
        directory.register(signer.generate_keypair(node_id))
    ledger = TrustLedger()
    for ra, value in ((RA1, 0.9), (RA2, 0.4), (30, 0.7)):
        ledger.set_trust(ra, TARGET, value)
        ledger.set_trust(REQUESTER, ra, 0.8)
    replies = [introduce(make_node(ra, Role.RA), REQUESTER, TARGET, ledger, directory) for ra in (RA1, RA2, 30)]
    return directory, ledger, replies


VOTING_DIRECTORY, VOTING_LEDGER, VOTING_REPLIES = _voting_case()


@given(
    st.permutations(range(3)),
    st.lists(st.booleans(), min_size=1, max_size=9),
    st.randoms(use_true_random=False),
)
def test_verdict_ignores_reply_and_vote_order(order, agreements, random):
    honest_key = VOTING_DIRECTORY.public_key(TARGET)
    votes = [(200 + k, honest_key if agree else bytes(32)) for k, agree in enumerate(agreements)]
    shuffled = list(votes)
    random.shuffle(shuffled)

    def judge(replies, neighbor_votes):
        return detect_malicious(
            make_node(REQUESTER), TARGET, replies, neighbor_votes, 0.5, VOTING_LEDGER, VOTING_DIRECTORY
        )

    baseline = judge(VOTING_REPLIES, votes)
    permuted = judge([VOTING_REPLIES[i] for i in order], shuffled)
    assert permuted.verdict == baseline.verdict
    assert permuted.reason == baseline.reason
    assert permuted.aggregate_trust == baseline.aggregate_trust
    assert (permuted.votes_for, permuted.votes_total) == (baseline.votes_for, baseline.votes_total)


def test_behaviour_crosses_the_limit_after_five_epochs(ledger):
    scores = [update_behaviour(ledger, TARGET, 1.0) for _ in range(5)]
    assert not is_misbehaving(scores[3])
    assert is_misbehaving(scores[4])
    assert scores[4] == pytest.approx(1 - 0.7**5)


def test_behaviour_spike_decays(ledger):
    assert update_behaviour(ledger, TARGET, 0.0) == 0.0
    spike = update_behaviour(ledger, TARGET, 1.0)
    assert spike == pytest.approx(0.3)
    assert not is_misbehaving(spike)
    assert update_behaviour(ledger, TARGET, 0.0) < spike
    with pytest.raises(TrustError):
        update_behaviour(ledger, TARGET, 1.5)


def test_update_trust_moves_toward_evidence():
    ledger = TrustLedger(baseline=lambda subject: 0.9)
    assert ledger.trust(RA1, TARGET) == 0.9
    value = update_trust(ledger, RA1, TARGET, 1.0, rate=0.5)
    assert value == pytest.approx(0.45)
    assert ledger.trust(RA1, TARGET) == pytest.approx(0.45)


def test_certificates_verify_only_under_the_issuer_key(directory):
    signer = directory.signer
    issuer = directory.keypair(RA1)
    cert = issue_certificate(issuer, TARGET, directory.public_key(TARGET), 5.0, signer)
    assert verify_certificate(cert, issuer.public_key, 5.0, signer)
    assert not verify_certificate(cert, issuer.public_key, 4.0, signer)
    assert not verify_certificate(cert, directory.public_key(RA2), 5.0, signer)


def gate(directory, ledger, certificate, sector=(2, 3, TARGET)):
    return ra_gate(
        make_node(RA1, Role.RA), make_node(TARGET), certificate, directory, ledger, 10.0,
        sector_neighbors=sector,
    )


def test_ra_gate_forwards_authenticated_nodes(directory, ledger):
    cert = issue_certificate(directory.keypair(RA1), TARGET, directory.public_key(TARGET), 0.0, directory.signer)
    decision = gate(directory, ledger, cert)
    assert decision.action == GateAction.FORWARD
    assert decision.forwarded


def test_ra_gate_rejects_and_alerts(directory, ledger):
    forged = directory.signer.forged_keypair(TARGET)
    cert = issue_certificate(directory.keypair(RA1), TARGET, forged.public_key, 0.0, directory.signer)
    ledger.set_trust(RA1, TARGET, 0.2)
    for _ in range(6):
        update_behaviour(ledger, TARGET, 1.0)
    decision = gate(directory, ledger, cert)
    assert decision.action == GateAction.REJECT
    assert decision.reasons == ["certificate", "trust", "behaviour"]
    assert decision.alert_recipients == (2, 3)


def test_ra_gate_rejects_missing_certificate(directory, ledger):
    assert gate(directory, ledger, None).reasons == ["certificate"]


def test_signers_derive_keys_from_the_seed(directory):
    signer = directory.signer
    again = type(signer)(seed=7)
    assert again.generate_keypair(TARGET) == directory.keypair(TARGET)
    assert signer.forged_keypair(TARGET).public_key != directory.public_key(TARGET)
    message = b"payload"
    assert signer.sign(directory.keypair(RA1).private_key, message) == again.sign(
        directory.keypair(RA1).private_key, message
    )


def test_ed25519_signatures_verify_without_the_signing_side():
    issuer = Ed25519Signer(seed=7).generate_keypair(RA1)
    cert = issue_certificate(issuer, TARGET, b"\x01" * 32, 1.0, Ed25519Signer(seed=7))
    assert len(issuer.public_key) == 32 and len(cert.signature) == 64
    stranger = Ed25519Signer(seed=99)
    assert verify_certificate(cert, issuer.public_key, 1.0, stranger)
    assert not verify_certificate(replace(cert, subject_id=TARGET + 1), issuer.public_key, 1.0, stranger)
    assert not stranger.verify(b"short", cert.payload(), cert.signature)


def test_keyed_hash_verification_needs_the_issuing_signer():
    issuer = KeyedHashSigner(seed=7).generate_keypair(RA1)
    cert = issue_certificate(issuer, TARGET, b"\x01" * 32, 1.0, KeyedHashSigner(seed=7))
    assert not verify_certificate(cert, issuer.public_key, 1.0, KeyedHashSigner(seed=7))


def test_unknown_signer_is_a_config_error():
    with pytest.raises(ConfigError, match="Unknown signer"):
        make_signer("rsa", seed=1)
