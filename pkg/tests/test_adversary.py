import json
import random
from dataclasses import replace

import pytest

from shortleash.adversary import (
    REGISTRY, EclipseViolation, ProofRejected, Scenario, ScenarioError, SideChainPlan, Victim, assert_isolated,
    build_side_chain, evidence_for, leak_keys, random_lra, run_hard_fork_scenario, run_scenario, victim_inspect,
)
from shortleash.cli import bundled_fixtures, load_config
from shortleash.consensus import light_verify
from shortleash.contracts import pledge_registry
from shortleash.crypto import Keypair
from shortleash.state import DbState
from shortleash.vm import install_contract

from chainkit import client_at, rotating_chain

SCENARIOS = [n for n in bundled_fixtures() if load_config(n).get("format") == "shortleash-scenario/1"]
HARD_FORK = {"hard_fork_hidden", "hard_fork_bogus"}


def run_fixture(name):
    s = Scenario.from_dict(load_config(name))
    return (run_hard_fork_scenario if name in HARD_FORK else run_scenario)(s)


@pytest.mark.parametrize("name", SCENARIOS)
def test_fixture_expectations(name):
    report = run_fixture(name)
    assert report.check_expectations() == []


def test_canonical_arms():
    r = run_fixture("canonical_lra")
    assert r.outcome("leashed") == "Reverted(AnchorHashMismatch)"
    assert r.harm("leashed") == 0 and r.victim_loss("leashed") == r.base_fee
    assert r.outcome("unleashed") == "Committed"
    assert r.harm("unleashed") == 5000 and r.victim_loss("unleashed") == 5000 + r.base_fee
    for arm in r.arms.values():
        assert arm.rounds[0].light_verify == "Accept" and arm.rounds[0].inspected == 5000


def test_stale_and_fork_variants():
    assert run_fixture("stale_state").outcome("leashed") == "Reverted(LeashExpired)"
    for name in HARD_FORK:
        r = run_fixture(name)
        assert r.outcome("leashed") == "Reverted(ForkMismatch)" and r.harm("leashed") == 0
    assert run_fixture("no_fork").outcome("leashed") == "Reverted(AnchorHashMismatch)"


def test_skipped_verification_defeats_the_leash():
    r = run_fixture("skip_verification")
    assert r.outcome("leashed") == r.outcome("unleashed") == "Committed"
    assert r.harm("leashed") > 0


def test_verified_proofs_stop_a_lie_about_the_real_chain():
    r = run_fixture("verified_proofs")
    for arm in r.arms.values():
        assert arm.rounds[0].outcome == "NoProposal" and arm.harm == 0


def test_adaptive_rounds():
    r = run_fixture("adaptive_lra")
    leashed = r.arms["leashed"].rounds
    assert len(leashed) == 3 and all(x.outcome.startswith("Reverted") for x in leashed)
    assert leashed[1].cobb_saw is not None
    assert r.harm("leashed") == 0 and r.harm("unleashed") > 0


def test_random_lra_family():
    rng = random.Random(99)
    for _ in range(25):
        r = run_scenario(random_lra(rng))
        for rec in r.arms["leashed"].rounds:
            assert rec.outcome != "Committed"
        lh, uh = r.harm("leashed"), r.harm("unleashed")
        assert lh <= uh and (lh < uh or lh == uh == 0)


def test_report_is_json_and_deterministic():
    a = run_fixture("canonical_lra").to_json()
    assert a == run_fixture("canonical_lra").to_json()
    d = json.loads(a)
    assert d["format"] == "shortleash-report/1" and set(d["arms"]) == {"leashed", "unleashed"}


def test_scenario_roundtrip_and_validation():
    s = Scenario.from_dict(load_config("canonical_lra"))
    assert Scenario.from_json(json.dumps(s.to_dict())) == s
    bad = [
        {"variant": "nope"},
        {"sleep_height": 10, "fork_height": 8},
        {"fork_height": 26},  # needs a recent committee's keys
        {"bogus_key": 1},
        {"format": "other/9"},
        {"fork_mode": "hidden_real"},
    ]
    for override in bad:
        with pytest.raises(ScenarioError):
            Scenario.from_dict({**load_config("canonical_lra"), **override})
    with pytest.raises(ScenarioError):
        Scenario.from_json("{")


def test_victim_inspect_binding():
    alice = Keypair.derive("alice")
    real = install_contract(DbState(), REGISTRY, pledge_registry(), storage={alice.account: 7})
    bogus = install_contract(DbState(), REGISTRY, pledge_registry(), storage={alice.account: 5000})
    chain = rotating_chain(1, 100)
    tip_real = replace(chain.block(), state_root=real.root)
    tip_bogus = replace(chain.block(), state_root=bogus.root)
    assert victim_inspect(tip_bogus, REGISTRY, alice.account, evidence_for(bogus, REGISTRY, alice.account)) == 5000
    with pytest.raises(ProofRejected):
        victim_inspect(tip_real, REGISTRY, alice.account, evidence_for(bogus, REGISTRY, alice.account))
    _, proof = evidence_for(real, REGISTRY, alice.account)
    with pytest.raises(ProofRejected):
        victim_inspect(tip_real, REGISTRY, alice.account, (5000, proof))
    assert victim_inspect(tip_real, REGISTRY, alice.account, (5000, proof), check=False) == 5000
    # absence proofs only vouch for zero
    absent = evidence_for(real, REGISTRY, 12345)
    assert absent[0] == 0 and victim_inspect(tip_real, REGISTRY, 12345, absent) == 0
    with pytest.raises(ProofRejected):
        victim_inspect(tip_real, REGISTRY, 12345, (9, absent[1]))


def test_side_chain_bogus_state_proves_against_its_root():
    chain = rotating_chain(20, 5)
    keys = leak_keys(chain, 2)
    alice = Keypair.derive("alice")
    bogus = install_contract(DbState(), REGISTRY, pledge_registry(), storage={alice.account: 10**6})
    side = build_side_chain(chain.tree, chain.at_height(3), keys, SideChainPlan(25, bogus))
    assert light_verify(client_at(chain, 3), side.blocks).accepted
    tip = side.blocks[-1]
    assert victim_inspect(tip, REGISTRY, alice.account, evidence_for(bogus, REGISTRY, alice.account)) == 10**6


def test_eclipse_guard():
    chain = rotating_chain(6, 100)
    pre = [chain.block(b) for b in chain.path()[:4]]
    victim = Victim(Keypair.derive("alice"), pre, client_at(chain, 3), 0)
    assert_isolated(victim, [chain, chain.tree, chain.states])
    victim.leak = {"oops": [chain.tree]}
    with pytest.raises(EclipseViolation):
        assert_isolated(victim, [chain.tree])


def test_victim_pays_with_leash_at_her_tip():
    chain = rotating_chain(6, 100)
    pre = [chain.block(b) for b in chain.path()[:4]]
    victim = Victim(Keypair.derive("alice"), pre, client_at(chain, 3), 0)
    assert victim.receive([chain.block(chain.at_height(4))]).accepted
    t = victim.pay(1, 10, 8)
    assert t.leash.anchor_height == 4 and t.leash.anchor_hash == chain.at_height(4) and t.nonce == 0
    assert victim.pay(1, 10, None).leash is None
    assert victim.nonce == 2
