from ozsim.agents.compliance import UserProfile
from ozsim.agents.orchestrator import UserState
from ozsim.units import to_micro


def find(reports, kind):
    return [r for r in reports if r.kind == kind]


def test_onboard_issue_sell_lifecycle_gates_in_order(world_factory):
    w = world_factory(issuance_sigma=0.0, pre_trade_sigma=0.0, start_mm=True)
    w.orchestrator.onboard(UserProfile("alice"))
    assert not w.orchestrator.is_approved("alice")

    # act before approval: gated out
    w.orchestrator.handle("issue", "alice", to_micro(5))
    assert find(w.reports, "issue")[0].status == "not_onboarded"

    w.run_to(400_000)  # screening finishes (~168 s)
    assert w.orchestrator.is_approved("alice")
    onboard = find(w.reports, "onboard")[0]
    assert onboard.ok

    w.orchestrator.handle("issue", "alice", to_micro(5))
    w.run_to(405_000)
    issue = find(w.reports, "issue")[-1]
    assert issue.ok
    assert w.orchestrator.holdings("alice") == to_micro(5)
    assert w.ledger.balance("alice") == to_micro(5)

    w.orchestrator.handle("sell", "alice", to_micro(5))
    w.run_to(410_000)
    sell = find(w.reports, "sell")[-1]
    assert sell.ok
    assert w.orchestrator.holdings("alice") == 0
    # tokens settled to the market maker, none created or destroyed
    assert sum(w.ledger.balances.values()) == w.ledger.total_supply


def test_buy_from_non_onboarded_user_rejected(world_factory):
    w = world_factory()
    w.orchestrator.onboard(UserProfile("bob"))
    w.orchestrator.handle("buy", "bob", to_micro(1))
    report = find(w.reports, "buy")[0]
    assert report.status == "not_onboarded"
    assert report.latency_ms == 0


def test_sell_beyond_holdings_rejected_without_commitment(world_factory):
    w = world_factory(start_mm=True)
    w.orchestrator.users["carol"] = UserState(UserProfile("carol"), approved=True)
    w.run_to(5_000)
    w.orchestrator.handle("sell", "carol", to_micro(3))
    w.run_to(6_000)
    report = find(w.reports, "sell")[0]
    assert report.status == "insufficient_holdings"


def test_denied_user_never_becomes_actionable(world_factory):
    w = world_factory()
    w.orchestrator.onboard(UserProfile("eve", sanctions_match=True))
    w.run_to(400_000)
    assert not w.orchestrator.is_approved("eve")
    onboard = find(w.reports, "onboard")[0]
    assert onboard.status == "denied"


def test_manual_review_user_approved_after_resolution(world_factory):
    w = world_factory()
    w.orchestrator.onboard(UserProfile("grace", face_match_confidence=0.85))
    w.run_to(400_000)
    assert not w.orchestrator.is_approved("grace")  # still with the reviewers
    w.run_to(8_000_000)  # reviews resolve within two hours of the decision
    assert w.orchestrator.is_approved("grace")
