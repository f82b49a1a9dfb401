"""Named post-run checks bundled with the scenarios.

Each check inspects a finished run and returns (name, ok, message) rows; the
CLI exits nonzero when any row fails.  The acceptance test suite applies the
same checks at their stated tolerances.
"""

from __future__ import annotations

from typing import Callable

from .runner import RunResult

CheckRows = list[tuple[str, bool, str]]


def _rows_for(result: RunResult, kinds: set[str]):
    return [r for r in result.sim.metrics.reports if r.kind in kinds]


def no_false_alerts(result: RunResult) -> CheckRows:
    bad = [
        a for a in result.summary["alerts"]
        if a["kind"] in ("OracleStale", "OracleDiverged", "ReserveShortfall")
    ]
    return [(
        "no_false_alerts",
        not bad,
        f"{len(bad)} oracle/reserve alerts in a no-fault run" if bad else "no oracle/reserve alerts",
    )]


def inventory_band(result: RunResult) -> CheckRows:
    inv = result.summary["inventory"]
    rows = [(
        "inventory_within_100oz",
        inv["max_abs_oz"] <= 100.0,
        f"max |inventory| {inv['max_abs_oz']:.1f} OZ",
    )]
    triggers = [abs(r["inventory_oz"]) for r in inv.get("rebalances", [])]
    rows.append((
        "rebalance_trigger_threshold",
        all(v >= 50.0 for v in triggers),
        f"{len(triggers)} rebalances, min trigger {min(triggers):.1f} OZ" if triggers else "no rebalances",
    ))
    return rows


def market_quality(result: RunResult) -> CheckRows:
    rows: CheckRows = []
    for regime in result.summary["spread_by_regime"]:
        label = f"sigma={regime['sigma_per_s']:g}"
        if not regime["samples"]:
            rows.append((f"spread_{label}", False, "no samples"))
            continue
        if regime["sigma_per_s"] <= 1e-4:  # calm regime: the 0.2-0.5% band
            rows.append((
                f"spread_band_{label}",
                regime["in_band_02_05_frac"] >= 0.90,
                f"in-band fraction {regime['in_band_02_05_frac']:.3f}",
            ))
        rows.append((
            f"spread_cap_{label}",
            regime["le_1pct_frac"] == 1.0,
            f"<=1% fraction {regime['le_1pct_frac']:.4f}, max {regime['spread_max']:.5f}",
        ))
    depth = result.summary["depth"]
    rows.append((
        "depth_200oz",
        (depth["min_bid_oz"] or 0) >= 200.0 and (depth["min_ask_oz"] or 0) >= 200.0,
        f"min depth bid {depth['min_bid_oz']}, ask {depth['min_ask_oz']} OZ",
    ))
    peg = result.summary["peg"]
    rows.append((
        "peg_within_half_spread",
        peg["min_half_spread_margin"] is not None and peg["min_half_spread_margin"] >= 0,
        f"worst margin {peg['min_half_spread_margin']}",
    ))
    return rows


def issuance_latency(result: RunResult) -> CheckRows:
    stats = result.summary["latency_ms"].get("issue", {})
    completed = stats.get("completed", 0)
    rows = [("issuance_count", completed >= 500, f"{completed} completed issuances")]
    if completed:
        mean_s = stats["mean_ms"] / 1000
        agent_s = stats["mean_agent_ms"] / 1000
        chain_s = stats["mean_chain_ms"] / 1000
        rows.append(("issuance_mean_1.2s", abs(mean_s - 1.2) <= 0.1, f"mean {mean_s:.3f} s"))
        rows.append(("issuance_agent_0.4s", abs(agent_s - 0.4) <= 0.05, f"agent {agent_s:.3f} s"))
        rows.append(("issuance_chain_0.8s", abs(chain_s - 0.8) <= 0.08, f"chain {chain_s:.3f} s"))
    return rows


def issuance_burst(result: RunResult) -> CheckRows:
    stats = result.summary["latency_ms"].get("issue", {})
    requests = stats.get("requests", 0)
    completed = stats.get("completed", 0)
    failed = stats.get("failed", {})
    return [(
        "issuance_burst_120_of_120",
        requests == 120 and completed == 120 and not failed,
        f"{completed}/{requests} succeeded, failures {failed or 'none'}",
    )]


def table1_oracle(result: RunResult) -> CheckRows:
    rows: CheckRows = []
    findings = [f for f in result.summary["fault_findings"] if f["target"] == "oracle"]
    if len(findings) != 1 or findings[0]["detected_ms"] == "":
        return [("table1_oracle_detected", False, f"findings: {findings}")]
    finding = findings[0]
    rows.append((
        "oracle_detection_10_11s",
        10_000 <= finding["latency_ms"] <= 11_000,
        f"detection latency {finding['latency_ms']} ms",
    ))
    rows.append((
        "oracle_feed_switched",
        "secondary" in finding["action"],
        finding["action"],
    ))
    halts = result.summary["halts"]
    ok_halt = False
    halt_msg = "no halt recorded"
    if halts:
        halt = halts[0]
        span = halt.get("lifted_at", 0) - halt["tripped_at"]
        ok_halt = abs(span - 300_000) <= 1000
        halt_msg = f"halt {span} ms ({halt['reason']}; lift {halt.get('lift_reason')})"
    rows.append(("oracle_halt_300s", ok_halt, halt_msg))
    rows.append((
        "zero_trades_during_halt",
        result.summary["trades"]["during_halt"] == 0,
        f"{result.summary['trades']['during_halt']} trades during halt",
    ))
    resumed = False
    if halts and halts[0].get("lifted_at") is not None:
        lifted = halts[0]["lifted_at"]
        resumed = any(
            r.ok and r.kind in ("buy", "sell") and r.finished_at > lifted
            for r in result.sim.metrics.reports
        )
    rows.append(("trading_resumed_after_lift", resumed, "completed orders after the lift" if resumed else "no orders completed after lift"))
    alert = next((a for a in result.summary["alerts"] if a["kind"] == "OracleStale"), None)
    rows.append((
        "oracle_alert_cleared",
        alert is not None and alert["cleared_at"] is not None,
        f"alert cleared at {alert['cleared_at']}" if alert else "no alert",
    ))
    return rows


def table1_vault(result: RunResult) -> CheckRows:
    rows: CheckRows = []
    findings = [f for f in result.summary["fault_findings"] if f["target"] == "vault"]
    if len(findings) != 1 or findings[0]["detected_ms"] == "":
        return [("table1_vault_detected", False, f"findings: {findings}")]
    finding = findings[0]
    rows.append((
        "vault_detection_under_1s",
        0 <= finding["latency_ms"] < 1000,
        f"detected {finding['latency_ms']} ms after the revealing attestation",
    ))
    alert = next((a for a in result.summary["alerts"] if a["kind"] == "ReserveShortfall"), None)
    freeze_start = alert["raised_at"] if alert else None
    freeze_end = alert["cleared_at"] if alert else None
    rows.append((
        "issuance_unfrozen_after_clear",
        freeze_end is not None,
        f"freeze {freeze_start}..{freeze_end}",
    ))
    if freeze_start is not None and freeze_end is not None:
        frozen_issues = [
            r for r in _rows_for(result, {"issue"})
            if freeze_start <= r.finished_at <= freeze_end
        ]
        rows.append((
            "issues_blocked_while_frozen",
            bool(frozen_issues)
            and all(r.status == "issuance_frozen" for r in frozen_issues),
            f"{len(frozen_issues)} issue attempts during the freeze all ended issuance_frozen"
            if frozen_issues else "no issue attempts landed during the freeze",
        ))
        sells = [
            r for r in _rows_for(result, {"sell", "buy"})
            if r.ok and freeze_start <= r.finished_at <= freeze_end
        ]
        rows.append((
            "trading_continues_while_frozen",
            bool(sells),
            f"{len(sells)} orders completed during the freeze",
        ))
    rows.append((
        "no_halt_for_reserve_freeze",
        not result.summary["halts"],
        "trading never halted",
    ))
    return rows


def governance_demo(result: RunResult) -> CheckRows:
    ledger = result.sim.ledger
    rows = [(
        "param_change_executed",
        ledger.params.get("breaker_swing_threshold") == 0.03,
        f"breaker_swing_threshold={ledger.params.get('breaker_swing_threshold')}",
    )]
    oob = [a for a in result.summary["alerts"] if a["kind"] == "GovernanceOutOfBounds"]
    rows.append(("out_of_bounds_rejected_with_alert", len(oob) == 1, f"{len(oob)} alerts"))
    rows.append((
        "agent_update_applied",
        result.sim.risk.agent_versions.get("market-maker") == "v2",
        f"market-maker version {result.sim.risk.agent_versions.get('market-maker')}",
    ))
    return rows


CHECKS: dict[str, Callable[[RunResult], CheckRows]] = {
    "no_false_alerts": no_false_alerts,
    "inventory_band": inventory_band,
    "market_quality": market_quality,
    "issuance_latency": issuance_latency,
    "issuance_burst": issuance_burst,
    "table1_oracle": table1_oracle,
    "table1_vault": table1_vault,
    "governance_demo": governance_demo,
}


def run_checks(result: RunResult) -> CheckRows:
    rows: CheckRows = []
    for name in result.config.checks:
        check = CHECKS.get(name)
        if check is None:
            rows.append((name, False, "unknown check"))
            continue
        rows.extend(check(result))
    return rows
