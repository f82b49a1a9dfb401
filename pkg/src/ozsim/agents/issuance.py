"""Issuance agent: fiat-in minting and burn-for-gold redemption workflows.

An issue request runs through the agent's own processing delay, a headroom
pre-check mirroring the on-chain reserve guard, a vault lock, and the mint
transaction.  Redemptions burn first and release physical metal once the burn
confirms.  Transactions reverted by a breaker halt are resubmitted when the
halt lifts, so workflows finish late rather than never.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..ledger import (
    Ledger,
    Receipt,
    REVERT_TRADING_HALTED,
)
from ..sim import EventLog, RngStream, Scheduler
from ..vault import InsufficientUnlocked, Vault

ISSUED = "issued"
REDEEMED = "redeemed"
ISSUANCE_FROZEN = "issuance_frozen"
INSUFFICIENT_HEADROOM = "insufficient_reserve_headroom"
INSUFFICIENT_VAULT = "insufficient_vault_inventory"
INSUFFICIENT_BALANCE = "insufficient_balance"
COMPLIANCE_BLOCKED = "compliance_blocked"
REVERTED = "reverted"


@dataclass(frozen=True)
class WorkflowResult:
    status: str
    requested_at: int
    finished_at: int
    agent_ms: int = 0
    chain_ms: int = 0

    @property
    def latency_ms(self) -> int:
        return self.finished_at - self.requested_at

    @property
    def ok(self) -> bool:
        return self.status in (ISSUED, REDEEMED)


class IssuanceAgent:
    def __init__(
        self,
        sched: Scheduler,
        log: EventLog,
        ledger: Ledger,
        vault: Vault,
        rng: RngStream,
        is_approved: Callable[[str], bool],
        is_frozen: Callable[[], bool],
        processing_mean_ms: float = 400.0,
        processing_sigma_ms: float = 50.0,
        processing_min_ms: int = 100,
    ):
        self.sched = sched
        self.log = log
        self.ledger = ledger
        self.vault = vault
        self.rng = rng
        self.is_approved = is_approved
        self.is_frozen = is_frozen
        self.processing_mean_ms = processing_mean_ms
        self.processing_sigma_ms = processing_sigma_ms
        self.processing_min_ms = processing_min_ms

    def _processing_delay(self) -> int:
        if self.processing_sigma_ms <= 0:
            return max(self.processing_min_ms, round(self.processing_mean_ms))
        draw = self.rng.gauss(self.processing_mean_ms, self.processing_sigma_ms)
        return max(self.processing_min_ms, round(draw))

    # -- issuance ---------------------------------------------------------

    def process_issue(
        self, user: str, amount: int, done: Callable[[WorkflowResult], None]
    ) -> None:
        """Payment is confirmed instantly upstream; start the mint pipeline."""
        requested_at = self.sched.now()
        if not self.is_approved(user):
            done(WorkflowResult(COMPLIANCE_BLOCKED, requested_at, requested_at))
            return
        if self.is_frozen():
            done(WorkflowResult(ISSUANCE_FROZEN, requested_at, requested_at))
            return
        delay = self._processing_delay()

        def after_processing() -> None:
            now = self.sched.now()
            if self.is_frozen():
                done(WorkflowResult(ISSUANCE_FROZEN, requested_at, now, agent_ms=delay))
                return
            headroom = self.ledger.attested_reserve + self.ledger.epsilon - self.ledger.total_supply
            if amount > headroom:
                done(WorkflowResult(INSUFFICIENT_HEADROOM, requested_at, now, agent_ms=delay))
                return
            try:
                ticket = self.vault.lock_for_issuance(amount)
            except InsufficientUnlocked:
                done(WorkflowResult(INSUFFICIENT_VAULT, requested_at, now, agent_ms=delay))
                return
            self._submit_mint(user, amount, ticket, requested_at, delay, done)

        self.sched.schedule_in(delay, 2, "issuance_processing", after_processing)

    def _submit_mint(self, user, amount, ticket, requested_at, agent_ms, done) -> None:
        submitted_at = self.sched.now()

        def on_receipt(receipt: Receipt) -> None:
            now = self.sched.now()
            if receipt.accepted:
                done(
                    WorkflowResult(
                        ISSUED, requested_at, now,
                        agent_ms=agent_ms, chain_ms=now - submitted_at,
                    )
                )
                return
            if receipt.reason == REVERT_TRADING_HALTED:
                # Resubmit once trading resumes; the lock stays in place.
                self.ledger.once_breaker_lift(
                    lambda _t: self._submit_mint(
                        user, amount, ticket, requested_at, agent_ms, done
                    )
                )
                return
            self.vault.release(ticket)
            done(WorkflowResult(REVERTED, requested_at, now, agent_ms=agent_ms))

        self.ledger.submit_tx(
            "mint", "issuance", {"to": user, "amount": amount}, on_receipt=on_receipt
        )

    # -- redemption ----------------------------------------------------------

    def process_redeem(
        self, user: str, amount: int, done: Callable[[WorkflowResult], None]
    ) -> None:
        requested_at = self.sched.now()
        if not self.is_approved(user):
            done(WorkflowResult(COMPLIANCE_BLOCKED, requested_at, requested_at))
            return
        if self.ledger.balance(user) < amount:
            done(WorkflowResult(INSUFFICIENT_BALANCE, requested_at, requested_at))
            return
        delay = self._processing_delay()
        self.sched.schedule_in(
            delay, 2, "redemption_processing",
            lambda: self._submit_burn(user, amount, requested_at, delay, done),
        )

    def _submit_burn(self, user, amount, requested_at, agent_ms, done) -> None:
        submitted_at = self.sched.now()

        def on_receipt(receipt: Receipt) -> None:
            now = self.sched.now()
            if receipt.accepted:
                ticket = self.vault.authorize_withdrawal(amount)
                self.vault.withdraw_physical(ticket)
                done(
                    WorkflowResult(
                        REDEEMED, requested_at, now,
                        agent_ms=agent_ms, chain_ms=now - submitted_at,
                    )
                )
                return
            if receipt.reason == REVERT_TRADING_HALTED:
                self.ledger.once_breaker_lift(
                    lambda _t: self._submit_burn(user, amount, requested_at, agent_ms, done)
                )
                return
            done(WorkflowResult(REVERTED, requested_at, now, agent_ms=agent_ms))

        self.ledger.submit_tx(
            "burn", user, {"owner": user, "amount": amount}, on_receipt=on_receipt
        )
