import pytest

from ozsim.exchange import ASK, BID, EmptySide, Exchange, NotOnboarded, TradingHalted
from ozsim.ledger import Ledger
from ozsim.sim import EventLog, Scheduler
from ozsim.units import to_micro


def make_exchange(onboarded=None, balances=None):
    sched = Scheduler(seed=2)
    log = EventLog()
    ledger = Ledger(sched, log, authorized_auditors={"auditor-1"})
    ledger.set_genesis_reserve(to_micro(100_000))
    for addr, amount in (balances or {}).items():
        ledger.genesis_mint(addr, to_micro(amount))
    ledger.start()
    exchange = Exchange(sched, log, ledger, onboarded=onboarded)
    return sched, ledger, exchange


def px(usd):
    return to_micro(usd)


class TestMatching:
    def test_market_buy_fills_single_level(self):
        _, _, ex = make_exchange()
        ex.place("mm", ASK, to_micro(100), px(2401.0))
        trades, _ = ex.place("alice", BID, to_micro(40), kind="market")
        assert len(trades) == 1
        assert trades[0].price == px(2401.0)
        assert trades[0].qty == to_micro(40)
        assert ex.book.resting_qty(ASK) == to_micro(60)

    def test_market_buy_walks_price_levels(self):
        _, _, ex = make_exchange()
        ex.place("mm", ASK, to_micro(50), px(2401.0))
        ex.place("mm", ASK, to_micro(50), px(2402.0))
        trades, _ = ex.place("alice", BID, to_micro(80), kind="market")
        assert [(t.price, t.qty) for t in trades] == [
            (px(2401.0), to_micro(50)),
            (px(2402.0), to_micro(30)),
        ]

    def test_limit_remainder_rests(self):
        _, _, ex = make_exchange()
        ex.place("mm", ASK, to_micro(50), px(2401.0))
        trades, resting = ex.place("alice", BID, to_micro(80), px(2401.0))
        assert len(trades) == 1
        assert resting is not None
        assert ex.book.best_bid() == px(2401.0)

    def test_market_remainder_cancels(self):
        _, _, ex = make_exchange()
        trades, resting = ex.place("alice", BID, to_micro(10), kind="market")
        assert trades == [] and resting is None
        assert ex.book.resting_qty(BID) == 0

    def test_taker_never_trades_through_its_limit(self):
        _, _, ex = make_exchange()
        ex.place("mm", ASK, to_micro(50), px(2401.0))
        ex.place("mm", ASK, to_micro(50), px(2402.0))
        trades, _ = ex.place("alice", BID, to_micro(80), px(2401.5))
        assert [(t.price, t.qty) for t in trades] == [(px(2401.0), to_micro(50))]

    def test_fifo_within_level(self):
        _, _, ex = make_exchange()
        _, first = ex.place("m1", ASK, to_micro(10), px(2401.0))
        _, second = ex.place("m2", ASK, to_micro(10), px(2401.0))
        trades, _ = ex.place("alice", BID, to_micro(10), kind="market")
        assert trades[0].maker_id == first

    def test_self_match_prevention_skips_own_orders(self):
        _, _, ex = make_exchange()
        ex.place("mm", ASK, to_micro(10), px(2401.0))
        ex.place("other", ASK, to_micro(10), px(2402.0))
        trades, _ = ex.place("mm", BID, to_micro(10), kind="market")
        assert len(trades) == 1
        assert trades[0].maker_owner == "other"
        assert ex.book.resting_qty(ASK) == to_micro(10)  # own ask untouched

    def test_place_during_halt_raises_and_leaves_book_unchanged(self):
        sched, ledger, ex = make_exchange()
        ex.place("mm", ASK, to_micro(10), px(2401.0))
        ledger.trip_breaker(0, "test")
        with pytest.raises(TradingHalted):
            ex.place("alice", BID, to_micro(10), kind="market")
        assert ex.book.resting_qty(ASK) == to_micro(10)
        assert ex.trade_count == 0

    def test_compliance_gate(self):
        _, _, ex = make_exchange(onboarded=lambda owner: owner != "stranger")
        with pytest.raises(NotOnboarded):
            ex.place("stranger", BID, to_micro(1), kind="market")


class TestDepth:
    def _ladder(self, ex, mid_usd=2400.0):
        for bps in (10, 30, 60, 95):
            ex.place("mm", ASK, to_micro(60), px(mid_usd * (1 + bps / 10_000)))
            ex.place("mm", BID, to_micro(60), px(mid_usd * (1 - bps / 10_000)))

    def test_ladder_depth_within_one_percent(self):
        _, _, ex = make_exchange()
        self._ladder(ex)
        bid_depth, ask_depth = ex.book.depth_within(0.01)
        assert bid_depth == to_micro(240)
        assert ask_depth == to_micro(240)

    def test_narrower_window_counts_fewer_levels(self):
        _, _, ex = make_exchange()
        self._ladder(ex)
        bid_depth, ask_depth = ex.book.depth_within(0.005)
        assert bid_depth == to_micro(120)  # 10 and 30 bps inside, 60/95 out
        assert ask_depth == to_micro(120)

    def test_empty_book_raises(self):
        _, _, ex = make_exchange()
        with pytest.raises(EmptySide):
            ex.book.depth_within(0.01)

    def test_zero_window_has_no_orders_at_mid(self):
        _, _, ex = make_exchange()
        self._ladder(ex)
        assert ex.book.depth_within(0.0) == (0, 0)


class TestSettlement:
    def test_trades_between_pair_net_to_single_transfer(self):
        sched, ledger, ex = make_exchange(balances={"alice": 100})
        ex.place("alice", ASK, to_micro(5), px(2400.0))
        ex.place("alice", ASK, to_micro(4), px(2400.0))
        ex.place("alice", ASK, to_micro(3), px(2400.0))
        ex.place("bob", BID, to_micro(12), kind="market")
        tx_ids = ex.settle_batch()
        assert len(tx_ids) == 1
        sched.run_until(2000)
        assert ledger.balance("bob") == to_micro(12)
        assert ledger.balance("alice") == to_micro(88)

    def test_opposing_flows_offset(self):
        sched, ledger, ex = make_exchange(balances={"alice": 100, "bob": 100})
        ex.place("alice", ASK, to_micro(5), px(2400.0))
        ex.place("bob", BID, to_micro(5), kind="market")
        ex.place("bob", ASK, to_micro(3), px(2400.0))
        ex.place("alice", BID, to_micro(3), kind="market")
        tx_ids = ex.settle_batch()
        assert len(tx_ids) == 1
        sched.run_until(2000)
        assert ledger.balance("bob") == to_micro(102)
        assert ledger.balance("alice") == to_micro(98)

    def test_no_trades_no_txs(self):
        _, _, ex = make_exchange()
        assert ex.settle_batch() == []

    def test_settlement_reverted_during_halt_retries_after_lift(self):
        sched, ledger, ex = make_exchange(balances={"alice": 100})
        settled = []
        ex.place("alice", ASK, to_micro(5), px(2400.0))
        ex.place("bob", BID, to_micro(5), kind="market")
        ex.wait_settlement("alice", "bob", settled.append)
        ex.start_settlement()
        sched.run_until(500)
        ledger.trip_breaker(500, "test")
        sched.run_until(200_000)
        assert settled == []  # reverted while halted, kept pending
        assert ledger.balance("bob") == 0
        sched.run_until(302_000)  # breaker lifts at 300_500, next block settles
        assert ledger.balance("bob") == to_micro(5)
        assert len(settled) == 1
        assert ex.unsettled_qty() == 0

    def test_conservation_book_plus_ledger(self):
        sched, ledger, ex = make_exchange(balances={"alice": 100, "bob": 100})
        supply_before = ledger.total_supply
        ex.place("alice", ASK, to_micro(7), px(2400.0))
        ex.place("bob", BID, to_micro(4), kind="market")
        ex.settle_batch()
        sched.run_until(2000)
        assert ledger.total_supply == supply_before
        assert sum(ledger.balances.values()) == supply_before
