"""The Silkroad Trader attack, run end to end with real signatures.

A customer wants to pay an illicit trader without leaving a trail.  It buys
something from an honest merchant, names the trader's payment address as a
refund address, cancels the order, and forwards the merchant's refund
transaction to the trader as its payment.  Whether the customer can later
deny having chosen that address depends on the protocol variant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .crypto import get_backend
from .ledger import Address, Ledger, address_of
from .protocol import (
    Accept, Coin, EndorsementRefused, Merchant, Payment, Proven, Unproven, Variant, Wallet,
    acknowledge, audit, build_payment, issue_refund, verify_ack, verify_payment,
    verify_payment_request,
)

__all__ = ["PayNow", "Cancel", "LogEntry", "ScenarioReport", "run_silkroad_scenario",
           "PRICE", "TRADER_PRICE", "WALLET_MODES"]

PRICE = 100_000
TRADER_PRICE = 90_000
COIN = 60_000
WALLET_MODES = ("honest", "malicious", "omit", "forge")


@dataclass(frozen=True)
class PayNow:
    """The customer's click on "pay now": asks the merchant for a request."""
    label: str = "paynow"


@dataclass(frozen=True)
class Cancel:
    merchant_id: bytes


@dataclass(frozen=True)
class LogEntry:
    step: int
    sender: str
    receiver: str
    label: str
    message: Any = field(repr=False)


@dataclass
class ScenarioReport:
    protocol: Variant
    wallet: str
    outcome: str
    trader_address: Address
    refund_destination: tuple[Address, ...] = ()
    audit: Proven | Unproven | None = None
    deniability: bool = False
    reject_reason: str | None = None
    ledger_conserved: bool = True
    log: list[LogEntry] = field(default_factory=list)

    def records(self) -> list[str]:
        """One ``key=value`` record per line, for machine consumption."""
        audit_text = "none"
        if isinstance(self.audit, Proven):
            audit_text = "Proven"
        elif isinstance(self.audit, Unproven):
            audit_text = f"Unproven({self.audit.reason})"
        out = [
            f"protocol={self.protocol.value}",
            f"wallet={self.wallet}",
            f"outcome={self.outcome}",
            f"trader_address={self.trader_address}",
            "refund_destination=" + ",".join(str(a) for a in self.refund_destination),
            f"refund_to_trader={str(self.trader_address in self.refund_destination).lower()}",
            f"audit={audit_text}",
            f"deniability={str(self.deniability).lower()}",
            f"reject_reason={self.reject_reason or 'none'}",
            f"ledger_conserved={str(self.ledger_conserved).lower()}",
        ]
        for e in self.log:
            out.append(f"step={e.step} from={e.sender} to={e.receiver} message={e.label}")
        return out


def run_silkroad_scenario(variant: Variant | str, wallet: str = "malicious",
                          backend: str = "secp256k1") -> ScenarioReport:
    variant = Variant(variant)
    if wallet not in WALLET_MODES:
        raise ValueError(f"unknown wallet mode {wallet!r}")
    be = get_backend(backend)
    ledger = Ledger(be)
    merchant = Merchant(be, "merchant", be.keygen(b"merchant/cert"), ledger, variant)
    trader = Merchant(be, "trader", be.keygen(b"trader/cert"), ledger, Variant.BASELINE)
    customer = Wallet(be, "customer", mode=wallet)
    for _ in range(2):
        k = customer.new_key()
        tx = ledger.mint(address_of(k.public), COIN, b"customer")
        customer.coins.append(Coin(tx.id, k, COIN))

    log: list[LogEntry] = []
    now = 1_500

    def send(sender, receiver, label, msg):
        log.append(LogEntry(len(log) + 1, sender, receiver, label, msg))

    rho_t = trader.request(TRADER_PRICE, 1_000, 2_000, memo="order 77")
    send("trader", "customer", "PaymentRequest", rho_t)
    assert verify_payment_request(be, rho_t, trader.cert.public, now)
    trader_addr = rho_t.merchant_address
    report = ScenarioReport(variant, wallet, "attack_completed", trader_addr, log=log)

    send("customer", "merchant", "PayNow", PayNow())
    rho_m = merchant.request(PRICE, 1_000, 2_000, memo="laptop")
    send("merchant", "customer", "PaymentRequest", rho_m)
    assert verify_payment_request(be, rho_m, merchant.cert.public, now)

    own = customer.new_key()
    refunds = [(address_of(own.public), PRICE - TRADER_PRICE), (trader_addr, TRADER_PRICE)]
    try:
        payment = build_payment([customer], rho_m, refunds, variant, merchant.cert.public, memo="thanks")
    except EndorsementRefused as e:
        report.outcome, report.reject_reason = "attack_blocked", str(e)
        return _finish(report, ledger)
    send("customer", "merchant", "Payment", payment)
    verdict = verify_payment(merchant, payment)
    if not isinstance(verdict, Accept):
        report.outcome, report.reject_reason = "attack_rejected", verdict.reason
        return _finish(report, ledger)

    ack = acknowledge(merchant, payment, "order received")
    send("merchant", "customer", "PaymentACK", ack)
    assert verify_ack(be, ack, payment, merchant.cert.public, variant)

    send("customer", "merchant", "Cancel", Cancel(rho_m.merchant_id))
    refund_tx = issue_refund(merchant, rho_m.merchant_id)
    send("merchant", "ledger", "RefundTransaction", refund_tx)
    report.refund_destination = tuple(o.to for o in refund_tx.outputs)

    to_trader = Payment(rho_t.merchant_id, refund_tx, (), memo="order 77")
    send("customer", "trader", "Payment", to_trader)
    tv = verify_payment(trader, to_trader)
    if isinstance(tv, Accept):
        send("trader", "customer", "PaymentACK", acknowledge(trader, to_trader, "shipping"))
    else:
        report.outcome, report.reject_reason = "trader_rejected", tv.reason

    report.audit = audit(merchant.evidence[rho_m.merchant_id], trader_addr, be)
    report.deniability = isinstance(report.audit, Unproven)
    return _finish(report, ledger)


def _finish(report: ScenarioReport, ledger: Ledger) -> ScenarioReport:
    report.ledger_conserved = ledger.total_unspent() == ledger.minted
    return report
