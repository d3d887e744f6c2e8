"""Per-step timing of the customer and merchant work, old protocol and new.

Rows follow the usual step numbering of the payment flow.  Step 5 (updating
a wallet's address book) has no defined behaviour here, so its row times a
dictionary insert and is marked not comparable.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from .crypto import get_backend
from .ledger import Ledger, address_of, sign_input
from .protocol import (
    Coin, Merchant, Variant, Wallet, _endorsement_ok, build_payment, endorsement_payload,
    verify_payment, verify_payment_request,
)
from .wire import encode

__all__ = ["BenchRow", "BenchTable", "bench", "STEPS"]

STEPS = {
    "1": "verify merchant certificate chain",
    "2": "verify merchant signature on payment request",
    "3": "sign a single transaction input",
    "4a": "fetch a pre-generated refund address",
    "4b": "generate a new refund address",
    "5": "update wallet address book",
    "6": "compute endorsement signature",
    "7": "verify customer's payment transaction",
    "8": "fetch referenced transaction output",
    "9": "verify endorsement signature",
}


@dataclass(frozen=True)
class BenchRow:
    step: str
    description: str
    mean_ms: float
    comparable: bool = True


@dataclass
class BenchTable:
    backend: str
    iterations: int
    rows: list[BenchRow] = field(default_factory=list)

    def ms(self, step: str) -> float:
        return next(r.mean_ms for r in self.rows if r.step == step)

    @property
    def customer_total(self) -> float:
        """Customer work in the current protocol, without generating a new address."""
        return sum(self.ms(s) for s in ("1", "2", "3", "4a", "5"))

    @property
    def merchant_added(self) -> float:
        return self.ms("8") + self.ms("9")

    def metrics(self) -> dict[str, float]:
        return {
            "customer_total_ms": self.customer_total,
            "customer_total_with_4b_ms": self.customer_total + self.ms("4b"),
            "customer_new_total_ms": self.customer_total + self.ms("6"),
            "endorse_over_customer_total": self.ms("6") / self.customer_total,
            "endorse_over_input_sign": self.ms("6") / self.ms("3"),
            "merchant_total_ms": self.ms("7"),
            "merchant_added_ms": self.merchant_added,
            "merchant_new_total_ms": self.ms("7") + self.merchant_added,
            "merchant_added_over_verify": self.merchant_added / self.ms("7"),
        }

    def records(self) -> list[str]:
        out = [f"backend={self.backend} iterations={self.iterations}"]
        for r in self.rows:
            flag = "" if r.comparable else " comparable=false"
            out.append(f"step={r.step} mean_ms={r.mean_ms:.4f}{flag} label={r.description}")
        for k, v in self.metrics().items():
            out.append(f"{k}={v:.4f}")
        return out


def _time(fn: Callable[[int], object], n: int) -> float:
    start = time.perf_counter()
    for i in range(n):
        fn(i)
    return (time.perf_counter() - start) * 1000 / n


def bench(iterations: int = 100, backend: str = "secp256k1") -> BenchTable:
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    be = get_backend(backend)
    n = iterations

    # a two-link certificate chain: root -> intermediate -> merchant
    root = be.keygen(b"bench/root")
    inter = be.keygen(b"bench/intermediate")
    ledger = Ledger(be)
    merchant = Merchant(be, "bench-merchant", be.keygen(b"bench/cert"), ledger, Variant.BASELINE)
    chain = [(root.public, encode(inter.public), be.sign(root, encode(inter.public))),
             (inter.public, encode(merchant.cert.public), be.sign(inter, encode(merchant.cert.public)))]
    req = merchant.request(50_000, 1_000, 2_000, memo="bench")

    wallet = Wallet(be, "bench-customer", mode="honest")
    key = wallet.new_key()
    fund = ledger.mint(address_of(key.public), 50_000, b"bench")
    coin = Coin(fund.id, key, 50_000)
    wallet.coins.append(coin)
    refund = wallet.new_key()
    refund_addr = address_of(refund.public)
    payment = build_payment([wallet], req, [(refund_addr, 50_000)], Variant.ENDORSED,
                            merchant.cert.public)
    inp = payment.transaction.inputs[0]
    keypool = [address_of(be.keygen(f"bench/pool/{i}".encode()).public) for i in range(n)]
    book: dict = {}

    def chain_ok(_):
        return all(be.verify(pub, msg, sig) for pub, msg, sig in chain)

    rows = {
        "1": _time(chain_ok, n),
        "2": _time(lambda i: verify_payment_request(be, req, merchant.cert.public, 1_500), n),
        "3": _time(lambda i: sign_input(be, key, fund.id), n),
        "4a": _time(lambda i: keypool[i], n),
        "4b": _time(lambda i: address_of(be.keygen(f"bench/new/{i}".encode()).public), n),
        "5": _time(lambda i: book.__setitem__(keypool[i], req.merchant_id), n),
        "6": _time(lambda i: be.sign(key, endorsement_payload(
            Variant.ENDORSED, inp, refund_addr, 50_000, "", req, merchant.cert.public)), n),
        "7": _time(lambda i: verify_payment(merchant, payment, Variant.BASELINE, commit=False), n),
        "8": _time(lambda i: ledger.lookup(inp), n),
        "9": _time(lambda i: _endorsement_ok(be, Variant.ENDORSED, req, payment, 0,
                                             merchant.cert.public), n),
    }
    table = BenchTable(be.name, n)
    for step, desc in STEPS.items():
        table.rows.append(BenchRow(step, desc, rows[step], comparable=step != "5"))
    return table
