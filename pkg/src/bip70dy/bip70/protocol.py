"""BIP70 messages and the operations of customers and merchants.

Three variants share the message flow and differ in the refund entries and
the acknowledgement:

* ``BASELINE``: refund entries are bare (address, amount) pairs and the
  acknowledgement is unsigned.
* ``ENDORSED``: each entry carries a signature, by the key that authorised
  the matching transaction input, over (input, address, amount, memo,
  request).  The acknowledgement is signed by the merchant.
* ``MERCHANT_BOUND``: as ``ENDORSED`` but the endorsement covers the
  merchant's identity in place of the input.

Refund entry ``i`` is endorsed by the key of transaction input ``i``.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from enum import Enum

from .crypto import Backend, KeyPair
from .ledger import Address, Ledger, Transaction, TransactionInput, TxOutput, address_of, sign_input
from .wire import encode

__all__ = [
    "Variant", "PaymentRequest", "RefundEntry", "Payment", "PaymentACK",
    "EndorsementEvidence", "Accept", "Reject", "Proven", "Unproven",
    "Merchant", "Wallet", "Coin", "PaymentError", "EndorsementRefused",
    "create_payment_request", "verify_payment_request", "build_payment",
    "endorsement_payload", "verify_payment", "acknowledge", "verify_ack",
    "issue_refund", "audit",
]


class Variant(Enum):
    BASELINE = "baseline"
    ENDORSED = "endorsed"
    MERCHANT_BOUND = "merchant-bound"

    @property
    def endorsed(self) -> bool:
        return self is not Variant.BASELINE


@dataclass(frozen=True)
class PaymentRequest:
    merchant_address_digest: bytes   # H(B_M): where the payment goes
    amount: int
    created: int
    expires: int
    memo: str
    payment_url: str
    merchant_id: bytes               # z_M: per-request identifier
    signature: bytes = b""

    def __post_init__(self):
        if self.created >= self.expires:
            raise ValueError("request must be created before it expires")
        if self.amount <= 0:
            raise ValueError("amount must be positive")

    def signed_fields(self):
        return (self.merchant_address_digest, self.amount, self.created, self.expires,
                self.memo, self.payment_url, self.merchant_id)

    def signed_bytes(self) -> bytes:
        return encode(*self.signed_fields())

    def wire_fields(self):
        return self.signed_fields() + (self.signature,)

    @property
    def merchant_address(self) -> Address:
        return Address(self.merchant_address_digest)


@dataclass(frozen=True)
class RefundEntry:
    address: Address
    amount: int
    variant: Variant = Variant.BASELINE
    endorsement: bytes | None = None
    memo: str = ""

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("refund amount must be positive")
        if self.variant is Variant.BASELINE and self.endorsement is not None:
            raise ValueError("baseline refund entries carry no endorsement")

    def wire_fields(self):
        return (self.address, self.amount, self.endorsement, self.memo)


@dataclass(frozen=True)
class Payment:
    merchant_id: bytes
    transaction: Transaction
    refund_entries: tuple[RefundEntry, ...]
    memo: str = ""

    def wire_fields(self):
        return (self.merchant_id, self.transaction, list(self.refund_entries), self.memo)


@dataclass(frozen=True)
class PaymentACK:
    payment: Payment
    memo: str
    signature: bytes | None = None

    def signed_bytes(self) -> bytes:
        return encode(self.payment, self.memo)

    def wire_fields(self):
        return (self.payment, self.memo, self.signature)


@dataclass(frozen=True)
class EndorsementEvidence:
    """Everything a third party needs to check who endorsed which refund address."""

    request: PaymentRequest
    payment: Payment
    variant: Variant
    merchant_key: bytes   # the merchant's long-term (certificate) public key

    @property
    def endorsements(self) -> tuple[bytes | None, ...]:
        return tuple(e.endorsement for e in self.payment.refund_entries)


@dataclass(frozen=True)
class Accept:
    evidence: EndorsementEvidence | None = None

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Reject:
    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class Proven:
    address: Address
    endorsed_by: bytes


@dataclass(frozen=True)
class Unproven:
    reason: str


class PaymentError(Exception):
    pass


class EndorsementRefused(PaymentError):
    """An honest wallet will not endorse an address it does not own."""


def create_payment_request(backend: Backend, cert: KeyPair, pay_to: KeyPair, amount: int,
                           created: int, expires: int, memo: str = "", payment_url: str = "",
                           merchant_id: bytes | None = None) -> PaymentRequest:
    """A request paying ``pay_to`` (a fresh per-request key), signed with ``cert``."""
    mid = merchant_id if merchant_id is not None else secrets.token_bytes(16)
    unsigned = PaymentRequest(address_of(pay_to.public).digest, amount, created, expires,
                              memo, payment_url, mid)
    return PaymentRequest(*unsigned.signed_fields(), signature=backend.sign(cert, unsigned.signed_bytes()))


def verify_payment_request(backend: Backend, req: PaymentRequest, merchant_key: bytes,
                           now: int) -> Accept | Reject:
    if not backend.verify(merchant_key, req.signed_bytes(), req.signature):
        return Reject("signature")
    if not req.created <= now < req.expires:
        return Reject("expired")
    return Accept()


def endorsement_payload(variant: Variant, inp: TransactionInput, address: Address, amount: int,
                        memo: str, req: PaymentRequest, merchant_key: bytes) -> bytes:
    if variant is Variant.ENDORSED:
        head = encode(inp)
    elif variant is Variant.MERCHANT_BOUND:
        head = encode(merchant_key)
    else:
        raise ValueError("baseline refund entries are not endorsed")
    return encode(variant.value, head, address, amount, memo, req)


@dataclass
class Coin:
    tx_id: bytes
    key: KeyPair
    amount: int


@dataclass
class Wallet:
    """A customer's coins and keys.

    ``mode`` decides what happens when asked to endorse a refund address the
    wallet does not own: ``honest`` refuses, ``malicious`` signs anyway,
    ``omit`` leaves the endorsement out, ``forge`` signs with a key that did
    not authorise the input.
    """

    backend: Backend
    name: str
    coins: list[Coin] = field(default_factory=list)
    owned: dict[Address, KeyPair] = field(default_factory=dict)
    mode: str = "honest"
    _counter: int = 0

    def new_key(self) -> KeyPair:
        self._counter += 1
        k = self.backend.keygen(f"{self.name}/{self._counter}".encode())
        self.owned[address_of(k.public)] = k
        return k

    def owns(self, addr: Address) -> bool:
        return addr in self.owned

    def balance(self) -> int:
        return sum(c.amount for c in self.coins)


def build_payment(wallets: list[Wallet], req: PaymentRequest, refunds: list[tuple[Address, int]],
                  variant: Variant, merchant_key: bytes, memo: str = "",
                  coins: list[tuple[Wallet, Coin]] | None = None) -> Payment:
    """One transaction paying ``req``, funded by the customers' coins.

    Coins are spent in wallet order until the amount is covered; any excess
    is returned as change to a fresh address of the last contributing
    wallet.  Refund entry ``i`` is endorsed by the owner of input ``i``.
    """
    if coins is None:
        coins = []
        have = 0
        for w in wallets:
            for c in w.coins:
                if have >= req.amount:
                    break
                coins.append((w, c))
                have += c.amount
    total = sum(c.amount for _, c in coins)
    if total < req.amount:
        raise PaymentError("insufficient funds")
    inputs = tuple(sign_input(w.backend, c.key, c.tx_id) for w, c in coins)
    outputs = [TxOutput(req.amount, req.merchant_address)]
    if total > req.amount:
        change = coins[-1][0].new_key()
        outputs.append(TxOutput(total - req.amount, address_of(change.public)))
    tx = Transaction(inputs, tuple(outputs))
    if sum(a for _, a in refunds) > req.amount:
        raise PaymentError("refund exceeds payment")
    entries = []
    for i, (addr, amount) in enumerate(refunds):
        if not variant.endorsed:
            entries.append(RefundEntry(addr, amount, variant))
            continue
        if i >= len(coins):
            raise PaymentError("more refund entries than inputs to endorse them")
        w, c = coins[i]
        sig: bytes | None
        if not w.owns(addr) and w.mode == "honest":
            raise EndorsementRefused(f"{w.name} will not endorse foreign address {addr}")
        payload = endorsement_payload(variant, inputs[i], addr, amount, "", req, merchant_key)
        if w.owns(addr) or w.mode == "malicious":
            sig = w.backend.sign(c.key, payload)
        elif w.mode == "forge":
            sig = w.backend.sign(w.new_key(), payload)
        else:
            sig = None
        entries.append(RefundEntry(addr, amount, variant, sig))
    return Payment(req.merchant_id, tx, tuple(entries), memo)


@dataclass
class Merchant:
    backend: Backend
    name: str
    cert: KeyPair
    ledger: Ledger
    variant: Variant = Variant.BASELINE
    requests: dict[bytes, tuple[PaymentRequest, KeyPair]] = field(default_factory=dict)
    accepted: dict[bytes, Payment] = field(default_factory=dict)
    evidence: dict[bytes, EndorsementEvidence] = field(default_factory=dict)
    refunded: dict[bytes, Transaction] = field(default_factory=dict)
    _counter: int = 0

    def request(self, amount: int, created: int, expires: int, memo: str = "",
                payment_url: str = "") -> PaymentRequest:
        self._counter += 1
        pay_to = self.backend.keygen(f"{self.name}/pay/{self._counter}".encode())
        mid = f"{self.name}/{self._counter}".encode()
        req = create_payment_request(self.backend, self.cert, pay_to, amount, created, expires,
                                     memo, payment_url or f"https://{self.name}.example/pay", mid)
        self.requests[mid] = (req, pay_to)
        return req


def verify_payment(merchant: Merchant, payment: Payment, variant: Variant | None = None,
                   commit: bool = True) -> Accept | Reject:
    """Merchant-side checks; on success the transaction is confirmed and evidence stored.

    With ``commit=False`` nothing is written to the ledger or the merchant.
    """
    variant = variant or merchant.variant
    found = merchant.requests.get(payment.merchant_id)
    if found is None:
        return Reject("unknown payment id")
    req, _ = found
    tx = payment.transaction
    confirmed = tx.id in merchant.ledger.txs
    for inp in tx.inputs:
        if not inp.verify(merchant.backend):
            return Reject("bad input signature")
        if not confirmed and merchant.ledger.lookup(inp) is None:
            return Reject("unknown input")
    if not tx.inputs:
        return Reject("bad input signature")
    if tx.paid_to(req.merchant_address) < req.amount:
        return Reject("insufficient amount")
    if sum(e.amount for e in payment.refund_entries) > req.amount:
        return Reject("refund exceeds payment")
    if variant.endorsed:
        for i, e in enumerate(payment.refund_entries):
            if e.endorsement is None:
                return Reject("missing endorsement")
            if i >= len(tx.inputs) or not _endorsement_ok(merchant.backend, variant, req, payment, i,
                                                          merchant.cert.public):
                return Reject("invalid endorsement")
    if not confirmed:
        problem = merchant.ledger.check(tx)
        if problem:
            return Reject(problem)
    ev = EndorsementEvidence(req, payment, variant, merchant.cert.public)
    if not commit:
        return Accept(ev)
    if not confirmed:
        merchant.ledger.apply(tx)
    merchant.accepted[payment.merchant_id] = payment
    merchant.evidence[payment.merchant_id] = ev
    return Accept(ev)


def _endorsement_ok(backend: Backend, variant: Variant, req: PaymentRequest, payment: Payment,
                    i: int, merchant_key: bytes) -> bool:
    e = payment.refund_entries[i]
    inp = payment.transaction.inputs[i]
    payload = endorsement_payload(variant, inp, e.address, e.amount, e.memo, req, merchant_key)
    return backend.verify(inp.pubkey, payload, e.endorsement or b"")


def acknowledge(merchant: Merchant, payment: Payment, memo: str, variant: Variant | None = None) -> PaymentACK:
    variant = variant or merchant.variant
    if payment.merchant_id not in merchant.accepted:
        raise PaymentError("payment was not accepted")
    ack = PaymentACK(payment, memo)
    if variant.endorsed:
        ack = PaymentACK(payment, memo, merchant.backend.sign(merchant.cert, ack.signed_bytes()))
    return ack


def verify_ack(backend: Backend, ack: PaymentACK, sent: Payment, merchant_key: bytes,
               variant: Variant) -> Accept | Reject:
    """Customer-side check of an acknowledgement."""
    if ack.payment != sent:
        return Reject("payment copy differs")
    if variant.endorsed:
        if ack.signature is None:
            return Reject("missing ack signature")
        if not backend.verify(merchant_key, ack.signed_bytes(), ack.signature):
            return Reject("signature")
    return Accept()


def issue_refund(merchant: Merchant, merchant_id: bytes) -> Transaction:
    """Pay every refund entry of the accepted payment from the merchant's receiving key."""
    payment = merchant.accepted.get(merchant_id)
    if payment is None:
        raise PaymentError("no accepted payment with that id")
    if merchant_id in merchant.refunded:
        raise PaymentError("already refunded")
    req, pay_to = merchant.requests[merchant_id]
    received = payment.transaction.paid_to(req.merchant_address)
    inp = sign_input(merchant.backend, pay_to, payment.transaction.id)
    outputs = [TxOutput(e.amount, e.address) for e in payment.refund_entries]
    rest = received - sum(e.amount for e in payment.refund_entries)
    if rest > 0:
        outputs.append(TxOutput(rest, req.merchant_address))
    tx = Transaction((inp,), tuple(outputs))
    merchant.ledger.apply(tx)
    merchant.refunded[merchant_id] = tx
    return tx


def audit(evidence: EndorsementEvidence, claimed: Address, backend: Backend) -> Proven | Unproven:
    """Third-party check: did a paying customer endorse ``claimed`` for this request?"""
    if not evidence.variant.endorsed:
        return Unproven("no endorsement signature")
    req, payment = evidence.request, evidence.payment
    if not backend.verify(evidence.merchant_key, req.signed_bytes(), req.signature) \
            or req.merchant_id != payment.merchant_id \
            or payment.transaction.paid_to(req.merchant_address) < req.amount:
        return Unproven("request mismatch")
    hits = [i for i, e in enumerate(payment.refund_entries) if e.address == claimed]
    if not hits:
        return Unproven("address not in refund entries")
    for i in hits:
        e = payment.refund_entries[i]
        if e.endorsement is None:
            continue
        if i < len(payment.transaction.inputs) and _endorsement_ok(
                backend, evidence.variant, req, payment, i, evidence.merchant_key):
            return Proven(claimed, payment.transaction.inputs[i].pubkey)
        return Unproven("invalid endorsement")
    return Unproven("no endorsement signature")
