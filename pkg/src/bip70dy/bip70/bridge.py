"""Map concrete protocol messages onto symbolic terms.

``abstract`` turns a concrete message into the term the symbolic model
would use for it: byte strings and numbers become constants named by their
value, and a signature becomes ``sign(inv(K), payload)`` once it has been
checked under ``K``.  ``bridge`` lines a concrete message log up against a
symbolic attack trace and unifies them step by step.

In the symbolic trace, every maximal atom or function application is
replaced by a variable.  Values the honest merchant generates or holds from
the start share one variable across all steps, so the concrete run must
repeat them consistently.  Everything else was chosen by the attacker and
gets a fresh variable at each occurrence.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import count

from ..model import ProtocolSpec, expand, initial_atoms
from ..search import AttackTrace
from ..term import (
    Apply, Constant, Fresh, Pair, PrivKeyOf, Signed, Term, UnificationError, Variable,
    atoms, flatten, render, tuple_of, unify,
)
from .crypto import Backend
from .ledger import TransactionInput
from .protocol import Payment, PaymentACK, PaymentRequest, Variant, endorsement_payload
from .scenario import LogEntry, PayNow, ScenarioReport

__all__ = ["BridgeError", "Abstraction", "generalize", "bridge"]


class BridgeError(Exception):
    def __init__(self, step: int, reason: str):
        self.step = step
        super().__init__(f"bridge step {step}: {reason}")


def _c(v) -> Constant:
    if isinstance(v, bytes):
        return Constant("x" + v.hex())
    return Constant(repr(v))


@dataclass
class Abstraction:
    """Context for abstracting one merchant conversation."""

    backend: Backend
    merchant_key: bytes
    variant: Variant
    request: PaymentRequest | None = None

    def _signed(self, pub: bytes, msg: bytes, sig: bytes, payload: Term) -> Term:
        if not self.backend.verify(pub, msg, sig):
            raise ValueError("signature does not verify; refusing to abstract it")
        return Signed(PrivKeyOf(_c(pub)), payload)

    def request_term(self, r: PaymentRequest) -> Term:
        body = tuple_of(*(_c(f) for f in r.signed_fields()))
        return self._signed(self.merchant_key, r.signed_bytes(), r.signature, body)

    def input_term(self, inp: TransactionInput) -> Term:
        return self._signed(inp.pubkey, inp.signed_bytes(), inp.signature,
                            Pair(_c(inp.prev_tx_digest), _c(inp.pubkey)))

    def payment_term(self, p: Payment) -> Term:
        req = self.request
        if req is None:
            raise ValueError("payment seen before its request")
        tx = p.transaction
        pis = tuple_of(*(self.input_term(i) for i in tx.inputs))
        tau = Pair(pis, Pair(_c(req.merchant_address_digest), _c(tx.paid_to(req.merchant_address))))
        rrs = [Pair(_c(e.address.digest), _c(e.amount)) for e in p.refund_entries]
        ends = []
        if self.variant.endorsed:
            for i, e in enumerate(p.refund_entries):
                inp = tx.inputs[i]
                head = self.input_term(inp) if self.variant is Variant.ENDORSED else _c(self.merchant_key)
                body = tuple_of(head, _c(e.address.digest), _c(e.amount), _c(e.memo), self.request_term(req))
                msg = endorsement_payload(self.variant, inp, e.address, e.amount, e.memo, req, self.merchant_key)
                ends.append(self._signed(inp.pubkey, msg, e.endorsement or b"", body))
        return tuple_of(_c(p.merchant_id), tau, *rrs, *ends, _c(p.memo))

    def ack_term(self, a: PaymentACK) -> Term:
        pay = self.payment_term(a.payment)
        if a.signature is None:
            return tuple_of(*flatten(pay), _c(a.memo))
        return self._signed(self.merchant_key, a.signed_bytes(), a.signature, Pair(pay, _c(a.memo)))

    def term(self, msg) -> Term:
        if isinstance(msg, PayNow):
            return Constant(msg.label)
        if isinstance(msg, PaymentRequest):
            self.request = msg
            return self.request_term(msg)
        if isinstance(msg, Payment):
            return self.payment_term(msg)
        if isinstance(msg, PaymentACK):
            return self.ack_term(msg)
        raise TypeError(f"no abstraction for {type(msg).__name__}")


def generalize(t: Term, shared: set[Term], fresh: count) -> Term:
    """Replace maximal atoms/applications by variables (shared ones by name)."""
    if isinstance(t, (Apply, Constant, Fresh)) or not t.children():
        if atoms(t) <= shared:
            return Variable("m:" + render(t))
        return Variable(f"x{next(fresh)}")
    if isinstance(t, Pair):
        return Pair(generalize(t.left, shared, fresh), generalize(t.right, shared, fresh))
    if isinstance(t, Signed):
        return Signed(generalize(t.key, shared, fresh), generalize(t.payload, shared, fresh))
    if isinstance(t, PrivKeyOf):
        return PrivKeyOf(generalize(t.key, shared, fresh))
    raise TypeError(f"unexpected term {t!r}")


def merchant_values(spec: ProtocolSpec, trace: AttackTrace, role: str = "M") -> set[Term]:
    """Atoms of the trace that ``role`` minted or knew from the start."""
    spec = expand(spec)
    minters = spec.minters()
    out = {a for a in initial_atoms(spec, role)}
    for st in trace.steps:
        for a in atoms(st.message):
            if isinstance(a, Fresh) and minters.get(a.label) == role:
                out.add(a)
    return out


def bridge(spec: ProtocolSpec, trace: AttackTrace, report: ScenarioReport, backend: Backend,
           merchant_key: bytes, role: str = "M") -> dict[str, Term]:
    """Unify the merchant-facing concrete messages with the trace, step by step.

    Returns the combined substitution; raises ``BridgeError`` naming the
    first step that does not fit.
    """
    spec = expand(spec)
    steps = [s for s in trace.steps
             if role in (spec.actions[s.action - 1].sender, spec.actions[s.action - 1].receiver)]
    log: list[LogEntry] = [e for e in report.log if "merchant" in (e.sender, e.receiver)
                           and e.label in ("PayNow", "PaymentRequest", "Payment", "PaymentACK")]
    if len(log) < len(steps):
        raise BridgeError(len(log) + 1, "concrete run ended before the symbolic trace")
    ab = Abstraction(backend, merchant_key, report.protocol)
    shared = merchant_values(spec, trace, role)
    fresh = count(1)
    subst: dict[str, Term] = {}
    for k, (sym, con) in enumerate(zip(steps, log), 1):
        pattern = generalize(sym.message, shared, fresh)
        try:
            concrete = ab.term(con.message)
            subst = unify(pattern, concrete, subst)
        except (UnificationError, ValueError) as e:
            raise BridgeError(k, f"{con.label} does not fit {render(sym.message)}: {e}") from None
    return subst
