"""Addresses, transactions and an in-memory append-only ledger."""
from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import Backend, KeyPair, sha256d
from .wire import encode

__all__ = ["Address", "address_of", "TransactionInput", "TxOutput", "Transaction",
           "sign_input", "Ledger", "LedgerError"]


@dataclass(frozen=True)
class Address:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != 20:
            raise ValueError("address digest must be 20 bytes")

    def __str__(self) -> str:
        return self.digest.hex()

    def wire_fields(self):
        return (self.digest,)


def address_of(public: bytes) -> Address:
    return Address(sha256d(public)[:20])


@dataclass(frozen=True)
class TransactionInput:
    prev_tx_digest: bytes
    pubkey: bytes
    signature: bytes

    def signed_bytes(self) -> bytes:
        return encode(self.prev_tx_digest, self.pubkey)

    def verify(self, backend: Backend) -> bool:
        return backend.verify(self.pubkey, self.signed_bytes(), self.signature)

    def wire_fields(self):
        return (self.prev_tx_digest, self.pubkey, self.signature)


def sign_input(backend: Backend, key: KeyPair, prev_tx_digest: bytes) -> TransactionInput:
    """Authorise spending the output of ``prev_tx_digest`` that pays ``key``."""
    unsigned = TransactionInput(prev_tx_digest, key.public, b"")
    return TransactionInput(prev_tx_digest, key.public, backend.sign(key, unsigned.signed_bytes()))


@dataclass(frozen=True)
class TxOutput:
    amount: int
    to: Address

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("output amount must be positive")

    def wire_fields(self):
        return (self.amount, self.to)


@dataclass(frozen=True)
class Transaction:
    inputs: tuple[TransactionInput, ...]
    outputs: tuple[TxOutput, ...]
    nonce: bytes = b""  # distinguishes otherwise identical minting transactions

    def wire_fields(self):
        return (list(self.inputs), list(self.outputs), self.nonce)

    @property
    def id(self) -> bytes:
        return sha256d(encode(*self.wire_fields()))

    def paid_to(self, addr: Address) -> int:
        return sum(o.amount for o in self.outputs if o.to == addr)


class LedgerError(Exception):
    pass


@dataclass
class Ledger:
    """Append-only map of confirmed transactions plus an unspent-output index.

    An input names a previous transaction and a public key; it spends the
    output of that transaction paying the key's address.
    """

    backend: Backend
    txs: dict[bytes, Transaction] = field(default_factory=dict)
    unspent: dict[tuple[bytes, Address], int] = field(default_factory=dict)
    minted: int = 0

    def mint(self, to: Address, amount: int, tag: bytes = b"") -> Transaction:
        tx = Transaction((), (TxOutput(amount, to),), nonce=b"mint:" + tag + len(self.txs).to_bytes(4, "big"))
        self._append(tx)
        self.minted += amount
        return tx

    def lookup(self, inp: TransactionInput) -> int | None:
        """Amount of the unspent output that ``inp`` refers to."""
        return self.unspent.get((inp.prev_tx_digest, address_of(inp.pubkey)))

    def check(self, tx: Transaction) -> str | None:
        """Reason ``tx`` cannot be appended, or ``None``."""
        if not tx.inputs:
            return "transaction has no inputs"
        total = 0
        seen = set()
        for inp in tx.inputs:
            ref = (inp.prev_tx_digest, address_of(inp.pubkey))
            if ref in seen:
                return "double spend within transaction"
            seen.add(ref)
            if not inp.verify(self.backend):
                return "bad input signature"
            amount = self.unspent.get(ref)
            if amount is None:
                return "unknown or spent input"
            total += amount
        if total != sum(o.amount for o in tx.outputs):
            return "inputs and outputs do not balance"
        return None

    def apply(self, tx: Transaction) -> None:
        problem = self.check(tx)
        if problem:
            raise LedgerError(problem)
        for inp in tx.inputs:
            del self.unspent[(inp.prev_tx_digest, address_of(inp.pubkey))]
        self._append(tx)

    def _append(self, tx: Transaction) -> None:
        if tx.id in self.txs:
            raise LedgerError("transaction already confirmed")
        self.txs[tx.id] = tx
        for o in tx.outputs:
            key = (tx.id, o.to)
            self.unspent[key] = self.unspent.get(key, 0) + o.amount

    def balance(self, addr: Address) -> int:
        return sum(v for (_, a), v in self.unspent.items() if a == addr)

    def total_unspent(self) -> int:
        return sum(self.unspent.values())
