"""Concrete BIP70: messages, refunds, endorsements, the Silkroad scenario and a benchmark."""
from .crypto import BACKENDS, KeyPair, get_backend
from .ledger import Address, Ledger, Transaction, TransactionInput, address_of
from .protocol import (
    Accept, EndorsementEvidence, Merchant, Payment, PaymentACK, PaymentRequest, Proven,
    RefundEntry, Reject, Unproven, Variant, Wallet, acknowledge, audit, build_payment,
    create_payment_request, issue_refund, verify_ack, verify_payment, verify_payment_request,
)
from .scenario import ScenarioReport, run_silkroad_scenario

__all__ = [
    "BACKENDS",
    "KeyPair",
    "get_backend",
    "Address",
    "Ledger",
    "Transaction",
    "TransactionInput",
    "address_of",
    "Accept",
    "EndorsementEvidence",
    "Merchant",
    "Payment",
    "PaymentACK",
    "PaymentRequest",
    "Proven",
    "RefundEntry",
    "Reject",
    "Unproven",
    "Variant",
    "Wallet",
    "acknowledge",
    "audit",
    "build_payment",
    "create_payment_request",
    "issue_refund",
    "verify_ack",
    "verify_payment",
    "verify_payment_request",
    "ScenarioReport",
    "run_silkroad_scenario",
]
