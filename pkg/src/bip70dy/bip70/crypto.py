"""Signature backends behind one narrow interface.

``secp256k1`` (deterministic ECDSA over SHA-256) and ``ed25519`` come from
the ``cryptography`` package.  ``toy`` is a tiny deterministic Schnorr scheme
over a 128-bit group: fast enough for property tests, far too small for
anything else.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, ed25519

__all__ = ["KeyPair", "Backend", "BACKENDS", "get_backend", "sha256", "sha256d"]


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256d(data: bytes) -> bytes:
    return sha256(sha256(data))


@dataclass(frozen=True)
class KeyPair:
    public: bytes
    secret: bytes = field(repr=False)
    backend: str = "secp256k1"


class Backend:
    name = "abstract"

    def keygen(self, seed: bytes) -> KeyPair:
        raise NotImplementedError

    def sign(self, key: KeyPair, message: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        raise NotImplementedError


_SECP_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141


@lru_cache(maxsize=4096)
def _secp_private(secret: bytes) -> ec.EllipticCurvePrivateKey:
    return ec.derive_private_key(int.from_bytes(secret, "big"), ec.SECP256K1())


@lru_cache(maxsize=4096)
def _secp_public(public: bytes) -> ec.EllipticCurvePublicKey:
    return ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256K1(), public)


class Secp256k1(Backend):
    name = "secp256k1"
    _algo = ec.ECDSA(hashes.SHA256(), deterministic_signing=True)

    def keygen(self, seed: bytes) -> KeyPair:
        x = int.from_bytes(sha256(b"secp256k1" + seed), "big") % (_SECP_ORDER - 1) + 1
        secret = x.to_bytes(32, "big")
        pub = _secp_private(secret).public_key().public_bytes(
            serialization.Encoding.X962, serialization.PublicFormat.CompressedPoint)
        return KeyPair(pub, secret, self.name)

    def sign(self, key: KeyPair, message: bytes) -> bytes:
        return _secp_private(key.secret).sign(message, self._algo)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        try:
            _secp_public(public).verify(signature, message, self._algo)
        except (InvalidSignature, ValueError):
            return False
        return True


class Ed25519(Backend):
    name = "ed25519"

    def keygen(self, seed: bytes) -> KeyPair:
        secret = sha256(b"ed25519" + seed)
        pub = ed25519.Ed25519PrivateKey.from_private_bytes(secret).public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return KeyPair(pub, secret, self.name)

    def sign(self, key: KeyPair, message: bytes) -> bytes:
        return ed25519.Ed25519PrivateKey.from_private_bytes(key.secret).sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        try:
            ed25519.Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


class ToySchnorr(Backend):
    """Deterministic Schnorr in the order-q subgroup of Z_p*, p = 2q + 1."""

    name = "toy"
    Q = 170141183460469231731687303715884098003
    P = 2 * Q + 1
    G = 4
    WIDTH = 16

    def _h(self, *parts: bytes) -> int:
        return int.from_bytes(sha256(b"".join(len(p).to_bytes(4, "big") + p for p in parts)), "big") % self.Q

    def keygen(self, seed: bytes) -> KeyPair:
        x = self._h(b"toy-key", seed) or 1
        y = pow(self.G, x, self.P)
        return KeyPair(y.to_bytes(self.WIDTH, "big"), x.to_bytes(self.WIDTH, "big"), self.name)

    def sign(self, key: KeyPair, message: bytes) -> bytes:
        x = int.from_bytes(key.secret, "big")
        k = self._h(b"toy-nonce", key.secret, message) or 1
        r = pow(self.G, k, self.P)
        e = self._h(r.to_bytes(self.WIDTH, "big"), key.public, message)
        s = (k + e * x) % self.Q
        return e.to_bytes(self.WIDTH, "big") + s.to_bytes(self.WIDTH, "big")

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        if len(signature) != 2 * self.WIDTH or len(public) != self.WIDTH:
            return False
        y = int.from_bytes(public, "big")
        if not 1 < y < self.P or pow(y, self.Q, self.P) != 1:
            return False
        e = int.from_bytes(signature[:self.WIDTH], "big")
        s = int.from_bytes(signature[self.WIDTH:], "big")
        if e >= self.Q or s >= self.Q:
            return False
        r = pow(self.G, s, self.P) * pow(y, self.Q - e, self.P) % self.P
        return e == self._h(r.to_bytes(self.WIDTH, "big"), public, message)


BACKENDS: dict[str, Backend] = {b.name: b for b in (Secp256k1(), Ed25519(), ToySchnorr())}


def get_backend(name: str) -> Backend:
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {', '.join(sorted(BACKENDS))}") from None
