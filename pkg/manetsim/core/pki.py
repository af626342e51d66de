"""Signing identities and certificates.

Two signers ship with the simulator. `KeyedHashSigner` is a keyed hash
(HMAC-SHA256) and is the fastest. `Ed25519Signer` gives real asymmetric
signatures from the `cryptography` package. Both derive every private key from
the scenario seed, so a run signs the same bytes every time. Any object
implementing `Signer` can replace them.
"""

import hashlib
import hmac
from dataclasses import dataclass, replace
from typing import Dict, Optional, Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from .errors import ConfigError, TrustError
from .models import SignerKind


@dataclass(frozen=True, slots=True)
class KeyPair:
    node_id: int
    public_key: bytes
    private_key: bytes


class Signer(Protocol):
    def generate_keypair(self, node_id: int) -> KeyPair: ...

    def forged_keypair(self, node_id: int, generation: int = 1) -> KeyPair: ...

    def sign(self, private_key: bytes, message: bytes) -> bytes: ...

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool: ...


class _SeededSigner:
    """Private keys are 32-byte digests of (seed, node id[, forgery generation])"""

    def __init__(self, seed: int):
        self._seed = seed.to_bytes(8, "big", signed=True)

    def _secret(self, label: bytes, node_id: int, generation: int = 0) -> bytes:
        material = label + b"|" + self._seed + node_id.to_bytes(8, "big", signed=True)
        if generation:
            material += generation.to_bytes(4, "big")
        return hashlib.sha256(material).digest()

    def _keypair(self, node_id: int, private: bytes) -> KeyPair:
        raise NotImplementedError

    def generate_keypair(self, node_id: int) -> KeyPair:
        return self._keypair(node_id, self._secret(b"sk", node_id))

    def forged_keypair(self, node_id: int, generation: int = 1) -> KeyPair:
        """A second identity for the same node id (used by key-forging attackers)"""
        return self._keypair(node_id, self._secret(b"forged", node_id, generation))


class KeyedHashSigner(_SeededSigner):
    """HMAC-SHA256 signatures; verification resolves a public key to its secret"""

    def __init__(self, seed: int):
        super().__init__(seed)
        self._secrets: Dict[bytes, bytes] = {}

    def _keypair(self, node_id: int, private: bytes) -> KeyPair:
        public = hashlib.sha256(b"pk|" + private).digest()
        self._secrets[public] = private
        return KeyPair(node_id=node_id, public_key=public, private_key=private)

    def sign(self, private_key: bytes, message: bytes) -> bytes:
        return hmac.new(private_key, message, hashlib.sha256).digest()

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        secret = self._secrets.get(public_key)
        if secret is None:
            return False
        return hmac.compare_digest(self.sign(secret, message), signature)


class Ed25519Signer(_SeededSigner):
    """Ed25519 signatures; keys are raw 32-byte encodings and verify needs no shared state"""

    def __init__(self, seed: int):
        super().__init__(seed)
        self._signing: Dict[bytes, Ed25519PrivateKey] = {}
        self._verifying: Dict[bytes, Optional[Ed25519PublicKey]] = {}

    def _keypair(self, node_id: int, private: bytes) -> KeyPair:
        key = Ed25519PrivateKey.from_private_bytes(private)
        public = key.public_key().public_bytes(
            encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw
        )
        self._signing[private] = key
        return KeyPair(node_id=node_id, public_key=public, private_key=private)

    def _private(self, private_key: bytes) -> Ed25519PrivateKey:
        key = self._signing.get(private_key)
        if key is None:
            key = self._signing[private_key] = Ed25519PrivateKey.from_private_bytes(private_key)
        return key

    def _public(self, public_key: bytes) -> Optional[Ed25519PublicKey]:
        if public_key not in self._verifying:
            try:
                self._verifying[public_key] = Ed25519PublicKey.from_public_bytes(public_key)
            except ValueError:
                self._verifying[public_key] = None
        return self._verifying[public_key]

    def sign(self, private_key: bytes, message: bytes) -> bytes:
        return self._private(private_key).sign(message)

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        key = self._public(public_key)
        if key is None:
            return False
        try:
            key.verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


SIGNERS = {
    SignerKind.HMAC: KeyedHashSigner,
    SignerKind.ED25519: Ed25519Signer,
}


def make_signer(kind: SignerKind | str, seed: int) -> Signer:
    try:
        return SIGNERS[SignerKind(kind)](seed)
    except ValueError:
        raise ConfigError(f"Unknown signer '{kind}', expected one of {[k.value for k in SignerKind]}") from None


@dataclass(frozen=True, slots=True)
class Certificate:
    subject_id: int
    subject_public_key: bytes
    issuer_id: int
    timestamp: float
    signature: bytes = b""

    def payload(self) -> bytes:
        return f"{self.subject_id}|{self.subject_public_key.hex()}|{self.timestamp!r}".encode()


def issue_certificate(
    issuer: KeyPair, subject_id: int, subject_public_key: bytes, now: float, signer: Signer
) -> Certificate:
    """Certificate over (subject id, key, timestamp) signed with the issuer's private key"""
    unsigned = Certificate(subject_id, subject_public_key, issuer.node_id, now)
    return replace(unsigned, signature=signer.sign(issuer.private_key, unsigned.payload()))


def verify_certificate(
    cert: Certificate, issuer_public_key: bytes, now: float, signer: Signer
) -> bool:
    if cert.timestamp > now:
        return False
    return signer.verify(issuer_public_key, cert.payload(), cert.signature)


class KeyDirectory:
    """Registered public keys and issued certificates, by node id"""

    def __init__(self, signer: Signer):
        self.signer = signer
        self._keys: Dict[int, KeyPair] = {}
        self._certificates: Dict[int, Certificate] = {}

    def register(self, keys: KeyPair) -> None:
        self._keys[keys.node_id] = keys

    def keypair(self, node_id: int) -> KeyPair:
        try:
            return self._keys[node_id]
        except KeyError:
            raise TrustError(f"Node {node_id} has no registered key") from None

    def public_key(self, node_id: int) -> bytes:
        return self.keypair(node_id).public_key

    def is_registered(self, node_id: int) -> bool:
        return node_id in self._keys

    def store_certificate(self, cert: Certificate) -> None:
        self._certificates[cert.subject_id] = cert

    def certificate(self, node_id: int) -> Optional[Certificate]:
        return self._certificates.get(node_id)
