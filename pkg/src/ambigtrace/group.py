"""Prime-order Schnorr groups.

Elements are plain ints (residues modulo the ambient prime) and scalars are
plain ints in [0, p-1].  Two instances are provided: a toy group of order 11
inside Z_23^*, small enough to enumerate every exponent pair, and the 2048-bit
MODP group from RFC 3526 (safe prime, generator 2 of order (P-1)/2).
"""

from __future__ import annotations

import random
import secrets
from dataclasses import dataclass, field

GroupElement = int
Scalar = int

FULL = "full"
NONZERO = "nonzero"

_RFC3526_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
    "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9"
    "DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)


class DecodeError(ValueError):
    """Malformed wire data."""


class BadLength(DecodeError):
    pass


class NotMember(DecodeError):
    """Residue out of range or outside the prime-order subgroup."""


@dataclass(frozen=True)
class SchnorrGroup:
    name: str
    modulus: int  # ambient prime P
    order: int  # prime p, order of the subgroup
    generator: GroupElement

    def __post_init__(self):
        if (self.modulus - 1) % self.order:
            raise ValueError("order must divide modulus - 1")
        g = self.generator
        if g in (0, 1) or pow(g, self.order, self.modulus) != 1:
            raise ValueError("generator must have exact order p")

    @property
    def encoding_width(self) -> int:
        return (self.modulus.bit_length() + 7) // 8

    @property
    def scalar_width(self) -> int:
        return (self.order.bit_length() + 7) // 8

    def identity(self) -> GroupElement:
        return 1

    def mul(self, a: GroupElement, b: GroupElement) -> GroupElement:
        return a * b % self.modulus

    def pow(self, base: GroupElement, e: Scalar) -> GroupElement:
        # builtin pow is square-and-multiply on the reduced exponent
        return pow(base, e % self.order, self.modulus)

    def is_member(self, a: int) -> bool:
        return 0 < a < self.modulus and pow(a, self.order, self.modulus) == 1

    def elements(self) -> list[GroupElement]:
        """All members in exponent order g^0, g^1, ...  Toy scale only."""
        if self.order > 1 << 16:
            raise ValueError(f"group {self.name!r} is too large to enumerate")
        out, a = [], 1
        for _ in range(self.order):
            out.append(a)
            a = a * self.generator % self.modulus
        return out

    def random_scalar(self, rng: random.Random, range: str = FULL) -> Scalar:
        # randrange rejection-samples from getrandbits, so draws are exactly uniform
        if range == FULL:
            return rng.randrange(self.order)
        if range == NONZERO:
            return rng.randrange(1, self.order)
        raise ValueError(f"unknown scalar range {range!r}")

    def random_element(self, rng: random.Random) -> GroupElement:
        return self.pow(self.generator, self.random_scalar(rng))

    def encode(self, a: GroupElement) -> bytes:
        return a.to_bytes(self.encoding_width, "big")

    def decode(self, data: bytes) -> GroupElement:
        if len(data) != self.encoding_width:
            raise BadLength(f"expected {self.encoding_width} bytes, got {len(data)}")
        a = int.from_bytes(data, "big")
        if not 0 < a < self.modulus:
            raise NotMember("residue out of range")
        if pow(a, self.order, self.modulus) != 1:
            raise NotMember("not a member of the prime-order subgroup")
        return a

    def encode_scalar(self, s: Scalar) -> bytes:
        return (s % self.order).to_bytes(self.scalar_width, "big")

    def decode_scalar(self, data: bytes) -> Scalar:
        if len(data) != self.scalar_width:
            raise BadLength(f"expected {self.scalar_width} bytes, got {len(data)}")
        s = int.from_bytes(data, "big")
        if s >= self.order:
            raise NotMember("scalar out of range")
        return s


@dataclass
class CountingGroup:
    """Wraps a group and counts exponentiations.  Everything else is delegated."""

    inner: SchnorrGroup
    pow_count: int = field(default=0)

    def pow(self, base, e):
        self.pow_count += 1
        return self.inner.pow(base, e)

    def reset(self):
        self.pow_count = 0

    def __getattr__(self, name):
        return getattr(self.inner, name)


TOY = SchnorrGroup("toy", modulus=23, order=11, generator=2)
LARGE = SchnorrGroup(
    "large", modulus=_RFC3526_2048, order=(_RFC3526_2048 - 1) // 2, generator=2
)

GROUPS = {"toy": TOY, "large": LARGE}


def get_group(name: str) -> SchnorrGroup:
    try:
        return GROUPS[name]
    except KeyError:
        raise ValueError(f"unknown group {name!r}; choose from {sorted(GROUPS)}") from None


def seeded_rng(seed) -> random.Random:
    """Deterministic PRNG for simulations and tests."""
    return random.Random(seed)


def system_rng() -> random.Random:
    """OS-backed CSPRNG for live keys."""
    return secrets.SystemRandom()
