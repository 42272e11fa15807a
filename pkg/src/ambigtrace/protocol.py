"""Token generation, server-side rerandomization and the user's risk check."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .group import NONZERO, BadLength, DecodeError, GroupElement, Scalar


class BroadcastToken(NamedTuple):
    x: GroupElement
    y: GroupElement


class RerandToken(NamedTuple):
    z: GroupElement
    w: GroupElement


@dataclass(frozen=True)
class KeyPair:
    secret: Scalar
    public: GroupElement


def keygen(group, rng: random.Random) -> KeyPair:
    s = group.random_scalar(rng)
    return KeyPair(s, group.pow(group.generator, s))


def keypair_from_secret(group, secret: Scalar) -> KeyPair:
    return KeyPair(secret % group.order, group.pow(group.generator, secret))


def make_token(group, secret: Scalar, alpha: Scalar) -> BroadcastToken:
    """Honest broadcast token (g^alpha, g^(secret*alpha)).  alpha must be nonzero."""
    if not 0 < alpha < group.order:
        raise ValueError(f"alpha must lie in [1, p-1], got {alpha}")
    x = group.pow(group.generator, alpha)
    return BroadcastToken(x, group.pow(x, secret))


def fresh_token(group, secret: Scalar, rng: random.Random) -> BroadcastToken:
    return make_token(group, secret, group.random_scalar(rng, NONZERO))


def validate_token(group, t: BroadcastToken) -> bool:
    # x = e would let (e, e) match every user's key; see the negative-control test
    return t[0] != group.identity()


def shuff(group, t: BroadcastToken, beta: Scalar, gamma: Scalar, pk: GroupElement) -> RerandToken:
    """Rerandomize t for the holder of pk: (x^beta g^gamma, y^beta pk^gamma)."""
    x, y = t
    z = group.mul(group.pow(x, beta), group.pow(group.generator, gamma))
    w = group.mul(group.pow(y, beta), group.pow(pk, gamma))
    return RerandToken(z, w)


def risk_check(group, secret: Scalar, t: RerandToken) -> bool:
    z, w = t
    return group.pow(z, secret) == w


def is_honest_form(group, t: BroadcastToken, secret: Scalar) -> bool:
    """True iff t = Tok(secret, alpha) for some nonzero alpha."""
    x, y = t
    return x != group.identity() and group.pow(x, secret) == y


# -- wire encodings ---------------------------------------------------------

def encode_pair(group, t) -> bytes:
    return group.encode(t[0]) + group.encode(t[1])


def decode_pair(group, data: bytes, cls=BroadcastToken):
    n = group.encoding_width
    if len(data) != 2 * n:
        raise BadLength(f"expected {2 * n} bytes for a token, got {len(data)}")
    return cls(group.decode(data[:n]), group.decode(data[n:]))


def save_keyfile(group, keys: KeyPair, path) -> None:
    Path(path).write_text(
        group.encode_scalar(keys.secret).hex() + "\n" + group.encode(keys.public).hex() + "\n"
    )


def load_keyfile(group, path) -> KeyPair:
    lines = Path(path).read_text().split()
    if len(lines) != 2:
        raise DecodeError("key file must hold exactly two hex lines")
    secret = group.decode_scalar(bytes.fromhex(lines[0]))
    public = group.decode(bytes.fromhex(lines[1]))
    if group.pow(group.generator, secret) != public:
        raise DecodeError("public key does not match secret")
    return KeyPair(secret, public)
