"""Malicious-user token strategies and the linkage attack they are meant to enable.

Every adversary registers exactly one key (``view.secrets[0]``).  Any other
secret it holds exists only on its device.  For each sent token the view records
which secret, if any, the adversary knows it to be well formed under;
``linkage_attack`` tests every batch entry against those secrets.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .group import NONZERO, Scalar
from .protocol import BroadcastToken, KeyPair, RerandToken, fresh_token, keygen


class StrategyKind(enum.Enum):
    FRESH_KEY_PER_TOKEN = "FreshKeyPerToken"
    IDENTITY_TOKEN = "IdentityToken"
    ARBITRARY_PAIR = "ArbitraryPair"
    CORRELATED_SQUARE = "CorrelatedSquare"
    HONEST_BASELINE = "HonestBaseline"

    @classmethod
    def parse(cls, name: str) -> "StrategyKind":
        for k in cls:
            if name in (k.value, k.name, k.name.lower()):
                return k
        raise ValueError(f"unknown adversary strategy {name!r}")


@dataclass(frozen=True)
class AdversaryStrategy:
    kind: StrategyKind
    token_budget: int = 1

    def __post_init__(self):
        if self.token_budget < 1:
            raise ValueError("token_budget must be at least 1")


@dataclass
class AdversaryView:
    secrets: list[Scalar]
    sent_tokens: list[BroadcastToken] = field(default_factory=list)
    token_keys: list[int | None] = field(default_factory=list)  # index into secrets
    batch: list[RerandToken] = field(default_factory=list)

    @property
    def registered(self) -> Scalar:
        return self.secrets[0]


def _arbitrary_pair(group, rng):
    # the adversary knows both logs, hence the implied key b / a
    a = group.random_scalar(rng, NONZERO)
    b = group.random_scalar(rng)
    t = BroadcastToken(group.pow(group.generator, a), group.pow(group.generator, b))
    return t, b * pow(a, -1, group.order) % group.order


def emit_tokens(group, strategy: AdversaryStrategy, rng: random.Random,
                keys: KeyPair | None = None) -> tuple[AdversaryView, list[BroadcastToken]]:
    keys = keys if keys is not None else keygen(group, rng)
    view = AdversaryView(secrets=[keys.secret])
    k = strategy.token_budget
    kind = strategy.kind

    if kind is StrategyKind.HONEST_BASELINE:
        for _ in range(k):
            view.sent_tokens.append(fresh_token(group, keys.secret, rng))
            view.token_keys.append(0)

    elif kind is StrategyKind.FRESH_KEY_PER_TOKEN:
        # token 0 under the registered key, every later token under its own fresh key
        for i in range(k):
            if i:
                view.secrets.append(group.random_scalar(rng))
            view.sent_tokens.append(fresh_token(group, view.secrets[-1], rng))
            view.token_keys.append(len(view.secrets) - 1)

    elif kind is StrategyKind.IDENTITY_TOKEN:
        for _ in range(k):
            view.sent_tokens.append(BroadcastToken(group.identity(), group.random_element(rng)))
            view.token_keys.append(None)

    elif kind is StrategyKind.ARBITRARY_PAIR:
        for _ in range(k):
            t, implied = _arbitrary_pair(group, rng)
            view.secrets.append(implied)
            view.sent_tokens.append(t)
            view.token_keys.append(len(view.secrets) - 1)

    elif kind is StrategyKind.CORRELATED_SQUARE:
        while len(view.sent_tokens) < k:
            t, implied = _arbitrary_pair(group, rng)
            view.secrets.append(implied)
            sq = BroadcastToken(group.mul(t.x, t.x), group.mul(t.y, t.y))
            for u in (t, sq)[: k - len(view.sent_tokens)]:
                view.sent_tokens.append(u)
                view.token_keys.append(len(view.secrets) - 1)

    return view, list(view.sent_tokens)


def linkage_hits(group, view: AdversaryView) -> set[int]:
    """Indices of sent tokens implicated by some batch entry."""
    by_secret: dict[int, list[int]] = {}
    for i, ki in enumerate(view.token_keys):
        if ki is not None:
            by_secret.setdefault(ki, []).append(i)
    hits = set()
    for z, w in view.batch:
        for ki, idx in by_secret.items():
            if group.pow(z, view.secrets[ki]) == w:
                hits.update(idx)
    return hits


def linkage_attack(group, view: AdversaryView, rng: random.Random) -> int | None:
    """Guess which sent token was reported; None when no entry implicates any.

    Ties between implicated tokens are broken uniformly at random, which is the
    best the adversary can do when they are indistinguishable.
    """
    hits = linkage_hits(group, view)
    if not hits:
        return None
    return rng.choice(sorted(hits))
