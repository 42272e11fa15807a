"""Client side: alpha rotation, the contact log, reporting, and batch checking."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

from .group import NONZERO, Scalar
from .protocol import BroadcastToken, KeyPair, RerandToken, keygen, make_token, risk_check

log = logging.getLogger(__name__)

EPOCH_MINUTES = 15


@dataclass(frozen=True)
class RiskResult:
    at_risk: bool
    match_count: int

    def __str__(self):
        return f"at_risk={str(self.at_risk).lower()} match_count={self.match_count}"


@dataclass
class Client:
    group: object
    keys: KeyPair
    rng: random.Random
    rotation_period: int = 1  # epochs
    current_alpha: Scalar = 0
    broadcast_log: list[tuple[int, BroadcastToken]] = field(default_factory=list)
    received_log: list[tuple[int, BroadcastToken]] = field(default_factory=list)
    _period: int | None = None
    _token: BroadcastToken | None = None

    @classmethod
    def create(cls, group, rng, rotation_period=1, keys=None):
        if rotation_period < 1:
            raise ValueError("rotation_period must be at least one epoch")
        return cls(group, keys if keys is not None else keygen(group, rng), rng, rotation_period)

    def current_token(self, epoch: int) -> BroadcastToken:
        period = epoch // self.rotation_period
        if period != self._period:
            alpha = self.group.random_scalar(self.rng, NONZERO)
            if alpha == self.current_alpha:
                log.info("alpha redrawn to its previous value at epoch %d", epoch)
            self.current_alpha = alpha
            self._period = period
            self._token = make_token(self.group, self.keys.secret, alpha)
            self.broadcast_log.append((epoch, self._token))
        return self._token

    def observe(self, token: BroadcastToken, epoch: int) -> None:
        # stored unvalidated; filtering is the server's job
        self.received_log.append((epoch, BroadcastToken(*token)))

    def make_report(self, since_epoch: int | None = None) -> list[BroadcastToken]:
        """Tokens received (optionally from ``since_epoch`` on), timestamps stripped."""
        return [t for e, t in self.received_log if since_epoch is None or e >= since_epoch]

    def check_batch(self, batch) -> RiskResult:
        n = sum(risk_check(self.group, self.keys.secret, RerandToken(*t)) for t in batch)
        return RiskResult(n > 0, n)
