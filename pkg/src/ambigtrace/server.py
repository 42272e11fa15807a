"""Server state: key registry, the day's infected-token pool, personalized batches.

All mutation goes through ``Server``'s lock.  Closed-day batches are stored as
immutable snapshots and may be read without it.
"""

from __future__ import annotations

import random
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from .group import DecodeError, GroupElement, NotMember
from .protocol import BroadcastToken, RerandToken, decode_pair, encode_pair, shuff, validate_token

DEFAULT_REPORT_CAP = 4096
USER_ID_MAX = (1 << 64) - 1
LATEST = None


class ServerError(Exception):
    reason = 0x07


class DuplicateUser(ServerError):
    reason = 0x03


class ReportTooLarge(ServerError):
    reason = 0x04


class UnknownUser(ServerError):
    reason = 0x05


class UnknownDay(ServerError):
    reason = 0x06


class DuplicateReport(ServerError):
    reason = 0x08


@dataclass
class Registry:
    keys: dict[int, GroupElement] = field(default_factory=dict)

    def register(self, user_id: int, pk: GroupElement) -> None:
        if not 0 <= user_id <= USER_ID_MAX:
            raise ValueError(f"user_id {user_id} is not a 64-bit unsigned integer")
        if user_id in self.keys:
            raise DuplicateUser(f"user {user_id} already registered a key")
        self.keys[user_id] = pk

    def __contains__(self, user_id):
        return user_id in self.keys

    def __len__(self):
        return len(self.keys)


@dataclass
class InfectedPool:
    day: int = 0
    tokens: list[BroadcastToken] = field(default_factory=list)
    cap: int | None = None

    def ingest_report(self, group, tokens, report_cap: int = DEFAULT_REPORT_CAP) -> int:
        """Append the tokens that pass validation; returns how many were kept."""
        tokens = list(tokens)
        if len(tokens) > report_cap:
            raise ReportTooLarge(f"report of {len(tokens)} tokens exceeds cap {report_cap}")
        accepted = 0
        for t in tokens:
            if self.cap is not None and len(self.tokens) >= self.cap:
                break
            if validate_token(group, t):
                self.tokens.append(t)
                accepted += 1
        return accepted


@dataclass(frozen=True)
class PersonalizedBatch:
    day: int
    per_user: MappingProxyType  # user_id -> tuple[RerandToken, ...]

    def __getitem__(self, user_id) -> tuple[RerandToken, ...]:
        return self.per_user[user_id]


def build_batch(group, pool: InfectedPool, registry: Registry, rng: random.Random) -> PersonalizedBatch:
    """Rerandomize every pooled token for every registered user.

    Users are visited in increasing id order; for each pooled token a fresh
    (beta, gamma) pair is drawn from ``rng`` (beta first), then the user's list
    is shuffled with the same rng.  The pool is not modified.
    """
    snapshot = tuple(pool.tokens)
    per_user = {}
    for uid in sorted(registry.keys):
        pk = registry.keys[uid]
        out = []
        for t in snapshot:
            beta = group.random_scalar(rng)
            gamma = group.random_scalar(rng)
            out.append(shuff(group, t, beta, gamma, pk))
        rng.shuffle(out)
        per_user[uid] = tuple(out)
    return PersonalizedBatch(pool.day, MappingProxyType(per_user))


class Journal:
    """Append-only record file: kind(1) | length(4, big-endian) | payload."""

    REGISTER, REPORT, END_OF_DAY = b"R", b"T", b"D"

    def __init__(self, path):
        self.path = Path(path)

    def append(self, kind: bytes, payload: bytes) -> None:
        with self.path.open("ab") as f:
            f.write(kind + struct.pack(">I", len(payload)) + payload)

    def records(self):
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        i = 0
        while i < len(data):
            if i + 5 > len(data):
                raise DecodeError("truncated journal record header")
            kind = data[i:i + 1]
            (n,) = struct.unpack(">I", data[i + 1:i + 5])
            if i + 5 + n > len(data):
                raise DecodeError("truncated journal record payload")
            yield kind, data[i + 5:i + 5 + n]
            i += 5 + n


class Server:
    def __init__(self, group, rng: random.Random | None = None, *,
                 report_cap: int = DEFAULT_REPORT_CAP, pool_cap: int | None = None,
                 journal_path=None):
        self.group = group
        self.rng = rng if rng is not None else random.SystemRandom()
        self.report_cap = report_cap
        self.registry = Registry()
        self.pool = InfectedPool(day=0, cap=pool_cap)
        self.batches: dict[int, PersonalizedBatch] = {}
        self._reporters: set = set()
        self._latest: int | None = None
        self._lock = threading.Lock()
        self.journal = None
        if journal_path is not None:
            self.journal = Journal(journal_path)
            self._replay()

    @property
    def day(self) -> int:
        return self.pool.day

    def _replay(self):
        w = self.group.encoding_width
        for kind, payload in self.journal.records():
            if kind == Journal.REGISTER:
                uid = int.from_bytes(payload[:8], "big")
                self.registry.register(uid, self.group.decode(payload[8:]))
            elif kind == Journal.REPORT:
                for i in range(0, len(payload), 2 * w):
                    self.pool.tokens.append(decode_pair(self.group, payload[i:i + 2 * w]))
            elif kind == Journal.END_OF_DAY:
                self.pool = InfectedPool(day=self.pool.day + 1, cap=self.pool.cap)
            else:
                raise DecodeError(f"unknown journal record kind {kind!r}")

    def register(self, user_id: int, pk: GroupElement) -> None:
        if not self.group.is_member(pk):
            raise NotMember("public key is not a group member")
        with self._lock:
            self.registry.register(user_id, pk)
            if self.journal:
                self.journal.append(Journal.REGISTER, user_id.to_bytes(8, "big") + self.group.encode(pk))

    def ingest_report(self, tokens, reporter=None) -> int:
        """Accept an infected user's received-token list.

        ``reporter`` is optional because wire reports are anonymous; when given,
        a second report from the same reporter on the same day is refused.
        """
        with self._lock:
            if reporter is not None:
                if reporter in self._reporters:
                    raise DuplicateReport(f"{reporter} already reported today")
            before = len(self.pool.tokens)
            accepted = self.pool.ingest_report(self.group, tokens, self.report_cap)
            if reporter is not None:
                self._reporters.add(reporter)
            if self.journal and accepted:
                kept = self.pool.tokens[before:]
                self.journal.append(Journal.REPORT, b"".join(encode_pair(self.group, t) for t in kept))
            return accepted

    def end_of_day(self) -> PersonalizedBatch:
        with self._lock:
            batch = build_batch(self.group, self.pool, self.registry, self.rng)
            self.batches[batch.day] = batch
            self._latest = batch.day
            self.pool = InfectedPool(day=self.pool.day + 1, cap=self.pool.cap)
            self._reporters = set()
            if self.journal:
                self.journal.append(Journal.END_OF_DAY, b"")
            return batch

    def last_closed_day(self) -> int | None:
        return self._latest

    def fetch(self, user_id: int, day: int | None = LATEST) -> tuple[int, tuple[RerandToken, ...]]:
        # single dict lookups are atomic and closed batches never change
        if day is None:
            day = self._latest
            if day is None:
                raise UnknownDay("no day has been closed yet")
        batch = self.batches.get(day)
        if batch is None:
            raise UnknownDay(f"day {day} is not closed")
        if user_id not in batch.per_user:
            raise UnknownUser(f"user {user_id} has no batch for day {day}")
        return day, batch[user_id]
