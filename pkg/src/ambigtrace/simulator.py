"""Multi-day contact simulation driving clients, the server and adversaries."""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .adversary import AdversaryStrategy, AdversaryView, StrategyKind, emit_tokens, linkage_attack
from .client import Client
from .group import get_group
from .protocol import is_honest_form, keygen
from .server import Server


@dataclass
class SimConfig:
    num_users: int = 20
    num_days: int = 5
    epochs_per_day: int = 96
    contacts_per_user_per_day: float = 3.0
    infection_probability: float = 0.1
    adversaries: dict[str, int] = field(default_factory=dict)  # strategy name -> count
    group: str = "toy"
    seed: int = 0

    def __post_init__(self):
        if self.num_users < 2:
            raise ValueError("num_users must be at least 2")
        if self.num_days < 0:
            raise ValueError("num_days must be non-negative")
        if self.epochs_per_day < 1:
            raise ValueError("epochs_per_day must be at least 1")
        if self.contacts_per_user_per_day < 0:
            raise ValueError("contacts_per_user_per_day must be non-negative")
        if not 0 <= self.infection_probability <= 1:
            raise ValueError("infection_probability must lie in [0, 1]")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        get_group(self.group)
        for name, count in self.adversaries.items():
            StrategyKind.parse(name)
            if count < 0:
                raise ValueError(f"negative adversary count for {name}")

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def strategy_kinds(self) -> list[StrategyKind]:
        return sorted({StrategyKind.parse(n) for n, c in self.adversaries.items() if c},
                      key=lambda k: k.value)


@dataclass
class DayMetrics:
    day: int
    reports: int = 0
    pool_size: int = 0
    batch_size: int = 0
    download_bytes_per_user: int = 0
    true_positive: int = 0
    false_positive: int = 0
    missed: int = 0
    linkage: dict = field(default_factory=dict)  # kind value -> [attempts, correct]


@dataclass(frozen=True)
class UserDay:
    """Ground truth for one honest user on one day (not written to CSV)."""

    day: int
    user: int
    exposed: bool
    notified: bool
    entries: int
    matches: int
    key_collision: bool  # pool holds someone else's token of honest form under this key


@dataclass
class SimMetrics:
    strategies: list[str]
    days: list[DayMetrics] = field(default_factory=list)
    user_days: list[UserDay] = field(default_factory=list)

    def total(self, name: str) -> int:
        return sum(getattr(d, name) for d in self.days)

    def linkage_accuracy(self, kind: str) -> float | None:
        att = sum(d.linkage.get(kind, [0, 0])[0] for d in self.days)
        cor = sum(d.linkage.get(kind, [0, 0])[1] for d in self.days)
        return cor / att if att else None


def stream(seed: int, kind: str, ident: int) -> random.Random:
    """Independent deterministic rng for one entity; str seeds hash stably."""
    return random.Random(f"{seed}/{kind}/{ident}")


def run_sim(config: SimConfig, *, contact_plan=None, infected=None) -> SimMetrics:
    """Run the day loop.  ``contact_plan`` maps day -> [(epoch_in_day, u, v)] and
    ``infected`` lists user ids; either replaces the random draw when given."""
    group = get_group(config.group)
    seed = config.seed
    E = config.epochs_per_day
    server = Server(group, stream(seed, "server", 0))
    metrics = SimMetrics(strategies=[k.value for k in config.strategy_kinds()])

    clients = []
    for uid in range(config.num_users):
        c = Client.create(group, stream(seed, "client", uid))
        server.register(uid, c.keys.public)
        clients.append(c)

    adversaries = []  # (uid, strategy, keys, rng)
    uid = config.num_users
    for kind in config.strategy_kinds():
        count = sum(c for n, c in config.adversaries.items() if StrategyKind.parse(n) is kind)
        for _ in range(count):
            rng = stream(seed, "adversary", uid)
            keys = keygen(group, rng)
            server.register(uid, keys.public)
            adversaries.append((uid, AdversaryStrategy(kind, E), keys, rng))
            uid += 1
    n_total = uid

    if infected is None:
        infect_rng = stream(seed, "infection", 0)
        infected = [u for u in range(config.num_users) if infect_rng.random() < config.infection_probability]

    for day in range(config.num_days):
        start = day * E
        dm = DayMetrics(day=day, linkage={k: [0, 0] for k in metrics.strategies})

        views: dict[int, AdversaryView] = {}
        for auid, strat, keys, rng in adversaries:
            views[auid], _ = emit_tokens(group, strat, rng, keys)

        def token_of(u, epoch):
            if u < config.num_users:
                return clients[u].current_token(epoch)
            return views[u].sent_tokens[epoch - start]

        if contact_plan is not None:
            contacts = [(e + start, u, v) for e, u, v in contact_plan.get(day, [])]
        else:
            contacts = draw_contacts(seed, day, n_total, config.contacts_per_user_per_day, E, start)
        contacts.sort(key=lambda c: c[0])  # stable; rotation needs monotone epochs
        for epoch, u, v in contacts:
            tu, tv = token_of(u, epoch), token_of(v, epoch)
            if v < config.num_users:
                clients[v].observe(tu, epoch)
            if u < config.num_users:
                clients[u].observe(tv, epoch)

        for u in infected:
            server.ingest_report(clients[u].make_report(since_epoch=start), reporter=u)
            dm.reports += 1
        pool = list(server.pool.tokens)
        pool_set = set(pool)
        batch = server.end_of_day()

        dm.pool_size = len(pool)
        dm.batch_size = max((len(v) for v in batch.per_user.values()), default=0)
        dm.download_bytes_per_user = len(pool) * 2 * group.encoding_width

        for u, c in enumerate(clients):
            today = {t for e, t in c.broadcast_log if e >= start}
            exposed = not today.isdisjoint(pool_set)
            res = c.check_batch(batch[u])
            collision = not exposed and any(is_honest_form(group, t, c.keys.secret) for t in pool)
            metrics.user_days.append(UserDay(day, u, exposed, res.at_risk, len(batch[u]),
                                             res.match_count, collision))
            if res.at_risk and exposed:
                dm.true_positive += 1
            elif res.at_risk:
                dm.false_positive += 1
            elif exposed:
                dm.missed += 1

        for auid, strat, keys, rng in adversaries:
            view = views[auid]
            view.batch = list(batch[auid])
            truth = {i for i, t in enumerate(view.sent_tokens) if t in pool_set}
            if truth:
                guess = linkage_attack(group, view, rng)
                tally = dm.linkage[strat.kind.value]
                tally[0] += 1
                tally[1] += guess in truth

        metrics.days.append(dm)
    return metrics


def draw_contacts(seed, day, n_users, rate, epochs, start):
    """Each user draws Poisson(rate) partners uniformly among the others."""
    gen = np.random.default_rng([seed, day])
    contacts = []
    for u in range(n_users):
        for _ in range(gen.poisson(rate)):
            v = int(gen.integers(n_users - 1))
            v += v >= u
            contacts.append((int(gen.integers(epochs)) + start, u, v))
    return contacts


BASE_COLUMNS = ["day", "reports", "pool_size", "batch_size", "download_bytes_per_user",
                "true_positive", "false_positive", "missed"]


def columns(metrics: SimMetrics) -> list[str]:
    cols = list(BASE_COLUMNS)
    for k in metrics.strategies:
        cols += [f"linkage_{k}_attempts", f"linkage_{k}_correct"]
    return cols


def summarize(metrics: SimMetrics) -> list[dict]:
    """One flat row per simulated day."""
    rows = []
    for d in metrics.days:
        row = {c: getattr(d, c) for c in BASE_COLUMNS}
        for k in metrics.strategies:
            att, cor = d.linkage.get(k, [0, 0])
            row[f"linkage_{k}_attempts"] = att
            row[f"linkage_{k}_correct"] = cor
        rows.append(row)
    return rows


def to_csv(metrics: SimMetrics) -> str:
    """Day rows plus a trailing ``total`` row (omitted for an empty run)."""
    cols = columns(metrics)
    rows = summarize(metrics)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if rows:
        total = {c: sum(r[c] for r in rows) for c in cols}
        total["day"] = "total"
        w.writerow(total)
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append({k: (v if v == "total" else int(v)) for k, v in row.items()})
    return out
