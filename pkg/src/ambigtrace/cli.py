"""Command-line entry points.

    ambigtrace keygen --out KEY [--group toy|large]
    ambigtrace serve [--addr HOST:PORT] [--day-length SECONDS] [--journal FILE]
    ambigtrace client register|broadcast|observe|report|check ...
    ambigtrace sim run --config FILE [--seed N] [--out FILE]
    ambigtrace stats t1|t2|t3|all [--group toy|large]
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from pathlib import Path

from . import simulator, stats, wire
from .client import Client
from .group import DecodeError, get_group, seeded_rng, system_rng
from .protocol import BroadcastToken, decode_pair, encode_pair, keygen, load_keyfile, save_keyfile
from .server import Server

log = logging.getLogger("ambigtrace")


class UsageError(Exception):
    pass


def _rng(seed):
    return seeded_rng(seed) if seed is not None else system_rng()


# -- client state file ------------------------------------------------------

def load_client(group, keys, path, rotation_period=1) -> Client:
    c = Client.create(group, system_rng(), rotation_period=rotation_period, keys=keys)
    p = Path(path)
    if p.exists():
        st = json.loads(p.read_text())
        c.rotation_period = st["rotation_period"]
        c.current_alpha = st["alpha"]
        c._period = st["period"]
        c.broadcast_log = [(e, decode_pair(group, bytes.fromhex(h))) for e, h in st["broadcast_log"]]
        c.received_log = [(e, decode_pair(group, bytes.fromhex(h))) for e, h in st["received_log"]]
        c._token = c.broadcast_log[-1][1] if c.broadcast_log else None
    return c


def save_client(group, c: Client, path) -> None:
    st = {
        "rotation_period": c.rotation_period,
        "alpha": c.current_alpha,
        "period": c._period,
        "broadcast_log": [(e, encode_pair(group, t).hex()) for e, t in c.broadcast_log],
        "received_log": [(e, encode_pair(group, t).hex()) for e, t in c.received_log],
    }
    Path(path).write_text(json.dumps(st))


def _token_arg(group, text) -> BroadcastToken:
    try:
        return decode_pair(group, bytes.fromhex(text))
    except ValueError as e:
        raise UsageError(f"bad token {text!r}: {e}") from None


# -- subcommands ------------------------------------------------------------

def cmd_keygen(args, out):
    g = get_group(args.group)
    keys = keygen(g, _rng(args.seed))
    save_keyfile(g, keys, args.out)
    print(g.encode(keys.public).hex(), file=out)
    return 0


def cmd_serve(args, out):
    g = get_group(args.group)
    state = Server(g, _rng(args.seed), journal_path=args.journal, report_cap=args.report_cap)
    host, port = wire.resolve_addr(args.addr)
    svc = wire.TCPService(state, host, port)
    print(f"listening on {svc.addr} (group {g.name})", file=out, flush=True)
    stop = threading.Event()

    def roll():
        while not stop.wait(args.day_length):
            b = state.end_of_day()
            log.info("closed day %d for %d users", b.day, len(b.per_user))

    if args.day_length > 0:
        threading.Thread(target=roll, daemon=True).start()
    try:
        svc.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        svc.server_close()
    return 0


def cmd_client(args, out):
    g = get_group(args.group)
    if args.action == "register":
        keys = load_keyfile(g, args.key)
        wire.remote_register(args.addr, g, args.user_id, keys.public)
        print("registered", file=out)
    elif args.action == "broadcast":
        keys = load_keyfile(g, args.key)
        c = load_client(g, keys, args.state, args.rotation_period)
        t = c.current_token(args.epoch)
        save_client(g, c, args.state)
        print(encode_pair(g, t).hex(), file=out)
    elif args.action == "observe":
        keys = load_keyfile(g, args.key)
        c = load_client(g, keys, args.state)
        for tok in args.token:
            c.observe(_token_arg(g, tok), args.epoch)
        save_client(g, c, args.state)
    elif args.action == "report":
        keys = load_keyfile(g, args.key)
        c = load_client(g, keys, args.state)
        n = wire.remote_report(args.addr, g, c.make_report(args.since))
        print(f"accepted={n}", file=out)
    elif args.action == "check":
        keys = load_keyfile(g, args.key)
        day, entries = wire.remote_fetch(args.addr, g, args.user_id, args.day)
        c = Client.create(g, system_rng(), keys=keys)
        print(c.check_batch(entries), file=out)
    return 0


def cmd_sim(args, out):
    cfg_text = Path(args.config).read_text() if args.config else "{}"
    cfg = simulator.SimConfig.from_json(cfg_text)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.__post_init__()
    text = simulator.to_csv(simulator.run_sim(cfg))
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    return 0


def stats_rows(group, which, samples=25600, seed=0):
    """Rows of (theorem, slice, cases, failures); one per theorem per secret."""
    rows = []
    exhaustive = group.order <= stats.EXHAUSTIVE_LIMIT
    if which in ("t1", "all"):
        if exhaustive:
            for o in stats.sweep_theorem1(group):
                rows.append(("t1", f"s={o.params['s']}", 1, int(not o.passed)))
        else:
            rng = seeded_rng(seed)
            draws = (group.random_scalar(rng) for _ in range(samples))
            counts = stats.top_byte_buckets(draws, group.order.bit_length())
            chi, ok = stats.chi_square_uniform(counts, 0.001)
            rows.append(("t1", f"chi2={chi:.1f} top-byte n={samples}", 1, int(not ok)))
    for name, sweep in (("t2", stats.sweep_theorem2), ("t3", stats.sweep_theorem3)):
        if which not in (name, "all"):
            continue
        if not exhaustive:
            if which == name:
                raise UsageError(f"{name} is an exhaustive check and needs the toy group")
            continue
        per_s: dict[int, list] = {}
        for o in sweep(group):
            per_s.setdefault(o.params["s"], []).append(o)
        for s, outs in sorted(per_s.items()):
            rows.append((name, f"s={s}", len(outs), sum(not o.passed for o in outs)))
    return rows


def cmd_stats(args, out):
    g = get_group(args.group)
    rows = stats_rows(g, args.which, args.samples, args.seed)
    print(f"{'theorem':<8} {'slice':<28} {'cases':>6} {'fail':>5}  result", file=out)
    for th, sl, n, fails in rows:
        print(f"{th:<8} {sl:<28} {n:>6} {fails:>5}  {'PASS' if not fails else 'FAIL'}", file=out)
    return 1 if any(r[3] for r in rows) else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ambigtrace", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def group_arg(p):
        p.add_argument("--group", choices=["toy", "large"], default="large")

    p = sub.add_parser("keygen", help="generate a key file")
    group_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("serve", help="run the tracing server")
    group_arg(p)
    p.add_argument("--addr")
    p.add_argument("--day-length", type=float, default=86400.0, help="seconds; 0 disables rollover")
    p.add_argument("--journal")
    p.add_argument("--report-cap", type=int, default=4096)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("client", help="client operations")
    csub = p.add_subparsers(dest="action", required=True)
    for name in ("register", "broadcast", "observe", "report", "check"):
        c = csub.add_parser(name)
        group_arg(c)
        c.add_argument("--key", required=True)
        c.add_argument("--addr")
        if name in ("register", "check"):
            c.add_argument("--user-id", type=int, required=True)
        if name in ("broadcast", "observe", "report"):
            c.add_argument("--state", required=True)
        if name in ("broadcast", "observe"):
            c.add_argument("--epoch", type=int, required=True)
        if name == "broadcast":
            c.add_argument("--rotation-period", type=int, default=1)
        if name == "observe":
            c.add_argument("--token", nargs="+", required=True)
        if name == "report":
            c.add_argument("--since", type=int)
        if name == "check":
            c.add_argument("--day", type=int)
    p.set_defaults(func=cmd_client)

    p = sub.add_parser("sim", help="contact simulation")
    ssub = p.add_subparsers(dest="action", required=True)
    r = ssub.add_parser("run")
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("stats", help="verify the distributional claims")
    p.add_argument("which", choices=["t1", "t2", "t3", "all"])
    p.add_argument("--group", choices=["toy", "large"], default="toy")
    p.add_argument("--samples", type=int, default=25600)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except (UsageError, DecodeError, ValueError, OSError, wire.RemoteError) as e:
        print(f"ambigtrace: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
