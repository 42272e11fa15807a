import io
import json
import random

import pytest

from ambigtrace import wire
from ambigtrace.cli import main
from ambigtrace.group import TOY
from ambigtrace.server import Server


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_stats_all_toy():
    code, out = run("stats", "all", "--group", "toy")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 1 + 33
    assert all(line.endswith("PASS") for line in lines[1:])


def test_stats_large_t1_is_sampled():
    code, out = run("stats", "t1", "--group", "large", "--samples", "2560")
    assert code == 0 and "chi2=" in out


def test_stats_exhaustive_on_large_is_usage_error(capsys):
    code, _ = run("stats", "t2", "--group", "large")
    assert code == 2
    assert "toy group" in capsys.readouterr().err


def test_bad_usage_exits_nonzero():
    assert run("stats", "t9")[0] != 0
    assert run()[0] != 0


def test_sim_run_deterministic(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"num_users": 10, "num_days": 3, "epochs_per_day": 8,
                               "contacts_per_user_per_day": 2.0, "infection_probability": 0.3,
                               "adversaries": {"FreshKeyPerToken": 1}, "group": "toy", "seed": 5}))
    a = run("sim", "run", "--config", str(cfg), "--seed", "1")
    b = run("sim", "run", "--config", str(cfg), "--seed", "1")
    assert a[0] == 0 and a == b
    c = run("sim", "run", "--config", str(cfg), "--seed", "2")
    assert c[1] != a[1]
    assert len(a[1].splitlines()) == 1 + 3 + 1


def test_sim_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"num_users": 1}')
    assert run("sim", "run", "--config", str(cfg))[0] == 2


def test_keygen(tmp_path):
    key = tmp_path / "k"
    code, out = run("keygen", "--group", "toy", "--out", str(key), "--seed", "3")
    assert code == 0
    secret_hex, public_hex = key.read_text().split()
    assert out.strip() == public_hex
    assert pow(2, int(secret_hex, 16), 23) == int(public_hex, 16)


@pytest.fixture
def service():
    svc = wire.TCPService(Server(TOY, random.Random(0)))
    svc.start()
    yield svc
    svc.shutdown()
    svc.server_close()


def test_client_flow(tmp_path, service):
    addr = service.addr
    ka, kb, kc = (tmp_path / n for n in "abc")
    for i, k in enumerate((ka, kb, kc)):
        assert run("keygen", "--group", "toy", "--out", str(k), "--seed", str(i))[0] == 0
    for uid, k in ((1, ka), (2, kb), (3, kc)):
        assert run("client", "register", "--group", "toy", "--key", str(k), "--user-id", str(uid),
                   "--addr", addr) == (0, "registered\n")
    sa, sb = tmp_path / "sa.json", tmp_path / "sb.json"
    code, tok_a = run("client", "broadcast", "--group", "toy", "--key", str(ka), "--state", str(sa),
                      "--epoch", "0")
    assert code == 0
    assert run("client", "broadcast", "--group", "toy", "--key", str(ka), "--state", str(sa),
               "--epoch", "0")[1] == tok_a
    assert run("client", "observe", "--group", "toy", "--key", str(kb), "--state", str(sb),
               "--epoch", "0", "--token", tok_a.strip())[0] == 0
    assert run("client", "report", "--group", "toy", "--key", str(kb), "--state", str(sb),
               "--addr", addr) == (0, "accepted=1\n")
    service.state.end_of_day()
    code, out = run("client", "check", "--group", "toy", "--key", str(ka), "--user-id", "1", "--addr", addr)
    assert code == 0 and out.startswith("at_risk=true")


def test_client_check_no_matches(tmp_path, service):
    k = tmp_path / "k"
    run("keygen", "--group", "toy", "--out", str(k), "--seed", "1")
    run("client", "register", "--group", "toy", "--key", str(k), "--user-id", "5", "--addr", service.addr)
    service.state.end_of_day()
    code, out = run("client", "check", "--group", "toy", "--key", str(k), "--user-id", "5",
                    "--addr", service.addr)
    assert (code, out) == (0, "at_risk=false match_count=0\n")


def test_client_register_duplicate_fails(tmp_path, service):
    k = tmp_path / "k"
    run("keygen", "--group", "toy", "--out", str(k), "--seed", "1")
    args = ("client", "register", "--group", "toy", "--key", str(k), "--user-id", "5", "--addr", service.addr)
    assert run(*args)[0] == 0
    assert run(*args)[0] == 2


def test_client_observe_bad_token(tmp_path):
    k = tmp_path / "k"
    run("keygen", "--group", "toy", "--out", str(k), "--seed", "1")
    code, _ = run("client", "observe", "--group", "toy", "--key", str(k), "--state", str(tmp_path / "s"),
                  "--epoch", "0", "--token", "0512")
    assert code == 2
