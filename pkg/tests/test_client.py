from ambigtrace.client import Client, RiskResult
from ambigtrace.group import CountingGroup
from ambigtrace.protocol import KeyPair, RerandToken, is_honest_form, make_token, shuff
from ambigtrace.stats import exhaustive_shuff_distribution


class FixedAlpha:
    """Stands in for an rng; randrange returns queued values to pin alpha."""

    def __init__(self, values):
        self.values = list(values)

    def randrange(self, *args):
        return self.values.pop(0)


def toy_client(toy, alphas, secret=3, period=1):
    return Client(toy, KeyPair(secret, toy.pow(2, secret)), FixedAlpha(alphas), period)


def test_current_token_example(toy):
    c = toy_client(toy, [2], period=4)
    assert c.current_token(0) == (4, 18)
    assert c.current_token(3) == (4, 18)
    assert c.current_alpha == 2
    assert len(c.broadcast_log) == 1


def test_rotation_draws_fresh_alpha(toy):
    c = toy_client(toy, [2, 7], period=4)
    t0 = c.current_token(0)
    t1 = c.current_token(4)
    assert t0 != t1 and c.current_alpha == 7
    assert [e for e, _ in c.broadcast_log] == [0, 4]


def test_repeated_alpha_is_permitted(toy, caplog):
    c = toy_client(toy, [5, 5])
    with caplog.at_level("INFO"):
        assert c.current_token(0) == c.current_token(1)
    assert "redrawn" in caplog.text
    assert len(c.broadcast_log) == 2


def test_broadcast_log_always_honest_form(toy, rng):
    c = Client.create(toy, rng, rotation_period=3)
    for e in range(200):
        c.current_token(e)
    assert c.current_alpha != 0
    assert all(is_honest_form(toy, t, c.keys.secret) for _, t in c.broadcast_log)


def test_observe_and_report(toy, rng):
    c = Client.create(toy, rng)
    assert c.make_report() == []
    c.observe((2, 9), 0)
    c.observe((1, 1), 1)
    c.observe((4, 18), 2)
    assert c.make_report() == [(2, 9), (1, 1), (4, 18)]
    assert c.make_report(since_epoch=1) == [(1, 1), (4, 18)]


def test_report_excludes_own_broadcasts(toy, rng):
    c = Client.create(toy, rng)
    own = c.current_token(0)
    c.observe((2, 9), 0)
    assert c.make_report() == [(2, 9)]


def test_check_batch_examples(toy):
    c = toy_client(toy, [])
    r = c.check_batch([RerandToken(18, 13), RerandToken(2, 9)])
    assert r == RiskResult(True, 1)
    assert str(r) == "at_risk=true match_count=1"
    assert c.check_batch([]) == RiskResult(False, 0)
    assert str(c.check_batch([])) == "at_risk=false match_count=0"


def test_check_batch_own_token(toy, rng):
    c = Client.create(toy, rng)
    t = c.current_token(0)
    out = shuff(toy, t, 4, 9, c.keys.public)
    assert c.check_batch([out]).at_risk


def test_check_batch_one_pow_per_entry(toy, rng):
    g = CountingGroup(toy)
    c = Client(g, KeyPair(3, 8), rng)
    c.observe((2, 9), 0)  # logs must not be touched
    c.check_batch([RerandToken(18, 13)] * 7)
    assert g.pow_count == 7


def test_ambiguity_between_two_alphas(toy):
    # the server's output distribution is the same whichever of the two tokens was reported
    for s in range(11):
        for a1 in range(1, 11):
            for a2 in range(a1 + 1, 11):
                d1 = exhaustive_shuff_distribution(toy, make_token(toy, s, a1), s)
                d2 = exhaustive_shuff_distribution(toy, make_token(toy, s, a2), s)
                assert d1 == d2
