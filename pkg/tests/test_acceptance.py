"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines
inline; they are also repeated in the terminal summary.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from lm05pns import analytics as an
from lm05pns.adversary import EveKind, EveStrategy
from lm05pns.analytics import Protocol
from lm05pns.cli import main
from lm05pns.engine import SessionConfig, SessionStats, analytic_detection, merge, run_lm05
from lm05pns.reports import experiment
from lm05pns.source import LinkParams, poisson_pmf

from conftest import within_sigma

pytestmark = pytest.mark.acceptance


def _pmf(n, mu):
    return mu**n * math.exp(-mu) / math.factorial(n)


def _bisect(f, a, b, tol=1e-13):
    fa = f(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        if (f(m) > 0) == (fa > 0):
            a, fa = m, f(m)
        else:
            b = m
    return 0.5 * (a + b)


def test_criterion_1_poisson(criterion):
    t0 = time.perf_counter()
    checks = {
        "P0(0.1) ~ 0.905": abs(poisson_pmf(0, 0.1) - 0.905) < 1e-3,
        "P1(0.1) ~ 0.0905": abs(poisson_pmf(1, 0.1) - 0.0905) < 1e-3,
        "P2(0.1) = 4.52e-3": abs(poisson_pmf(2, 0.1) - 4.52e-3) < 1e-5,
    }
    criterion(1, "Poisson values", checks, time.perf_counter() - t0)


def test_criterion_2_rate_curve_crossings(criterion):
    t0 = time.perf_counter()
    p = LinkParams(mu=1.0, eta_b=1.0, gamma_c=0.0)
    # oracle: plain series and bisection, independent of the package
    p_tilde = 0.5 * _pmf(3, 1.0) + 1 - sum(_pmf(n, 1.0) for n in range(4))
    p_star = 1 - _pmf(0, 1.0) - _pmf(1, 1.0)
    oracle = {
        Protocol.LM05: _bisect(lambda t: 1 - math.exp(-t) - p_tilde, 1e-9, 1.0),
        Protocol.BB84: _bisect(lambda t: 1 - math.exp(-t) - p_star, 1e-9, 1.0),
    }
    expected = {Protocol.LM05: 0.0509, Protocol.BB84: 0.3068}
    checks = {}
    for proto in Protocol:
        t_cross = _bisect(lambda t: an.security_margin(p, proto, t), 1e-9, 1.0)
        checks[f"{proto.value} crossing {t_cross:.5f} vs {expected[proto]}"] = (
            abs(t_cross - expected[proto]) < 1e-3 and abs(t_cross - oracle[proto]) < 1e-9
        )
    elapsed = time.perf_counter() - t0
    checks["runtime < 1 s"] = elapsed < 1.0
    criterion(2, "security margin zero crossings", checks, elapsed)


def test_criterion_3_gain_vs_distance(criterion):
    t0 = time.perf_counter()
    p = LinkParams(alpha=2.5, gamma_c=8.0, d_b=5e-8, eta_b=0.5)
    model = an.DarkCountQber()
    g = {
        (proto, l): an.optimize_mu(p.with_(l=l), proto, model)[1]
        for proto in Protocol
        for l in (1.5, 3.0, 4.5, 6.0)
    }
    checks = {}
    for l in (1.5, 3.0, 4.5):
        checks[f"g_lm05 > g_bb84 at {l} km"] = g[Protocol.LM05, l] > g[Protocol.BB84, l]
    checks["g_bb84 >= g_lm05 at 6 km"] = g[Protocol.BB84, 6.0] >= g[Protocol.LM05, 6.0]
    for proto in Protocol:
        lmax = an.max_secure_distance(p, proto, model)
        checks[f"{proto.value} max distance {lmax:.2f} km in [6, 7]"] = 6.0 <= lmax <= 7.0
    elapsed = time.perf_counter() - t0
    checks["runtime < 30 s"] = elapsed < 30.0
    criterion(3, "gain ordering and maximum distance", checks, elapsed)


def test_criterion_4_experiment(criterion):
    t0 = time.perf_counter()
    results = {r.interpretation: r for r in experiment()}
    good = [r for r in results.values() if abs(r.ratio - 3.0) <= 0.5]
    checks = {
        "ratio 3 +- 0.5 under some reading "
        + ", ".join(f"{k}={r.ratio:.3f}" for k, r in results.items()): bool(good),
    }
    for r in good:
        lm, bb = r.rate(Protocol.LM05), r.rate(Protocol.BB84)
        checks[f"{r.interpretation} rates {lm / 1e3:.1f}/{bb / 1e3:.1f} kbit/s of order 1e2"] = (
            1e4 <= bb and lm < 1e6
        )
    elapsed = time.perf_counter() - t0
    criterion(4, "experimental working point", checks, elapsed)


def test_criterion_5_attack_bound_consistency(criterion):
    t0 = time.perf_counter()
    link = LinkParams(mu=1.0, gamma_c=0.0, eta_b=1.0, d_b=0.0, c=0.0)
    checks = {}
    for i, mu in enumerate((0.1, 0.5, 1.0)):
        for kind, bound in ((EveKind.PNS_M, an.pns_yield_lm05(mu)),
                            (EveKind.PNS_M_PRIME, an.pns_yield_m_prime(mu))):
            s = run_lm05(SessionConfig(link.with_(mu=mu), strategy=EveStrategy(kind),
                                       n_pulses=1_000_000, seed=500 + i))
            freq = s.eve_accepted / s.sent
            checks[f"{kind.value} mu={mu} {freq:.6g} vs {bound:.6g}"] = within_sigma(
                s.eve_accepted, s.sent, bound
            )
    grid = np.linspace(0.01, 3.0, 300)
    checks["prime yield < P~ on grid"] = all(
        an.pns_yield_m_prime(m) < an.pns_yield_lm05(m) for m in grid
    )
    elapsed = time.perf_counter() - t0
    checks["runtime < 60 s"] = elapsed < 60.0
    criterion(5, "attack acceptance equals yield bound", checks, elapsed)


def test_criterion_6_undetectability(criterion):
    t0 = time.perf_counter()
    link = LinkParams(mu=3.0, gamma_c=0.0, eta_b=1.0, d_b=0.0, c=0.3)
    checks = {}
    for kind in (EveKind.PNS_M, EveKind.PNS_M_PRIME):
        s = run_lm05(SessionConfig(link, strategy=EveStrategy(kind),
                                   n_pulses=1_200_000, seed=600))
        checks[f"{kind.value} accepted {s.eve_accepted} >= 1e5"] = s.eve_accepted >= 100_000
        checks[f"{kind.value} CM errors 0 of {s.cm_trials}"] = s.cm_errors == 0 and s.cm_trials > 0
        checks[f"{kind.value} MM errors 0"] = s.n_err == 0 and s.n_d == 0
    cfg = SessionConfig(LinkParams(mu=0.118, gamma_c=5.7, eta_b=0.5, d_b=2.4e-6),
                        n_pulses=1_000_000, seed=601)
    s = run_lm05(cfg)
    p = analytic_detection(cfg)
    checks[f"no-Eve detection {s.detected / s.sent:.6g} vs {p:.6g}"] = within_sigma(
        s.detected, s.sent, p
    )
    elapsed = time.perf_counter() - t0
    checks["runtime < 30 s"] = elapsed < 30.0
    criterion(6, "PNS attacks leave no errors", checks, elapsed)


@pytest.mark.filterwarnings("ignore::lm05pns.analytics.CascadeRangeWarning")
def test_criterion_7_property_suites(criterion, capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    checks = {"|tau(0.5) - 1| < 1e-12": abs(an.tau(0.5) - 1.0) < 1e-12}
    es = rng.random(1000)
    checks["h(e) = h(1-e)"] = all(
        abs(an.binary_entropy(e) - an.binary_entropy(1 - e)) < 1e-12 for e in es
    )
    mus = np.geomspace(1e-4, 10.0, 500)
    checks["P~ < P* on 500 mu"] = all(an.pns_yield_lm05(m) < an.pns_yield_bb84(m) for m in mus)

    beats = True
    p = LinkParams(alpha=2.5, gamma_c=8.0, d_b=5e-8, eta_b=0.5)
    model = an.DarkCountQber()
    for proto in Protocol:
        for l in (0.5, 2.0, 4.0):
            q = p.with_(l=l)
            _, g_opt = an.optimize_mu(q, proto, model)
            grid = np.geomspace(*an.MU_RANGE, 200)
            g_grid = max(an.evaluate(q.with_(mu=m), proto, model).g_sec for m in grid)
            beats &= g_opt >= g_grid * (1 - 1e-9)
    checks["optimizer >= 200-point grid"] = beats

    argv = ["simulate", "--eve", "pns-m", "--mu", "0.8", "--pulses", "100000", "--seed", "99"]
    outs = []
    for threads in ("1", "1", "4"):
        main([*argv, "--threads", threads])
        outs.append(capsys.readouterr().out)
    checks["bitwise identical reports"] = outs[0] == outs[1] == outs[2]

    names = SessionStats.count_fields()
    link = LinkParams()

    def random_stats():
        vals = rng.integers(0, 10**6, size=len(names))
        return replace(SessionStats.zero(Protocol.LM05, link), **dict(zip(names, map(int, vals))))

    ok = True
    for _ in range(200):
        a, b, c = random_stats(), random_stats(), random_stats()
        ok &= merge(a, b) == merge(b, a) and merge(merge(a, b), c) == merge(a, merge(b, c))
    checks["merge commutative and associative"] = ok

    elapsed = time.perf_counter() - t0
    checks["runtime < 10 s"] = elapsed < 10.0
    criterion(7, "property suites", checks, elapsed)
