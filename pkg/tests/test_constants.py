import math

import numpy as np
import pytest

from oracles import mp_constants
from sharpmax.constants import (
    CertificationError,
    alpha0_of_p,
    alpha_of_beta,
    alpha_sweep,
    beta_of_alpha,
    c_p,
    c_p_by_search,
    certify_lemma6,
    constants_record,
    gammas,
    h_value,
    r_closed_form,
    r_of_alpha,
    tau_of_p,
    tau_residual,
)

P_SET = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 50.0]
A0_2 = 0.5 + 0.5 / math.sqrt(3.0)


@pytest.mark.parametrize(
    "p, t, expected",
    [(2.0, 1.0 + 1e-15, math.sqrt(2.0)), (2.0, 2.0 / math.sqrt(3.0), 3**0.75 / math.sqrt(2.0)), (2.0, 10.0, 0.6316625)],
)
def test_h_examples(p, t, expected):
    assert h_value(p, t) == pytest.approx(expected, rel=1e-7)


def test_h_rejects_domain():
    with pytest.raises(ValueError):
        h_value(2.0, 1.0)
    with pytest.raises(ValueError):
        h_value(1.0, 2.0)


def test_tau_examples():
    assert tau_of_p(2.0) == pytest.approx(2.0 / math.sqrt(3.0), rel=1e-14)
    assert tau_of_p(3.0) == pytest.approx(1.17995, abs=1e-5)
    with pytest.raises(ValueError):
        tau_of_p(1.0)
    with pytest.raises(ValueError):
        tau_of_p(float("inf"))


@pytest.mark.parametrize("p", P_SET)
def test_against_mpmath(p):
    tau, cp, a0, r0 = mp_constants()[p]
    assert tau_of_p(p) == pytest.approx(tau, rel=1e-12)
    assert abs(tau_residual(p, tau_of_p(p))) <= 1e-11
    assert c_p(p) == pytest.approx(cp, rel=1e-12)
    assert alpha0_of_p(p) == pytest.approx(a0, rel=1e-12)
    assert float(r_of_alpha(alpha0_of_p(p), p)) == pytest.approx(r0, rel=1e-10)


@pytest.mark.parametrize("p", P_SET)
def test_two_routes(p):
    assert abs(c_p(p) - c_p_by_search(p)) <= 1e-10


def test_c2_closed_form():
    assert c_p(2.0) == pytest.approx(3**0.75 * 2**-0.5, rel=1e-14)
    # the quoted 1.2711 is a truncation of 1.27123; the mpmath test pins all digits
    assert c_p(3.0) == pytest.approx(1.2711, abs=2e-4)


def test_cp_decreasing():
    vals = [c_p(p) for p in (1.5, 2, 3, 5, 10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1


@pytest.mark.parametrize("p", P_SET)
def test_h_unimodal(p):
    ts = 1.0 + np.geomspace(1e-8, 1e4, 10_000)
    d = np.diff([h_value(p, t) for t in ts])
    assert np.count_nonzero(np.diff(np.sign(d)) != 0) == 1


@pytest.mark.parametrize("alpha, p, expected", [(0.75, 2.0, 0.5), (A0_2, 2.0, 1 / math.sqrt(3.0))])
def test_beta_examples(alpha, p, expected):
    assert beta_of_alpha(alpha, p) == pytest.approx(expected, rel=1e-14)


def test_beta_limits_and_domain():
    assert beta_of_alpha(0.5 + 1e-12, 3.0) < 1e-10
    for bad in (0.5, 1.0, 0.2):
        with pytest.raises(ValueError):
            beta_of_alpha(bad, 2.0)


def test_alpha0_p2():
    assert alpha0_of_p(2.0) == pytest.approx(A0_2, rel=1e-14)
    assert beta_of_alpha(alpha0_of_p(2.0), 2.0) == pytest.approx(1 / math.sqrt(3.0), rel=1e-13)


@pytest.mark.parametrize("p", P_SET)
def test_alpha0_inverse_identity(p):
    a0 = alpha0_of_p(p)
    assert alpha_of_beta(beta_of_alpha(a0, p), p) == pytest.approx(a0, rel=1e-12)


def test_r_example():
    r = r_of_alpha(0.75, 2.0)
    assert float(r) == pytest.approx(0.375, rel=1e-14)
    assert r.gamma1 == pytest.approx(-0.375, rel=1e-14)
    assert r.gamma2 == pytest.approx(0.75, rel=1e-14)
    assert gammas(0.75, 2.0) == pytest.approx((-0.375, 0.75))
    assert float(r_of_alpha(A0_2, 2.0)) == pytest.approx(2 / 3**1.5, rel=1e-13)
    assert float(r_of_alpha(0.5 + 1e-9, 2.0)) < 1e-8


def test_r_dual_formulas_random():
    rng = np.random.default_rng(2024)
    for alpha, p in zip(rng.uniform(0.5, 1.0, 1000), rng.uniform(1.05, 20.0, 1000)):
        if not 0.5 < alpha < 1.0:
            continue
        composed, closed = float(r_of_alpha(alpha, p)), r_closed_form(alpha, p)
        g1, g2 = gammas(alpha, p)
        scale = max(abs(closed), g2 * (1 + p * beta_of_alpha(alpha, p)))
        assert abs(composed - closed) <= 1e-12 * scale


def test_record_invariants():
    for p in P_SET:
        rec = constants_record(p)
        assert 1 < rec.tau < p
        assert 0.5 < rec.alpha0 < 1
        assert 0 < rec.beta0 < 1
        assert rec.c_p > 1
        assert rec.cross_check_gap <= 1e-9


def test_certify_examples():
    rec, sweep = certify_lemma6(2.0, tol=1e-10)
    assert rec.r_at_alpha0 == pytest.approx(0.3849002, abs=1e-7)
    assert abs(sweep.argmax_alpha - A0_2) <= sweep.step
    assert np.all(sweep.r_values > 0)
    assert np.all(sweep.r_values <= rec.r_at_alpha0 + 1e-12)
    assert sweep.r_values[0] < 1e-3 and sweep.r_values[-1] < 0.05
    rec5, _ = certify_lemma6(5.0, tol=1e-9)
    assert rec5.cross_check_gap <= 1e-9


def test_certify_reports_failure():
    with pytest.raises(CertificationError, match="p=2"):
        certify_lemma6(2.0, tol=-1.0)


def test_sweep_size():
    s = alpha_sweep(3.0, 100)
    assert s.alphas.size == 100 and s.step == pytest.approx(0.005)
