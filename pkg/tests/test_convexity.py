import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasisym.convexity import (
    SHARP,
    SUFFICIENT,
    certify_h_convex,
    certify_hprime_convex,
    find_pk,
    gamma_coefficients,
    pi_coefficients,
    pi_form,
    qp_coefficients,
    qp_eval,
    scan_profile,
)
from quasisym.errors import NotFoundError, UsageError
from quasisym.nonlin import DerivativeBundle, NonlinearitySpec

from oracles import pi_form_exact


def test_gamma_examples():
    g = gamma_coefficients(4, 2)
    assert (g.gamma1, g.gamma2, g.gamma3) == (6, 22, 24)
    assert g.gamma1_factored == 6 and g.gamma2_factored == 22
    assert gamma_coefficients(2, 7.3).gamma3 == 4
    assert gamma_coefficients(3, 2).gamma1 == 0
    assert gamma_coefficients(3, 2).gamma1_factored is None


def test_pi_examples():
    pi = pi_coefficients(5, 2)
    assert (pi.pi1, pi.pi2, pi.pi3, pi.pi4) == (240, -560, 432, -112)
    assert pi.total == 0
    assert pi_coefficients(8.5, 3).pi4 == -378
    assert pi_coefficients(2, 2).pi1 == 0


def test_q_examples():
    q = qp_coefficients(5, 2)
    assert q.coefficients() == (0, 32, 160, 240)
    assert qp_eval(q, 2, 1.0) == 432
    assert pi_form(pi_coefficients(5, 2), 2, 1.0) == 432
    assert float(q.in_xi(0.0)) == pi_coefficients(5, 2).pi1
    with pytest.raises(UsageError):
        qp_eval(q, 2, 0.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(1.05, 8.0), st.floats(0.0, 1.0), st.floats(0.01, 10.0))
def test_gamma_factorization(k, frac, _):
    p = k + 1 + 1e-3 + frac * (19 - k - 1)
    g = gamma_coefficients(p, k)
    assert g.gamma1 == pytest.approx(g.gamma1_factored, rel=1e-12)
    assert g.gamma2 == pytest.approx(g.gamma2_factored, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(1.05, 6.0), st.floats(0.0, 1.0), st.floats(1e-3, 10.0))
def test_expansion_identity(k, frac, s):
    p = 2.0 + frac * 18.0
    ref = pi_form_exact(pi_coefficients(p, k), k, s)
    assert qp_eval(qp_coefficients(p, k), k, s) == pytest.approx(ref, rel=1e-10)
    # the unexpanded route in floating point is accurate relative to its terms
    pi = pi_coefficients(p, k)
    x = s**k
    a = 1 + x
    size = abs(pi.pi1) * a**3 + abs(pi.pi2) * x * a**2 + abs(pi.pi3) * x * x * a + abs(pi.pi4) * x**3
    assert abs(pi_form(pi, k, s) - ref) <= 1e-14 * size


def test_certify_h():
    assert certify_h_convex(5, 2).certified
    c = certify_h_convex(3, 3)
    assert not c.certified and "k+1" in c.reason
    assert not certify_h_convex(2.5, 2).certified
    assert not certify_h_convex(5, 1.5).certified


def test_certify_hprime_examples():
    assert certify_hprime_convex(7, 2, SUFFICIENT).certified
    c = certify_hprime_convex(4, 2, SHARP)
    assert not c.certified
    assert c.q.c3 == -12
    assert certify_hprime_convex(5, 2, SHARP).certified
    # c3 = 0 exactly, so strict sufficient inequalities fail at p = 5
    assert not certify_hprime_convex(5, 2, SUFFICIENT).certified
    with pytest.raises(UsageError):
        certify_hprime_convex(5, 1.0)


def test_certificate_document():
    doc = certify_hprime_convex(5, 2, SHARP).as_dict()
    for key in ("p", "k", "mode", "gamma", "pi", "q", "inequalities", "certified", "reason"):
        assert key in doc
    assert doc["q"] == {"c3": 0.0, "c2": 32.0, "c1": 160.0, "c0": 240.0}


def test_find_pk():
    assert find_pk(2, SHARP) == pytest.approx(5.0, abs=1e-3)
    assert find_pk(2, SHARP) < 11
    assert find_pk(2, SUFFICIENT) >= 5.0 - 1e-3
    assert find_pk(2, SUFFICIENT) < 11
    with pytest.raises(NotFoundError):
        find_pk(2, SHARP, ceiling=4.0)


@pytest.mark.parametrize("k", [1.5, 2.0, 3.0, 4.0])
def test_find_pk_is_infimum(k):
    pk = find_pk(k, SHARP)
    assert pk < 3 * k + 5
    for p in np.linspace(pk, 4 * k + 8, 40):
        assert certify_hprime_convex(p, k, SHARP).certified
    assert not certify_hprime_convex(pk - 2e-3, k, SHARP).certified


@pytest.mark.parametrize("p,k", [(5, 2), (7, 2), (6.5, 3), (9, 3)])
def test_sharp_certificate_implies_positive_scan(p, k):
    assert certify_hprime_convex(p, k, SHARP).certified
    table = scan_profile(DerivativeBundle(NonlinearitySpec(k=k, p=p)), 3, (0, 10), 2000)
    assert table.min > 0


def test_figures():
    t = scan_profile(DerivativeBundle(NonlinearitySpec(k=3, p=3)), 2, (0, 2), 1000)
    assert t.min < 0
    t = scan_profile(DerivativeBundle(NonlinearitySpec(k=2, p=3.2)), 3, (0, 10), 2000)
    assert t.min < 0
    t = scan_profile(DerivativeBundle(NonlinearitySpec(k=2, p=7)), 3, (0, 10), 2000)
    assert t.min > 0 and t.s[0] > 0 and t.s[-1] == 10


def test_scan_validation():
    b = DerivativeBundle(NonlinearitySpec(k=2, p=5))
    with pytest.raises(UsageError):
        scan_profile(b, 1, (0, 1), 10)
    with pytest.raises(UsageError):
        scan_profile(b, 2, (1, 0.5), 10)
    with pytest.raises(UsageError):
        scan_profile(b, 2, (0, 1), 1)
