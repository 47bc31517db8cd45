import math

import numpy as np
import pytest

from logsob.curvature import (
    Certificate,
    SearchConfig,
    certify_double_well,
    certify_quadric,
    kappa,
    kappa_tilde,
)
from logsob.errors import ParameterError
from logsob.perturbations import arctan_perturbation, identity_perturbation, psi_radial
from logsob.potentials import make_custom_potential, make_potential

SQ3 = math.sqrt(3.0)


def eps_quadric(d):
    return 8.0 / (3.0 * SQ3 * (d + 1))


# --- kappa -------------------------------------------------------------------

def test_kappa_gaussian_identity_closed_form():
    rep = kappa(make_potential("gaussian", 3, rho=1.5), identity_perturbation())
    assert rep.value == 3.0
    assert rep.certified and rep.method == "radial_closed_form"
    assert rep.argmin == 0.0


@pytest.mark.parametrize("d", [1, 2, 8])
def test_kappa_quadric_arctan_equals_eps_d(d):
    eps = eps_quadric(d)
    rep = kappa(make_potential("subbotin", d, alpha=4.0), arctan_perturbation(eps))
    assert rep.method == "radial_grid"
    assert abs(rep.value - eps * d) <= 1e-8
    assert rep.argmin <= 1e-6


@pytest.mark.parametrize("d,beta", [(1, 0.25), (2, 0.05), (7, 0.45)])
def test_kappa_double_well_arctan(d, beta):
    eps = 2.0 / (d + 1)
    rep = kappa(make_potential("double_well", d, beta=beta), arctan_perturbation(eps))
    assert abs(rep.value - (eps * d - 2 * beta)) <= 1e-8
    assert rep.argmin <= 1e-6


def test_kappa_subbotin_identity_is_zero():
    rep = kappa(make_potential("subbotin", 2, alpha=4.0), identity_perturbation())
    assert rep.value == 0.0 and rep.certified


def test_kappa_double_well_identity_is_minus_two_beta():
    rep = kappa(make_potential("double_well", 3, beta=0.2), identity_perturbation())
    assert rep.value == pytest.approx(-0.4, abs=0)


# --- kappa_tilde ---------------------------------------------------------------

def test_kappa_tilde_gaussian_identity():
    rep = kappa_tilde(make_potential("gaussian", 2, rho=1.0), identity_perturbation())
    assert rep.value == 1.0 and rep.certified


def test_kappa_tilde_subbotin_identity_d1():
    rep = kappa_tilde(make_potential("subbotin", 1, alpha=4.0), identity_perturbation())
    assert rep.value == 0.0


def test_kappa_tilde_relation_to_kappa():
    # kappa_tilde >= kappa - inf rho_-, with equality when both infima sit at 0
    p = make_potential("subbotin", 1, alpha=4.0)
    a = arctan_perturbation(0.5)
    k = kappa(p, a).value
    kt = kappa_tilde(p, a).value
    inf_rho = 0.0
    assert kt >= k - inf_rho - 1e-10
    assert kt == pytest.approx(0.5, abs=1e-8)


def test_identity_objectives_scale_pointwise():
    # with a = 1 the two objectives are 2 rho_- and rho_-: exact factor 2 everywhere
    p = make_potential("double_well", 2, beta=0.3)
    a = identity_perturbation()
    t = np.concatenate([[0.0], np.logspace(-6, 4, 100)])
    two = 2.0 * np.asarray(p.radial_rho_minus(t)) + psi_radial(a, p, t)
    one = np.asarray(p.radial_rho_minus(t)) + psi_radial(a, p, t)
    assert np.array_equal(two, 2.0 * one)


# --- objective value at t = 0 is linear in eps --------------------------------

@pytest.mark.parametrize("d", [1, 2, 16])
def test_value_at_origin_quadric(d):
    for eps in (0.1, 0.5, 1.0):
        a = arctan_perturbation(eps)
        p = make_potential("subbotin", d, alpha=4.0)
        val = 2.0 * p.radial_rho_minus(np.asarray([0.0]))[0] + psi_radial(a, p, np.asarray([0.0]))[0]
        assert val == eps * d


@pytest.mark.parametrize("d,beta", [(1, 0.25), (4, 0.1)])
def test_value_at_origin_double_well(d, beta):
    eps = 2.0 / (d + 1)
    a = arctan_perturbation(eps)
    p = make_potential("double_well", d, beta=beta)
    val = 2.0 * p.radial_rho_minus(np.asarray([0.0]))[0] + psi_radial(a, p, np.asarray([0.0]))[0]
    assert val == eps * d - 2 * beta


# --- quadric certificate -------------------------------------------------------

def test_certify_quadric_canonical_eps_all_dims():
    for d in range(1, 65):
        cert = certify_quadric(eps_quadric(d), d)
        assert cert.nonneg_on_halfline, f"d={d}"
        assert cert.kappa_if_valid == pytest.approx(eps_quadric(d) * d, abs=0)


def test_certify_quadric_necessary_condition():
    cert = certify_quadric(math.sqrt(2) + 0.01, 1)
    assert not cert.nonneg_on_halfline
    assert cert.details["g_at_0"] < 0


def test_certify_quadric_large_eps_large_d_fails():
    cert = certify_quadric(3.0 / math.sqrt(101), 100)
    assert not cert.nonneg_on_halfline
    # direct evaluation confirms the dip
    t = np.linspace(0, 5, 100001)
    g = np.polyval(cert.coefficients, t)
    assert g.min() < 0


def test_certify_quadric_rejects_bad_params():
    with pytest.raises(ParameterError):
        certify_quadric(-1.0, 2)
    with pytest.raises(ParameterError):
        certify_quadric(0.5, 0)


def test_certificate_coefficients_pinned():
    eps, d = 0.3, 5
    cert = certify_quadric(eps, d)
    assert cert.coefficients == (2.0, -eps * 6, 4.0, -eps * 10, 2.0 - eps**2)
    eps, d, beta = 0.4, 3, 0.2
    cert = certify_double_well(eps, d, beta)
    assert cert.coefficients == (2.0, -eps * 4, 4.2, -eps * 8, 2.0 - eps**2 + 0.2)


def test_quadric_tangency_detected_as_nonnegative():
    # at d=1 and the canonical eps the polynomial touches zero at t = 1/sqrt(3)
    cert = certify_quadric(eps_quadric(1), 1)
    assert cert.nonneg_on_halfline
    t = 1.0 / SQ3
    assert abs(np.polyval(cert.coefficients, t)) < 1e-12


# --- double-well certificate ----------------------------------------------------

def test_certify_double_well_canonical_d_ge_2():
    for d in list(range(2, 17)) + [24, 32, 48, 64]:
        for beta in (0.05, 0.25, 0.45):
            cert = certify_double_well(2.0 / (d + 1), d, beta)
            assert cert.nonneg_on_halfline, f"d={d} beta={beta}"
            assert cert.valid
            assert cert.kappa_if_valid == pytest.approx(2.0 * d / (d + 1) - 2 * beta, abs=1e-15)


def test_certify_double_well_d1_polynomial_dips():
    # the printed surrogate polynomial is negative somewhere for d=1 at the
    # canonical eps; the curvature value itself is still eps*d - 2 beta
    # because the one-dimensional Hessian branch is steeper (see kappa tests)
    cert = certify_double_well(1.0, 1, 0.49)
    assert cert.kappa_if_valid == pytest.approx(0.02, abs=1e-12)
    assert not cert.nonneg_on_halfline
    t = np.linspace(0, 3, 30001)
    assert np.polyval(cert.coefficients, t).min() < 0


def test_certify_double_well_beta_zero_matches_quadric():
    d = 4
    eps = eps_quadric(d)
    cq = certify_quadric(eps, d)
    cdw = certify_double_well(eps, d, 0.0)
    assert cdw.coefficients == cq.coefficients
    assert cdw.nonneg_on_halfline == cq.nonneg_on_halfline


def test_certify_double_well_requires_eps_above_positivity_threshold():
    cert = certify_double_well(0.05, 2, 0.45)  # eps <= 2 beta / d
    assert not cert.valid
    assert cert.kappa_if_valid < 0


def test_certify_double_well_param_errors():
    with pytest.raises(ParameterError):
        certify_double_well(0.5, 2, 0.6)
    with pytest.raises(ParameterError):
        certify_double_well(0.0, 2, 0.1)


# --- verdicts against a brute-force grid oracle ----------------------------------

def test_root_isolation_matches_grid_sign_oracle():
    rng = np.random.default_rng(123)
    t = np.linspace(0.0, 1000.0, 1_000_001)
    checked = 0
    for _ in range(500):
        d = int(rng.integers(1, 65))
        eps = float(rng.uniform(0.01, 1.6))
        beta = float(rng.uniform(0.0, 0.499))
        if rng.random() < 0.5:
            cert = certify_quadric(eps, d)
        else:
            cert = certify_double_well(eps, d, beta)
        gmin = float(np.min(np.polyval(cert.coefficients, t)))
        if abs(gmin) <= 1e-7:
            continue  # within the tangency dead band either verdict is defensible
        assert cert.nonneg_on_halfline == (gmin > 0), (d, eps, beta, gmin)
        checked += 1
    assert checked > 400


# --- certificate-grid agreement ---------------------------------------------------

def test_certificate_grid_agreement_quadric():
    for d in list(range(1, 17)) + [32, 64]:
        eps = eps_quadric(d)
        cert = certify_quadric(eps, d)
        assert cert.nonneg_on_halfline
        rep = kappa(make_potential("subbotin", d, alpha=4.0), arctan_perturbation(eps))
        assert abs(rep.value - cert.kappa_if_valid) <= 1e-8
        assert rep.argmin <= 1e-6


def test_certificate_grid_agreement_double_well():
    for d in (2, 3, 8, 32):
        for beta in (0.05, 0.45):
            eps = 2.0 / (d + 1)
            cert = certify_double_well(eps, d, beta)
            assert cert.valid
            rep = kappa(make_potential("double_well", d, beta=beta), arctan_perturbation(eps))
            assert abs(rep.value - cert.kappa_if_valid) <= 1e-8
            assert rep.argmin <= 1e-6


# --- inf property and fallback paths ----------------------------------------------

def test_report_value_bounds_probed_points():
    p = make_potential("subbotin", 2, alpha=4.0)
    a = arctan_perturbation(0.4)
    rep = kappa(p, a)
    t = np.concatenate([[0.0], np.logspace(-8, 4, 2000)])
    vals = 2.0 * np.asarray(p.radial_rho_minus(t)) + psi_radial(a, p, t)
    assert np.all(rep.value <= vals + 1e-12)


def test_unbounded_below_detection():
    # radial custom potential whose smallest eigenvalue decreases linearly
    p = make_custom_potential(
        2,
        value=lambda x: -np.sum(x**2, axis=-1) ** 1.5 / 3.0,
        gradient=lambda x: -np.sqrt(np.sum(x**2, axis=-1))[..., None] * x,
        hessian=lambda x: -np.sqrt(np.sum(np.asarray(x) ** 2)) * np.eye(2),
        vectorized=False,
        radial_rho_minus=lambda t: -np.sqrt(np.asarray(t, dtype=float)),
    )
    object.__setattr__(p, "radial_grad_coeff", lambda t: -np.sqrt(np.asarray(t, dtype=float)))
    rep = kappa(p, identity_perturbation(), SearchConfig(t_max_cap=1e6))
    assert rep.value == -math.inf
    assert rep.details.get("unbounded_below")
    assert not rep.certified


def test_multistart_non_radial_quadratic():
    # x^T diag(1,2) x / 2: curvature infimum is 2 * 1
    p = make_custom_potential(
        2,
        value=lambda x: 0.5 * (x[..., 0] ** 2 + 2.0 * x[..., 1] ** 2),
        gradient=lambda x: np.stack([x[..., 0], 2.0 * x[..., 1]], axis=-1),
        hessian=lambda x: np.broadcast_to(np.diag([1.0, 2.0]), np.shape(x)[:-1] + (2, 2)).copy(),
    )
    rep = kappa(p, identity_perturbation())
    assert rep.method == "full_grid"
    assert not rep.certified
    assert rep.value == pytest.approx(2.0, abs=1e-6)
