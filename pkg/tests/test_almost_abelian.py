"""Coclosed brackets: sp membership, torsion, Laplacian symbol, curvature."""

import numpy as np
import pytest

from g2coflow.almost_abelian import (
    q_matrix,
    random_sp,
    random_sp_skew,
    random_sp_symmetric,
    random_su3,
    require_sp,
    ricci_closed,
    scalar_diagnostics,
    sp_check,
    t_circ_t,
    torsion_forms,
    torsion_from_nabla_phi,
)
from g2coflow.exterior import form_norm, theta
from g2coflow.g2 import canonical_g2, circ, identity_suite
from g2coflow.metric_lie import (
    ce_differential,
    curvature_tensor,
    hodge_laplacian,
    koszul_connection,
    ricci_tensor,
)
from g2coflow.soliton import load_example

rng = np.random.default_rng(20240817)
CONVENTIONS = ("section4", "example")


def pad7(block: np.ndarray, corner: float = 0.0) -> np.ndarray:
    out = np.zeros((7, 7))
    out[:6, :6] = block
    out[6, 6] = corner
    return out


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_sp_membership_of_generators(convention):
    data = canonical_g2(convention)
    J = data.J
    assert np.max(np.abs(J @ J + np.eye(6))) == 0.0
    ok, residual = sp_check(J, data)
    assert ok and residual == 0.0
    for maker in (random_sp, random_sp_symmetric, random_sp_skew, random_su3):
        A = maker(rng, data)
        ok, residual = sp_check(A, data)
        assert ok, f"{maker.__name__}: residual {residual}"
    S = random_sp_symmetric(rng, data)
    assert np.max(np.abs(S - S.T)) < 1e-14
    K = random_sp_skew(rng, data)
    assert np.max(np.abs(K + K.T)) < 1e-14
    U = random_su3(rng, data)
    assert np.max(np.abs(U + U.T)) < 1e-14
    assert abs(np.trace(J @ U)) < 1e-13
    assert np.max(np.abs(U @ J - J @ U)) < 1e-13


def test_require_sp_rejects_generic_matrices():
    data = canonical_g2("section4")
    bad = rng.standard_normal((6, 6))
    with pytest.raises(ValueError):
        require_sp(bad, data)


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_coclosed_iff_sp(convention):
    data = canonical_g2(convention)
    A = random_sp(rng, data)
    assert form_norm(ce_differential(data.psi, A)) < 1e-13
    bad = A + 0.1 * np.eye(6)
    ok, _ = sp_check(bad, data)
    assert not ok
    assert form_norm(ce_differential(data.psi, bad)) > 1e-3


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_torsion_block_structure(convention):
    data = canonical_g2(convention)
    A = random_sp(rng, data)
    pack = torsion_forms(A, data)
    assert abs(pack.tau0 - 2.0 / 7.0 * np.trace(data.J @ A)) < 1e-13
    assert abs(np.trace(pack.tau27)) < 1e-12
    gap = pack.T - (pack.tau0 / 4.0 * np.eye(7) - pack.tau27)
    assert np.max(np.abs(gap)) < 1e-13
    # off-diagonal blocks never appear for invariant coclosed structures
    assert np.max(np.abs(pack.T[:6, 6])) == 0.0
    assert np.max(np.abs(pack.T[6, :6])) == 0.0


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_torsion_dual_route(convention):
    data = canonical_g2(convention)
    local = np.random.default_rng((20240818, hash(convention) % 2**16))
    for _ in range(10):
        A = random_sp(local, data)
        pack = torsion_forms(A, data)
        T_direct, residual = torsion_from_nabla_phi(A, data)
        assert residual < 1e-12
        assert np.max(np.abs(pack.T - T_direct)) < 1e-12


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_t_circ_t_closed_form(convention):
    data = canonical_g2(convention)
    A = random_sp(rng, data)
    T = torsion_forms(A, data).T
    assert np.max(np.abs(t_circ_t(A, data) - circ(T, T, data))) < 1e-12


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_laplacian_symbol_matches_hodge(convention):
    data = canonical_g2(convention)
    local = np.random.default_rng((20240819, hash(convention) % 2**16))
    for _ in range(10):
        A = random_sp(local, data)
        sym = q_matrix(A, data)
        gap = theta(sym.Q, data.psi) - hodge_laplacian(data.psi, A)
        assert form_norm(gap) < 1e-11


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_ricci_closed_form(convention):
    data = canonical_g2(convention)
    A = random_sp(rng, data)
    ric, scal = ricci_closed(A, data)
    direct = ricci_tensor(curvature_tensor(koszul_connection(A), A))
    assert np.max(np.abs(ric - direct)) < 1e-12
    assert abs(scal - np.trace(direct)) < 1e-12
    S = 0.5 * (A + A.T)
    assert abs(scal + np.trace(S @ S)) < 1e-13


def test_su3_brackets_are_torsion_free():
    data = canonical_g2("section4")
    A = random_su3(rng, data)
    pack = torsion_forms(A, data)
    assert np.max(np.abs(pack.T)) < 1e-13
    assert form_norm(hodge_laplacian(data.psi, A)) < 1e-11
    sym = q_matrix(A, data)
    assert np.max(np.abs(sym.Q)) < 1e-13


def test_fixture_diagnostics():
    fixture = load_example("nilpotent3")
    data = canonical_g2(fixture["convention"])
    A = fixture["A"]
    diag = scalar_diagnostics(A, data)
    assert abs(diag["trJA"]) < 1e-14
    assert abs(diag["trSSq"] - 3.0) < 1e-13
    assert abs(diag["normSq"] - 6.0) < 1e-13
    assert abs(diag["R"] + 3.0) < 1e-13
    assert abs(diag["torsionNormSq"] - 3.0) < 1e-13
    comm = A @ A.T - A.T @ A
    assert np.max(np.abs(comm - np.diag([-2.0, -1.0, 1.0, 2.0, 1.0, -1.0]))) < 1e-14
    sym = q_matrix(A, data)
    assert abs(sym.q + 1.5) < 1e-14
    # the symbol solves Q = c I + (1/2)(D + D^t) for the shipped derivation
    D = fixture["D"]
    gap = sym.Q - (-2.5 * np.eye(7) + 0.5 * (D + D.T))
    assert np.max(np.abs(gap)) < 1e-13


def test_complex_structure_bracket_diagnostics():
    data = canonical_g2("example")
    A = data.J.copy()
    diag = scalar_diagnostics(A, data)
    assert diag["trJA"] == -6.0
    assert diag["trSSq"] == 0.0
    assert diag["R"] == 0.0
    assert abs(diag["torsionNormSq"] - 9.0) < 1e-14
    assert diag["normSq"] == 6.0
    sym = q_matrix(A, data)
    assert np.max(np.abs(sym.Qh)) == 0.0
    assert sym.q == -9.0


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_identity_suite_runs_under_either_basis(convention):
    report = identity_suite(canonical_g2(convention))
    assert max(report.values()) < 1e-12
