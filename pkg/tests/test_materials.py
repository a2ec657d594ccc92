import numpy as np
import pytest

from fluxinv.errors import ConfigurationError, DomainError
from fluxinv.materials import (
    STEFAN_BOLTZMANN,
    MaterialTable,
    constant_material,
    default_material,
    eval_cp,
    eval_dk_dT,
    eval_k,
)


def simple_table():
    return MaterialTable(
        k_table=[(300.0, 10.0), (400.0, 12.0), (600.0, 20.0)],
        cp_table=[(300.0, 450.0), (500.0, 500.0), (700.0, 640.0)],
        rho=4500.0,
        emissivity=0.8,
    )


def interp_oracle(table, T):
    """Brute-force linear search + interpolation, independent of np.interp."""
    Ts, vs = table[:, 0], table[:, 1]
    if T <= Ts[0]:
        return vs[0]
    if T >= Ts[-1]:
        return vs[-1]
    for i in range(len(Ts) - 1):
        if Ts[i] <= T <= Ts[i + 1]:
            w = (T - Ts[i]) / (Ts[i + 1] - Ts[i])
            return vs[i] * (1.0 - w) + vs[i + 1] * w
    raise AssertionError("unreachable")


def test_breakpoint_values_exact():
    mat = simple_table()
    assert eval_k(mat, 400.0) == 12.0
    assert eval_cp(mat, 500.0) == 500.0


def test_midpoint_is_mean_of_neighbors():
    mat = simple_table()
    assert eval_k(mat, 350.0) == pytest.approx(11.0, abs=1e-14)
    assert eval_cp(mat, 400.0) == pytest.approx(475.0, abs=1e-14)


def test_clamped_extrapolation():
    mat = simple_table()
    assert eval_k(mat, 100.0) == 10.0
    assert eval_k(mat, 900.0) == 20.0
    assert eval_cp(mat, 2000.0) == 640.0


def test_nonpositive_temperature_rejected():
    mat = simple_table()
    for op in (eval_k, eval_cp, eval_dk_dT):
        with pytest.raises(DomainError):
            op(mat, 0.0)
        with pytest.raises(DomainError):
            op(mat, np.array([300.0, -5.0]))


def test_dk_dT_segment_slope():
    mat = simple_table()
    # segment (300, 10) -> (400, 12)
    assert eval_dk_dT(mat, 350.0) == pytest.approx(0.02, abs=1e-15)
    # breakpoint takes the right-hand segment's slope
    assert eval_dk_dT(mat, 400.0) == pytest.approx(8.0 / 200.0, abs=1e-15)
    # clamped region outside the table
    assert eval_dk_dT(mat, 700.0) == 0.0
    assert eval_dk_dT(mat, 100.0) == 0.0


def test_dk_dT_matches_central_differences():
    mat = default_material()
    h = 1e-3
    rng = np.random.default_rng(7)
    breaks = mat.k_table[:, 0]
    for _ in range(200):
        seg = rng.integers(0, len(breaks) - 1)
        # strictly inside a segment, away from breakpoints by > h
        T = rng.uniform(breaks[seg] + 10 * h, breaks[seg + 1] - 10 * h)
        fd = (eval_k(mat, T + h) - eval_k(mat, T - h)) / (2 * h)
        assert abs(fd - eval_dk_dT(mat, T)) < 1e-8


def test_continuity_across_breakpoints():
    mat = default_material()
    eps = 1e-9
    for T in mat.k_table[1:-1, 0]:
        assert abs(eval_k(mat, T + eps) - eval_k(mat, T)) < 1e-6
        assert abs(eval_k(mat, T - eps) - eval_k(mat, T)) < 1e-6
        assert abs(eval_cp(mat, T + eps) - eval_cp(mat, T)) < 1e-6


def test_eval_matches_brute_force_oracle():
    mat = default_material()
    rng = np.random.default_rng(42)
    T = rng.uniform(100.0, 1500.0, size=10_000)
    got_k = eval_k(mat, T)
    got_cp = eval_cp(mat, T)
    for i in range(0, len(T), 97):
        assert got_k[i] == pytest.approx(interp_oracle(mat.k_table, T[i]), rel=1e-14)
        assert got_cp[i] == pytest.approx(interp_oracle(mat.cp_table, T[i]), rel=1e-14)
    # full vectorized cross-check against the oracle
    oracle_k = np.array([interp_oracle(mat.k_table, t) for t in T[:1000]])
    np.testing.assert_allclose(got_k[:1000], oracle_k, rtol=1e-14)


def test_monotone_table_gives_monotone_output():
    mat = default_material()
    T = np.linspace(273.15, 1273.15, 500)
    k = eval_k(mat, T)
    cp = eval_cp(mat, T)
    assert np.all(np.diff(k) >= 0)
    assert np.all(np.diff(cp) >= 0)


def test_stefan_boltzmann_exact():
    assert default_material().sigma == 5.670374419e-8
    assert STEFAN_BOLTZMANN == 5.670374419e-8


def test_table_validation():
    with pytest.raises(ConfigurationError):
        MaterialTable(k_table=[(300, 10)], cp_table=[(300, 450), (400, 500)], rho=1, emissivity=0.5)
    with pytest.raises(ConfigurationError):
        MaterialTable(
            k_table=[(400, 10), (300, 12)],
            cp_table=[(300, 450), (400, 500)],
            rho=1,
            emissivity=0.5,
        )
    with pytest.raises(ConfigurationError):
        MaterialTable(
            k_table=[(300, -1.0), (400, 12)],
            cp_table=[(300, 450), (400, 500)],
            rho=1,
            emissivity=0.5,
        )
    with pytest.raises(ConfigurationError):
        MaterialTable(
            k_table=[(300, 10), (400, 12)],
            cp_table=[(300, 450), (400, 500)],
            rho=1,
            emissivity=1.5,
        )


def test_json_round_trip(tmp_path):
    mat = default_material()
    path = tmp_path / "mat.json"
    mat.to_json(path)
    back = MaterialTable.from_json(path)
    np.testing.assert_array_equal(back.k_table, mat.k_table)
    np.testing.assert_array_equal(back.cp_table, mat.cp_table)
    assert back.rho == mat.rho
    assert back.emissivity == mat.emissivity


def test_constant_material_is_constant():
    mat = constant_material(15.0, 520.0, 4000.0)
    T = np.array([5.0, 273.15, 1000.0, 4000.0])
    np.testing.assert_allclose(eval_k(mat, T), 15.0)
    np.testing.assert_allclose(eval_cp(mat, T), 520.0)
    np.testing.assert_allclose(eval_dk_dT(mat, T[1:-1]), 0.0)
