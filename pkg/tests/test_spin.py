from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from nvpair.errors import CapacityError, InvalidArgument
from nvpair.linalg import eigh, is_hermitian
from nvpair.spin import (InteractionTensor, PhysicalConstants, SpinSpecies, SpinSystemConfig,
                         build_hamiltonian, dipolar_tensor, energy_levels, format_label, nv_n_pair,
                         parse_label, spin_operators, zfs_tensor)

GAMMA_E = 2.8025


def test_constants_derived_ratio():
    c = PhysicalConstants()
    assert c.d0_en / c.d0_ee == c.gamma_c13 / c.gamma_e
    with pytest.raises(InvalidArgument):
        PhysicalConstants(gamma_e=0.0)


def test_spin_half_and_one_matrices():
    sx, sy, sz = spin_operators(0.5)
    np.testing.assert_allclose(sz, np.diag([0.5, -0.5]))
    np.testing.assert_allclose(sx, [[0, 0.5], [0.5, 0]])
    np.testing.assert_allclose(sy, [[0, -0.5j], [0.5j, 0]])
    sx, _, sz = spin_operators(1)
    np.testing.assert_allclose(sz, np.diag([1, 0, -1]))
    np.testing.assert_allclose(sx[0, 1], 1 / np.sqrt(2))


@pytest.mark.parametrize("s", [0.5, 1, 1.5, 2, 3.5])
def test_angular_momentum_algebra(s):
    sx, sy, sz = spin_operators(s)
    assert np.linalg.norm(sx @ sy - sy @ sx - 1j * sz) < 1e-12
    np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz, s * (s + 1) * np.eye(int(2 * s + 1)), atol=1e-12)


@pytest.mark.parametrize("s", [0, 0.3, -1, np.nan])
def test_spin_operators_reject(s):
    with pytest.raises(InvalidArgument):
        spin_operators(s)


def test_species_validation():
    assert SpinSpecies("x", 1.5, 1.0).multiplicity == 4
    assert SpinSpecies("x", 0.5, 1.0).m_values == [Fraction(1, 2), Fraction(-1, 2)]
    with pytest.raises(InvalidArgument):
        SpinSpecies("x", 2.0, 1.0)


def test_tensor_requires_symmetry():
    with pytest.raises(InvalidArgument):
        InteractionTensor([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    t = InteractionTensor(np.eye(3))
    with pytest.raises(ValueError):
        t.m[0, 0] = 2.0


def test_dipolar_scale_at_reference_distance():
    t, scale = dipolar_tensor([0, 0, 1.5], GAMMA_E, GAMMA_E)
    assert scale == pytest.approx(52.04 / 3.375, rel=1e-12)
    assert scale == pytest.approx(15.42, abs=0.01)
    assert abs(np.trace(t.m)) < 1e-12


def test_dipolar_magic_angle():
    theta = np.arccos(1 / np.sqrt(3))
    t, _ = dipolar_tensor([np.sin(theta), 0, np.cos(theta)], GAMMA_E, GAMMA_E)
    assert abs(t.m[2, 2]) < 1e-12


def test_dipolar_26nm_matches_inverse_t2():
    # 52.04 / 26.3^3 = 2.8607e-3 MHz, close to 1/350 us = 2.857e-3 MHz
    _, scale = dipolar_tensor([0, 0, 26.3], GAMMA_E, GAMMA_E)
    assert scale == pytest.approx(2.8607e-3, rel=1e-4)
    assert scale == pytest.approx(1 / 350.0, rel=0.002)


def test_dipolar_rejects_zero():
    with pytest.raises(InvalidArgument):
        dipolar_tensor([0, 0, 0], 1, 1)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_dipolar_traceless_symmetric(v):
    t, _ = dipolar_tensor(v, GAMMA_E, GAMMA_E)
    assert abs(np.trace(t.m)) < 1e-12 * max(1.0, np.max(np.abs(t.m)))
    np.testing.assert_array_equal(t.m, t.m.T)


def test_nv_alone_zero_field():
    cfg = SpinSystemConfig(spins=(SpinSpecies("NV", 1, GAMMA_E),), zero_field={0: zfs_tensor(2870.0)})
    w, _ = energy_levels(cfg)
    np.testing.assert_allclose(w, [0, 2870, 2870], atol=1e-9)


def test_uncoupled_pair_levels_are_sums():
    cfg = nv_n_pair(b_gauss=40.0, coupled=False)
    w, _ = energy_levels(cfg)
    nv = [2870 + GAMMA_E * 40, 0.0, 2870 - GAMMA_E * 40]
    n = [GAMMA_E * 40 / 2, -GAMMA_E * 40 / 2]
    expected = sorted(a + b for a in nv for b in n)
    np.testing.assert_allclose(w, expected, atol=1e-9)


def test_coupled_pair_has_four_nv_lines():
    # brute force: all level differences in the NV 0 <-> -1 band
    cfg = nv_n_pair(b_gauss=40.0, r_nm=1.5)
    h = build_hamiltonian(cfg)
    assert is_hermitian(h)
    w, v = eigh(h)
    sx = np.kron(spin_operators(1)[0], np.eye(2))
    freqs = set()
    for i in range(6):
        for f in range(6):
            if w[f] > w[i] and 2500 < w[f] - w[i] < 3200 and abs(v[:, f].conj() @ sx @ v[:, i]) ** 2 > 1e-3:
                freqs.add(round(w[f] - w[i], 6))
    assert len(freqs) == 4


def test_capacity_error():
    spins = tuple(SpinSpecies(f"s{k}", 1, 1.0) for k in range(4))  # 81 > 36
    with pytest.raises(CapacityError):
        build_hamiltonian(SpinSystemConfig(spins=spins))


def test_config_validation():
    sp = (SpinSpecies("a", 0.5, 1.0), SpinSpecies("b", 0.5, 1.0))
    t = InteractionTensor(np.eye(3))
    with pytest.raises(InvalidArgument):
        SpinSystemConfig(spins=sp, couplings=((0, 0, t),))
    with pytest.raises(InvalidArgument):
        SpinSystemConfig(spins=sp, couplings=((0, 1, t), (1, 0, t)))
    with pytest.raises(InvalidArgument):
        SpinSystemConfig(spins=sp, b_field=(0, 0))


def test_positions_fill_missing_couplings_only():
    sp = (SpinSpecies("a", 0.5, GAMMA_E), SpinSpecies("b", 0.5, GAMMA_E), SpinSpecies("c", 0.5, GAMMA_E))
    explicit = InteractionTensor(np.diag([1.0, 2.0, -3.0]))
    cfg = SpinSystemConfig(spins=sp, couplings=((0, 1, explicit),), positions=((0, 0, 0), (0, 0, 1.5), None))
    couplings = cfg.effective_couplings()
    assert len(couplings) == 1 and couplings[0][2] is explicit
    cfg = SpinSystemConfig(spins=sp, positions=((0, 0, 0), (0, 0, 1.5), (1.0, 0, 0)))
    assert len(cfg.effective_couplings()) == 3


def test_labels_roundtrip():
    assert format_label((0, Fraction(1, 2))) == "|0,+1/2>"
    assert format_label((-1, Fraction(-1, 2))) == "|-1,-1/2>"
    assert parse_label("|-1,-1/2>") == (Fraction(-1), Fraction(-1, 2))
    assert parse_label((0, 0.5)) == (0, Fraction(1, 2))


def test_zeeman_linearity():
    fields = [10.0, 20.0, 35.0]
    levels = np.array([energy_levels(nv_n_pair(d_fs=0.0, b_gauss=b, b_direction=(1, 2, 3), coupled=False))[0]
                       for b in fields])
    for k in range(levels.shape[1]):
        slope = (levels[1, k] - levels[0, k]) / (fields[1] - fields[0])
        predicted = levels[0, k] + slope * (fields[2] - fields[0])
        assert abs(predicted - levels[2, k]) < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_rotation_invariance(seed):
    rot = Rotation.random(random_state=seed).as_matrix()
    r = np.array([0.4, -0.7, 1.1])
    b = np.array([30.0, 10.0, 400.0])
    sp = (SpinSpecies("NV", 1, GAMMA_E), SpinSpecies("N", 0.5, GAMMA_E))

    def levels(rmat):
        t, _ = dipolar_tensor(rmat @ r, GAMMA_E, GAMMA_E)
        cfg = SpinSystemConfig(spins=sp, b_field=tuple(rmat @ b), zero_field={0: zfs_tensor(2870.0, rmat @ [0, 0, 1])},
                               couplings=((0, 1, t),))
        return energy_levels(cfg)[0]

    np.testing.assert_allclose(levels(rot), levels(np.eye(3)), atol=1e-9)
