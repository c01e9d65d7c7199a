from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvpair.errors import BracketingError, InvalidArgument, UndefinedPolarization
from nvpair.levels import (branch_gap, doublet_frequencies, doublet_intensities, esr_spectrum, find_lac,
                           lorentzian, pair_populations, polarization_from_intensities, sweep_levels)
from nvpair.spin import (InteractionTensor, SpinSpecies, SpinSystemConfig, basis_index, build_hamiltonian,
                         nv_n_pair, zfs_tensor)

GAMMA_E = 2.8025
PAIR = ((0, 0.5), (-1, -0.5))
HALF = Fraction(1, 2)


def test_zero_field_degeneracy():
    sweep = sweep_levels(nv_n_pair(coupled=False), 0.0, 10.0, 2)
    np.testing.assert_allclose(sweep.levels[0], [0, 0, 2870, 2870, 2870, 2870], atol=1e-9)


def test_sweep_validation():
    with pytest.raises(InvalidArgument):
        sweep_levels(nv_n_pair(), 10.0, 5.0, 10)
    with pytest.raises(InvalidArgument):
        sweep_levels(nv_n_pair(), 0.0, 5.0, 1)


def test_uncoupled_crossing_in_sweep():
    sweep = sweep_levels(nv_n_pair(coupled=False), 0.0, 1000.0, 2001)
    gap = np.abs(sweep.branch((0, HALF)) - sweep.branch((-1, -HALF)))
    k = int(np.argmin(gap))
    assert sweep.b_values[k] == pytest.approx(2870 / (2 * GAMMA_E), abs=0.5)
    assert gap[k] < 2 * GAMMA_E * 0.5


def test_uncoupled_lac_exact():
    b, gap = find_lac(nv_n_pair(coupled=False))
    assert b == pytest.approx(2870 / (2 * GAMMA_E), abs=0.01)
    assert gap < 1e-6


def test_lac_published_field():
    b, gap = find_lac(nv_n_pair(d_fs=2881.0, coupled=False))
    assert abs(b - 514.0) <= 0.5
    assert gap < 1e-6


def test_coupled_pair_anticrosses():
    _, gap = find_lac(nv_n_pair(d_fs=2881.0))
    assert gap > 1.0


def _brute_force_gap(config, b_values):
    h0 = build_hamiltonian(config.with_field((0, 0, 0)))
    hz = build_hamiltonian(config.with_field((0, 0, 1.0))) - h0
    ia, ib = (basis_index(config, lab) for lab in PAIR)
    w, v = np.linalg.eigh(h0[None] + b_values[:, None, None] * hz[None])
    weight = np.abs(v[:, ia, :]) ** 2 + np.abs(v[:, ib, :]) ** 2
    top = np.argsort(-weight, axis=1)[:, :2]
    rows = np.arange(len(b_values))
    return np.abs(w[rows, top[:, 0]] - w[rows, top[:, 1]])


@pytest.mark.parametrize("coupled", [False, True])
def test_lac_matches_brute_force_grid(coupled):
    config = nv_n_pair(d_fs=2881.0, coupled=coupled)
    grid = np.linspace(505.0, 525.0, 100_001)
    gaps = _brute_force_gap(config, grid)
    b_grid = grid[int(np.argmin(gaps))]
    b_lac, gap = find_lac(config)
    pitch = grid[1] - grid[0]
    assert abs(b_lac - b_grid) <= pitch
    assert gap <= gaps.min() + 1e-9


def test_lac_bracketing_error():
    with pytest.raises(BracketingError):
        find_lac(nv_n_pair(d_fs=2881.0), b_lo=600.0, b_hi=620.0)


def test_gap_scales_linearly_with_coupling():
    base = nv_n_pair(d_fs=2881.0)
    ref = find_lac(base)[1]
    for s in (0.5, 0.8, 1.5, 2.0):
        gap = find_lac(base.scaled_couplings(s))[1]
        assert gap / (s * ref) == pytest.approx(1.0, rel=0.01)


def _continuity_excess(sweep, step):
    max_slope = GAMMA_E * (1 + 0.5)  # |dE/dB| bound for spin 1 + spin 1/2
    out = {}
    for lab in set(sweep.labels[0]):
        jumps = np.abs(np.diff(sweep.branch(lab)))
        out[lab] = (jumps, jumps > 2 * max_slope * step)
    return out


def test_label_continuity_weak_coupling():
    step = 0.5
    sweep = sweep_levels(nv_n_pair(d_fs=2881.0, r_nm=5.0), 400.0, 620.0, int(220 / step) + 1)
    for lab, (jumps, bad) in _continuity_excess(sweep, step).items():
        assert not np.any(bad), lab


def test_label_jump_at_strong_anticrossing_equals_gap():
    # maximal-overlap labels swap adiabatic branch at the gap midpoint
    step = 0.5
    config = nv_n_pair(d_fs=2881.0)
    sweep = sweep_levels(config, 400.0, 620.0, int(220 / step) + 1)
    b_lac, gap = find_lac(config)
    for lab, (jumps, bad) in _continuity_excess(sweep, step).items():
        idx = np.flatnonzero(bad)
        if lab in {(0, HALF), (-1, -HALF)}:
            assert len(idx) == 1
            assert abs(sweep.b_values[idx[0]] - b_lac) <= step
            assert jumps[idx[0]] == pytest.approx(gap, rel=0.05)
        else:
            assert len(idx) == 0, lab


def test_uncoupled_two_lines():
    spec = esr_spectrum(nv_n_pair(b_gauss=40.0, coupled=False), linewidth=1.0)
    freqs = sorted(line.frequency for line in spec.lines)
    np.testing.assert_allclose(freqs, [2870 - GAMMA_E * 40, 2870 + GAMMA_E * 40], atol=1e-9)
    assert freqs[0] == pytest.approx(2758, abs=0.5) and freqs[1] == pytest.approx(2982, abs=0.5)


def test_coupled_doublets_match_secular_coupling():
    config = nv_n_pair(b_gauss=40.0, r_nm=1.5)
    spec = esr_spectrum(config, linewidth=1.0)
    assert len(spec.lines) == 4
    f_a, f_astar = doublet_frequencies(spec)
    secular = abs(config.couplings[0][2].m[2, 2])
    assert abs(f_astar - f_a) == pytest.approx(secular, rel=0.02)
    assert 13.0 <= abs(f_astar - f_a) <= 16.0


def test_polarized_spectrum_loses_a_star():
    config = nv_n_pair(b_gauss=40.0, r_nm=1.5)
    spec = esr_spectrum(config, 1.0, populations=pair_populations([0.0, 1.0, 0.0, 0.0]))
    i_a, i_astar = doublet_intensities(spec)
    assert i_astar == 0.0 and i_a > 0
    assert abs(polarization_from_intensities(i_a, i_astar) + 1) < 1e-9


def test_spectrum_amplitude_is_sum_of_lines():
    spec = esr_spectrum(nv_n_pair(b_gauss=40.0), 2.0)
    total = sum(lorentzian(spec.grid, ln.frequency, 2.0, ln.intensity) for ln in spec.lines)
    assert np.max(np.abs(spec.amplitude - total)) < 1e-9
    assert np.all(spec.amplitude >= 0)
    assert all(ln.frequency > 0 and ln.intensity >= 0 for ln in spec.lines)


def test_spectrum_validation():
    with pytest.raises(InvalidArgument):
        esr_spectrum(nv_n_pair(), 0.0)
    with pytest.raises(InvalidArgument):
        esr_spectrum(nv_n_pair(), 1.0, drive_spin=3)
    with pytest.raises(InvalidArgument):
        esr_spectrum(nv_n_pair(), 1.0, populations=[1.0, 0.0])


def _nv_only(b):
    return SpinSystemConfig(spins=(SpinSpecies("NV", 1, GAMMA_E),), b_field=(0, 0, b),
                            zero_field={0: zfs_tensor(2870.0)})


def test_sum_rule_uncoupled_nv():
    totals = [sum(ln.intensity for ln in esr_spectrum(_nv_only(b), 1.0).lines) for b in (0.0, 40.0, 300.0, 900.0)]
    np.testing.assert_allclose(totals, totals[0], rtol=1e-6)


def test_doublet_symmetry_with_secular_coupling():
    secular = InteractionTensor(np.diag([0.0, 0.0, 15.42]))
    base = nv_n_pair(b_gauss=40.0, coupled=False)
    config = SpinSystemConfig(spins=base.spins, b_field=base.b_field, zero_field=base.zero_field,
                              couplings=((0, 1, secular),))
    i_a, i_astar = doublet_intensities(esr_spectrum(config, 1.0))
    assert abs(i_a - i_astar) < 1e-9


def test_doublet_near_symmetric_with_full_dipolar():
    i_a, i_astar = doublet_intensities(esr_spectrum(nv_n_pair(b_gauss=40.0), 1.0))
    assert abs(i_a - i_astar) < 1e-3 * (i_a + i_astar)


def test_hyperfine_lines_with_15n():
    spec = esr_spectrum(nv_n_pair(b_gauss=40.0, n15_on_nv=True), 0.5)
    assert len(spec.lines) == 8
    i_a, i_astar = doublet_intensities(spec)
    assert i_a > 0 and i_astar > 0


@pytest.mark.parametrize("args,expected", [((1, 1), 0.0), ((1, 0), -1.0), ((0, 1), 1.0)])
def test_polarization_from_intensities(args, expected):
    assert polarization_from_intensities(*args) == expected


def test_polarization_undefined():
    with pytest.raises(UndefinedPolarization):
        polarization_from_intensities(0.0, 0.0)
    with pytest.raises(InvalidArgument):
        polarization_from_intensities(-1.0, 1.0)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_polarization_bounded(a, b):
    if a + b > 0:
        assert -1.0 <= polarization_from_intensities(a, b) <= 1.0


def test_branch_gap_symmetric_labels():
    config = nv_n_pair(d_fs=2881.0)
    assert branch_gap(config, PAIR, 514.0) == branch_gap(config, PAIR[::-1], 514.0)
