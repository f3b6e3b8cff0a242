import numpy as np
import pytest

from ffpr import canonicalize as cz
from ffpr import core, simulator


def _phase(x):
    return cz.support_phase(x, 2)


def test_center_single_pixel():
    x = np.zeros((5, 5), complex)
    x[0, 0] = 2 - 1j
    c = cz.center_support(x)
    assert c[2, 2] == 2 - 1j
    assert np.count_nonzero(c) == 1


def test_center_already_centered_unchanged():
    x = np.zeros((6, 6), complex)
    x[1:4, 2:4] = 1
    c = cz.center_support(x)
    np.testing.assert_array_equal(cz.center_support(c), c)


def test_center_even_width_floor_convention():
    x = np.zeros((8, 8), complex)
    x[0:2, 0:4] = 1  # midpoints 0 and 1 -> moved to 3
    box = core.support_bbox(cz.center_support(x))
    assert ((box[0] + box[1]) // 2, (box[2] + box[3]) // 2) == (3, 3)


def test_center_empty_raises():
    with pytest.raises(cz.EmptySupportError):
        cz.center_support(np.zeros((4, 4)))


def test_center_translation_equivariant(crystals, rng):
    for x in crystals[:20]:
        (lo1, hi1), (lo2, hi2) = core.allowable_translations(x)
        t1, t2 = rng.integers(lo1, hi1 + 1), rng.integers(lo2, hi2 + 1)
        np.testing.assert_array_equal(cz.center_support(core.translate(x, t1, t2)), cz.center_support(x))


def test_centroid_method_available():
    x = np.zeros((7, 7), complex)
    x[0, 0] = 1
    assert cz.center_support(x, method="centroid")[3, 3] == 1


def test_real_symmetric_input_unchanged_up_to_centering():
    n = 16
    r, c = np.indices((n, n))
    x = np.exp(-((r - 7) ** 2 + (c - 7) ** 2) / 6.0).astype(complex)
    x[np.abs(x) < 1e-3] = 0
    out = cz.break_symmetry(x)
    np.testing.assert_allclose(out, cz.center_support(x), atol=1e-12)
    assert abs(_phase(out)[0, 0] - 1) < 1e-9


def test_global_phase_removed(crystals, rng):
    for x in crystals[:10]:
        theta = rng.uniform(-np.pi, np.pi)
        a = cz.break_symmetry(x)
        b = cz.break_symmetry(x * np.exp(1j * theta))
        assert np.abs(a - b).max() <= 1e-8


def test_flip_removed(crystals):
    for x in crystals[:10]:
        a = cz.break_symmetry(x)
        b = cz.break_symmetry(core.conjugate_flip(x))
        assert np.abs(a - b).max() <= 1e-8


def test_magnitudes_preserved(crystals):
    for x in crystals[:10]:
        out = cz.break_symmetry(x)
        y0 = core.forward_measure(cz.center_support(x))
        y1 = core.forward_measure(out)
        assert np.abs(y1 - y0).max() <= 1e-10 * y0.max()


def test_idempotent_and_bit_stable(crystals):
    for x in crystals[:10]:
        once = cz.break_symmetry(x)
        np.testing.assert_array_equal(cz.break_symmetry(once), once)


def test_output_is_canonical(crystals):
    for x in crystals:
        rep = cz.check_canonical(_phase(cz.break_symmetry(x)))
        assert rep.is_canonical, rep


def test_check_canonical_all_ones_degenerate():
    rep = cz.check_canonical(np.ones((4, 4), complex))
    assert rep.is_canonical and rep.degenerate and not rep.second_entry_in_upper_half


def test_check_canonical_rotated_corner():
    om = np.ones((4, 4), complex)
    om[0, 0] = np.exp(0.1j)
    om[0, 1] = 1j
    rep = cz.check_canonical(om)
    assert not rep.is_canonical
    assert rep.corner_phase_error == pytest.approx(abs(np.exp(0.1j) - 1))


def test_check_canonical_lower_half():
    om = np.ones((3, 3), complex)
    om[0, 1] = -1j
    assert not cz.check_canonical(om).is_canonical
    om[0, 1] = 1j
    assert cz.check_canonical(om).is_canonical


def test_degenerate_tie_break_uses_row_major_scan():
    om = np.ones((3, 3), complex)
    om[1, 0] = np.exp(-0.5j)
    assert not cz.check_canonical(om).is_canonical
    om[1, 0] = np.exp(0.5j)
    rep = cz.check_canonical(om)
    assert rep.is_canonical and rep.degenerate


def test_flip_branch_conjugates_exactly(crystals):
    """When the flip branch fires, the output phase is the conjugate of the pre-branch phase."""
    fired = 0
    for x in crystals:
        xc = cz.center_support(x)
        om = _phase(xc)
        om = om * np.conj(om[0, 0])
        if om[0, 1].imag < 0:
            fired += 1
            out = _phase(cz.break_symmetry(x))
            np.testing.assert_allclose(out, np.conj(om), atol=1e-8)
    assert fired > 0


def test_vanishing_dc():
    x = np.zeros((6, 6), complex)
    x[2, 2], x[2, 3] = 1, -1
    with pytest.raises(cz.VanishingDCError):
        cz.break_symmetry(x)


def test_dataset_empty_and_single(crystals):
    assert len(cz.canonicalize_dataset([])) == 0
    out = cz.canonicalize_dataset(crystals[:1])
    assert len(out) == 1
    y, xb = out[0]
    assert cz.check_canonical(_phase(xb)).is_canonical
    np.testing.assert_allclose(y, core.forward_measure(xb))


def test_dataset_collapses_symmetric_copies(crystals, rng):
    recs = []
    for x in crystals[:5]:
        recs.append(x)
        recs.append(core.apply_symmetry(x, core.random_allowable_symmetry(x, rng)))
    out = cz.canonicalize_dataset(recs)
    for j in range(0, len(recs), 2):
        assert np.abs(out[j][1] - out[j + 1][1]).max() <= 1e-8
        np.testing.assert_allclose(out[j][0], out[j + 1][0], atol=1e-10 * out[j][0].max())


def test_dataset_collects_failures(crystals):
    bad = np.zeros((32, 32), complex)
    out = cz.canonicalize_dataset([crystals[0], bad, crystals[1]])
    assert list(out.failures) == [1]
    assert out.indices == [0, 2]


def test_no_center_option(crystals):
    x = crystals[0]
    out = cz.break_symmetry(x, center=False)
    assert core.support_bbox(out) == core.support_bbox(x)


def test_round_off_bins_do_not_drive_tie_break():
    # (0, 1) is real here, and the first bin with a nonzero imaginary part
    # in row-major order sits at round-off magnitude
    x = simulator.sample_crystal(simulator.record_rng(202, 5), 32)
    xb = cz.break_symmetry(x)
    rep = cz.check_canonical(cz.support_phase(xb))
    assert rep.degenerate and rep.is_canonical
    assert np.array_equal(cz.break_symmetry(xb), xb)
