import numpy as np
import pytest

from ffpr import core, metrics, simulator, solvers
from helpers import random_complex


def _embed(x, m1, m2):
    out = np.zeros((m1, m2), complex)
    out[: x.shape[0], : x.shape[1]] = x
    return out


def _sample(seed, n=32):
    rng = simulator.record_rng(seed, 0)
    return simulator.sample_crystal(rng, n)


def test_er_fixed_point(rng):
    x = random_complex(rng, (6, 6))
    y = core.forward_measure(x)
    z = _embed(x, *y.shape)
    support = np.abs(z) > 0
    np.testing.assert_allclose(solvers.er_step(z, y, support), z, atol=1e-12)


def test_er_full_support_restores_magnitudes(rng):
    x = random_complex(rng, (5, 7))
    y = core.forward_measure(x)
    z = np.fft.ifft2(rng.random(y.shape) * np.exp(2j * np.pi * rng.random(y.shape)))
    out = solvers.er_step(z, y, np.ones(y.shape, bool))
    np.testing.assert_allclose(np.abs(np.fft.fft2(out)), np.sqrt(y), atol=1e-12)
    # phases of the input are kept
    f_in, f_out = np.fft.fft2(z), np.fft.fft2(out)
    np.testing.assert_allclose(np.angle(f_out * np.conj(f_in)), 0, atol=1e-9)


def test_magnitude_projection_zero_bins_take_phase_zero():
    z = np.zeros((4, 4), complex)
    mag = np.full((4, 4), 2.0)
    out = solvers.magnitude_projection(z, mag)
    np.testing.assert_allclose(np.fft.fft2(out), mag, atol=1e-12)


def test_hio_fixed_point(rng):
    x = random_complex(rng, (6, 6))
    y = core.forward_measure(x)
    z = _embed(x, *y.shape)
    support = np.abs(z) > 0
    np.testing.assert_allclose(solvers.hio_step(z, z, y, support, 0.9), z, atol=1e-12)


def test_hio_beta_zero_keeps_previous_outside(rng):
    y = np.abs(random_complex(rng, (8, 8))) ** 2
    z = random_complex(rng, (8, 8))
    prev = random_complex(rng, (8, 8))
    support = np.zeros((8, 8), bool)
    support[:4, :4] = True
    out = solvers.hio_step(z, prev, y, support, 0.0)
    np.testing.assert_array_equal(out[~support], prev[~support])
    np.testing.assert_allclose(out[support], solvers.magnitude_projection(z, np.sqrt(y))[support])


@pytest.mark.parametrize("beta", [0.5, 0.9, 1.0])
def test_hio_outside_formula(rng, beta):
    y = np.abs(random_complex(rng, (8, 8))) ** 2
    z = random_complex(rng, (8, 8))
    support = np.zeros((8, 8), bool)
    support[2:5, 1:6] = True
    p = solvers.magnitude_projection(z, np.sqrt(y))
    out = solvers.hio_step(z, z, y, support, beta)
    np.testing.assert_allclose(out[~support], (z - beta * p)[~support], atol=1e-13)


def test_er_residual_monotone_16():
    x = _sample(4, 16)
    y = core.forward_measure(x)
    cfg = solvers.SolverConfig(schedule=[("ER", 200)], shrinkwrap_every=0, restarts=1, seed=1)
    _, hist, _, _ = solvers.run_single(y, 16, 16, cfg)
    assert len(hist) == 200
    assert np.all(np.diff(hist) <= 1e-10)


def test_shrinkwrap_disk_is_connected_blob():
    from scipy.ndimage import label

    r, c = np.indices((64, 64))
    disk = ((r - 32) ** 2 + (c - 32) ** 2 <= 36).astype(complex)
    mask, flagged = solvers.shrinkwrap_update(disk, 8.0, 0.2)
    assert not flagged
    assert label(mask)[1] == 1
    assert np.all(mask[disk.real > 0])


def test_shrinkwrap_tiny_threshold_gives_full_frame():
    z = np.zeros((16, 16), complex)
    z[8, 8] = 1
    mask, _ = solvers.shrinkwrap_update(z, 3.0, 1e-300)
    assert mask.all()


def test_shrinkwrap_empty_keeps_previous_and_flags():
    prev = np.zeros((8, 8), bool)
    prev[2, 3] = True
    mask, flagged = solvers.shrinkwrap_update(np.zeros((8, 8)), 1.0, 0.2, previous=prev)
    assert flagged and mask.any()
    np.testing.assert_array_equal(mask, prev)


def test_shrinkwrap_oracle_covers_support(crystals):
    cfg = solvers.SolverConfig()
    for x in crystals[:20]:
        z = _embed(x, 64, 64)
        window = _embed(np.ones_like(x), 64, 64).real > 0
        mask, _ = solvers.shrinkwrap_update(z, cfg.shrinkwrap_sigma0, cfg.shrinkwrap_threshold, window=window)
        truth = np.abs(z) > 0
        assert (mask & truth).sum() / truth.sum() >= 0.95


def test_solve_delta():
    y = core.forward_measure(np.array([[1.0 + 0j]]))
    np.testing.assert_allclose(y, np.ones((2, 2)))
    res = solvers.solve(y, 1, 1, solvers.SolverConfig(restarts=2))
    assert metrics.sa_mse(res.reconstruction, np.ones((1, 1))).raw <= 1e-6


def test_solve_determinism_and_shape(crystals):
    x = crystals[0]
    y = core.forward_measure(x)
    cfg = solvers.SolverConfig(schedule=[("HIO", 40), ("ER", 20)], restarts=2, seed=7)
    a = solvers.solve(y, 32, 32, cfg)
    b = solvers.solve(y, 32, 32, cfg)
    assert a.residual_history.tobytes() == b.residual_history.tobytes()
    assert a.reconstruction.tobytes() == b.reconstruction.tobytes()
    assert len(a.residual_history) == 60
    assert a.reconstruction.shape == (32, 32)
    assert a.support_final.shape == (64, 64) and a.support_final.any()
    assert np.all(a.residual_history >= 0)
    assert a.final_residual == min(a.restart_residuals)
    c = solvers.solve(y, 32, 32, solvers.SolverConfig(schedule=cfg.schedule, restarts=2, seed=8))
    assert c.residual_history.tobytes() != a.residual_history.tobytes()


def test_threads_do_not_change_result(crystals):
    y = core.forward_measure(crystals[1])
    base = dict(schedule=[("HIO", 30), ("ER", 10)], restarts=3, seed=2)
    a = solvers.solve(y, 32, 32, solvers.SolverConfig(**base, threads=1))
    b = solvers.solve(y, 32, 32, solvers.SolverConfig(**base, threads=3))
    assert a.reconstruction.tobytes() == b.reconstruction.tobytes()


def test_final_residual_matches_reconstruction(crystals):
    x = crystals[2]
    y = core.forward_measure(x)
    res = solvers.solve(y, 32, 32, solvers.SolverConfig(schedule=[("HIO", 50), ("ER", 30)], restarts=2))
    again = np.linalg.norm(np.sqrt(core.forward_measure(res.reconstruction)) - np.sqrt(y))
    assert abs(again - res.final_residual) <= 1e-10


def test_oracle_support_recovers_object(crystals):
    x = crystals[3]
    y = core.forward_measure(x)
    support = np.abs(_embed(x, 64, 64)) > 0
    z = np.fft.ifft2(np.sqrt(y) * np.exp(2j * np.pi * np.random.default_rng(0).random(y.shape)))
    z = np.where(support, z, 0)
    for _ in range(300):
        z = solvers.hio_step(z, z, y, support, 0.9)
    for _ in range(50):
        z = solvers.er_step(z, y, support)
    assert metrics.sa_mse(z[:32, :32], x).relative <= 1e-3


def test_solve_errors():
    with pytest.raises(core.DimensionError):
        solvers.solve(np.ones((10, 10)), 8, 8)
    with pytest.raises(ValueError):
        solvers.solve(np.zeros((16, 16)), 8, 8)
    with pytest.raises(core.DimensionError):
        solvers.solve(np.ones(16), 8, 8)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"beta": 0.0},
        {"beta": 1.5},
        {"schedule": []},
        {"schedule": [("XX", 5)]},
        {"schedule": [("ER", 0)]},
        {"shrinkwrap_sigma0": 0.0},
        {"shrinkwrap_sigma_decay": 1.2},
        {"shrinkwrap_threshold": 1.0},
        {"restarts": 0},
        {"shrinkwrap_every": -1},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        solvers.SolverConfig(**kwargs)


def test_default_schedule_length():
    assert solvers.SolverConfig().total_iterations == 620


@pytest.mark.slow
def test_hio_beats_er_only():
    wins = 0
    for trial in range(20):
        x = _sample(1000 + trial)
        y = core.forward_measure(x)
        mixed = solvers.SolverConfig(restarts=1, seed=trial)
        er = solvers.SolverConfig(schedule=[("ER", 620)], restarts=1, seed=trial)
        a = metrics.sa_mse_fast(solvers.solve(y, 32, 32, mixed).reconstruction, x).relative
        b = metrics.sa_mse_fast(solvers.solve(y, 32, 32, er).reconstruction, x).relative
        wins += a < b
    assert wins >= 14
