"""Smoke tests for the python bindings."""

import numpy as np
import pytest

import fastmnmf


def test_stft_round_trip():
    rng = np.random.default_rng(0)
    signal = rng.standard_normal((4096, 2))
    spec = fastmnmf.stft(signal, 8000.0, 256, 64)
    assert spec.shape == (129, (4096 - 256) // 64 + 1, 2)
    back = fastmnmf.istft(spec, 8000.0, 256, 64, 4096)
    interior = slice(256, 4096 - 256)
    err = np.linalg.norm(back[interior] - signal[interior])
    assert err <= 1e-10 * np.linalg.norm(signal[interior])


def test_sdr_scale_invariance():
    rng = np.random.default_rng(1)
    ref = rng.standard_normal(6000)
    est = ref + 0.1 * rng.standard_normal(6000)
    a = fastmnmf.sdr(ref, est, 128)
    b = fastmnmf.sdr(ref, 0.25 * est, 128)
    assert abs(a - b) < 1e-6
    assert fastmnmf.sdr(ref, ref, 128) > 100.0


def test_joint_diagonalizability():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    family = [q @ np.diag(rng.uniform(0.5, 1.5, 3)) @ q.conj().T for _ in range(3)]
    assert fastmnmf.is_jointly_diagonalizable(family)
    g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    family.append(g @ g.conj().T / 3)
    assert not fastmnmf.is_jointly_diagonalizable(family)


def test_fit_cost_is_monotone():
    rng = np.random.default_rng(3)
    x = (rng.standard_normal((16, 48, 4)) + 1j * rng.standard_normal((16, 48, 4))) / np.sqrt(2)
    report = fastmnmf.fit_distributed(
        x, partition=[2, 2], n_sources=2, k_bases=4, iterations=15, seed=5
    )
    trace = np.asarray(report["cost_trace"])
    assert trace.shape == (16,)
    assert np.all(np.diff(trace) <= 1e-9 * np.abs(trace[:-1]))


def test_end_to_end_separation_improves_sdr():
    sim = fastmnmf.simulate(n_sources=3, sample_rate=8000.0, duration_s=1.6, seed=7)
    mixture = sim["mixture"]
    assert mixture.shape[1] == 12
    result = fastmnmf.separate(
        mixture,
        8000.0,
        "distributed",
        partition=sim["partition"],
        n_sources=3,
        k_bases=4,
        iterations=30,
        window_len=256,
        hop_len=64,
        seed=7,
    )
    sources = result["sources"]
    assert len(sources) == 3
    ref = sim["reference_mic"]
    rep = fastmnmf.sdr_improvement(
        mixture[:, ref],
        [img[:, ref] for img in sim["images"]],
        [src[:, ref] for src in sources],
        filter_len=256,
    )
    assert rep["mean_improvement_db"] > 0.0


def test_shape_errors_are_typed():
    with pytest.raises(ValueError):
        fastmnmf.stft(np.zeros((50, 1)), 8000.0, 256, 64)
