import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from spdcvac.vacuum import (
    RegistryError,
    VacuumRegistry,
    register_vacuum,
    sample_amplitudes,
    sample_phases,
    sample_realization,
)


def sealed(*labels, **kw):
    reg = VacuumRegistry(**kw)
    for label in labels:
        reg.register(label)
    return reg.seal()


def test_first_id_is_zero_and_ids_are_dense():
    reg = VacuumRegistry()
    a = register_vacuum(reg, "idler-vac-shared")
    b = register_vacuum(reg, "signal-vac-1")
    assert a.index == 0 and b.index == 1
    assert a != b
    assert reg["signal-vac-1"] == b
    assert len(reg) == 2


def test_duplicate_label_rejected():
    reg = VacuumRegistry()
    reg.register("x")
    with pytest.raises(RegistryError, match="x"):
        reg.register("x")


def test_sealed_registry_rejects_registration():
    reg = sealed("a")
    with pytest.raises(RegistryError):
        reg.register("b")


def test_sampling_requires_seal():
    reg = VacuumRegistry()
    reg.register("a")
    with pytest.raises(RegistryError):
        sample_realization(reg, 0, 0)


def test_realization_is_deterministic():
    reg = sealed("a", "b", "c")
    r1 = sample_realization(reg, 1234, 17)
    r2 = sample_realization(reg, 1234, 17)
    assert r1 == r2
    assert set(r1.phases) == set(reg.modes)
    assert all(0.0 <= p < 2 * np.pi for p in r1.phases.values())
    assert sample_realization(reg, 1234, 18) != r1


@given(seed=st.integers(0, 2**63), start=st.integers(0, 10_000), width=st.integers(1, 9))
@settings(max_examples=30, deadline=None)
def test_single_trial_matches_batch_row(seed, start, width):
    reg = sealed(*[f"m{i}" for i in range(width)])
    batch = sample_phases(reg, seed, start, 5)
    for k in range(5):
        np.testing.assert_array_equal(sample_phases(reg, seed, start + k, 1)[0], batch[k])


def test_phases_uniform_ks():
    reg = sealed("a")
    phases = sample_phases(reg, 7, 0, 100_000)[:, 0]
    assert stats.kstest(phases, "uniform", args=(0, 2 * np.pi)).pvalue > 0.001


def test_circular_mean_and_cross_mode_independence():
    reg = sealed("a", "b")
    phases = sample_phases(reg, 11, 0, 100_000)
    z = np.exp(1j * phases)
    assert abs(z[:, 0].mean()) < 0.02
    assert abs((z[:, 0] * z[:, 1].conj()).mean()) < 0.02


def test_no_lag1_correlation():
    reg = sealed("a")
    n = 100_000
    z = np.exp(1j * sample_phases(reg, 3, 0, n)[:, 0])
    lag1 = np.mean(z[1:] * z[:-1].conj())
    assert abs(lag1) < 3 / np.sqrt(n)


def test_amplitudes_off_by_default_and_rayleigh_when_on():
    assert np.all(sample_amplitudes(sealed("a"), 0, 0, 10) == 1.0)
    reg = sealed("a", amplitude_fluctuations=True)
    amps = sample_amplitudes(reg, 5, 0, 100_000)[:, 0]
    # unit mean square; Rayleigh with sigma^2 = 1/2
    assert abs(np.mean(amps**2) - 1.0) < 0.02
    assert stats.kstest(amps, "rayleigh", args=(0, np.sqrt(0.5))).pvalue > 0.001
    assert sample_realization(reg, 5, 3).amplitudes is not None
