import math

import pytest
from hypothesis import given, strategies as st

from ckbohm.core import (
    Damping,
    FreePotential,
    HarmonicPotential,
    LinearPotential,
    PhysicalSetup,
    classify_regime,
    potential_eval,
)

W0 = 0.62832


def harmonic_setup(gamma, omega0=W0):
    return PhysicalSetup(gamma=gamma, potential=HarmonicPotential(omega0))


def test_classify_underdamped():
    regime = classify_regime(harmonic_setup(0.3 * W0))
    assert regime.kind is Damping.UNDERDAMPED
    # oracle: evaluate Omega = sqrt(w0^2 - (gamma/2)^2) directly
    omega_expected = math.sqrt(W0**2 - (0.15 * W0) ** 2)
    assert regime.rate == pytest.approx(omega_expected, abs=1e-15)
    assert regime.rate == pytest.approx(0.62124, abs=5e-5)
    assert regime.phase == pytest.approx(math.atan2(0.15 * W0, omega_expected), abs=1e-15)


def test_classify_critical_exact():
    regime = classify_regime(harmonic_setup(2.0 * W0))
    assert regime.kind is Damping.CRITICAL
    assert regime.rate == 0.0


def test_classify_overdamped():
    regime = classify_regime(harmonic_setup(4.0 * W0))
    assert regime.kind is Damping.OVERDAMPED
    # oracle: Gamma = sqrt((gamma/2)^2 - w0^2) = sqrt(3) * w0
    assert regime.rate == pytest.approx(math.sqrt(3.0) * W0, abs=1e-15)
    assert regime.rate == pytest.approx(1.08828, abs=5e-5)


def test_classify_requires_harmonic():
    with pytest.raises(ValueError):
        classify_regime(PhysicalSetup(gamma=0.1))


def test_classify_critical_band_is_relative():
    # A perturbation below the relative tolerance still classifies critical.
    regime = classify_regime(harmonic_setup(2.0 * W0 * (1.0 + 1e-13)))
    assert regime.kind is Damping.CRITICAL
    regime = classify_regime(harmonic_setup(2.0 * W0 * (1.0 + 1e-9)))
    assert regime.kind is Damping.OVERDAMPED


@given(
    omega0=st.floats(1e-3, 1e3),
    ratio=st.floats(1e-3, 1e3),
    scale=st.floats(1e-6, 1e6),
)
def test_classify_scale_invariance(omega0, ratio, scale):
    gamma = ratio * omega0
    a = classify_regime(harmonic_setup(gamma, omega0))
    b = classify_regime(harmonic_setup(scale * gamma, scale * omega0))
    assert a.kind is b.kind


def test_potential_eval_free():
    assert potential_eval(FreePotential(), 1.0, 7.0) == (0.0, 0.0, 0.0)


def test_potential_eval_linear():
    v, v1, v2 = potential_eval(LinearPotential(0.25), 1.0, 50.0)
    # oracle: V = -m a x evaluated by hand
    assert v == pytest.approx(-12.5, abs=1e-15)
    assert v1 == pytest.approx(-0.25, abs=1e-15)
    assert v2 == 0.0


def test_potential_eval_harmonic():
    v, v1, v2 = potential_eval(HarmonicPotential(W0), 1.0, 5.0)
    # oracle: V = m w0^2 x^2 / 2 evaluated by hand
    assert v == pytest.approx(0.5 * W0**2 * 25.0, rel=1e-15)
    assert v == pytest.approx(4.9348, abs=1e-4)
    assert v1 == pytest.approx(W0**2 * 5.0, rel=1e-15)
    assert v2 == pytest.approx(W0**2, rel=1e-15)


@pytest.mark.parametrize(
    "spec",
    [FreePotential(), LinearPotential(0.25), HarmonicPotential(W0)],
    ids=["free", "linear", "harmonic"],
)
@given(x=st.floats(-100, 100), x0=st.floats(-100, 100))
def test_quadratic_taylor_closure(spec, x, x0):
    m = 1.3
    v, _, _ = potential_eval(spec, m, x)
    v0, v1, v2 = potential_eval(spec, m, x0)
    taylor = v0 + v1 * (x - x0) + 0.5 * v2 * (x - x0) ** 2
    assert taylor == pytest.approx(v, rel=1e-12, abs=1e-12)


def test_setup_validation():
    with pytest.raises(ValueError):
        PhysicalSetup(mass=0.0)
    with pytest.raises(ValueError):
        PhysicalSetup(hbar=-1.0)
    with pytest.raises(ValueError):
        PhysicalSetup(gamma=-0.1)
    with pytest.raises(ValueError):
        HarmonicPotential(0.0)


def test_linear_noncanonical_sign_is_flagged():
    with pytest.warns(UserWarning):
        LinearPotential(-0.25)
