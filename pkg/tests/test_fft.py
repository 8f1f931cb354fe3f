import numpy as np
import pytest

from harensemble.core import HarError
from harensemble.fft import fft, is_power_of_two


def direct_dft(x):
    n = x.shape[-1]
    k = np.arange(n)
    return x @ np.exp(-2j * np.pi * np.outer(k, k) / n).T


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32, 64, 128])
def test_matches_direct_dft(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=(20, n)) + 1j * rng.normal(size=(20, n))
    ref = direct_dft(x)
    assert np.max(np.abs(fft(x) - ref)) <= 1e-9 * max(1.0, np.max(np.abs(ref)))


def test_batched_leading_axes():
    x = np.random.default_rng(0).normal(size=(3, 2, 16))
    out = fft(x)
    assert out.shape == (3, 2, 16)
    assert np.allclose(out[1, 1], direct_dft(x[1, 1]))


def test_impulse_and_cosine():
    imp = np.zeros(64)
    imp[0] = 1.0
    assert np.allclose(np.abs(fft(imp)), 1.0)
    t = np.arange(64)
    spec = np.abs(fft(np.cos(2 * np.pi * 8 * t / 64)))
    assert spec[8] == pytest.approx(32.0) and spec[56] == pytest.approx(32.0)
    assert np.sum(spec > 1e-9) == 2


def test_non_power_of_two_rejected():
    assert not is_power_of_two(48)
    with pytest.raises(HarError, match="power-of-two"):
        fft(np.zeros(48))


def test_linearity():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=32), rng.normal(size=32)
    assert np.allclose(fft(2.0 * a - 3.0 * b), 2.0 * fft(a) - 3.0 * fft(b))
