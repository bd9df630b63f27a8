import numpy as np
import pytest

from gchjb.penalty import ConcaveBridgeStub, PenaltyFamily


def test_bridge_examples():
    fam = PenaltyFamily(0.1)
    assert fam.beta(0.2) == pytest.approx(1.0)  # matches (z - eps)/eps at 2*eps
    assert fam.beta(-5.0) == 0.0
    assert fam.beta(0.05) == pytest.approx(0.0625)  # (s^2)/4 at s = 0.5


def test_linear_tail_exact():
    for eps in (0.5, 0.1, 0.01):
        fam = PenaltyFamily(eps)
        z = np.linspace(2 * eps, 10.0, 5000)
        np.testing.assert_allclose(fam.beta(z), (z - eps) / eps, rtol=0, atol=1e-12)


def test_zero_branch_and_positivity():
    fam = PenaltyFamily(0.1)
    z = np.linspace(-3, 0, 1000)
    assert np.all(fam.beta(z) == 0.0)
    zp = np.linspace(1e-12, 3, 1000)
    assert np.all(fam.beta(zp) > 0.0)


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
def test_monotone_convex_growth_identity(eps):
    fam = PenaltyFamily(eps)
    rng = np.random.default_rng(21)
    z = rng.uniform(-3, 3, size=10_000)
    bp = fam.beta_prime(z)
    assert np.min(bp) >= 0.0
    # convexity via second differences at the bridge scale
    h = eps / 5.0
    d2 = fam.beta(z + h) - 2 * fam.beta(z) + fam.beta(z - h)
    assert np.min(d2) >= -1e-9
    # beta(z) <= z * beta'(z)
    assert np.max(fam.beta(z) - z * bp) <= 1e-9


def test_c1_junctions_of_bridge():
    # bridge = beta at eps = 1; one-sided slopes estimated by centered
    # differences just inside each piece
    phi = PenaltyFamily(1.0)
    d = 1e-7
    assert abs((phi.beta(0.0) - phi.beta(-2 * d)) / (2 * d)) <= 1e-6  # phi'(0-)
    assert abs((phi.beta(2 * d) - phi.beta(0.0)) / (2 * d)) <= 1e-6  # phi'(0+)
    assert abs((phi.beta(2.0) - phi.beta(2.0 - 2 * d)) / (2 * d) - 1.0) <= 1e-6
    assert abs((phi.beta(2.0 + 2 * d) - phi.beta(2.0)) / (2 * d) - 1.0) <= 1e-6


def test_junction_continuity_all_eps():
    for eps in (0.5, 0.1, 0.01):
        fam = PenaltyFamily(eps)
        z0 = 2 * eps
        assert fam.beta(z0) == pytest.approx((z0 - eps) / eps, abs=1e-12)
        d = 1e-7 * eps
        left = (fam.beta(z0) - fam.beta(z0 - 2 * d)) / (2 * d)
        right = (fam.beta(z0 + 2 * d) - fam.beta(z0)) / (2 * d)
        assert abs(left - 1.0 / eps) <= 1e-6 / eps
        assert abs(right - 1.0 / eps) <= 1e-6 / eps


def test_pointwise_blow_up():
    z = 1.0
    vals = [PenaltyFamily(eps).beta(z) for eps in (0.5, 0.1, 0.01, 0.001)]
    assert all(b2 > b1 for b1, b2 in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx((z - 0.001) / 0.001)


def test_beta_prime_is_derivative():
    fam = PenaltyFamily(0.1)
    rng = np.random.default_rng(22)
    z = rng.uniform(-1, 1, size=500)
    d = 1e-7
    fd = (fam.beta(z + d) - fam.beta(z - d)) / (2 * d)
    np.testing.assert_allclose(fam.beta_prime(z), fd, atol=1e-5)


def test_scalar_matches_vector():
    fam = PenaltyFamily(0.25)
    zs = [-1.0, 0.0, 0.1, 0.5, 2.0]
    vec = fam.beta(np.array(zs))
    for z, v in zip(zs, vec):
        assert fam.beta(z) == v
        assert isinstance(fam.beta(z), float)


def test_epsilon_validation():
    with pytest.raises(ValueError):
        PenaltyFamily(0.0)


def test_concave_stub_violates_convexity():
    fam = ConcaveBridgeStub(0.1)
    z = np.linspace(0.01, 1, 200)
    h = 0.02
    d2 = fam.beta(z + h) - 2 * fam.beta(z) + fam.beta(z - h)
    assert np.min(d2) < -1e-4  # deliberately broken
