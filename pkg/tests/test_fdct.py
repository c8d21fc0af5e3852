import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvelet_faces.fdct import (CurveletDecomposition, ScaleBand, angular_window, build_windows,
                                 coefficient_magnitudes, fdct_forward, fdct_inverse, lowpass_1d,
                                 meyer_nu, num_angles, pseudo_angle, read_decomposition,
                                 write_decomposition)
from curvelet_faces.imaging import DimensionError, Image

_WINDOWS = {}


def windows(h, w, scales=4, angles=8):
    key = (h, w, scales, angles)
    if key not in _WINDOWS:
        _WINDOWS[key] = build_windows(w, h, scales, angles)
    return _WINDOWS[key]


def explicit_coefficients(x, fam):
    """Coefficients from the definition: DFT sums, no FFT and no wrapping buffer.

    C[m, n] = sum_k W(k) xhat(k) exp(2 pi i (m k1 / L1 + n k2 / L2)) / sqrt(L1 L2),
    where xhat is the unitary DFT on the centered grid.
    """
    n1, n2 = x.shape
    k1 = np.arange(-n1 // 2, n1 // 2)
    k2 = np.arange(-n2 // 2, n2 // 2)
    F1 = np.exp(-2j * np.pi * np.outer(k1, np.arange(n1)) / n1)
    F2 = np.exp(-2j * np.pi * np.outer(k2, np.arange(n2)) / n2)
    xhat = F1 @ x @ F2.T / np.sqrt(n1 * n2)
    out = []
    for j, band in enumerate(fam.bands, start=1):
        grids = []
        for l, wedge in enumerate(band):
            L1, L2 = wedge.shape
            E1 = np.exp(2j * np.pi * np.outer(np.arange(L1), k1) / L1)
            E2 = np.exp(2j * np.pi * np.outer(np.arange(L2), k2) / L2)
            grids.append(E1 @ (fam.window(j, l) * xhat) @ E2.T / np.sqrt(L1 * L2))
        out.append(grids)
    return out


# --- window primitives ------------------------------------------------------

def test_meyer_nu_symmetry():
    t = np.linspace(-0.5, 1.5, 201)
    np.testing.assert_allclose(meyer_nu(t) + meyer_nu(1 - t), 1.0, atol=1e-14)
    assert meyer_nu(0.0) == 0 and meyer_nu(1.0) == 1


def test_lowpass_support():
    k = np.arange(-20, 21)
    lp = lowpass_1d(k, 5.0)
    assert np.all(lp[np.abs(k) <= 5] == 1)
    assert np.all(lp[np.abs(k) >= 10] == 0)
    assert np.all((lp > 0) == (np.abs(k) < 10))


def test_pseudo_angle_continuity_and_antipodes(rng):
    theta = np.linspace(0, 2 * np.pi, 2001)
    tau = pseudo_angle(np.cos(theta), np.sin(theta))
    steps = np.abs(np.diff(np.unwrap(tau * np.pi / 2)))
    assert steps.max() < 0.02
    u, v = rng.normal(size=(2, 500))
    np.testing.assert_allclose(np.mod(pseudo_angle(-u, -v) - pseudo_angle(u, v), 4), 2, atol=1e-12)


@pytest.mark.parametrize("count", [8, 16, 32])
def test_angular_partition(count):
    tau = np.linspace(0, 4, 4001, endpoint=False)
    total = sum(angular_window(tau, l, count) ** 2 for l in range(count))
    assert np.max(np.abs(total - 1)) < 1e-14


def test_num_angles_doubling():
    assert [num_angles(j, 4, 8) for j in range(1, 5)] == [1, 8, 16, 1]
    assert [num_angles(j, 6, 8) for j in range(1, 7)] == [1, 8, 16, 16, 32, 1]


# --- window family ----------------------------------------------------------

@pytest.mark.parametrize("shape,scales,counts", [
    ((64, 64), 4, [1, 8, 16, 1]),
    ((32, 32), 3, [1, 8, 1]),
    ((96, 128), 4, [1, 8, 16, 1]),
    ((128, 128), 5, [1, 8, 16, 16, 1]),
])
def test_band_counts(shape, scales, counts):
    assert windows(*shape, scales).band_counts == counts


@pytest.mark.parametrize("shape,scales", [((64, 64), 4), ((96, 128), 4), ((32, 32), 3),
                                          ((80, 106), 4), ((112, 92), 4), ((64, 64), 2)])
def test_partition_of_unity(shape, scales):
    assert np.max(np.abs(windows(*shape, scales).partition_sum() - 1)) < 1e-12


def test_mirrored_wedges_have_equal_extents():
    fam = windows(96, 128)
    for band in fam.bands[1:-1]:
        n = len(band)
        for l in range(n // 2):
            assert band[l].shape == band[l + n // 2].shape


def test_wrap_is_collision_free():
    fam = windows(96, 128)
    for band in fam.bands:
        for w in band:
            assert len(np.unique(w.wrap_index)) == len(w.wrap_index)


def test_build_windows_errors():
    with pytest.raises(DimensionError):
        build_windows(63, 64)
    with pytest.raises(ValueError):
        build_windows(64, 64, 4, 10)
    with pytest.raises(ValueError):
        build_windows(64, 64, 4, 4)
    with pytest.raises(ValueError):
        build_windows(64, 64, 1)


# --- forward / inverse ------------------------------------------------------

@pytest.mark.parametrize("shape,scales", [((16, 16), 3), ((32, 24), 4), ((32, 32), 4)])
def test_forward_matches_explicit_sum(shape, scales, rng):
    x = rng.normal(size=shape)
    fam = build_windows(shape[1], shape[0], scales, 8)
    fast = fdct_forward(x, fam)
    slow = explicit_coefficients(x, fam)
    for s, grids in zip(fast.scales, slow):
        for a, b in zip(s.bands, grids):
            np.testing.assert_allclose(a, b, atol=1e-10)


def test_zero_image_gives_zero_coefficients():
    c = fdct_forward(np.zeros((64, 64)), windows(64, 64))
    assert all(np.all(b == 0) for s in c.scales for b in s.bands)
    assert np.all(fdct_inverse(c.map(np.zeros_like), windows(64, 64)) == 0)


def test_impulse_energy_is_one():
    x = np.zeros((32, 32))
    x[5, 9] = 1.0
    c = fdct_forward(x, windows(32, 32))
    energy = 0.0
    for s in c.scales:
        for b in s.bands:
            energy += float(np.sum(b.real**2 + b.imag**2))
    assert abs(energy - 1.0) < 1e-8


@pytest.mark.parametrize("shape", [(32, 32), (64, 64), (96, 128)])
def test_round_trip_and_parseval(shape, rng):
    x = rng.uniform(0, 255, shape)
    fam = windows(*shape)
    c = fdct_forward(x, fam)
    y = fdct_inverse(c, fam)
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-6
    assert abs(c.energy() / np.sum(x**2) - 1) < 1e-8
    assert c.coefficient_count() >= x.size


def test_inner_product_identity(rng):
    fam = windows(64, 64)
    x, y = rng.normal(size=(2, 64, 64))
    cx, cy = fdct_forward(x, fam), fdct_forward(y, fam)
    lhs = sum(np.sum(np.conj(a) * b) for sa, sb in zip(cx.scales, cy.scales)
              for a, b in zip(sa.bands, sb.bands))
    rhs = np.sum(x * y)
    assert abs(lhs - rhs) <= 1e-8 * np.linalg.norm(x) * np.linalg.norm(y)


def test_inverse_is_adjoint(rng):
    fam = windows(32, 32)
    x = rng.normal(size=(32, 32))
    c = fdct_forward(rng.normal(size=(32, 32)), fam)
    d = c.map(lambda b: b + 1j * rng.normal(size=b.shape))
    lhs = sum(np.vdot(a, b) for sa, sb in zip(fdct_forward(x, fam).scales, d.scales)
              for a, b in zip(sa.bands, sb.bands))
    rhs = np.vdot(x, fdct_inverse(d, fam, real=False))
    assert abs(lhs - rhs) < 1e-9 * abs(rhs)


@settings(max_examples=25)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_linearity(a, b, seed):
    r = np.random.default_rng(seed)
    fam = windows(32, 32)
    x, y = r.normal(size=(2, 32, 32))
    lhs = fdct_forward(a * x + b * y, fam)
    cx, cy = fdct_forward(x, fam), fdct_forward(y, fam)
    for s, sx, sy in zip(lhs.scales, cx.scales, cy.scales):
        for c, p, q in zip(s.bands, sx.bands, sy.bands):
            expect = a * p + b * q
            assert np.linalg.norm(c - expect) <= 1e-10 * max(np.linalg.norm(expect), 1.0)


def test_constant_image_only_in_coarse_scale():
    c = fdct_forward(np.full((64, 64), 7.0), windows(64, 64))
    total = c.energy()
    coarse = float(np.sum(np.abs(c.band(1, 0)) ** 2))
    assert total - coarse <= 1e-10 * total


def test_accepts_image_and_checks_shape():
    fam = windows(32, 32)
    c = fdct_forward(Image(np.full((32, 32), 3.0)), fam)
    assert c.band_counts == [1, 8, 16, 1]
    with pytest.raises(DimensionError):
        fdct_forward(np.zeros((32, 34)), fam)
    with pytest.raises(ValueError):
        fdct_forward(np.full((32, 32), np.nan), fam)


def test_inverse_structure_mismatch():
    fam = windows(32, 32)
    c = fdct_forward(np.ones((32, 32)), fam)
    broken = CurveletDecomposition(c.scales[:-1], 32, 32)
    with pytest.raises(DimensionError):
        fdct_inverse(broken, fam)
    c.scales[1].bands[0] = np.zeros((3, 3), complex)
    with pytest.raises(DimensionError):
        fdct_inverse(c, fam)


# --- magnitudes -------------------------------------------------------------

def test_magnitudes_order_and_values():
    c = CurveletDecomposition([ScaleBand(1, [np.array([[3 + 4j]])]),
                               ScaleBand(2, [np.array([[1, -2j]]), np.array([[0], [-1]])]),
                               ScaleBand(3, [np.zeros((1, 1))])], 2, 2)
    assert coefficient_magnitudes(c, 1).tolist() == [5.0]
    assert coefficient_magnitudes(c, 2).tolist() == [1.0, 2.0, 0.0, 1.0]
    with pytest.raises(ValueError):
        coefficient_magnitudes(c, 4)
    with pytest.raises(ValueError):
        coefficient_magnitudes(c, 0)


def test_magnitudes_sign_invariant_and_fixed_length(rng):
    fam = windows(64, 64)
    x = rng.normal(size=(64, 64))
    for j in range(1, 5):
        a = coefficient_magnitudes(fdct_forward(x, fam), j)
        b = coefficient_magnitudes(fdct_forward(-x, fam), j)
        np.testing.assert_array_equal(a, b)
        z = coefficient_magnitudes(fdct_forward(np.zeros((64, 64)), fam), j)
        assert len(z) == len(a) and not z.any()


# --- debug container --------------------------------------------------------

def test_dump_roundtrip(tmp_path, rng):
    fam = windows(32, 32)
    c = fdct_forward(rng.normal(size=(32, 32)), fam)
    path = tmp_path / "c.cvlt"
    write_decomposition(path, c)
    back = read_decomposition(path)
    assert back.band_counts == c.band_counts
    for sa, sb in zip(c.scales, back.scales):
        for a, b in zip(sa.bands, sb.bands):
            np.testing.assert_array_equal(a, b)
    raw = path.read_bytes()
    assert raw[:4] == b"CVLT"
    assert len(raw) == 20 + 4 * 4 + 8 * 26 + 16 * c.coefficient_count()


def test_deterministic():
    fam = windows(64, 64)
    x = np.random.default_rng(3).normal(size=(64, 64))
    a, b = fdct_forward(x, fam), fdct_forward(x, fam)
    for sa, sb in zip(a.scales, b.scales):
        for p, q in zip(sa.bands, sb.bands):
            np.testing.assert_array_equal(p, q)
