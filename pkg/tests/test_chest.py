"""Channel estimation tests: SI-pilot LS, smoothing, orthogonal LS, interpolation."""

import numpy as np
import pytest

from siplink.channel import (
    ChannelProfile,
    CorrelationModel,
    apply_channel,
    complex_noise,
    generate_channel,
)
from siplink.chest import (
    ChannelEstimate,
    EstimateProvenance,
    WindowSchedule,
    interpolate,
    ls_estimate_orthogonal,
    ls_estimate_sip,
    smooth,
)
from siplink.waveform import (
    Constellation,
    OrthDmrsConfig,
    ReRole,
    SiDmrsConfig,
    build_si_dmrs,
    fill_data_grid,
    modulate,
    orthogonal_pilot_grid,
)


def brute_force_window_mean(values, w_f, w_t):
    """Direct summation oracle for the sliding-window mean."""
    n_f, n_t = values.shape[:2]
    out = np.zeros_like(values)
    for i in range(n_f):
        for j in range(n_t):
            f_lo, f_hi = i - w_f // 2 + 1, i + w_f // 2
            t_lo, t_hi = j - w_t // 2 + 1, j + w_t // 2
            acc = 0.0
            count = 0
            for fi in range(max(f_lo, 0), min(f_hi, n_f - 1) + 1):
                for ti in range(max(t_lo, 0), min(t_hi, n_t - 1) + 1):
                    acc = acc + values[fi, ti]
                    count += 1
            out[i, j] = acc / count
    return out


class TestLsSip:
    def test_pure_pilot_scalar(self):
        y = np.full((1, 1, 1), 2.0 + 0j)
        p = np.ones((1, 1, 1))
        est = ls_estimate_sip(y, p, 1.0)
        assert est.values[0, 0, 0, 0] == pytest.approx(2.0)
        assert est.provenance is EstimateProvenance.RAW_LS

    def test_quarter_ratio_closed_form(self):
        d = (1 + 1j) / np.sqrt(2)
        e = 0.25
        y = np.full((1, 1, 1), np.sqrt(1 - e) * d + np.sqrt(e) * 1.0)
        est = ls_estimate_sip(y, np.ones((1, 1, 1)), e)
        expected = 2.224744871391589 + 1.224744871391589j
        assert est.values[0, 0, 0, 0] == pytest.approx(expected, abs=1e-12)

    def test_zero_ratio_error(self):
        with pytest.raises(ValueError, match="power_ratio"):
            ls_estimate_sip(np.zeros((1, 1, 1)), np.ones((1, 1, 1)), 0.0)

    def test_decomposition_against_expansion(self):
        """Noiseless single-layer LS equals H + H*sqrt((1-e)/e)*d*conj(p)."""
        rng = np.random.default_rng(7)
        c = Constellation.qam(16)
        role = np.full((12, 4), ReRole.SUPERIMPOSED, dtype=np.uint8)
        for trial in range(200):
            e = rng.uniform(0.05, 0.95)
            h = rng.standard_normal((12, 4, 3, 1)) + 1j * rng.standard_normal((12, 4, 3, 1))
            bits = rng.integers(0, 2, 12 * 4 * 4)
            d = fill_data_grid(modulate(bits, c), role, 1)
            p = build_si_dmrs(SiDmrsConfig(power_ratio=e, scrambling_seed=trial), 12, 4, 1)
            x = np.sqrt(1 - e) * d + np.sqrt(e) * p
            y = apply_channel([x], [h], 0.0)
            est = ls_estimate_sip(y, p, e)
            expansion = h + h * (np.sqrt((1 - e) / e) * d * np.conj(p))[:, :, None, :]
            assert np.abs(est.values - expansion).max() < 1e-10


class TestSmooth:
    def test_constant_field(self):
        values = np.full((16, 8, 2, 1), 3.0 - 1.0j)
        est = ChannelEstimate(values=values, provenance=EstimateProvenance.RAW_LS)
        for window in ((2, 2), (6, 4), (32, 16)):
            sm = smooth(est, window)
            assert np.allclose(sm.values, 3.0 - 1.0j, atol=1e-12)
            assert sm.provenance is EstimateProvenance.SMOOTHED

    def test_interior_window_2x2(self):
        rng = np.random.default_rng(1)
        values = rng.standard_normal((8, 6, 1, 1)) + 1j * rng.standard_normal((8, 6, 1, 1))
        est = ChannelEstimate(values=values, provenance=EstimateProvenance.RAW_LS)
        sm = smooth(est, (2, 2))
        # interior RE (3, 3): window rows {3,4} x cols {3,4}
        manual = values[3:5, 3:5, 0, 0].mean()
        assert sm.values[3, 3, 0, 0] == pytest.approx(manual, abs=1e-12)

    def test_matches_brute_force_everywhere(self):
        rng = np.random.default_rng(2)
        values = rng.standard_normal((9, 7)) + 1j * rng.standard_normal((9, 7))
        est = ChannelEstimate(
            values=values[:, :, None, None], provenance=EstimateProvenance.RAW_LS
        )
        for window in ((2, 2), (4, 6), (8, 2)):
            sm = smooth(est, window)
            oracle = brute_force_window_mean(values, *window)
            assert np.abs(sm.values[:, :, 0, 0] - oracle).max() < 1e-12

    def test_full_clipping_gives_global_mean(self):
        rng = np.random.default_rng(3)
        values = rng.standard_normal((6, 4, 1, 1)) + 0j
        est = ChannelEstimate(values=values, provenance=EstimateProvenance.RAW_LS)
        sm = smooth(est, (12, 8))
        assert np.allclose(sm.values, values.mean(), atol=1e-12)

    def test_linearity_exact(self):
        # dyadic inputs and a (2,2) window (all clipped counts are powers of
        # two) keep every float op exact, so equality is bitwise
        rng = np.random.default_rng(4)
        x = rng.integers(-8, 8, (8, 6, 1, 1)).astype(complex)
        y = rng.integers(-8, 8, (8, 6, 1, 1)).astype(complex)
        ex = ChannelEstimate(values=x, provenance=EstimateProvenance.RAW_LS)
        ey = ChannelEstimate(values=y, provenance=EstimateProvenance.RAW_LS)
        exy = ChannelEstimate(values=2.0 * x + 0.5 * y, provenance=EstimateProvenance.RAW_LS)
        lhs = smooth(exy, (2, 2)).values
        rhs = 2.0 * smooth(ex, (2, 2)).values + 0.5 * smooth(ey, (2, 2)).values
        assert np.array_equal(lhs, rhs)

    def test_linearity_general_window(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((8, 6, 1, 1)) + 1j * rng.standard_normal((8, 6, 1, 1))
        y = rng.standard_normal((8, 6, 1, 1)) + 1j * rng.standard_normal((8, 6, 1, 1))
        ex = ChannelEstimate(values=x, provenance=EstimateProvenance.RAW_LS)
        ey = ChannelEstimate(values=y, provenance=EstimateProvenance.RAW_LS)
        exy = ChannelEstimate(values=1.7 * x - 0.3j * y, provenance=EstimateProvenance.RAW_LS)
        lhs = smooth(exy, (4, 6)).values
        rhs = 1.7 * smooth(ex, (4, 6)).values - 0.3j * smooth(ey, (4, 6)).values
        assert np.abs(lhs - rhs).max() < 1e-13

    def test_variance_law(self):
        """Estimator MSE at full-window REs scales as 1/(W_f*W_t) within 20%."""
        e = 0.14
        w_f, w_t = 12, 14
        c = Constellation.qam(4)
        prof = ChannelProfile(num_taps=1, correlation_model=CorrelationModel.BLOCK_FADING)
        role = np.full((72, 14), ReRole.SUPERIMPOSED, dtype=np.uint8)
        rng = np.random.default_rng(5)
        raw_mse, sm_mse = [], []
        for drop in range(300):
            h = generate_channel(prof, 72, 14, 2, 1, seed=(1, drop))
            d = fill_data_grid(modulate(rng.integers(0, 2, 72 * 14 * 2), c), role, 1)
            p = build_si_dmrs(SiDmrsConfig(power_ratio=e, scrambling_seed=drop), 72, 14, 1)
            y = apply_channel([np.sqrt(1 - e) * d + np.sqrt(e) * p], [h], 0.0)
            est = ls_estimate_sip(y, p, e)
            raw_mse.append(np.mean(np.abs(est.values - h) ** 2))
            sm = smooth(est, (w_f, w_t))
            # full, unclipped windows: subcarriers 5..65, symbol 6
            sm_mse.append(np.mean(np.abs((sm.values - h)[5:66, 6:7]) ** 2))
        ratio = np.mean(sm_mse) / (np.mean(raw_mse) / (w_f * w_t))
        assert 0.8 <= ratio <= 1.2


class TestWindowSchedule:
    def test_length_is_iteration_count(self):
        sched = WindowSchedule(((12, 14), (6, 14)))
        assert len(sched) == 2

    def test_rejects_empty_or_odd(self):
        with pytest.raises(ValueError):
            WindowSchedule(())
        with pytest.raises(ValueError):
            WindowSchedule(((3, 4),))

    def test_rejects_oversized(self):
        sched = WindowSchedule(((200, 4),))
        with pytest.raises(ValueError, match="too large"):
            sched.validate_for_grid(72, 14)


class TestOrthogonalLs:
    def test_flat_noiseless_exact(self):
        cfg = OrthDmrsConfig(port_assignment=(0,))
        h = np.full((72, 14, 2, 1), 0.7 - 0.3j)
        p, _ = orthogonal_pilot_grid(cfg, 72, 14)
        y = np.einsum("ftrs,fts->ftr", h, p)
        est = ls_estimate_orthogonal(y, cfg)
        sc = est.sample_subcarriers[0]
        sampled = est.values[:, :, :, 0][np.ix_(sc, est.sample_symbols)]
        assert np.allclose(sampled, 0.7 - 0.3j, atol=1e-12)

    def test_two_ports_separate(self):
        """FD-OCC de-spreading removes the other port's flat channel exactly."""
        cfg = OrthDmrsConfig(port_assignment=(0, 1))
        h = np.zeros((72, 14, 2, 2), dtype=complex)
        h[:, :, :, 0] = 1.0 + 0.5j
        h[:, :, :, 1] = -0.4 + 2.0j
        p, _ = orthogonal_pilot_grid(cfg, 72, 14)
        y = np.einsum("ftrs,fts->ftr", h, p)
        est = ls_estimate_orthogonal(y, cfg)
        for layer, expected in ((0, 1.0 + 0.5j), (1, -0.4 + 2.0j)):
            sc = est.sample_subcarriers[layer]
            sampled = est.values[:, :, :, layer][np.ix_(sc, est.sample_symbols)]
            assert np.abs(sampled - expected).max() < 1e-12

    def test_noise_variance_halved_by_pair_mean(self):
        """Pair-averaged de-spread has error variance sigma^2/2 (documented
        deviation from the unaveraged per-RE form)."""
        cfg = OrthDmrsConfig(port_assignment=(0,))
        sigma2 = 0.3
        p, _ = orthogonal_pilot_grid(cfg, 72, 14)
        h = np.ones((72, 14, 2, 1), dtype=complex)
        errs = []
        for t in range(300):
            y = np.einsum("ftrs,fts->ftr", h, p) + np.sqrt(sigma2) * complex_noise(
                (72, 14, 2), seed=t
            )
            est = ls_estimate_orthogonal(y, cfg)
            sc = est.sample_subcarriers[0]
            sampled = est.values[:, :, :, 0][np.ix_(sc, est.sample_symbols)]
            errs.append(np.mean(np.abs(sampled - 1.0) ** 2))
        assert np.mean(errs) == pytest.approx(sigma2 / 2, rel=0.05)

    def test_unbiased(self):
        """Mean estimation error over noisy trials is within 3 SE of zero."""
        cfg = OrthDmrsConfig(port_assignment=(0,))
        sigma2 = 0.5
        p, _ = orthogonal_pilot_grid(cfg, 72, 14)
        h = np.full((72, 14, 2, 1), 0.3 + 1.1j)
        errors = []
        for t in range(100):
            y = np.einsum("ftrs,fts->ftr", h, p) + np.sqrt(sigma2) * complex_noise(
                (72, 14, 2), seed=(9, t)
            )
            est = ls_estimate_orthogonal(y, cfg)
            sc = est.sample_subcarriers[0]
            errors.append(
                (est.values[:, :, :, 0][np.ix_(sc, est.sample_symbols)] - h[0, 0, 0, 0]).ravel()
            )
        errors = np.concatenate(errors)
        se = np.sqrt(sigma2 / 2 / errors.size)
        assert abs(errors.mean()) < 3 * se


class TestInterpolate:
    def test_flat_channel_exact_everywhere(self):
        cfg = OrthDmrsConfig(port_assignment=(0,))
        h = np.full((72, 14, 2, 1), 0.7 - 0.3j)
        p, _ = orthogonal_pilot_grid(cfg, 72, 14)
        y = np.einsum("ftrs,fts->ftr", h, p)
        full = interpolate(ls_estimate_orthogonal(y, cfg))
        assert full.provenance is EstimateProvenance.INTERPOLATED
        assert np.abs(full.values - 0.7 + 0.3j).max() < 1e-12

    def test_time_linear_interpolation(self):
        """Values 0 at symbol 2 and 9 at symbol 11 interpolate to 3 at symbol 5."""
        values = np.zeros((4, 14, 1, 1), dtype=complex)
        sc = np.arange(4)
        values[:, 11] = 9.0
        est = ChannelEstimate(
            values=values,
            provenance=EstimateProvenance.RAW_LS,
            sample_subcarriers=[sc],
            sample_symbols=np.array([2, 11]),
        )
        full = interpolate(est, w_f_interp=1)
        assert np.allclose(full.values[:, 5], 3.0, atol=1e-12)
        assert np.allclose(full.values[:, 0], 0.0, atol=1e-12)  # hold before first
        assert np.allclose(full.values[:, 13], 9.0, atol=1e-12)  # hold after last

    def test_comb_fill_flat(self):
        """Even-comb estimates of a flat channel fill odd subcarriers too."""
        cfg = OrthDmrsConfig(port_assignment=(0,))
        h = np.full((72, 14, 1, 1), 2.0 + 1.0j)
        p, _ = orthogonal_pilot_grid(cfg, 72, 14)
        y = np.einsum("ftrs,fts->ftr", h, p)
        full = interpolate(ls_estimate_orthogonal(y, cfg), w_f_interp=4)
        odd = np.arange(1, 72, 2)
        assert np.abs(full.values[odd] - (2.0 + 1.0j)).max() < 1e-12

    def test_requires_samples(self):
        est = ChannelEstimate(
            values=np.zeros((4, 4, 1, 1), dtype=complex),
            provenance=EstimateProvenance.RAW_LS,
        )
        with pytest.raises(ValueError, match="sampled at DMRS"):
            interpolate(est)


def test_estimate_rejects_non_finite():
    bad = np.full((2, 2, 1, 1), np.nan, dtype=complex)
    with pytest.raises(ValueError, match="non-finite"):
        ChannelEstimate(values=bad, provenance=EstimateProvenance.RAW_LS)
