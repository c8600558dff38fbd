import numpy as np
import pytest
import torch
from torch import nn

from fedflow.data import GridSpec, InflowSeries
from fedflow.diffusion import (
    Conditioning,
    DenoiserConfig,
    FlowDenoiser,
    FlowScaler,
    build_conditioning,
    conditioning_tensors,
    diffusion_loss,
    diffusion_loss_terms,
    forward_sample,
    make_schedule,
    pool_summaries,
    read_conditioning_manifest,
    reverse_from,
    reverse_sample,
    summarize_client,
    write_conditioning_manifest,
)
from fedflow.errors import ConfigError
from fedflow.numerics import finite_diff_check, init_params
from fedflow.seeding import derive_rng

TUE_NOV_1 = 1477958400  # 2016-11-01 00:00:00 UTC


class TestSchedule:
    def test_single_step(self):
        sched = make_schedule(1, beta_min=0.1, beta_max=0.1)
        assert sched.alpha_bar(1) == pytest.approx(0.9)

    def test_two_step_product(self):
        sched = make_schedule(2, beta_min=0.1, beta_max=0.2)
        assert sched.alpha_bar(2) == pytest.approx(0.72)

    def test_alpha_bar_strictly_decreasing(self):
        sched = make_schedule(50, 1e-4, 0.05)
        assert np.all(np.diff(sched.alpha_bars) < 0)

    def test_alpha_bar_is_running_product(self):
        sched = make_schedule(64, 1e-4, 0.02)
        running = 1.0
        for f in range(1, 65):
            running *= sched.alpha(f)
            assert sched.alpha_bar(f) == pytest.approx(running, rel=1e-14)

    def test_invalid_args(self):
        with pytest.raises(ConfigError):
            make_schedule(0)
        with pytest.raises(ConfigError):
            make_schedule(10, beta_min=0.5, beta_max=0.2)
        with pytest.raises(ConfigError):
            make_schedule(10, beta_min=0.0)


class TestForwardSample:
    def test_identity_limit(self):
        sched = make_schedule(1, beta_min=1e-12, beta_max=1e-12)
        x0 = np.linspace(-1, 1, 16)
        noise = np.random.default_rng(0).standard_normal(16)
        assert np.allclose(forward_sample(x0, 1, noise, sched), x0, atol=1e-5)

    def test_pure_noise_limit(self):
        sched = make_schedule(60, beta_min=0.5, beta_max=0.9)
        x0 = np.linspace(-1, 1, 16)
        noise = np.random.default_rng(1).standard_normal(16)
        assert np.allclose(forward_sample(x0, 60, noise, sched), noise, atol=1e-6)

    def test_monte_carlo_statistics(self):
        sched = make_schedule(100)
        rng = np.random.default_rng(2)
        x0 = rng.uniform(-1, 1, 8)
        f = 40
        draws = 10_000
        noise = rng.standard_normal((draws, 8))
        samples = forward_sample(np.tile(x0, (draws, 1)), f, noise, sched)
        a_bar = sched.alpha_bar(f)
        mean_se = np.sqrt((1 - a_bar) / draws)
        assert np.all(np.abs(samples.mean(0) - np.sqrt(a_bar) * x0) < 4 * mean_se)
        var_se = (1 - a_bar) * np.sqrt(2.0 / (draws - 1))
        assert np.all(np.abs(samples.var(0) - (1 - a_bar)) < 4 * var_se)

    def test_step_bounds(self):
        sched = make_schedule(10)
        with pytest.raises(ConfigError):
            forward_sample(np.zeros(4), 11, np.zeros(4), sched)


def oracle_denoiser(x0, schedule):
    """Stub that reports the exact noise consistent with x0 and the step."""

    def fn(x, f, conds):
        a_bar = schedule.alpha_bar(f)
        return (x - np.sqrt(a_bar) * x0) / np.sqrt(1.0 - a_bar)

    return fn


class TestReverseSampling:
    def test_single_step_algebraic_inversion(self):
        sched = make_schedule(1, beta_min=0.2, beta_max=0.2)
        rng = np.random.default_rng(3)
        x0 = rng.uniform(-1, 1, (2, 9))
        noise = rng.standard_normal((2, 9))
        x1 = forward_sample(x0, 1, noise, sched)
        recovered = reverse_from(oracle_denoiser(x0, sched), x1, 1, [], sched, deterministic=True)
        assert np.allclose(recovered, x0, atol=1e-12)

    @pytest.mark.parametrize("n_steps", [2, 4, 8])
    def test_inverts_forward_for_every_start_step(self, n_steps):
        sched = make_schedule(n_steps, beta_min=0.05, beta_max=0.3)
        rng = np.random.default_rng(4)
        x0 = rng.uniform(-1, 1, (3, 6))
        for f in range(1, n_steps + 1):
            noise = rng.standard_normal((3, 6))
            x_f = forward_sample(x0, f, noise, sched)
            recovered = reverse_from(
                oracle_denoiser(x0, sched), x_f, f, [], sched, deterministic=True
            )
            assert np.allclose(recovered, x0, atol=1e-5), f

    def test_fixed_seed_reproducible(self):
        sched = make_schedule(6, beta_min=0.05, beta_max=0.2)
        scaler = FlowScaler(0.0, 10.0)
        conds = [Conditioning(0, 0, 5.0, 0)] * 4

        def noisy_denoiser(x, f, conds):
            return 0.1 * x

        a = reverse_sample(noisy_denoiser, conds, sched, derive_rng(7), scaler, n_cells=9)
        b = reverse_sample(noisy_denoiser, conds, sched, derive_rng(7), scaler, n_cells=9)
        assert np.array_equal(a, b)

    def test_output_nonnegative_grid_shaped(self):
        sched = make_schedule(5, beta_min=0.05, beta_max=0.2)
        scaler = FlowScaler(0.0, 4.0)
        conds = [Conditioning(1, 2, 3.0, 4)] * 7
        rng = derive_rng(8)

        def wild_denoiser(x, f, conds):
            return np.sin(x) * 3.0

        flows = reverse_sample(wild_denoiser, conds, sched, rng, scaler, n_cells=25)
        assert flows.shape == (7, 25)
        assert np.all(flows >= 0)

    def test_per_frame_streams_match_batched(self):
        # A list of per-frame generators must give the same frames regardless
        # of how many frames are sampled together.
        sched = make_schedule(4, beta_min=0.05, beta_max=0.2)
        scaler = FlowScaler(0.0, 2.0)
        cond = Conditioning(0, 0, 1.0, 0)

        def denoiser(x, f, conds):
            return 0.2 * x

        both = reverse_sample(denoiser, [cond, cond], sched, [derive_rng(1), derive_rng(2)], scaler, 4)
        solo = reverse_sample(denoiser, [cond], sched, [derive_rng(2)], scaler, 4)
        assert np.allclose(both[1], solo[0], atol=1e-12)


class _StubModule(nn.Module):
    def __init__(self, fn, n_cells):
        super().__init__()
        self.fn = fn
        self.n_cells = n_cells
        self.dummy = nn.Parameter(torch.zeros(1, dtype=torch.float64))

    def forward(self, x, f, cond):
        return self.fn(x, f, cond)


class TestDiffusionLoss:
    def test_oracle_stub_gives_zero_loss(self):
        sched = make_schedule(12, beta_min=0.01, beta_max=0.2)
        rng = np.random.default_rng(5)
        x0 = torch.from_numpy(rng.uniform(-1, 1, (6, 8)))
        noise = torch.from_numpy(rng.standard_normal((6, 8)))
        f = torch.from_numpy(rng.integers(1, 13, 6))
        a_bar = torch.from_numpy(sched.alpha_bars)[f - 1][:, None]

        def exact(x, step, cond):
            return (x - torch.sqrt(a_bar) * x0) / torch.sqrt(1.0 - a_bar)

        loss = diffusion_loss_terms(_StubModule(exact, 8), x0, f, noise, {}, sched)
        assert loss.item() < 1e-20

    def test_zero_stub_gives_unit_loss(self):
        sched = make_schedule(12, beta_min=0.01, beta_max=0.2)
        rng = np.random.default_rng(6)
        batch, cells = 64, 16
        x0 = torch.from_numpy(rng.uniform(-1, 1, (batch, cells)))
        noise = torch.from_numpy(rng.standard_normal((batch, cells)))
        f = torch.from_numpy(rng.integers(1, 13, batch))

        def zero(x, step, cond):
            return torch.zeros_like(x)

        loss = diffusion_loss_terms(_StubModule(zero, cells), x0, f, noise, {}, sched)
        # chi-square expectation: mean eps^2 = 1, sd = sqrt(2 / (B*N))
        assert abs(loss.item() - 1.0) < 4 * np.sqrt(2.0 / (batch * cells))

    def test_loss_uses_uniform_steps_and_unit_noise(self):
        sched = make_schedule(500)
        cells = 8
        module = _StubModule(lambda x, f, cond: torch.zeros_like(x), cells)
        x0 = np.zeros((2048, cells))
        conds = [Conditioning(0, 0, 1.0, 0)] * 2048
        loss = diffusion_loss(module, x0, conds, sched, derive_rng(9), flow_scale=1.0)
        # with x0 = 0, x_f = sqrt(1 - a_bar) * eps and loss = mean(eps^2) ~ 1
        assert abs(loss.item() - 1.0) < 0.05

    def test_gradient_check_tiny_denoiser(self):
        grid_cells = 4
        sched = make_schedule(6, beta_min=0.05, beta_max=0.2)
        cfg = DenoiserConfig(widths=(4,), blocks_per_level=1, mid_attention=True, emb_dim=6, deep_hidden=4)
        for seed in range(3):
            module = FlowDenoiser(grid_cells, cfg).double()
            pv = init_params(module, seed)
            rng = np.random.default_rng(seed + 10)
            pv = pv.with_values(pv.values + rng.uniform(-0.05, 0.05, pv.size))
            x0 = torch.from_numpy(rng.uniform(-1, 1, (2, grid_cells)))
            noise = torch.from_numpy(rng.standard_normal((2, grid_cells)))
            f = torch.from_numpy(rng.integers(1, 7, 2))
            conds = [Conditioning(3, 1, 2.0, 1), Conditioning(40, 6, 1.0, 3)]
            cond = conditioning_tensors(conds, grid_cells, 2.0, torch.float64)

            def loss_fn(module, batch):
                return diffusion_loss_terms(module, x0, f, noise, cond, sched)

            report = finite_diff_check(loss_fn, module, pv, None, tolerance=1e-4)
            assert report.passed, report.per_segment


class TestBuildConditioning:
    def test_monday_midnight_zero_frame(self):
        monday = TUE_NOV_1 + 6 * 86400
        cond = build_conditioning(monday, np.zeros(100))
        assert (cond.interval_of_day, cond.day_of_week, cond.max_flow, cond.argmax_region) == (0, 0, 0.0, 0)

    def test_unique_max_cell(self):
        frame = np.zeros(100)
        frame[42] = 9.0
        assert build_conditioning(TUE_NOV_1, frame).argmax_region == 42

    def test_wednesday_1330(self):
        wednesday_1330 = TUE_NOV_1 + 86400 + int(13.5 * 3600)
        cond = build_conditioning(wednesday_1330, np.zeros(4))
        assert cond.interval_of_day == 27
        assert cond.day_of_week == 2

    def test_tie_breaks_to_lowest_index(self):
        frame = np.zeros(10)
        frame[3] = frame[7] = 5.0
        assert build_conditioning(TUE_NOV_1, frame).argmax_region == 3

    def test_utc_offset_shifts_interval(self):
        cond = build_conditioning(TUE_NOV_1, np.zeros(4), utc_offset=8 * 3600)
        assert cond.interval_of_day == 16


class TestDenoiserModule:
    def test_output_shape(self):
        module = FlowDenoiser(16, DenoiserConfig(widths=(4, 8), blocks_per_level=1, emb_dim=8))
        init_params(module, 0)
        x = torch.randn(5, 16)
        cond = conditioning_tensors([Conditioning(0, 0, 1.0, 0)] * 5, 16, 1.0)
        out = module(x, torch.full((5,), 3, dtype=torch.long), cond)
        assert out.shape == (5, 16)

    def test_zero_initialized_output(self):
        module = FlowDenoiser(8, DenoiserConfig(widths=(4,), blocks_per_level=1, emb_dim=8))
        init_params(module, 1)
        x = torch.randn(3, 8)
        cond = conditioning_tensors([Conditioning(5, 2, 1.0, 4)] * 3, 8, 2.0)
        out = module(x, torch.ones(3, dtype=torch.long), cond)
        assert torch.equal(out, torch.zeros(3, 8))

    def test_conditioning_is_wired(self):
        module = FlowDenoiser(8, DenoiserConfig(widths=(4,), blocks_per_level=1, emb_dim=8))
        pv = init_params(module, 2)
        pv = pv.with_values(pv.values + np.random.default_rng(0).uniform(-0.1, 0.1, pv.size))
        pv.load_into(module)
        x = torch.randn(2, 8)
        f = torch.ones(2, dtype=torch.long)
        out_a = module(x, f, conditioning_tensors([Conditioning(10, 1, 1.0, 2)] * 2, 8, 2.0))
        out_b = module(x, f, conditioning_tensors([Conditioning(10, 5, 1.0, 2)] * 2, 8, 2.0))
        assert (out_a - out_b).abs().max().item() > 0

    def test_length_divisibility_enforced(self):
        with pytest.raises(ConfigError):
            FlowDenoiser(9, DenoiserConfig(widths=(4, 8)))


class TestFlowScaler:
    def test_round_trip(self):
        scaler = FlowScaler.fit(np.array([[0.0, 8.0], [2.0, 4.0]]))
        flows = np.array([[0.0, 8.0], [2.0, 4.0]])
        model = scaler.to_model(flows)
        assert model.min() == -1.0 and model.max() == 1.0
        assert np.allclose(scaler.to_flows(model), flows)

    def test_clamps_at_zero(self):
        scaler = FlowScaler(0.0, 10.0)
        assert np.all(scaler.to_flows(np.array([-5.0, -1.2])) == 0.0)

    def test_degenerate_range_widened(self):
        scaler = FlowScaler.fit(np.zeros((3, 3)))
        assert scaler.high > scaler.low


class TestConditioningTable:
    def _series(self, seed, n_frames=96):
        grid = GridSpec((0, 1), (0, 1), 2, 2)
        rng = np.random.default_rng(seed)
        frames = rng.poisson(3.0, (n_frames, 4)).astype(np.float32)
        return InflowSeries(grid, 1800, TUE_NOV_1, frames)

    def test_pooled_lookup(self):
        series_a, series_b = self._series(0), self._series(1)
        table = pool_summaries(
            [summarize_client(series_a), summarize_client(series_b)], intervals_per_day=48
        )
        cond = table.lookup(TUE_NOV_1, 1800)
        assert cond.interval_of_day == 0 and cond.day_of_week == 1
        per_slot = [
            build_conditioning(s.frame_timestamp(0), s.frames[0]) for s in (series_a, series_b)
        ]
        assert cond.max_flow == pytest.approx(np.mean([c.max_flow for c in per_slot]))

    def test_unseen_slots_borrow_interval_statistics(self):
        table = pool_summaries([summarize_client(self._series(2, n_frames=48))], 48)
        # day 6 was never observed; it borrows the interval profile
        cond = table.lookup(TUE_NOV_1 + 4 * 86400, 1800)
        assert cond.day_of_week == 5
        assert cond.max_flow > 0

    def test_manifest_round_trip(self, tmp_path):
        timestamps = [TUE_NOV_1, TUE_NOV_1 + 1800]
        conds = [Conditioning(0, 1, 4.0, 2), Conditioning(1, 1, 3.0, 1)]
        path = tmp_path / "conditioning.csv"
        write_conditioning_manifest(path, timestamps, conds)
        ts, back = read_conditioning_manifest(path)
        assert ts == timestamps and back == conds
