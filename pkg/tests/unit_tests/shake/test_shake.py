##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
import numpy as np
import pytest

from subband_shake import BandTooNarrowError, ParameterError, ShapeError
from subband_shake.autodiff import Phase, Tensor
from subband_shake.autodiff.container import load_tensor
from subband_shake.shake import (BlockCoefficients, Granularity, ShakeCoefficients, ShakeMode,
                                 make_shake_coefficients, parse_enum, residual_shake_block, sample_simplex,
                                 sample_simplex_rows, shake_aggregate, split_subbands)

from tests.unit_tests.autodiff.gradcheck import check_gradients, project


def branches(rng, n=2, dims=(3, 2, 4, 6), requires_grad=False):
    return [Tensor(rng.normal(size=dims), requires_grad=requires_grad) for _ in range(n)]


class TestSimplex():

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_on_simplex(self, n, rng):
        draws = sample_simplex_rows(100_000, n, rng)
        assert np.all((draws >= 0) & (draws <= 1))
        assert np.max(np.abs(draws.sum(axis=1) - 1.0)) <= 1e-9
        assert np.max(np.abs(draws.mean(axis=0) - 1.0 / n)) <= 0.01

    @pytest.mark.parametrize("n", [1, 5])
    def test_single_draw(self, n, rng):
        draw = sample_simplex(n, rng)
        assert draw.shape == (n, )
        assert abs(draw.sum() - 1.0) <= 1e-9

    def test_two_branches_uniform(self, rng):
        first = np.array([sample_simplex(2, rng)[0] for _ in range(20000)])
        assert abs(first.mean() - 0.5) < 0.01
        assert abs(first.var() - 1 / 12) < 0.005

    def test_no_coordinates(self, rng):
        with pytest.raises(ParameterError):
            sample_simplex(0, rng)


class TestCoefficients():

    @pytest.mark.parametrize("granularity, cells", [("batch", 1), ("sample", 3), ("frame", 9)])
    def test_cells(self, granularity, cells, rng):
        coeffs = make_shake_coefficients(granularity, 3, [2, 3, 4], 2, rng, Phase.TRAIN)
        assert coeffs.granularity is Granularity(granularity)
        assert coeffs.alphas.shape == (cells, 2)
        assert coeffs.betas.shape == (cells, 2)
        alphas, betas = coeffs.per_row(9)
        assert alphas.shape == (9, 2)

    def test_sample_rows_follow_lengths(self, rng):
        coeffs = make_shake_coefficients(Granularity.SAMPLE, 2, [2, 3], 2, rng, Phase.TRAIN)
        alphas, _ = coeffs.per_row(5)
        assert np.array_equal(alphas[:2], np.repeat(coeffs.alphas[:1], 2, axis=0))
        assert np.array_equal(alphas[2:], np.repeat(coeffs.alphas[1:], 3, axis=0))

    def test_betas_independent(self, rng):
        coeffs = make_shake_coefficients("frame", 1, 50, 2, rng, Phase.TRAIN)
        assert not np.allclose(coeffs.alphas, coeffs.betas)

    def test_eval_expectation(self, rng):
        coeffs = make_shake_coefficients("frame", 2, 5, 4, rng, Phase.EVAL)
        assert coeffs.cells == 1
        assert np.all(coeffs.alphas == 0.25)
        assert np.all(coeffs.betas == 0.25)

    def test_seeded(self):
        one = make_shake_coefficients("sample", 4, 3, 2, np.random.default_rng(5), Phase.TRAIN)
        two = make_shake_coefficients("sample", 4, 3, 2, np.random.default_rng(5), Phase.TRAIN)
        assert np.array_equal(one.alphas, two.alphas)
        assert np.array_equal(one.betas, two.betas)

    def test_rows_not_covered(self, rng):
        coeffs = make_shake_coefficients("frame", 2, 3, 2, rng, Phase.TRAIN)
        with pytest.raises(ShapeError):
            coeffs.per_row(7)

    @pytest.mark.parametrize("args", [(0, 3, 2), (2, [1], 2), (2, 3, 0), (1, 0, 2)])
    def test_bad_sizes(self, args, rng):
        batch, frames, n = args
        with pytest.raises(ParameterError):
            make_shake_coefficients("batch", batch, frames, n, rng, Phase.TRAIN)

    def test_unknown_granularity(self, rng):
        with pytest.raises(ParameterError, match="expected one of batch, sample, frame"):
            make_shake_coefficients("epoch", 1, 1, 2, rng, Phase.TRAIN)

    def test_block_draws_per_band(self, rng):
        coeffs = BlockCoefficients.draw(ShakeMode.BOTH, "batch", 2, 3, 2, rng, Phase.TRAIN)
        assert coeffs.full is None
        assert not np.array_equal(coeffs.upper.alphas, coeffs.lower.alphas)
        assert BlockCoefficients.draw(ShakeMode.NONE, "batch", 2, 3, 2, rng, Phase.TRAIN) == BlockCoefficients()

    def test_dump(self, tmp_path, rng):
        coeffs = make_shake_coefficients("sample", 3, 1, 2, rng, Phase.TRAIN)
        coeffs.dump(tmp_path / 'coeffs.sbtn')
        stored = load_tensor(tmp_path / 'coeffs.sbtn')
        assert np.array_equal(stored, np.stack([coeffs.alphas, coeffs.betas]))


class TestSplit():

    def test_even(self, rng):
        x = Tensor(rng.normal(size=(2, 3, 8)))
        pair = split_subbands(x)
        assert np.array_equal(pair.lower.data, x.data[..., :4])
        assert np.array_equal(pair.upper.data, x.data[..., 4:])
        assert np.array_equal(pair.merge().data, x.data)

    def test_odd_gives_upper_the_extra_bin(self, rng):
        pair = split_subbands(Tensor(rng.normal(size=(2, 257))))
        assert pair.lower.dims == (2, 128)
        assert pair.upper.dims == (2, 129)

    def test_other_axis(self, rng):
        x = Tensor(rng.normal(size=(6, 2)))
        pair = split_subbands(x, spectral_axis=0)
        assert pair.lower.dims == (3, 2)
        assert np.array_equal(pair.merge().data, x.data)

    def test_too_narrow(self):
        with pytest.raises(BandTooNarrowError):
            split_subbands(Tensor(np.zeros((3, 1))))


class TestAggregate():

    def test_forward_uses_alphas(self, rng):
        outs = branches(rng, n=3)
        coeffs = make_shake_coefficients("frame", 3, 1, 3, rng, Phase.TRAIN)
        out = shake_aggregate(outs, coeffs, Phase.TRAIN).data
        expect = sum(coeffs.alphas[:, i, None, None, None] * outs[i].data for i in range(3))
        assert np.allclose(out, expect)

    def test_backward_uses_betas(self, rng):
        outs = branches(rng, requires_grad=True)
        coeffs = make_shake_coefficients("sample", 3, 1, 2, rng, Phase.TRAIN)
        project(shake_aggregate(outs, coeffs, Phase.TRAIN), seed=4).backward()
        weights = np.random.default_rng(4).normal(size=outs[0].dims)
        for i, branch in enumerate(outs):
            assert np.allclose(branch.grad, coeffs.betas[:, i, None, None, None] * weights)

    def test_tied_coefficients_gradcheck(self, rng):
        outs = branches(rng, dims=(3, 1, 2, 2), requires_grad=True)
        coeffs = make_shake_coefficients("frame", 3, 1, 2, rng, Phase.TRAIN)
        coeffs.betas = coeffs.alphas.copy()
        check_gradients(lambda: project(shake_aggregate(outs, coeffs, Phase.TRAIN)), outs)

    def test_eval_is_mean(self, rng):
        outs = branches(rng, n=4)
        out = shake_aggregate(outs, None, Phase.EVAL).data
        assert np.allclose(out, np.mean([b.data for b in outs], axis=0))

    def test_train_needs_coefficients(self, rng):
        with pytest.raises(ParameterError):
            shake_aggregate(branches(rng), None, Phase.TRAIN)

    def test_branch_count(self, rng):
        coeffs = make_shake_coefficients("batch", 3, 1, 3, rng, Phase.TRAIN)
        with pytest.raises(ShapeError, match="3 branches given to 2"):
            shake_aggregate(branches(rng), coeffs, Phase.TRAIN)

    def test_branch_dims(self, rng):
        with pytest.raises(ShapeError, match="branch 1"):
            shake_aggregate([Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4)))], None, Phase.EVAL)


class TestResidualBlock():

    def test_none_is_plain_sum(self, rng):
        x, = branches(rng, n=1)
        outs = branches(rng)
        out = residual_shake_block(x, outs, "none", None, Phase.TRAIN)
        assert np.allclose(out.data, x.data + outs[0].data + outs[1].data)

    @pytest.mark.parametrize("mode", ["full", "upper", "lower", "both"])
    def test_eval_shaken_bands_are_mean(self, mode, rng):
        x, = branches(rng, n=1)
        outs = branches(rng)
        out = residual_shake_block(x, outs, mode, None, Phase.EVAL).data
        total = outs[0].data + outs[1].data
        expect = x.data + total
        if mode in ("full", "lower", "both"):
            expect[..., :3] = x.data[..., :3] + total[..., :3] / 2
        if mode in ("full", "upper", "both"):
            expect[..., 3:] = x.data[..., 3:] + total[..., 3:] / 2
        assert np.allclose(out, expect)

    def test_normalize_unshaken(self, rng):
        x, = branches(rng, n=1)
        outs = branches(rng)
        out = residual_shake_block(x, outs, "upper", None, Phase.EVAL, normalize_unshaken=True).data
        full = residual_shake_block(x, outs, "full", None, Phase.EVAL).data
        assert np.allclose(out, full)

    def test_both_with_tied_draws_is_full(self, rng):
        x, = branches(rng, n=1)
        outs = branches(rng)
        shared = make_shake_coefficients("frame", 3, 1, 2, rng, Phase.TRAIN)
        full = residual_shake_block(x, outs, "full", BlockCoefficients(full=shared), Phase.TRAIN)
        both = residual_shake_block(x, outs, "both", BlockCoefficients(upper=shared, lower=shared), Phase.TRAIN)
        assert np.array_equal(both.data, full.data)

    def test_train_mean_matches_eval(self, rng):
        # 1e4 copies of one frame, each shaken with its own draw
        copies = 10_000
        x, = branches(rng, n=1, dims=(1, 2, 3, 4))
        outs = branches(rng, dims=(1, 2, 3, 4))

        def tiled(t):
            return Tensor(np.repeat(t.data, copies, axis=0))

        coeffs = make_shake_coefficients("sample", copies, 1, 2, rng, Phase.TRAIN)
        shaken = residual_shake_block(tiled(x), [tiled(b) for b in outs], "full",
                                      BlockCoefficients(full=coeffs), Phase.TRAIN).data
        expect = residual_shake_block(x, outs, "full", None, Phase.EVAL).data[0]

        standard_error = shaken.std(axis=0, ddof=1) / np.sqrt(copies)
        assert np.all(np.abs(shaken.mean(axis=0) - expect) <= 3 * standard_error)

    def test_eval_full_is_shortcut_plus_mean(self, rng):
        x, = branches(rng, n=1)
        outs = branches(rng)
        out = residual_shake_block(x, outs, "full", None, Phase.EVAL).data
        assert np.max(np.abs(out - (x.data + (outs[0].data + outs[1].data) / 2))) <= 1e-12

    def test_betas_only_change_gradients(self, rng):
        x, = branches(rng, n=1)
        outs = branches(rng, requires_grad=True)
        coeffs = make_shake_coefficients("frame", 3, 1, 2, rng, Phase.TRAIN)

        def forward_backward():
            for branch in outs:
                branch.zero_grad()
            out = residual_shake_block(x, outs, "full", BlockCoefficients(full=coeffs), Phase.TRAIN)
            project(out).backward()
            return out.data, [b.grad.copy() for b in outs]

        first_out, first_grads = forward_backward()
        coeffs.betas = make_shake_coefficients("frame", 3, 1, 2, rng, Phase.TRAIN).betas
        second_out, second_grads = forward_backward()

        assert np.array_equal(first_out, second_out)
        for first, second in zip(first_grads, second_grads):
            assert not np.allclose(first, second)

    def test_mirror_symmetry(self, rng):
        x, = branches(rng, n=1)
        outs = branches(rng)
        coeffs = make_shake_coefficients("sample", 3, 1, 2, rng, Phase.TRAIN)
        upper = residual_shake_block(x, outs, "upper", BlockCoefficients(upper=coeffs), Phase.TRAIN)

        def flip(t):
            return Tensor(t.data[..., ::-1].copy())

        lower = residual_shake_block(flip(x), [flip(b) for b in outs], "lower",
                                     BlockCoefficients(lower=coeffs), Phase.TRAIN)
        assert np.allclose(lower.data[..., ::-1], upper.data)

    def test_upper_leaves_lower_band_unshaken(self, rng):
        x, = branches(rng, n=1)
        outs = branches(rng, requires_grad=True)
        coeffs = make_shake_coefficients("batch", 3, 1, 2, rng, Phase.TRAIN)
        out = residual_shake_block(x, outs, "upper", BlockCoefficients(upper=coeffs), Phase.TRAIN)
        project(out).backward()
        weights = np.random.default_rng(0).normal(size=x.dims)
        assert np.allclose(outs[0].grad[..., :3], weights[..., :3])
        assert np.allclose(outs[0].grad[..., 3:], coeffs.betas[0, 0] * weights[..., 3:])

    def test_spectral_axis(self, rng):
        x = Tensor(rng.normal(size=(2, 4, 3)))
        outs = [Tensor(rng.normal(size=(2, 4, 3))) for _ in range(2)]
        out = residual_shake_block(x, outs, "lower", None, Phase.EVAL, spectral_axis=1).data
        total = outs[0].data + outs[1].data
        assert np.allclose(out[:, :2], x.data[:, :2] + total[:, :2] / 2)
        assert np.allclose(out[:, 2:], x.data[:, 2:] + total[:, 2:])

    def test_subband_too_narrow(self, rng):
        x = Tensor(np.zeros((2, 1)))
        with pytest.raises(BandTooNarrowError):
            residual_shake_block(x, [x, x], "both", None, Phase.EVAL)

    def test_shortcut_dims(self, rng):
        with pytest.raises(ShapeError, match="shortcut"):
            residual_shake_block(Tensor(np.zeros((2, 2))), [Tensor(np.zeros((2, 3)))] * 2, "full", None, Phase.EVAL)


def test_parse_enum():
    assert parse_enum(ShakeMode, "BOTH") is ShakeMode.BOTH
    assert parse_enum(ShakeMode, ShakeMode.FULL) is ShakeMode.FULL
    with pytest.raises(ParameterError, match="none, full, upper, lower, both"):
        parse_enum(ShakeMode, "half")
