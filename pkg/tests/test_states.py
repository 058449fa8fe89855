import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmalab.csp import Coloring, ContractError, CspInstance
from qmalab.states import (
    ColoringState,
    OutcomeDistribution,
    apply_fourier,
    color_marginal_after_fourier,
    dft,
    dstr,
    from_coloring,
    large_amplitude_set,
    measure_distribution,
    pure_trace_distance,
    random_state,
    small_amplitude_set,
    statistical_distance,
    swap_reject_prob,
)

PROFILES = ["haar", "perturbed-honest", "sparse-support"]


def fft_dft_apply(x, axis=0):
    # independent oracle: F_n x = sqrt(n) * ifft(x) for the e^{+2 pi i jk/n} sign
    n = x.shape[axis]
    return np.sqrt(n) * np.fft.ifft(x, axis=axis)


def empty_instance(n, k):
    return CspInstance(n, k, ())


def point_state(n, k, v, j):
    a = np.zeros(n, complex)
    a[v] = 1
    b = np.zeros((n, k), complex)
    b[:, j] = 1
    return ColoringState(a, b)


@st.composite
def states(draw, n=None, k=None):
    n = n or draw(st.integers(1, 7))
    k = k or draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    profile = draw(st.sampled_from(PROFILES))
    eps = draw(st.floats(0, 2))
    return random_state(n, k, seed, profile, eps=eps)


@st.composite
def state_pairs(draw):
    n, k = draw(st.integers(1, 6)), draw(st.integers(1, 4))
    return draw(states(n, k)), draw(states(n, k))


class TestFromColoring:
    def test_two_vertices(self):
        s = from_coloring(empty_instance(2, 2), Coloring([0, 1]))
        assert np.allclose(s.vertex_amp, [2**-0.5, 2**-0.5])
        assert np.array_equal(s.color_amp, [[1, 0], [0, 1]])

    def test_single_vertex(self):
        s = from_coloring(empty_instance(1, 3), Coloring([2]))
        assert np.array_equal(s.vertex_amp, [1])

    def test_invalid_coloring(self):
        with pytest.raises(ContractError):
            from_coloring(empty_instance(2, 2), Coloring([0, 2]))


class TestDft:
    def test_n1(self):
        assert np.array_equal(dft(1), [[1]])

    def test_n2_maps_zero_to_uniform(self):
        assert np.allclose(dft(2) @ [1, 0], [2**-0.5, 2**-0.5])

    def test_n4_unitary(self):
        f = dft(4)
        assert np.abs(f @ f.conj().T - np.eye(4)).max() < 1e-12

    def test_zero_rejected(self):
        with pytest.raises(ContractError):
            dft(0)

    @pytest.mark.parametrize("n", range(1, 65))
    def test_unitarity_and_fft_oracle(self, n):
        f = dft(n)
        assert np.abs(f @ f.conj().T - np.eye(n)).max() < 1e-9
        x = np.random.default_rng(n).standard_normal(n) + 1j * np.random.default_rng(n + 99).standard_normal(n)
        assert abs(np.linalg.norm(f @ x) - np.linalg.norm(x)) < 1e-9
        assert np.abs(f @ x - fft_dft_apply(x)).max() < 1e-9


class TestApplyFourier:
    @given(states())
    def test_identity_is_joint(self, s):
        assert np.array_equal(apply_fourier(s, False, False), s.vertex_amp[:, None] * s.color_amp)

    @given(states(), st.booleans(), st.booleans())
    def test_norm_and_fft_oracle(self, s, fv, fc):
        out = apply_fourier(s, fv, fc)
        assert abs(np.linalg.norm(out) - 1) < 1e-9
        ref = s.joint()
        if fv:
            ref = fft_dft_apply(ref, 0)
        if fc:
            ref = fft_dft_apply(ref, 1)
        assert np.abs(out - ref).max() < 1e-9

    def test_honest_zero_color_mass_sits_on_vertex_zero(self):
        s = from_coloring(empty_instance(7, 3), Coloring([0, 2, 1, 1, 0, 2, 2]))
        out = apply_fourier(s, True, True)
        col0 = np.abs(out[:, 0]) ** 2
        assert abs(col0[0] - 1 / 3) < 1e-12 and col0[1:].max() < 1e-12


class TestMeasure:
    def test_honest(self):
        s = from_coloring(empty_instance(4, 3), Coloring([0, 1, 2, 1]))
        p = dstr(s).probs
        assert np.allclose(p[np.arange(4), [0, 1, 2, 1]], 0.25) and abs(p.sum() - 1) < 1e-12

    def test_point_mass(self):
        p = dstr(point_state(3, 2, 1, 1)).probs
        assert p[1, 1] == 1 and p.sum() == 1

    @given(states(), st.booleans(), st.booleans())
    def test_sums_to_one(self, s, fv, fc):
        assert abs(measure_distribution(apply_fourier(s, fv, fc)).probs.sum() - 1) < 1e-9

    def test_rejects_non_distribution(self):
        with pytest.raises(ContractError):
            OutcomeDistribution(np.array([[0.5, 0.6]]))


class TestSwapAndDistances:
    def test_equal_states(self):
        s = random_state(5, 3, 0)
        assert swap_reject_prob(s, s) < 1e-15 and pure_trace_distance(s, s) < 1e-7

    def test_orthogonal(self):
        s1, s2 = point_state(4, 2, 0, 0), point_state(4, 2, 3, 0)
        assert swap_reject_prob(s1, s2) == 0.5 and pure_trace_distance(s1, s2) == 1

    def test_half_overlap(self):
        a = np.array([1, 1]) / np.sqrt(2)
        b = np.ones((2, 1))
        s1 = ColoringState(np.array([1, 0]), b)
        s2 = ColoringState(a, b)
        assert abs(swap_reject_prob(s1, s2) - 0.25) < 1e-15

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            swap_reject_prob(random_state(3, 2, 0), random_state(4, 2, 0))

    @given(state_pairs())
    def test_trace_squared_is_twice_swap(self, pair):
        s1, s2 = pair
        assert abs(pure_trace_distance(s1, s2) ** 2 - 2 * swap_reject_prob(s1, s2)) < 1e-9

    def test_statistical_distance_examples(self):
        p = np.array([[1.0, 0.0]])
        assert statistical_distance(p, p) == 0
        assert statistical_distance(p, np.array([[0.0, 1.0]])) == 1
        assert statistical_distance(p, np.array([[0.5, 0.5]])) == 0.5
        with pytest.raises(ContractError):
            statistical_distance(p, np.ones((2, 1)) / 2)

    @given(state_pairs(), st.sampled_from([(False, False), (True, False), (False, True), (True, True)]))
    def test_measurement_contraction(self, pair, fourier):
        s1, s2 = pair
        d1 = measure_distribution(apply_fourier(s1, *fourier))
        d2 = measure_distribution(apply_fourier(s2, *fourier))
        assert statistical_distance(d1, d2) <= np.sqrt(2 * swap_reject_prob(s1, s2)) + 1e-9


class TestColorMarginal:
    def test_honest(self):
        n, k = 6, 4
        s = from_coloring(empty_instance(n, k), Coloring([0, 3, 1, 2, 2, 0]))
        p, gammas = color_marginal_after_fourier(s)
        assert np.allclose(p, 1 / k, atol=1e-12)
        for g in gammas:
            assert np.allclose(np.abs(g) ** 2, 1 / n, atol=1e-12)

    def test_undefined_marker(self):
        # uniform color register -> F_K image is |0>, so p_j = 0 for j > 0
        s = ColoringState(np.array([1.0]), np.ones((1, 3)) / np.sqrt(3))
        p, gammas = color_marginal_after_fourier(s)
        assert abs(p[0] - 1) < 1e-12 and gammas[1] is None and gammas[2] is None

    @given(states())
    def test_decomposition(self, s):
        p, gammas = color_marginal_after_fourier(s)
        assert abs(p.sum() - 1) < 1e-9
        probs = np.abs(apply_fourier(s, False, True)) ** 2
        for j in range(s.k):
            if gammas[j] is not None:
                assert np.abs(probs[:, j] - p[j] * np.abs(gammas[j]) ** 2).max() < 1e-9
            else:
                assert probs[:, j].sum() < 1e-13


class TestAmplitudeSets:
    def test_honest_thresholds(self):
        n = 5
        s = from_coloring(empty_instance(n, 2), Coloring([0] * n))
        assert small_amplitude_set(s, 1 / (2 * n)) == set()
        assert small_amplitude_set(s, 2 / n) == set(range(n))

    def test_point_vertex(self):
        n = 6
        s = point_state(n, 2, 0, 0)
        assert small_amplitude_set(s, 1 / (8 * n)) == set(range(1, n))
        assert large_amplitude_set(s, 1 / (8 * n)) == {0}

    def test_threshold_range(self):
        with pytest.raises(ContractError):
            small_amplitude_set(random_state(3, 2, 0), 0)


class TestRandomState:
    def test_zero_noise_is_honest(self):
        inst = empty_instance(5, 3)
        col = Coloring([0, 1, 2, 0, 1])
        s = random_state(5, 3, 0, "perturbed-honest", eps=0.0, base=col)
        h = from_coloring(inst, col)
        assert np.array_equal(s.vertex_amp, h.vertex_amp) and np.array_equal(s.color_amp, h.color_amp)

    @pytest.mark.parametrize("profile", PROFILES)
    def test_deterministic(self, profile):
        a, b = random_state(6, 3, 42, profile, eps=0.3), random_state(6, 3, 42, profile, eps=0.3)
        assert np.array_equal(a.vertex_amp, b.vertex_amp) and np.array_equal(a.color_amp, b.color_amp)

    def test_sparse_support_size(self):
        s = random_state(10, 2, 1, "sparse-support", support=3)
        assert np.count_nonzero(s.vertex_amp) == 3

    def test_unknown_profile(self):
        with pytest.raises(ContractError):
            random_state(3, 2, 0, "gaussian")

    def test_invalid_state_rejected(self):
        with pytest.raises(ContractError, match="vertex 1"):
            ColoringState(np.array([1, 0]), np.array([[1, 0], [1, 1]]))
