import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyntex.avdl import AvdlModel, AvdlParams
from dyntex.dynamics import (
    SynthesisSpec,
    append_metrics_csv,
    evaluate,
    occlusion_hit_rate,
    reconstruct,
    synthesize,
    synthesize_states,
)
from dyntex.elastic_net import ElasticNetParams
from dyntex.errors import ConfigError, DataError
from dyntex.lds import fit_lds
from dyntex.synthetic import planted_lds, planted_sparse_lds
from dyntex.video_io import FrameSequence, GaussianNoise, Occlusion, corrupt
from oracles import hit_rate_bruteforce, scalar_prox


def _avdl(D, A, l1=0.1):
    return AvdlModel(D, A, AvdlParams(ElasticNetParams(l1, l1 / 20)), [], None, None)


def test_lasso_zero_equals_plain(rng):
    A = 0.3 * rng.standard_normal((5, 5))
    x0 = rng.standard_normal(5)
    plain = synthesize_states(A, SynthesisSpec(20, x0))
    lasso = synthesize_states(A, SynthesisSpec(20, x0, "lasso", 0.0))
    np.testing.assert_array_equal(plain, lasso)


def test_identity_transition_is_a_fixed_point(rng):
    x0 = rng.uniform(size=3)
    D = np.eye(4)[:, :3]
    seq = synthesize(np.eye(3), D, SynthesisSpec(6, x0), 2, 2)
    for i in range(6):
        np.testing.assert_array_equal(seq.data[:, i], D @ x0)


def test_lasso_step_matches_scalar_prox(rng):
    for _ in range(200):
        k = int(rng.integers(1, 7))
        A = rng.standard_normal((k, k))
        x0 = rng.standard_normal(k)
        lam = float(rng.uniform(0, 2))
        states = synthesize_states(A, SynthesisSpec(2, x0, "lasso", lam))
        z = A @ x0
        np.testing.assert_allclose(states[:, 1], [scalar_prox(v, lam) for v in z], atol=1e-12, rtol=0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0, 1))
def test_lasso_never_denser_than_plain_step(seed, lam):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 6))
    x = rng.standard_normal(6) * (rng.uniform(size=6) > 0.4)
    plain = synthesize_states(A, SynthesisSpec(2, x))[:, 1]
    lasso = synthesize_states(A, SynthesisSpec(2, x, "lasso", lam))[:, 1]
    assert np.count_nonzero(lasso) <= np.count_nonzero(plain)


def test_stable_decays_and_unstable_diverges():
    x0 = np.array([1.0, 1.0])
    decay = synthesize_states(np.diag([0.9, 0.5]), SynthesisSpec(200, x0))
    assert np.linalg.norm(decay[:, -1]) < 1e-8
    grow = synthesize_states(np.diag([1.05, 0.5]), SynthesisSpec(200, x0))
    assert np.linalg.norm(grow[:, -1]) > 1e3


def test_zero_state_warns(caplog):
    synthesize_states(np.eye(2), SynthesisSpec(3, np.zeros(2)))
    assert "zero initial state" in caplog.text


def test_synthesis_spec_validation():
    with pytest.raises(ConfigError):
        SynthesisSpec(0, np.zeros(2))
    with pytest.raises(ConfigError):
        SynthesisSpec(3, np.zeros(2), "cubic")
    with pytest.raises(ConfigError):
        SynthesisSpec(3, np.zeros(2), "plain", 0.2)
    with pytest.raises(DataError):
        synthesize_states(np.eye(2), SynthesisSpec(3, np.zeros(3)))


def test_synthesis_clamps_frames_only_at_output():
    D = np.array([[1.0], [0.0]])
    seq = synthesize(np.array([[2.0]]), D, SynthesisSpec(4, np.array([0.4])), 1, 2)
    np.testing.assert_array_equal(seq.data[0], [0.4, 0.8, 1.0, 1.0])


def test_evaluate_exact_fit_and_metrics():
    p = planted_sparse_lds(seed=3, noise=0.0)
    X = p.states
    r = evaluate(p.transition, p.dictionary, p.clean, X)
    assert r.e_y <= 1e-12 and r.e_x <= 1e-12
    assert r.sigma == pytest.approx(0.995)
    assert r.compression_rate == np.count_nonzero(X) / (256 * 64)
    half = evaluate(0.5 * np.eye(8), p.dictionary, p.clean, X)
    assert half.sigma == 0.5


def test_evaluate_frame_order_dependence():
    p = planted_sparse_lds(seed=4)
    order = np.random.default_rng(0).permutation(64)
    a = evaluate(p.transition, p.dictionary, p.clean, p.states)
    b = evaluate(p.transition, p.dictionary, p.clean[:, order], p.states[:, order])
    assert a.compression_rate == b.compression_rate and a.sigma == b.sigma
    assert a.e_y == pytest.approx(b.e_y)
    assert a.e_x != pytest.approx(b.e_x)


def test_lds_compression_rate_in_metrics():
    Y = np.random.default_rng(0).uniform(size=(1024, 100))
    model = fit_lds(Y, 64)
    r = evaluate(model.transition, model.pcs, Y, model.states, kind="lds")
    assert r.compression_rate == 0.0625


def test_reconstruct_zero_frames_gives_zero():
    p = planted_sparse_lds(seed=0)
    zeros = FrameSequence(np.zeros((256, 4)), 16, 16)
    assert not np.any(reconstruct(_avdl(p.dictionary, p.transition), zeros).data)


def test_reconstruct_clean_sparse_frames_to_solver_accuracy():
    # frames that are exactly D x with x a fixed point of the elastic net
    rng = np.random.default_rng(5)
    Q = np.linalg.qr(rng.standard_normal((16, 16)))[0][:, :4]
    Q = Q * np.sign(Q.sum(axis=0))
    X = np.abs(rng.uniform(0.1, 0.2, size=(4, 6)))
    Y = np.clip(Q @ X, 0, None)
    Y = Q @ (Q.T @ Y)
    model = _avdl(Q, np.eye(4), l1=1e-6)
    rec = reconstruct(model, Y)
    err = np.linalg.norm(rec.data - np.clip(Y, 0, 1), axis=0).sum()
    assert err <= 1e-5 * 6


def test_reconstruct_lds_projects():
    p = planted_lds(seed=2)
    model = fit_lds(p.sequence, 8)
    np.testing.assert_allclose(reconstruct(model, p.sequence).data, p.sequence.data, atol=1e-10)


@pytest.mark.parametrize("seed", range(1, 11))
def test_reconstruction_denoises_planted_data(seed):
    p = planted_sparse_lds(seed=seed)
    noisy = corrupt(p.sequence, GaussianNoise(0.1, seed=seed))
    rec = reconstruct(_avdl(p.dictionary, p.transition), noisy)
    assert np.linalg.norm(rec.data - p.clean) < np.linalg.norm(noisy.data - p.clean)


def test_reconstruct_geometry_mismatch():
    p = planted_sparse_lds(seed=0)
    with pytest.raises(DataError):
        reconstruct(_avdl(p.dictionary, p.transition), np.zeros((10, 3)))


def test_occlusion_hit_rate_counts_occluded_frames():
    gray = FrameSequence.from_frames(np.full((1024, 8, 8), 0.5))
    assert occlusion_hit_rate(gray, 3, 3) == 0.0
    spec = Occlusion(3, 3, 50 / 1024, seed=11)
    assert occlusion_hit_rate(corrupt(gray, spec), 3, 3) == 50 / 1024
    everything = corrupt(gray, Occlusion(3, 3, 1.0, seed=2))
    assert occlusion_hit_rate(everything, 3, 3) == 1.0
    with pytest.raises(ConfigError):
        occlusion_hit_rate(gray, 9, 2)


def test_occlusion_hit_rate_matches_bruteforce(rng):
    frames = rng.uniform(0.85, 1.0, size=(12, 5, 6))
    seq = FrameSequence.from_frames(frames)
    for h, w in [(1, 1), (2, 3), (4, 4)]:
        assert occlusion_hit_rate(seq, h, w) == hit_rate_bruteforce(frames, h, w, 0.95)


def test_metrics_csv_appends(tmp_path):
    r = evaluate(0.5 * np.eye(1), np.ones((1, 1)), np.ones((1, 3)), np.ones((1, 3)))
    path = tmp_path / "m.csv"
    append_metrics_csv(r, path, "avdl", 10)
    append_metrics_csv(r, path, "avdl", 20)
    lines = path.read_text().splitlines()
    assert lines[0] == "model_kind,loops_or_k,compression_rate,sigma,e_y,e_x"
    assert len(lines) == 3 and lines[2].startswith("avdl,20,")
