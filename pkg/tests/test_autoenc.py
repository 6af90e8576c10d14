"""Autoencoder: gradients, sparsity-driven width, training, persistence."""

from struct import error as struct_error

import numpy as np
import pytest

from fifth.autoenc import Autoencoder, Code
from fifth.errors import TrainingDivergence
from fifth.selftest import gradient_sample


def plane_dataset(seed=7, n=256, f=10):
    """Points on a random 2-D plane embedded in f dimensions."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(f, 2))
    b = rng.normal(size=f)
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    return u @ a.T + b


@pytest.fixture(scope="module")
def plane():
    return plane_dataset()


@pytest.fixture(scope="module")
def trained(plane):
    # reference recipe: defaults except F=10, 1000 epochs, seed 7
    return Autoencoder(n_features=10).fit(plane, epochs=1000, seed=7)


# -- forward pass ------------------------------------------------------------


def test_zero_weights_encode_to_zero_code():
    ae = Autoencoder(n_features=4, n_hidden=3, n_code=2)
    code = ae.encode(np.ones(4))
    assert np.all(code.vector == 0.0)
    assert not code.active.any()


def test_zero_weights_decode_to_output_bias():
    ae = Autoencoder(n_features=4, n_hidden=3, n_code=2)
    ae.b_dec_out = np.array([1.0, -2.0, 0.5, 0.0])
    out = ae.decode(np.array([3.0, -3.0]))
    assert np.allclose(out, ae.b_dec_out)


def test_encode_deterministic():
    ae = Autoencoder(n_features=5).init_weights(3)
    x = np.linspace(-1, 1, 5)
    a = ae.encode(x).vector
    b = ae.encode(x).vector
    assert np.array_equal(a, b)


def test_dimension_mismatch_rejected():
    ae = Autoencoder(n_features=4, n_code=2)
    with pytest.raises(ValueError):
        ae.encode(np.ones(5))
    with pytest.raises(ValueError):
        ae.inverse_transform(np.ones((1, 3)))


def test_code_mask_length_checked():
    with pytest.raises(ValueError):
        Code(np.zeros(3), np.zeros(4, dtype=bool))


# -- loss ----------------------------------------------------------------------


def test_loss_zero_for_perfect_reconstruction_and_zero_weights():
    ae = Autoencoder(n_features=3)
    out = ae.loss(np.zeros((5, 3)))
    assert out["total"] == 0.0
    assert out["reconstruction"] == 0.0
    assert out["sparsity"] == 0.0
    assert out["decay"] == 0.0


def test_loss_reduces_to_reconstruction_without_penalties():
    ae = Autoencoder(n_features=6, sparsity_weight=0.0, decay_weight=0.0)
    ae.init_weights(1)
    x = np.random.default_rng(2).normal(size=(8, 6))
    out = ae.loss(x)
    assert out["total"] == out["reconstruction"]


def test_loss_invariant_under_batch_duplication():
    ae = Autoencoder(n_features=6).init_weights(1)
    x = np.random.default_rng(2).normal(size=(8, 6))
    once = ae.loss(x)
    twice = ae.loss(np.vstack([x, x]))
    for key in once:
        assert once[key] == pytest.approx(twice[key], rel=1e-12)


def test_loss_components_nonnegative_and_finite():
    ae = Autoencoder(n_features=6).init_weights(9)
    out = ae.loss(np.random.default_rng(0).normal(size=(4, 6)))
    for v in out.values():
        assert v >= 0.0 and np.isfinite(v)


def test_loss_rejects_empty_batch():
    ae = Autoencoder(n_features=3)
    with pytest.raises(ValueError):
        ae.loss(np.zeros((0, 3)))


# -- gradients -----------------------------------------------------------------


def test_gradient_check_small_config():
    ae = Autoencoder(n_features=4, n_hidden=5, n_code=3,
                     sparsity_weight=0.03, decay_weight=0.001)
    ae.init_weights(0)
    assert ae.gradient_check(seed=1) < 1e-4


def test_gradient_check_twenty_random_configs():
    report = gradient_sample()
    assert report["ok"]
    assert report["max_rel_error"] < 1e-4


def test_zero_input_zero_weights_gives_zero_gradients():
    ae = Autoencoder(n_features=4, n_hidden=3, n_code=2, decay_weight=0.0)
    grads = ae._gradients(np.zeros((2, 4)))
    for g in grads.values():
        assert np.all(g == 0.0)


def test_decay_gradient_is_analytic():
    lam = 0.25
    with_decay = Autoencoder(n_features=4, n_hidden=3, n_code=2,
                             decay_weight=lam).init_weights(5)
    without = Autoencoder(n_features=4, n_hidden=3, n_code=2,
                          decay_weight=0.0).init_weights(5)
    x = np.random.default_rng(6).normal(size=(3, 4))
    xs_a = with_decay._standardize(x)
    ga = with_decay._gradients(xs_a)
    gb = without._gradients(without._standardize(x))
    for name in ("w_enc_in", "w_enc_out", "w_dec_in", "w_dec_out"):
        assert np.allclose(ga[name] - gb[name],
                           2.0 * lam * getattr(with_decay, name))


# -- training --------------------------------------------------------------------


def test_train_zero_epochs_is_identity(plane):
    ae = Autoencoder(n_features=10).init_weights(4)
    before = ae.w_enc_in.copy()
    trace = ae.train(plane, epochs=0, seed=4)
    assert trace == []
    assert np.array_equal(ae.w_enc_in, before)


def test_train_deterministic_per_seed(plane):
    a = Autoencoder(n_features=10).fit(plane, epochs=40, seed=7)
    b = Autoencoder(n_features=10).fit(plane, epochs=40, seed=7)
    assert a.history_ == b.history_
    assert np.array_equal(a.w_dec_out, b.w_dec_out)


def test_train_reduces_loss_on_plane_data(plane):
    ae = Autoencoder(n_features=10)
    ae.feat_mean = plane.mean(axis=0)
    ae.feat_std = plane.std(axis=0)
    ae.init_weights(7)
    initial = ae.loss(plane)["total"]
    trace = ae.train(plane, epochs=200, seed=7)
    assert trace[-1] < 0.1 * initial


def test_divergence_aborts_with_report(plane):
    ae = Autoencoder(n_features=10, learning_rate=50.0)
    ae.feat_mean = plane.mean(axis=0)
    ae.feat_std = plane.std(axis=0)
    ae.init_weights(0)
    with pytest.raises(TrainingDivergence) as err:
        ae.train(plane, epochs=100, seed=0)
    assert "epoch" in err.value.report
    assert len(err.value.report["trace"]) >= 1


# -- effective dimensionality ------------------------------------------------


def test_untrained_effective_dim_is_zero(plane):
    ae = Autoencoder(n_features=10)
    assert ae.effective_dim(plane) == 0


def test_plane_data_recovers_two_dimensions(plane, trained):
    assert trained.effective_dim(plane) == 2


def test_roundtrip_error_small_after_training(plane, trained):
    pt = plane[0]
    back = trained.decode(trained.encode(pt))
    rel = np.linalg.norm(back - pt) / np.linalg.norm(pt)
    assert rel < 0.05


def test_active_mask_matches_training_activity(plane, trained):
    code = trained.encode(plane[3])
    assert int(code.active.sum()) == trained.effective_dim(plane)


def test_repeated_point_absorbed_by_bias():
    rep = np.tile(plane_dataset()[3], (64, 1))
    ae = Autoencoder(n_features=10).fit(rep, epochs=200, seed=7)
    assert ae.effective_dim(rep) == 0


def test_sparsity_pressure_monotone(plane):
    dims = [
        Autoencoder(n_features=10, sparsity_weight=lam)
        .fit(plane, epochs=1000, seed=7)
        .effective_dim(plane)
        for lam in (0.0, 0.01, 0.1)
    ]
    assert dims == sorted(dims, reverse=True)
    assert dims == [8, 6, 2]  # frozen reference run


# -- estimator surface ---------------------------------------------------------


def test_get_set_params_roundtrip():
    ae = Autoencoder(n_code=5)
    params = ae.get_params()
    assert params["n_code"] == 5
    ae.set_params(learning_rate=0.5)
    assert ae.learning_rate == 0.5
    with pytest.raises(ValueError):
        ae.set_params(bogus=1)


def test_fit_transform_shapes(plane):
    ae = Autoencoder(n_features=10)
    assert ae.fit(plane, epochs=5, seed=0) is ae
    codes = ae.transform(plane)
    assert codes.shape == (plane.shape[0], 8)
    back = ae.inverse_transform(codes)
    assert back.shape == plane.shape


# -- persistence ---------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path, plane, trained):
    path = tmp_path / "plane.aenc"
    trained.save(path)
    back = Autoencoder.load(path)
    assert np.array_equal(back.transform(plane), trained.transform(plane))
    assert np.array_equal(back.feat_mean, trained.feat_mean)
    assert back.effective_dim(plane) == trained.effective_dim(plane)


def test_checkpoint_bytes_stable(tmp_path, trained):
    p1 = tmp_path / "a.aenc"
    p2 = tmp_path / "b.aenc"
    trained.save(p1)
    trained.save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_rejects_truncated(tmp_path, trained):
    path = tmp_path / "cut.aenc"
    trained.save(path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 16])
    with pytest.raises((ValueError, struct_error)):
        Autoencoder.load(path)
