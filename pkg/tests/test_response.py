import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from riemblob.errors import UsageError
from riemblob.hessian import HessianEstimator
from riemblob.response import (
    ResponseField,
    blob_response,
    br_det,
    br_mean,
    br_scalar_detsum,
    br_scalar_theorem,
    br_trace,
    scale_normalize,
)
from riemblob.scalespace import make_scale_grid


def theorem_bruteforce(H):
    """Literal double sum over i, j and channels, one vertex at a time."""
    V, m = H.shape[:2]
    out = np.zeros(V)
    for v in range(V):
        for a in range(m):
            for i in range(2):
                for j in range(2):
                    out[v] += H[v, a, i, j] * H[v, a, j, i] - H[v, a, i, i] * H[v, a, j, j]
    return out


def sym(a, b, c):
    return np.array([[a, b], [b, c]], dtype=float)


def test_detsum_examples():
    assert br_scalar_detsum(sym(2, 0, 2)[None, None]).values[0, 0] == 4
    H = np.stack([sym(1, 0, 1), sym(-1, 0, 1)])[None]
    assert br_scalar_detsum(H).values[0, 0] == 0


def test_theorem_expansion():
    a, b, c = 1.5, -0.7, 2.2
    H = sym(a, b, c)[None, None]
    val = br_scalar_theorem(H).values[0, 0]
    assert val == pytest.approx(2 * (b * b - a * c), rel=1e-14)
    assert val == pytest.approx(-2 * np.linalg.det(H[0, 0]), rel=1e-14)
    assert br_scalar_theorem(np.zeros((1, 1, 2, 2))).values[0, 0] == 0


def test_mean_examples():
    assert br_mean(sym(2, 0, 2)[None, None]).values[0, 0] == 4
    H = np.stack([sym(1, 0, 2), sym(3, 5, 1)])[None]
    assert br_mean(H).values[0, 0] == 5


symmetric_fields = st.integers(1, 4).flatmap(
    lambda m: arrays(np.float64, (8, m, 3), elements=st.floats(-1e3, 1e3))
)


def _to_H(abc):
    a, b, c = abc[..., 0], abc[..., 1], abc[..., 2]
    return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)


@settings(max_examples=200, deadline=None)
@given(symmetric_fields)
def test_theorem_is_minus_two_detsum(abc):
    H = _to_H(abc)
    th = br_scalar_theorem(H).values[0]
    ds = br_scalar_detsum(H).values[0]
    scale = np.sum(H**2, axis=(1, 2, 3))
    assert np.all(np.abs(th + 2 * ds) <= 1e-12 * np.maximum(scale, 1e-300))
    np.testing.assert_allclose(th, theorem_bruteforce(H), rtol=1e-12, atol=1e-12 * scale.max())


@settings(max_examples=100, deadline=None)
@given(symmetric_fields)
def test_mean_nonnegative_and_permutation_invariant(abc):
    H = _to_H(abc)
    assert np.all(br_mean(H).values >= 0)
    perm = np.random.default_rng(0).permutation(H.shape[1])
    for fn in (br_mean, br_scalar_detsum, br_scalar_theorem):
        a, b = fn(H).values, fn(H[:, perm]).values
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max(initial=0))


def test_grayscale_equivalence(rng):
    H = _to_H(rng.normal(size=(50, 1, 3)))
    np.testing.assert_array_equal(br_scalar_detsum(H).values, br_det(H).values)
    np.testing.assert_array_equal(br_mean(H).values, np.abs(br_trace(H).values))
    with pytest.raises(UsageError):
        br_det(_to_H(rng.normal(size=(5, 2, 3))))


def test_multilevel_shapes(rng):
    H = _to_H(rng.normal(size=(3, 7, 2, 3)))
    for kind in ("detsum", "theorem", "mean"):
        assert blob_response(H, kind).values.shape == (3, 7)
    with pytest.raises(UsageError):
        blob_response(H, "harris")


def test_scale_normalize_examples():
    g = make_scale_grid(1, 2, 2)
    for kind, expected in (("detsum", 16), ("theorem", 16), ("mean", 8)):
        f = scale_normalize(ResponseField(kind, np.array([[4.0], [4.0]])), g)
        assert f.normalized
        assert f.values[0, 0] == 4  # t = 1 is the identity
        assert f.values[1, 0] == expected
    with pytest.raises(UsageError, match="already"):
        scale_normalize(f, g)
    with pytest.raises(UsageError):
        scale_normalize(ResponseField("mean", np.ones((3, 1))), g)


@pytest.mark.parametrize("kind, power", [("detsum", 2), ("theorem", 2), ("mean", 1)])
def test_signal_scaling_rescales_response(sphere3, rng, kind, power):
    est = HessianEstimator(sphere3)
    L = rng.normal(size=(sphere3.n_vertices, 2))
    mu = 3.5
    a = blob_response(est.hessian(L), kind).values
    b = blob_response(est.hessian(mu * L), kind).values
    ok = np.isfinite(a)
    np.testing.assert_allclose(b[ok], mu**power * a[ok], rtol=1e-9, atol=1e-9 * np.abs(b[ok]).max())
    assert np.nanargmax(a) == np.nanargmax(b)


def test_masked_vertices_propagate(grid16):
    est = HessianEstimator(grid16)
    f = br_scalar_detsum(est.hessian(grid16.vertices[:, 0] ** 2))
    assert np.array_equal(f.mask[0], est.valid)


def test_csv_dump(tmp_path):
    f = ResponseField("mean", np.array([[1.0, np.nan], [2.0, 3.0]]))
    p = tmp_path / "r.csv"
    f.write_csv(p)
    assert p.read_text().splitlines() == ["level,vertex,response", "0,0,1", "1,0,2", "1,1,3"]
