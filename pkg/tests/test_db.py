import numpy as np
from numpy.testing import assert_allclose

from src.db import ReferenceCache, fingerprint
from src.equilibrium import ReferencePoint

KEY = {"game": {"kind": "quadratic-test", "n_followers": 2}, "step": None, "max_iter": 1000}


def point(residual=1e-11):
    return ReferencePoint(np.array([[0.1], [0.2]]), np.array([-0.3]), residual, 42, 0.01, 1e-10)


class TestFingerprint:
    def test_key_order_does_not_matter(self):
        reordered = {"max_iter": 1000, "step": None, "game": {"n_followers": 2, "kind": "quadratic-test"}}
        assert fingerprint(KEY) == fingerprint(reordered)

    def test_any_change_matters(self):
        assert fingerprint(KEY) != fingerprint({**KEY, "max_iter": 1001})


class TestReferenceCache:
    def test_store_then_load(self, tmp_path):
        messages = []
        cache = ReferenceCache(tmp_path / "cache" / "reference.db", messages.append)
        assert cache.load(KEY, tol=1e-10) is None
        cache.store(KEY, point())
        loaded = cache.load(KEY, tol=1e-10)
        assert_allclose(loaded.x_star, [[0.1], [0.2]])
        assert_allclose(loaded.y_star, [-0.3])
        assert loaded.iterations_used == 42
        assert any("stored" in m for m in messages)
        assert any("loaded" in m for m in messages)

    def test_poor_residual_is_not_reused(self, tmp_path):
        messages = []
        cache = ReferenceCache(tmp_path / "reference.db", messages.append)
        cache.store(KEY, point(residual=1e-6))
        assert cache.load(KEY, tol=1e-10) is None
        assert any("re-solving" in m for m in messages)
        assert cache.load(KEY, tol=1e-5) is not None

    def test_persists_and_deletes(self, tmp_path):
        path = tmp_path / "reference.db"
        ReferenceCache(path, lambda m: None).store(KEY, point())
        reopened = ReferenceCache(path, lambda m: None)
        assert reopened.load(KEY, tol=1e-10) is not None
        reopened.delete(KEY)
        assert reopened.load(KEY, tol=1e-10) is None

    def test_replace_keeps_one_row(self, tmp_path):
        cache = ReferenceCache(tmp_path / "reference.db", lambda m: None)
        cache.store(KEY, point(residual=1e-11))
        cache.store(KEY, point(residual=5e-12))
        assert cache.load(KEY, tol=1e-10).residual == 5e-12
