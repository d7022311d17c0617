import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quasisym.sturm import kth_eigenvalue, smallest_eigenvalues, spherical_multiplicity, sturm_count

finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(arrays(float, 12, elements=finite), arrays(float, 11, elements=finite), finite)
def test_sturm_count_matches_dense(diag, off, x):
    T = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    eig = np.linalg.eigvalsh(T)
    if np.min(np.abs(eig - x)) < 1e-9 * (1 + np.max(np.abs(eig))):
        return
    assert sturm_count(diag, off, x) == int(np.sum(eig < x))


def test_kth_eigenvalue(rng):
    diag = rng.normal(size=40)
    off = rng.normal(size=39)
    T = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    eig = np.linalg.eigvalsh(T)
    assert kth_eigenvalue(diag, off, 5) == pytest.approx(eig[5], abs=1e-10)
    assert np.allclose(smallest_eigenvalues(diag, off, 3), eig[:3], atol=1e-10)


def test_multiplicity():
    assert [spherical_multiplicity(l, 3) for l in range(4)] == [1, 3, 5, 7]
    assert [spherical_multiplicity(l, 2) for l in range(4)] == [1, 2, 2, 2]
    assert [spherical_multiplicity(l, 4) for l in range(4)] == [1, 4, 9, 16]
    with pytest.raises(ValueError):
        spherical_multiplicity(-1, 3)
