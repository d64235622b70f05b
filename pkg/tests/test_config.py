import math

import pytest

from atvkit import config
from atvkit.config import Tolerances, inequality_status


def test_status_classification():
    assert inequality_status(1.0, math.inf) == "holds-trivially-infinite-rhs"
    assert inequality_status(1.0, 1.0) == "holds"
    assert inequality_status(1.0 + 5e-10, 1.0) == "holds"
    assert inequality_status(1.0 + 2e-9, 1.0) == "VIOLATED"
    assert inequality_status(0.0, 0.0) == "holds"
    assert inequality_status(1e-6, 0.0) == "VIOLATED"


def test_override_from_environment(monkeypatch):
    monkeypatch.setenv("ATVKIT_TOL_OVERRIDE", "oracle=1e-6, bicausal=1e-7")
    tol = config._from_env()
    assert tol.oracle == 1e-6 and tol.bicausal == 1e-7
    assert tol.equality == Tolerances().equality
    monkeypatch.setenv("ATVKIT_TOL_OVERRIDE", "nonsense=1")
    with pytest.raises(ValueError, match="nonsense"):
        config._from_env()


def test_defaults():
    tol = Tolerances()
    assert (tol.equality, tol.oracle, tol.inequality_slack, tol.bicausal) == (1e-10, 1e-8, 1e-9, 1e-9)
