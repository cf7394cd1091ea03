from __future__ import annotations

import math

import pytest
from pydantic import ValidationError

from chain.errors import ConfigError
from chain.params import PHASE, ChainParams, Encoding, ParamArrays, SimControls, check_label


def test_lambda_alias_and_field_name():
    assert ChainParams.model_validate({"lambda": 0.2}).lam == 0.2
    assert ChainParams(lam=0.3).lam == 0.3
    assert ChainParams.canonical_name("lambda") == "lam"
    assert "lambda" in ChainParams.field_names()


def test_unknown_and_negative_fields_rejected():
    with pytest.raises(ValidationError):
        ChainParams.model_validate({"g_1": 0.1})
    with pytest.raises(ValidationError):
        ChainParams(g1=-0.1)
    with pytest.raises(ValidationError):
        ChainParams(n_cl=-1.0)
    with pytest.raises(ValidationError):
        ChainParams(g2=math.inf)


def test_replace_validates():
    p = ChainParams(g1=0.1)
    assert p.replace(g1=0.2).g1 == 0.2
    assert p.g1 == 0.1
    with pytest.raises(ValidationError):
        p.replace(kappa2=-1.0)


def test_canonical_name_unknown():
    with pytest.raises(ConfigError):
        ChainParams.canonical_name("omega")


def test_controls_window_resolution():
    with pytest.raises(ValidationError):
        SimControls(dt=0.1, t_filter=5.0)
    c = SimControls(dt=0.01, t_settle=1.0, t_filter=2.0)
    assert c.n_filter == 200
    assert c.n_steps == 300


def test_seed_range():
    SimControls(seed=2**64 - 1)
    with pytest.raises(ValidationError):
        SimControls(seed=2**64)


def test_encodings():
    p = ChainParams(phi1=1.0, delta1=0.5)
    assert PHASE.apply(p, 1).phi1 == 0.0
    assert PHASE.apply(p, 2).phi1 == math.pi
    disp = Encoding(kind="dispersive", chi=0.2)
    assert disp.apply(p, 1).delta1 == 0.2
    assert disp.apply(p, 2).delta1 == -0.2
    assert disp.apply(p, 2).phi1 == 1.0


def test_class_label_checked():
    with pytest.raises(ConfigError):
        check_label(0)
    with pytest.raises(ConfigError):
        PHASE.apply(ChainParams(), 3)


def test_param_arrays_columns():
    params = [ChainParams(g1=0.1), ChainParams(g1=0.2), ChainParams(g1=0.3)]
    pa = ParamArrays.stack(params)
    assert len(pa) == 3
    assert list(pa.take([0, 2]).g1) == [0.1, 0.3]
