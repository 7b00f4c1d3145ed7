"""Default-state lattice and config parsing."""
from __future__ import annotations

import pytest

from divgroup.model import (
    ConfigError,
    DefaultState,
    ModelParams,
    expand_intensity_rule,
    params_from_config,
    states_by_defaults,
    validate,
)

from conftest import bundled_config


def test_bitstring_leftmost_is_subsidiary_one():
    z = DefaultState.from_bitstring("10", 2)
    assert z.is_defaulted(1)
    assert not z.is_defaulted(2)
    assert z.bitstring == "10"
    assert z.surviving == (2,)


def test_bitstring_round_trip():
    for n in (1, 2, 3, 4):
        for mask in range(1 << n):
            z = DefaultState(mask, n)
            assert DefaultState.from_bitstring(z.bitstring, n) == z


def test_with_default_moves_one_level_down():
    z = DefaultState.all_alive(3)
    z1 = z.with_default(2)
    assert z1.bitstring == "010"
    assert z1.defaulted_count == 1
    with pytest.raises(ValueError):
        z1.with_default(2)


def test_from_bitstring_rejects_garbage():
    with pytest.raises(ValueError):
        DefaultState.from_bitstring("012", 3)
    with pytest.raises(ValueError):
        DefaultState.from_bitstring("01", 3)


def test_states_by_defaults_order():
    groups = states_by_defaults(3)
    assert [len(g) for g in groups] == [1, 3, 3, 1]
    assert groups[0][0] == DefaultState.all_defaulted(3)
    assert groups[-1][0] == DefaultState.all_alive(3)
    counts = [g[0].defaulted_count for g in groups]
    assert counts == [3, 2, 1, 0]


def test_params_from_config_round_trip(fig1_params):
    assert fig1_params.n == 2
    assert fig1_params.drift == (0.1, 0.15)
    assert fig1_params.vol == (0.07, 0.06)
    assert fig1_params.weights == (0.4, 0.6)
    assert fig1_params.discount == 0.05
    alive = DefaultState.all_alive(2)
    assert fig1_params.intensity_of(1, alive) == 0.02
    assert fig1_params.intensity_of(2, alive) == 0.01
    assert fig1_params.intensity_of(1, alive.with_default(2)) == 0.04
    assert fig1_params.intensity_of(2, alive.with_default(1)) == 0.04


def test_intensity_of_defaulted_line_raises(fig1_params):
    z = DefaultState.from_bitstring("10", 2)
    with pytest.raises(ValueError):
        fig1_params.intensity_of(1, z)


def test_unknown_config_key_is_named():
    doc = bundled_config("fig1")
    doc["volatility"] = [0.1, 0.1]
    with pytest.raises(ConfigError, match="volatility"):
        params_from_config(doc)


def test_missing_config_key_is_named():
    doc = bundled_config("fig1")
    del doc["weights"]
    with pytest.raises(ConfigError, match="weights"):
        params_from_config(doc)


def test_intensity_table_missing_state_is_named():
    doc = bundled_config("fig1")
    del doc["intensity"]["table"]["01"]
    with pytest.raises(ConfigError, match="'01'"):
        params_from_config(doc)


def test_intensity_needs_exactly_one_form():
    doc = bundled_config("fig1")
    doc["intensity"]["rule"] = {"base": [0.1, 0.1], "factor": 2.0}
    with pytest.raises(ConfigError, match="exactly one"):
        params_from_config(doc)


def test_intensity_rule_expansion():
    table = expand_intensity_rule([0.01, 0.02, 0.03], 2.0, 3)
    assert table[0] == (0.01, 0.02, 0.03)
    one_down = DefaultState.from_bitstring("100", 3)
    assert table[one_down.mask] == (0.0, 0.04, 0.06)
    two_down = DefaultState.from_bitstring("110", 3)
    assert table[two_down.mask] == (0.0, 0.0, 0.12)
    assert table[(1 << 3) - 1] == (0.0, 0.0, 0.0)


def test_validate_reports_all_violations(fig1_params):
    bad = ModelParams(
        n=2,
        drift=(-0.1, 0.15),
        vol=(0.07, 0.06),
        corr=((1.0, 0.9), (0.2, 1.0)),
        discount=0.05,
        weights=(0.4, 0.7),
        intensity=fig1_params.intensity,
    )
    msgs = validate(bad)
    assert any("drift[1]" in m for m in msgs)
    assert any("symmetric" in m for m in msgs)
    assert any("sum to 1" in m for m in msgs)
    assert validate(fig1_params) == []


def test_validate_contagion_monotonicity():
    doc = bundled_config("fig1")
    # contagion must not lower a survivor's intensity
    doc["intensity"]["table"]["01"] = [0.01, 0.0]
    params = params_from_config(doc)
    msgs = validate(params)
    assert any("must not decrease" in m for m in msgs)


def test_cholesky_of_identity(fig1_params):
    L = fig1_params.cholesky()
    assert (L == [[1.0, 0.0], [0.0, 1.0]]).all()
