import json

import numpy as np
import pytest

from harq_fso.config import DEFAULTS, allocation_powers, from_dict, load
from harq_fso.errors import ConfigError
from harq_fso.harq_analysis import Scheme


def test_defaults_mirror_table():
    run = from_dict({})
    assert run.harq.J == 4 and run.harq.R == 2.0 and run.harq.scheme is Scheme.CC
    assert run.P0 == 0.2 and run.Pmax == 0.35
    assert list(run.sweep_db) == [20.0 + 5 * i for i in range(13)]
    assert len(run.rate_grid) == 60
    assert run.rate_grid[0] == 0.1 and run.rate_grid[-1] == 6.0
    model = run.channel_at(60.0)
    assert (model.alpha, model.beta) == (2.296, 1.822)


def test_load_none_and_file(tmp_path):
    assert load(None).harq.J == 4
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"harq": {"J": 2, "scheme": "IR"}, "channel": {"turbulence": "strong"}}))
    run = load(str(path))
    assert run.harq.J == 2 and run.harq.scheme is Scheme.IR
    assert run.channel_at(30.0).alpha == 2.064


@pytest.mark.parametrize("data,field", [
    ({"harq": {"J": 0}}, "harq.J"),
    ({"harq": {"scheme": "XX"}}, "harq.scheme"),
    ({"channel": {"turbulence": "calm"}}, "channel.turbulence"),
    ({"channel": {"turbulence": None}}, "channel.alpha"),
    ({"power": {"allocation": "explicit", "P": [0.1]}}, "power.P"),
    ({"power": {"allocation": "explicit", "P": [0.1, 0.1, 0.1, 0.9]}}, "power.P"),
    ({"sweep": {"gamma_bar_db": [80, 20, 5]}}, "sweep.gamma_bar_db"),
    ({"schema_version": 7}, "schema_version"),
    ({"bogus": 1}, "bogus"),
    ({"harq": {"bogus": 1}}, "harq.bogus"),
    ({"sca": {"epsilon": 0}}, "sca"),
    ({"output": {"format": "xml"}}, "output.format"),
])
def test_invalid_fields_named(data, field):
    with pytest.raises(ConfigError) as info:
        from_dict(data)
    assert info.value.field.startswith(field)


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load(str(bad))


def test_allocation_modes():
    assert np.all(allocation_powers(from_dict({})) == 0.35)
    eq = allocation_powers(from_dict({"power": {"allocation": "equal"}}))
    np.testing.assert_allclose(eq, 0.05)
    ex = allocation_powers(from_dict({"power": {"allocation": "explicit", "P": [0.1, 0.2, 0.3, 0.35]}}))
    np.testing.assert_allclose(ex, [0.1, 0.2, 0.3, 0.35])
    assert allocation_powers(from_dict({}), J=10).size == 10


def test_defaults_not_mutated():
    before = json.dumps(DEFAULTS, sort_keys=True)
    from_dict({"harq": {"J": 7}})
    assert json.dumps(DEFAULTS, sort_keys=True) == before
