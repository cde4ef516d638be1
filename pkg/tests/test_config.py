import json
import math

import pytest

from recoherence.config import ConfigError, load_config, named_configs, parse_config, parse_sweep, parse_value

BASE = {
    "scenario": "dephasing",
    "bath": {"mass": 10, "cutoff": 0.01},
    "schedule": {"round_trip": {"eps_max": 1.0, "t_ramp": 5.0, "t_hold": 1.0}},
    "block": {"method": "analytic"},
}


def test_all_named_configs_parse():
    table = named_configs()
    for name in ("roundtrip", "roundtrip-slow", "sudden-decouple", "recouple", "overlap-oracle", "spinboson-rabi",
                 "entropy-cycle", "fringe-revival", "sudden-flip", "cutoff-sweep", "theta-sweep", "calibrate"):
        assert name in table
    for name, entry in table.items():
        cfg = parse_config(json.loads(entry.read_text()), name)
        assert cfg.scenario


@pytest.mark.parametrize("path,bad", [
    ((), "colour"),
    (("bath",), "temperature"),
    (("block",), "stepsize"),
    (("schedule",), "ramp"),
])
def test_unknown_keys_rejected(path, bad):
    d = json.loads(json.dumps(BASE))
    node = d
    for p in path:
        node = node[p]
    node[bad] = 1
    with pytest.raises(ConfigError, match=bad):
        parse_config(d)


@pytest.mark.parametrize("key,value", [
    ("bath.mass", -1), ("bath.cutoff", 0), ("bath.mass", "ten"), ("sample_dt", 0), ("seed", -3), ("seed", 1.5),
])
def test_bad_values(key, value):
    d = json.loads(json.dumps(BASE))
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        node = node[p]
    node[parts[-1]] = value
    with pytest.raises(ConfigError) as exc:
        parse_config(d)
    assert exc.value.where.startswith(parts[0])


def test_missing_schedule():
    d = dict(BASE)
    d.pop("schedule")
    with pytest.raises(ConfigError, match="schedule"):
        parse_config(d)


def test_error_points_at_line(tmp_path):
    text = json.dumps(BASE, indent=2).replace('"mass": 10', '"mass": -10')
    p = tmp_path / "c.json"
    p.write_text(text)
    line = next(i for i, s in enumerate(text.splitlines(), 1) if '"mass"' in s)
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert f"c.json:{line}" in str(exc.value)


def test_json_syntax_error_location(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "scenario": "sudden",\n  "bath": {,}\n}\n')
    with pytest.raises(ConfigError, match=r"c\.json:3:"):
        load_config(p)


def test_sweep_parsing():
    key, vals = parse_sweep("theta=0:pi:36")
    assert key == "theta" and len(vals) == 36
    assert vals[0] == 0.0 and vals[-1] == pytest.approx(math.pi)
    assert parse_sweep("bath.cutoff=1e-3,1e-4")[1] == [1e-3, 1e-4]
    assert parse_value("pi/2") == pytest.approx(math.pi / 2)
    assert parse_value("2pi") == pytest.approx(2 * math.pi)
    for bad in ("theta", "theta=0:1", "theta=0:1:x", "theta=a,b", "=1"):
        with pytest.raises(ConfigError):
            parse_sweep(bad)


def test_with_value_revalidates():
    cfg = parse_config(BASE)
    assert cfg.with_value("bath.mass", 5.0).bath["mass"] == 5.0
    with pytest.raises(ConfigError):
        cfg.with_value("bath.mass", -5.0)
    with pytest.raises(ConfigError):
        cfg.with_value("nonsense", 1.0)
