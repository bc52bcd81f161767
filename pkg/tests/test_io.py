import json

import numpy as np
import pytest
from jsonschema import ValidationError

from xcreg.errors import ConfigError, EmptyInput, GridMismatch, ParseError
from xcreg.io import (
    REGISTER_SCHEMA,
    check_keys,
    dump_json,
    load_toml,
    read_intervals,
    read_long_csv,
    write_long_csv,
)
from xcreg.simgen import SimConfig, generate_contaminated


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_round_trip(tmp_path):
    s = generate_contaminated(SimConfig(n=3, seed=2)).sample
    write_long_csv(tmp_path / "s.csv", s)
    back = read_long_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.values, s.values)
    np.testing.assert_array_equal(back.grid.points, s.grid.points)
    assert back.component_names == s.component_names and back.subject_ids == s.subject_ids


def test_row_order_irrelevant(tmp_path):
    p = _write(tmp_path / "a.csv", "subject_id,component,t,value\nA,y,1,4\nA,x,1,2\nA,x,0,1\nA,y,0,3\n")
    s = read_long_csv(p)
    assert s.component_names == ("y", "x")
    np.testing.assert_array_equal(s.values[0], [[3, 4], [1, 2]])


def test_grid_mismatch_names_subject(tmp_path):
    p = _write(tmp_path / "m.csv", "subject_id,component,t,value\nA,x,0,1\nA,x,1,1\nB,x,0,1\nB,x,2,1\n")
    with pytest.raises(GridMismatch, match="subject B"):
        read_long_csv(p)


def test_missing_component(tmp_path):
    p = _write(tmp_path / "m.csv", "subject_id,component,t,value\nA,x,0,1\nA,x,1,1\nA,y,0,1\nA,y,1,1\nB,x,0,1\nB,x,1,1\n")
    with pytest.raises(GridMismatch, match="B has no rows for component"):
        read_long_csv(p)


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError, match="header"):
        read_long_csv(_write(tmp_path / "h.csv", "id,t,value\n1,0,0\n"))
    with pytest.raises(ParseError, match=":3"):
        read_long_csv(_write(tmp_path / "v.csv", "subject_id,component,t,value\nA,x,0,1\nA,x,1,abc\n"))
    with pytest.raises(ParseError):
        read_long_csv(tmp_path / "absent.csv")
    with pytest.raises(EmptyInput):
        read_long_csv(_write(tmp_path / "e.csv", "subject_id,component,t,value\n"))


def test_group_by(tmp_path):
    p = _write(
        tmp_path / "g.csv",
        "subject_id,component,t,value,sex\n"
        + "".join(f"{s},{c},{t},{v},{sex}\n" for s, sex in [("A", "m"), ("B", "f")] for c in "xy" for t, v in [(0, 1), (1, 2)]),
    )
    s = read_long_csv(p, ("sex", "f"))
    assert s.subject_ids == ("B",)
    with pytest.raises(ParseError):
        read_long_csv(p, ("age", "3"))


def test_intervals(tmp_path):
    p = _write(tmp_path / "i.csv", "a,b\n9,14\n10,16\n")
    assert read_intervals(p) == [(9.0, 14.0), (10.0, 16.0)]
    with pytest.raises(ParseError):
        read_intervals(_write(tmp_path / "j.csv", "lo,hi\n1,2\n"))


def test_toml_and_keys(tmp_path):
    p = _write(tmp_path / "c.toml", 'window = [10, 40]\n[minimizer]\ntol = 1e-3\n')
    cfg = load_toml(p)
    check_keys(cfg, {"window": None, "minimizer": {"tol": None}})
    with pytest.raises(ConfigError, match="minimizer.tol"):
        check_keys(cfg, {"window": None, "minimizer": {"coarse_step": None}})
    with pytest.raises(ConfigError):
        load_toml(_write(tmp_path / "bad.toml", "window = [\n"))


def test_dump_json_validates(tmp_path):
    with pytest.raises(ValidationError):
        dump_json(tmp_path / "r.json", {"components": []}, REGISTER_SCHEMA)
    out = dump_json(tmp_path / "x.json", {"a": np.float64(np.nan), "b": np.arange(2)})
    assert out == {"a": None, "b": [0, 1]}
    assert json.loads((tmp_path / "x.json").read_text()) == out
