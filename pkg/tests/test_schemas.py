import json
import unittest

import pytest

from nearbest.constants import Mode
from nearbest.exceptions import ConfigError
from nearbest.schemas import load_config, parse_config, with_overrides


def segment_config(**overrides) -> dict:
    data = {
        "name": "segment",
        "mode": "theorem2",
        "arc": {"vertices": [-1, 1]},
        "function": {
            "branches": [{"formula": "-z"}, {"formula": "z"}],
            "singularities": [{"t": 0.5, "order": 0}],
        },
        "lemniscates": [{"order": 2}],
        "degrees": [8, 16],
        "compact_sets": [{"label": "E1", "t_lo": 0.75, "t_hi": 1.0}],
    }
    data.update(overrides)
    return data


def parse(data: dict):
    return parse_config(json.dumps(data, indent=2))


class TestParseConfig(unittest.TestCase):
    def test_defaults(self):
        config = parse(segment_config())
        self.assertEqual(config.mode, Mode.THEOREM2)
        self.assertEqual(config.schema_version, 1)
        self.assertEqual(config.sigma, 0.5)
        self.assertEqual(config.tolerances.map, 1e-8)
        self.assertEqual(config.quadrature.order, 16)
        self.assertFalse(config.output.record_timings)
        self.assertEqual(config.arc.piece_count, 1)
        self.assertEqual(config.prefix, "segment")
        self.assertEqual(config.lemniscates[0].radius, 1.0)

    def test_complex_values(self):
        config = parse(segment_config(arc={"vertices": [1, 0, [0, 1], "1+2i"]},
                                      function={"branches": [{"formula": "0"}, {"formula": "z"}],
                                                "singularities": [{"t": 1.0}]}))
        self.assertEqual(config.arc.vertices, [1 + 0j, 0j, 1j, 1 + 2j])
        self.assertEqual(config.arc.piece_count, 3)

    def test_pieces_form(self):
        arc = {"pieces": [{"start": [-1, 0], "end": 0},
                          {"kind": "circular_arc", "start": 0, "center": [0, 1], "sweep": 1.0}]}
        config = parse(segment_config(arc=arc))
        self.assertEqual(config.arc.piece_count, 2)
        self.assertEqual(config.arc.pieces[1].center, 1j)

    def test_prefix_from_output(self):
        config = parse(segment_config(name="two words", output={"prefix": "seg"}))
        self.assertEqual(config.prefix, "seg")
        self.assertEqual(parse(segment_config(name="two words")).prefix, "two_words")


@pytest.mark.parametrize("overrides, message", [
    ({"mode": "theorem3"}, "mode"),
    ({"degrees": [16, 8]}, "strictly ascending"),
    ({"degrees": []}, "degrees"),
    ({"sigma": 1.0}, "sigma"),
    ({"lemniscates": []}, "one lemniscate per singularity"),
    ({"arc": {"vertices": [0]}}, "at least two vertices"),
    ({"arc": {"vertices": [-1, 1], "pieces": [{"start": 0, "end": 1}]}}, "not both or neither"),
    ({"arc": {"pieces": [{"kind": "circular_arc", "start": 0}]}}, "'center' and 'sweep'"),
    ({"arc": {"vertices": [-1, True]}}, "boolean"),
    ({"function": {"branches": [{"formula": "z"}], "singularities": [{"t": 0.5}]}}, "need 2 branches"),
    ({"function": {"branches": [{"formula": "z +"}, {"formula": "z"}], "singularities": [{"t": 0.5}]}},
     "formula"),
    ({"function": {"branches": [{"formula": "-z"}, {"formula": "z"}], "singularities": [{"t": 1.5}]}},
     "not inside"),
    ({"compact_sets": [{"label": "E1", "t_lo": 0.25, "t_hi": 0.75}]}, "contains the singular parameter"),
    ({"compact_sets": [{"label": "E1", "t_lo": 0.75, "t_hi": 0.7}]}, "t_lo < t_hi"),
    ({"compact_sets": [{"label": "E1", "t_lo": 0.6, "t_hi": 0.7},
                       {"label": "E1", "t_lo": 0.8, "t_hi": 0.9}]}, "Duplicate"),
    ({"degrees": [0, 8]}, "degrees >= 1"),
    ({"unknown": 1}, "unknown"),
])
def test_invalid_configs(overrides, message):
    with pytest.raises(ConfigError) as e:
        parse(segment_config(**overrides))
    assert message in str(e.value)


def test_bestapprox_allows_degree_zero():
    config = parse(segment_config(mode="bestapprox", degrees=[0, 4], lemniscates=[]))
    assert config.degrees == [0, 4]


def test_json_syntax_error_has_line_and_column():
    with pytest.raises(ConfigError) as e:
        parse_config('{\n  "mode": "theorem2",\n  "arc": }', "cfg.json")
    assert str(e.value).startswith("cfg.json:3:")


def test_schema_error_has_line():
    text = json.dumps(segment_config(sigma=2.0), indent=2)
    with pytest.raises(ConfigError) as e:
        parse_config(text, "cfg.json")
    line = next(i for i, s in enumerate(text.splitlines(), 1) if '"sigma"' in s)
    assert f"cfg.json:{line}: sigma:" in str(e.value)


def test_top_level_must_be_an_object():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_load_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(segment_config()))
    assert load_config(path).name == "segment"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_overrides():
    config = parse(segment_config())
    changed = with_overrides(config, tol=1e-6, panels=12, out="elsewhere")
    assert changed.tolerances.map == 1e-6
    assert changed.quadrature.panels == 12
    assert changed.output.directory == "elsewhere"
    assert config.tolerances.map == 1e-8
    assert with_overrides(config) == config
    with pytest.raises(ConfigError):
        with_overrides(config, tol=2.0)
    with pytest.raises(ConfigError):
        with_overrides(config, panels=0)
