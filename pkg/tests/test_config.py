"""Strict config parsing: schema rejection, defaults, canonical hashing."""

import math

import pytest

from hsym.config import (
    ConfigError,
    load_config,
    parse_overrides,
    validate_config,
)

MINIMAL_SPIN = """
[model]
kind = "spin-su2-random"
L = 4

[sequence]
T = 0.1

[evolution]
n_periods_max = 100
seed = 7
"""


def write(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def base_data(kind="spin-su2-random", **model_extra):
    model = {"kind": kind, "L": 4}
    model.update(model_extra)
    return {
        "model": model,
        "sequence": {"T": 0.1},
        "evolution": {"n_periods_max": 100, "seed": 7},
    }


def test_minimal_spin_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL_SPIN))
    assert cfg.kind == "spin-su2-random"
    assert cfg.model["J"] == 1.0
    assert cfg.model["J_prime"] == 5.0
    assert cfg.model["delta_x"] == 10.0
    assert cfg.model["epsilon"] == 6.0
    assert cfg.model["boundary"] == "open"
    assert cfg.periods == [0.1]
    assert cfg.evolution["realizations"] == 1
    assert cfg.evolution["method"] == "auto"
    assert cfg.initial == {"kind": "haar-sector", "n_down": 2,
                           "theta": math.pi / 16}
    assert cfg.observables == {"set": "spin"}
    assert cfg.output["dir"] == "out"


def test_u1_kind_has_no_coupling_split():
    cfg = validate_config(base_data("spin-u1-floquet"))
    assert "J_prime" not in cfg.model
    with pytest.raises(ConfigError, match="unknown keys"):
        validate_config(base_data("spin-u1-floquet", J_prime=2.0))


def test_clock_defaults_and_initial():
    cfg = validate_config(base_data("clock-kicked"))
    assert cfg.model["j_range"] == (0.5, 1.5)
    assert cfg.model["g_range"] == (0.0, 0.3)
    assert cfg.model["h_range"] == (0.0, 0.6)
    assert cfg.model["b_range"] == (0.0, 2.5)
    assert cfg.model["eta"] == 0.35
    assert cfg.model["phi"] == pytest.approx(math.pi / 3)
    assert cfg.initial == {"kind": "clock-product", "n": 3}
    assert cfg.observables == {"set": "clock"}


def test_hoti_defaults():
    cfg = validate_config(base_data("hoti"))
    assert cfg.model["M"] == 1.0
    assert cfg.model["delta1"] == 7.0
    assert cfg.model["delta2"] == 12.0
    assert cfg.model["broken"] is False
    assert cfg.initial == {"kind": "hoti-edge"}
    assert cfg.observables == {"set": "hoti"}


def test_period_list_and_scalar():
    data = base_data()
    data["sequence"]["T"] = [0.5, 0.25, 0.125]
    cfg = validate_config(data)
    assert cfg.periods == [0.5, 0.25, 0.125]
    data["sequence"]["T"] = -1.0
    with pytest.raises(ConfigError, match="positive"):
        validate_config(data)


def test_unknown_keys_rejected_everywhere():
    data = base_data()
    data["typo_section"] = {}
    with pytest.raises(ConfigError, match="unknown"):
        validate_config(data)
    data = base_data()
    data["model"]["coupling"] = 1.0
    with pytest.raises(ConfigError, match="unknown keys"):
        validate_config(data)
    data = base_data()
    data["evolution"]["n_period_max"] = 10
    with pytest.raises(ConfigError, match="unknown keys"):
        validate_config(data)


@pytest.mark.parametrize("section,key", [
    ("model", "kind"), ("model", "L"),
    ("sequence", "T"),
    ("evolution", "n_periods_max"), ("evolution", "seed"),
])
def test_missing_required(section, key):
    data = base_data()
    del data[section][key]
    with pytest.raises(ConfigError):
        validate_config(data)


def test_unknown_model_kind():
    with pytest.raises(ConfigError, match="unknown model kind"):
        validate_config(base_data("spin-su3"))


def test_recursive_order_required_and_bounded():
    data = base_data("spin-recursive")
    with pytest.raises(ConfigError, match="order"):
        validate_config(data)
    data["sequence"]["order"] = 4
    with pytest.raises(ConfigError, match="order"):
        validate_config(data)
    data["sequence"]["order"] = 2
    assert validate_config(data).sequence["order"] == 2
    # other kinds must not carry an order
    data = base_data()
    data["sequence"]["order"] = 2
    with pytest.raises(ConfigError, match="spin-recursive"):
        validate_config(data)


def test_method_and_sample_times_validation():
    data = base_data()
    data["evolution"]["method"] = "magic"
    with pytest.raises(ConfigError, match="method"):
        validate_config(data)
    data = base_data()
    data["evolution"]["sample_times"] = [0, 1.5]
    with pytest.raises(ConfigError, match="integer"):
        validate_config(data)
    data["evolution"]["sample_times"] = [0, 10, 100]
    assert validate_config(data).evolution["sample_times"] == [0, 10, 100]


def test_precision_defaults_and_validation():
    assert validate_config(base_data()).evolution["precision"] == "double"
    data = base_data()
    data["evolution"]["precision"] = "single"
    assert validate_config(data).evolution["precision"] == "single"
    data["evolution"]["precision"] = "quad"
    with pytest.raises(ConfigError, match="precision"):
        validate_config(data)


def test_participation_sectors_bounds():
    data = base_data()
    data["observables"] = {"participation_sectors": [0, 2, 4]}
    cfg = validate_config(data)
    assert cfg.observables["participation_sectors"] == [0, 2, 4]
    data["observables"] = {"participation_sectors": [5]}
    with pytest.raises(ConfigError, match="participation_sectors"):
        validate_config(data)


def test_clock_product_level_bounds():
    data = base_data("clock-kicked")
    data["initial"] = {"n": 5}
    with pytest.raises(ConfigError, match="0..3"):
        validate_config(data)


def test_boundary_validation():
    data = base_data(boundary="twisted")
    with pytest.raises(ConfigError, match="boundary"):
        validate_config(data)


def test_parse_overrides_forms():
    over = parse_overrides(["model.L=6", "evolution.method=krylov",
                            "sequence.T=[0.5, 0.25]"])
    assert over == {
        "model": {"L": 6},
        "evolution": {"method": "krylov"},
        "sequence": {"T": [0.5, 0.25]},
    }
    with pytest.raises(ConfigError, match="section.key=value"):
        parse_overrides(["modelL6"])
    with pytest.raises(ConfigError, match="section.key"):
        parse_overrides(["a.b.c=1"])


def test_overrides_fold_into_validation(tmp_path):
    path = write(tmp_path, MINIMAL_SPIN)
    cfg = load_config(path, parse_overrides(["model.L=6"]))
    assert cfg.model["L"] == 6
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(path, parse_overrides(["model.bogus=1"]))


def test_hash_is_canonical_and_sensitive(tmp_path):
    a = load_config(write(tmp_path, MINIMAL_SPIN, "a.toml"))
    reordered = MINIMAL_SPIN.replace(
        'kind = "spin-su2-random"\nL = 4', 'L = 4\nkind = "spin-su2-random"'
    )
    b = load_config(write(tmp_path, reordered, "b.toml"))
    assert a.config_hash == b.config_hash
    c = load_config(write(tmp_path, MINIMAL_SPIN, "c.toml"),
                    parse_overrides(["model.L=6"]))
    assert c.config_hash != a.config_hash
    assert a.output_root.name == a.config_hash
    assert a.output_root.parent.name == "out"


def test_bad_files_raise_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(write(tmp_path, "[model\nkind=", "broken.toml"))
