import pytest

from cavdiss import units
from cavdiss.config import (
    ConfigNotFoundError,
    ConfigParseError,
    ConfigValidationError,
    RunConfig,
    UnknownKeyError,
    loads,
    parse_config,
    with_overrides,
)
from cavdiss.model import Flavor, Scenario


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    cfg = parse_config(p)
    assert cfg == RunConfig()
    spec = cfg.system()
    assert spec.drive.scenario is Scenario.NONE
    assert units.from_au(spec.omega_10, "cm-1") == pytest.approx(1514.9, rel=1e-12)
    assert spec.cavity.omega_c == spec.omega_10
    assert spec.cap is not None


def test_lambda_override():
    cfg = loads("[cavity]\nlambda_g = 0.025\n")
    assert cfg.cavity.lambda_g == 0.025
    assert cfg.system().cavity.lambda_g == 0.025
    ref = RunConfig()
    ref.cavity.lambda_g = 0.025
    assert cfg == ref


def test_negative_lambda_names_field():
    with pytest.raises(ConfigValidationError) as exc:
        loads("[cavity]\nlambda_g = -1\n")
    assert exc.value.field == "cavity.lambda_g"
    assert "cavity.lambda_g" in str(exc.value)


def test_unknown_key_and_section():
    with pytest.raises(UnknownKeyError, match="lamda_g"):
        loads("[cavity]\nlamda_g = 0.02\n")
    with pytest.raises(UnknownKeyError, match="cavty"):
        loads("[cavty]\nlambda_g = 0.02\n")


def test_parse_error_has_line():
    with pytest.raises(ConfigParseError) as exc:
        loads("[cavity]\nlambda_g = 0.02\nflavor = \n")
    assert exc.value.line == 3


def test_missing_file(tmp_path):
    with pytest.raises(ConfigNotFoundError):
        parse_config(tmp_path / "nope.toml")


@pytest.mark.parametrize(
    "text, field",
    [
        ("[cavity]\nflavor = 'dipole'\n", "cavity.flavor"),
        ("[drive]\nscenario = 'both'\n", "drive.scenario"),
        ("[grid]\nn_q = 4\n", "grid.n_q"),
        ("[propagation]\ndt_fs = 0\n", "propagation.dt_fs"),
        ("[propagation]\nframe = 'rotating'\n", "propagation.frame"),
        ("[sweep]\ne_d_aJ = [0.02, 0.01]\n", "sweep.e_d_aJ"),
        ("[sweep]\nlevel = 2.0\n", "sweep.level"),
        ("[cavity]\nlambda_g = 'big'\n", "cavity.lambda_g"),
        ("[molecule]\ndipole_origin = 'left'\n", "molecule.dipole_origin"),
    ],
)
def test_invalid_values(text, field):
    with pytest.raises(ConfigValidationError) as exc:
        loads(text)
    assert exc.value.field == field


def test_roundtrip_is_idempotent():
    cfg = loads(
        "[cavity]\nlambda_g = 0.02\nflavor = 'pauli_fierz'\n"
        "[drive]\nscenario = 'cavity'\ne_d_aJ = 0.0025\n"
        "[sweep]\ne_d_aJ = [0.001, 0.002]\n"
    )
    text = cfg.dumps()
    again = loads(text)
    assert again == cfg
    assert again.dumps() == text
    assert again.system().flavor is Flavor.PAULI_FIERZ


def test_digest_ignores_worker_count():
    a = RunConfig()
    b = with_overrides(a, sweep={"workers": 4})
    c = with_overrides(a, cavity={"lambda_g": 0.01})
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_drive_energy_maps_to_amplitude():
    cfg = loads("[cavity]\nlambda_g = 0.02\n[drive]\nscenario = 'molecule'\ne_d_aJ = 0.06\n")
    spec = cfg.system()
    assert spec.drive.scenario is Scenario.MOLECULE
    # E_D ~ 0.652 E_L for the calibrated dipole
    assert units.from_au(spec.drive.amplitude * 0.652, "aJ") == pytest.approx(0.06, rel=1e-3)
