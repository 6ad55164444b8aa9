import functools
import json
import math

import jsonschema
import pytest

from hybridopa import cli
from hybridopa.config import config_from_dict, load_config, preset_names, report_schema
from hybridopa.errors import BelowThresholdViolation, ConfigParseError, ConfigSchemaError
from hybridopa.model_params import CavityKind
from hybridopa.spectra import quadrature_variance

MINIMAL = {"cavity": {"kind": "single", "t1": 0.1, "t3": 0.01, "tau": 1.0},
           "pump": {"f": 0.3}, "grid": {"delta_min": -0.1, "delta_max": 0.1, "n": 21}}

EXPECTED_PRESETS = {"fig2a", "fig2b", "fig2c", "fig2d", "fig2e", "fig2f", "fig3a", "fig3b",
                    "fig3c", "fig3d", "fig3e", "fig3f", "fig4", "saturation"}


def test_preset_set():
    assert set(preset_names()) == EXPECTED_PRESETS


def test_preset_hybrid_mirrors():
    cfg = load_config("fig2c")
    m = cfg.cavity.mirrors
    assert cfg.cavity.kind is CavityKind.HYBRID
    assert (m.t1, m.t2, m.t3) == (0.016, 0.26, 0.002)
    assert cfg.pumps[0].theta == 0.0 and cfg.squeeze.s == 0.0


def test_preset_single_mirrors():
    cfg = load_config("fig2a")
    assert cfg.cavity.kind is CavityKind.SINGLE
    assert (cfg.cavity.mirrors.t1, cfg.cavity.mirrors.t3) == (0.0016, 0.00005)


def test_pump_above_threshold_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["pump"]["f"] = 1.2
    with pytest.raises(BelowThresholdViolation):
        config_from_dict(doc)


def test_unknown_key_rejected_with_path():
    doc = json.loads(json.dumps(MINIMAL))
    doc["grid"]["step"] = 1
    with pytest.raises(ConfigSchemaError) as exc:
        config_from_dict(doc)
    assert exc.value.path == "/grid"


def test_parse_error_has_position():
    with pytest.raises(ConfigParseError) as exc:
        load_config('{"cavity": {"kind": "single",\n  "t1": }')
    assert exc.value.line == 2


@pytest.mark.parametrize("name", sorted(EXPECTED_PRESETS))
def test_round_trip(name):
    cfg = load_config(name)
    again = load_config(cfg.dumps())
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def test_inline_and_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(MINIMAL))
    assert load_config(str(p)) == load_config(json.dumps(MINIMAL))


def test_cli_spectrum_outputs(tmp_path, capsys):
    assert cli.main(["spectrum", "--config", "fig2d", "--out-dir", str(tmp_path), "--grid-n", "901"]) == 0
    csv_text = (tmp_path / "fig2d_f0.5.csv").read_text()
    header, first = csv_text.splitlines()[:2]
    assert header == "delta,delta_mhz,omega,var_x,var_y,var_x_db,var_y_db"
    assert len(csv_text.splitlines()) == 902
    assert "\r" not in csv_text
    report = json.loads((tmp_path / "fig2d_channels.json").read_text())
    jsonschema.validate(report, report_schema())
    assert report["mode_splitting"]["mhz"] == pytest.approx(3.1, rel=1e-6)
    meta = json.loads((tmp_path / "fig2d.meta.json").read_text())
    assert "created" in meta


def test_cli_byte_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["spectrum", "--config", "fig3e", "--out-dir", str(d), "--quiet"]) == 0
    for name in ("fig3e_f0.2.csv", "fig3e_f0.5.csv", "fig3e_channels.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    bad = json.dumps({**MINIMAL, "pump": {"f": 1.2}})
    assert cli.main(["spectrum", "--config", bad, "--out-dir", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "BelowThresholdViolation" and err["exit_code"] == 1
    assert cli.main(["spectrum", "--config", "no-such-preset"]) == 3
    assert cli.main(["spectrum", "--config", "{oops"]) == 1


def test_cli_presets_and_schema(capsys):
    assert cli.main(["presets"]) == 0
    assert "fig4" in capsys.readouterr().out
    assert cli.main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["title"] == "hybridopa scenario"
    assert cli.main(["schema", "--report"]) == 0


def test_cli_saturation(tmp_path, capsys):
    assert cli.main(["saturation", "--config", "saturation", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "saturation_saturation.json").read_text())
    jsonschema.validate(rep, report_schema())
    assert rep["saturated"] and rep["reference_f"] == 0.65


def test_verify_default_scattering_only():
    rep = cli.run_verify(load_config("fig2c"), monte_carlo=False, quiet=True)
    assert rep["status"] == "pass" and len(rep["checkpoints"]) == 24
    jsonschema.validate(rep, report_schema())


def test_verify_negative_control():
    def corrupted(k, params):
        flipped = params.__class__(params.delta, params.omega, params.gamma_in, params.gamma_out,
                                   params.gamma_0, params.p, params.theta + math.pi, params.squeeze)
        return quadrature_variance(k, flipped)

    rep = cli.run_verify(load_config("fig2c"), closed_form=corrupted, monte_carlo=False, quiet=True)
    assert rep["status"] == "fail"
    bad = [r for r in rep["checkpoints"] if r["status"] == "fail"]
    assert bad and rep["worst"] in {r["label"] for r in bad}


def test_verify_tiny_ensemble_inconclusive(tmp_path):
    cfg = load_config("fig2c")
    pts = cli.config_checkpoints(cfg)[:1]
    rep = cli.run_verify(cfg, pts, monte_carlo=True, n_traj=4, scattering=False, quiet=True)
    assert rep["status"] == "inconclusive"


def test_cli_verify_exit_code_on_failure(tmp_path, monkeypatch):
    original = cli.run_verify
    monkeypatch.setattr(cli, "run_verify", functools.partial(original, closed_form=lambda k, p: 2.0))
    code = cli.main(["verify", "--config", "fig2c", "--no-mc", "--quiet", "--out-dir", str(tmp_path)])
    assert code == 2
