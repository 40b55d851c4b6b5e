import csv
import hashlib
import json

import pytest

from backscatter_sim.core.config import parse_config
from backscatter_sim.core.errors import ArtifactIOError, ExitStatus
from backscatter_sim.main import build_parser, main
from backscatter_sim.output.artifacts import ArtifactStore
from backscatter_sim.schemas.results import SelfCheckResult
from backscatter_sim.simulations.selfcheck import run_selfcheck

SMALL_GRID = [
    "--set", "grid.x_min=-0.25",
    "--set", "grid.x_max=0.5",
    "--set", "grid.y_min=-0.25",
    "--set", "grid.y_max=0.25",
    "--set", "grid.step=0.0625",
    "--set", "cc.phase_steps=36",
]


def _read_manifest(out):
    return json.loads((out / "manifest.json").read_text())


def _snapshot(out):
    return {path.relative_to(out).as_posix(): path.read_bytes() for path in sorted(out.rglob("*")) if path.is_file()}


def test_selfcheck_run(tmp_path):
    out = tmp_path / "selfcheck"
    status = main(["--mode", "selfcheck", "--seed", "42", "--out", str(out), "--set", "cc.phase_steps=36"])
    assert status == ExitStatus.OK

    manifest = _read_manifest(out)
    assert manifest["mode"] == "selfcheck"
    assert manifest["seed"] == 42
    assert manifest["status"] == 0
    listed = {entry["path"]: entry for entry in manifest["artifacts"]}
    assert set(listed) == {"resolved_config.env", "selfcheck/results.csv"}
    for path, entry in listed.items():
        payload = (out / path).read_bytes()
        assert entry["sha256"] == hashlib.sha256(payload).hexdigest()
        assert entry["size"] == len(payload)

    with open(out / "selfcheck" / "results.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert {row["check"] for row in rows} >= {"zf_null", "two_state_difference", "cc_dominance", "ber_calibration"}
    assert all(row["passed"] == "pass" for row in rows)

    restored = parse_config(config_path=out / "resolved_config.env")
    assert restored.seed == 42
    assert restored.cc.phase_steps == 36

def test_selfcheck_results_are_plain_booleans(make_config):
    results = run_selfcheck(make_config(cc__phase_steps=36), draws=50)
    assert all(type(result.passed) is bool for result in results)
    two_state = next(result for result in results if result.name == "two_state_difference")
    assert two_state.passed and two_state.tolerance == 1e-12



def test_config_error_writes_nothing(tmp_path):
    out = tmp_path / "never"
    status = main(["--mode", "campaign", "--out", str(out), "--set", "campaign.n_draws=0"])
    assert status == ExitStatus.CONFIG_ERROR
    assert not out.exists()


def test_unreadable_config_file(tmp_path):
    status = main(["--config", str(tmp_path / "absent.conf"), "--out", str(tmp_path / "out")])
    assert status == ExitStatus.CONFIG_ERROR


def test_output_path_is_a_file(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    status = main(["--mode", "selfcheck", "--out", str(blocker / "run")])
    assert status == ExitStatus.IO_ERROR


def test_failed_selfcheck_keeps_artifacts(tmp_path, monkeypatch):
    def failing(config):
        return [SelfCheckResult(name="zf_null", passed=False, worst=1e-3, tolerance=1e-20)]

    monkeypatch.setattr("backscatter_sim.commands.selfcheck.run_selfcheck", failing)
    out = tmp_path / "failed"
    status = main(["--mode", "selfcheck", "--out", str(out)])
    assert status == ExitStatus.SELFCHECK_FAILED
    assert (out / "selfcheck" / "results.csv").read_text().splitlines()[1].startswith("zf_null,FAIL")
    assert _read_manifest(out)["status"] == int(ExitStatus.SELFCHECK_FAILED)


def test_unexpected_error_rolls_back(tmp_path, monkeypatch):
    def broken(config):
        raise RuntimeError("boom")

    monkeypatch.setattr("backscatter_sim.commands.selfcheck.run_selfcheck", broken)
    out = tmp_path / "broken"
    status = main(["--mode", "selfcheck", "--out", str(out)])
    assert status == ExitStatus.SIMULATION_ERROR
    assert not (out / "resolved_config.env").exists()
    assert not (out / "manifest.json").exists()


def test_manifest_failure_rolls_back(tmp_path, monkeypatch):
    def unwritable(store):
        raise ArtifactIOError("cannot write manifest.json: disk full", str(store.root / "manifest.json"))

    monkeypatch.setattr(ArtifactStore, "_write_manifest", unwritable)
    out = tmp_path / "sealed"
    status = main(["--mode", "selfcheck", "--out", str(out), "--set", "cc.phase_steps=36"])
    assert status == ExitStatus.IO_ERROR
    assert not (out / "resolved_config.env").exists()
    assert not (out / "selfcheck" / "results.csv").exists()
    assert not (out / "manifest.json").exists()


def test_modulation_changes_delta_snr_maps(tmp_path):
    default_out = tmp_path / "default"
    weak_out = tmp_path / "weak"
    base = ["--mode", "maps", "--seed", "7"] + SMALL_GRID
    assert main(base + ["--out", str(default_out)]) == ExitStatus.OK
    weak = ["--set", "modulation.gamma_on=0.3", "--set", "modulation.gamma_off=0.2"]
    assert main(base + weak + ["--out", str(weak_out)]) == ExitStatus.OK

    for kind in ("REF", "MRT", "ZF", "CC"):
        name = f"maps/{kind}_DELTA_SNR.txt"
        assert (default_out / name).read_text() != (weak_out / name).read_text()
    # SNR^OFF does not involve the tag
    assert (default_out / "maps/REF_SNR_OFF.txt").read_text() == (weak_out / "maps/REF_SNR_OFF.txt").read_text()


def test_maps_are_reproducible(tmp_path):
    out = tmp_path / "maps"
    argv = ["--mode", "maps", "--seed", "7", "--out", str(out)] + SMALL_GRID
    assert main(argv) == ExitStatus.OK
    first = _snapshot(out)
    assert main(argv) == ExitStatus.OK
    assert _snapshot(out) == first

    for kind in ("REF", "MRT", "ZF", "CC"):
        assert f"fixtures/precoder_{kind}.csv" in first
        for quantity in ("SNR_OFF", "SNR_TR", "DELTA_SNR"):
            assert f"maps/{kind}_{quantity}.txt" in first
            assert f"maps/{kind}_{quantity}_long.csv" in first
    header = first["maps/ZF_DELTA_SNR.txt"].decode().splitlines()
    assert header[0] == "# quantity=DELTA_SNR"
    assert header[1] == "# units=dB"
    assert "nx=13 ny=9" in header[4]
    assert len(header) == 7 + 9
    summary = json.loads(first["maps/summary.json"])
    assert len(summary) == 12


def test_f_o_maps(tmp_path):
    out = tmp_path / "f_o"
    status = main(["--mode", "f_o_maps", "--out", str(out), "--set", "mapping.ensemble_size=2"] + SMALL_GRID)
    assert status == ExitStatus.OK
    text = (out / "maps" / "CC_F_O.txt").read_text()
    assert "# units=percent" in text
    values = [v for line in text.splitlines() if not line.startswith("#") for v in line.split(",")]
    assert set(values) <= {"0", "50", "100", "nan"}


def test_campaign_run(tmp_path):
    out = tmp_path / "campaign"
    status = main(
        [
            "--mode", "campaign",
            "--out", str(out),
            "--set", "campaign.n_draws=1",
            "--set", "campaign.n_tags=2",
            "--set", "campaign.n_angles=2",
            "--set", "campaign.snr_illum_db=20,30",
            "--set", "campaign.d_max=3",
            "--set", "cc.phase_steps=36",
            "--set", "legacy.n_device_draws=20",
        ]
    )
    assert status == ExitStatus.OK
    with open(out / "campaign" / "curves.csv", newline="") as handle:
        curves = list(csv.DictReader(handle))
    assert len(curves) == 4 * 2 * 2
    with open(out / "campaign" / "samples.csv", newline="") as handle:
        assert len(list(csv.DictReader(handle))) == 1 * 2 * 2 * 4 * 2
    summary = json.loads((out / "campaign" / "summary.json").read_text())
    assert summary["metadata"]["samples_per_curve"] == 4
    assert len(summary["legacy"]) == 4 * 2


def test_legacy_run(tmp_path):
    out = tmp_path / "legacy"
    argv = ["--mode", "legacy", "--out", str(out), "--set", "legacy.n_device_draws=50", "--set", "cc.phase_steps=36"]
    assert main(argv) == ExitStatus.OK
    with open(out / "legacy" / "legacy.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 4 * 6
    assert {row["kind"] for row in rows} == {"REF", "MRT", "ZF", "CC"}


def test_help_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--help"])
    assert excinfo.value.code == 0
    assert "--preset" in capsys.readouterr().out


@pytest.mark.parametrize("preset", ["paper", "desk"])
def test_presets_are_accepted(preset):
    assert build_parser().parse_args(["--preset", preset]).preset == preset
