import json
import subprocess
import xml.etree.ElementTree as ET

import pytest

import fdsel

ARTIFACTS = ["smoothed.csv", "fits.json", "report.json", "esmap.json", "pvals.svg", "heatmap.svg", "manifest.json"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    text, _ = fdsel.simulate({"n": 12, "m": 40, "sigma_e": 0.5, "seed": 3})
    (d / "data.csv").write_text(text)
    code, manifest = fdsel.run_pipeline(
        {"input": str(d / "data.csv"), "out_dir": str(d / "out"), "B": 199, "R": 100, "seed": 5, "threads": 1}
    )
    assert code == 0, manifest.get("error")
    return d / "out"


def test_all_artifacts_written(run_dir):
    for name in ARTIFACTS:
        assert (run_dir / name).stat().st_size > 0, name


@pytest.mark.parametrize("name", ["fits", "report", "esmap", "manifest"])
def test_json_matches_schema(run_dir, schemas, name):
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(json.loads((run_dir / f"{name}.json").read_text()), schemas[name])


def test_manifest_threshold(run_dir):
    m = json.loads((run_dir / "manifest.json").read_text())
    assert m["alpha_star"] == pytest.approx(0.025)
    assert m["status"] == "ok"


@pytest.mark.parametrize("name", ["pvals.svg", "heatmap.svg"])
def test_svg_is_well_formed(run_dir, name):
    root = ET.parse(run_dir / name).getroot()
    assert root.tag.endswith("svg")


def test_heatmap_colours_follow_values():
    grid = [j / 10 for j in range(11)]
    svg = fdsel.heatmap_svg(grid, [float(j) for j in range(11)])
    root = ET.fromstring(svg)
    cells = {}
    for el in root.iter():
        if el.get("class") == "cell" and el.get("data-row") == "0":
            h = el.get("fill")
            r, g, b = (int(h[i : i + 2], 16) for i in (1, 3, 5))
            cells[int(el.get("data-col"))] = 0.2126 * r + 0.7152 * g + 0.0722 * b
    lum = [cells[j] for j in sorted(cells)]
    assert len(lum) == 11
    assert all(b > a for a, b in zip(lum, lum[1:]))


def test_smoothed_csv_reads_back(run_dir, cli, tmp_path):
    # The fit command consumes smoothed.csv directly.
    out = tmp_path / "fits.json"
    r = subprocess.run([cli, "--threads", "1", "fit", "--in", str(run_dir / "smoothed.csv"), "--out", str(out)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert json.loads(out.read_text())["fits"]


def test_cli_exit_codes(cli, tmp_path):
    text, _ = fdsel.simulate({"n": 5, "m": 20})
    data = tmp_path / "d.csv"
    data.write_text(text)
    bad_alpha = subprocess.run([cli, "pipeline", "--in", str(data), "--out-dir", str(tmp_path / "a"), "--alpha", "2"],
                               capture_output=True)
    assert bad_alpha.returncode == 4
    missing = subprocess.run([cli, "pipeline", "--in", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path / "b")],
                             capture_output=True)
    assert missing.returncode == 2
    err = json.loads((tmp_path / "b" / "manifest.json").read_text())["error"]
    assert err["exit_code"] == 2
