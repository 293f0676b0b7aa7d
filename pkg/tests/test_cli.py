import csv
import hashlib
import json

import numpy as np
import pytest

from doabeam.cli import CSV_COLUMNS, main
from doabeam.dataset import Recipe, read_manifest
from doabeam.errors import DataError
from doabeam.wavio import read_wav, write_wav


def _recipe(tmp_path, **kw):
    doc = {"duration_s": 1.0, "t60": [0.3, 0.4], "snr_db": 15.0}
    doc.update(kw)
    p = tmp_path / "recipe.json"
    p.write_text(json.dumps(doc))
    return p


def _digest(root):
    h = hashlib.sha256()
    for f in sorted(root.rglob("*")):
        if f.is_file():
            h.update(f.relative_to(root).as_posix().encode())
            h.update(f.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    recipe = _recipe(root)
    assert main(["simulate", str(recipe), str(root / "data"), "--count", "2", "--seed", "7"]) == 0
    return root / "data"


def test_simulate_layout(dataset):
    recs = read_manifest(dataset / "manifest.jsonl")
    assert [r["scene_id"] for r in recs] == ["scene_00000", "scene_00001"]
    x, rate = read_wav(dataset / recs[0]["mixture"])
    assert rate == 16000 and x.shape == (16000, 7)
    assert recs[0]["draws"]["snr_db"] == 15.0
    assert len(recs[0]["true_doas_deg"]) == 2


def test_simulate_jobs_identical(dataset, tmp_path):
    recipe = _recipe(tmp_path)
    assert main(["simulate", str(recipe), str(tmp_path / "par"), "--count", "2", "--seed", "7",
                 "--jobs", "2"]) == 0
    assert _digest(tmp_path / "par") == _digest(dataset)


def test_recipe_unknown_key(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"durration": 1}))
    with pytest.raises(DataError):
        Recipe.load(p)
    assert main(["simulate", str(p), str(tmp_path / "o")]) == 3


def test_missing_corpus(tmp_path):
    p = _recipe(tmp_path, speech_dir=str(tmp_path / "nowhere"))
    assert main(["simulate", str(p), str(tmp_path / "o")]) == 3


def test_separate_and_eval(dataset, tmp_path):
    recs = read_manifest(dataset / "manifest.jsonl")
    sep = tmp_path / "sep"
    for r in recs:
        (a1, e1), (a2, e2) = r["true_doas_deg"]
        code = main(["separate", str(dataset / r["mixture"]), "--az1", str(a1), "--az2", str(a2),
                     "--out-dir", str(sep), "--prefix", r["scene_id"]])
        assert code == 0
    side = json.loads((sep / "scene_00000.json").read_text())
    assert side["doa_mode"] == "oracle" and len(side["doas_deg"]) == 4
    out = tmp_path / "ev"
    assert main(["eval", str(dataset / "manifest.jsonl"), str(sep), "--out-dir", str(out)]) == 0
    with (out / "eval.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert [r[1] for r in rows[1:]] == ["ok", "ok"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_ok"] == 2 and np.isfinite(summary["mean_delta_sir"])


def test_eval_missing_output_marks_failed(dataset, tmp_path):
    out = tmp_path / "ev"
    assert main(["eval", str(dataset / "manifest.jsonl"), str(tmp_path / "empty"),
                 "--out-dir", str(out)]) == 0
    with (out / "eval.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["status"] for r in rows] == ["failed", "failed"]


def test_separate_usage_errors(dataset, tmp_path):
    mix = str(dataset / "scene_00000" / "mixture.wav")
    assert main(["separate", mix, "--out-dir", str(tmp_path)]) == 2
    assert main(["separate", mix, "--doa", "fit", "--out-dir", str(tmp_path)]) == 2
    assert main(["separate", mix, "--az1", "10", "--out-dir", str(tmp_path)]) == 2
    assert main(["separate", mix, "--config", str(tmp_path / "none.json")]) == 2


def test_separate_wrong_channels(tmp_path):
    p = tmp_path / "m.wav"
    write_wav(p, np.zeros((4000, 3)), 16000)
    assert main(["separate", str(p), "--az1", "0", "--az2", "90", "--out-dir", str(tmp_path)]) == 3


def test_separate_srp_mode(dataset, tmp_path):
    mix = str(dataset / "scene_00001" / "mixture.wav")
    assert main(["separate", mix, "--doa", "srp", "--postmask", "--out-dir", str(tmp_path)]) == 0
    side = json.loads((tmp_path / "mixture.json").read_text())
    assert side["postmask"] == {"p": 2.0, "floor": 0.05}


def test_separate_fit_mode(dataset, tmp_path):
    rec = read_manifest(dataset / "manifest.jsonl")[0]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"doa_mode": "fit", "loss": {"kind": "cMSE", "alpha": 1.0}}))
    code = main(["separate", str(dataset / rec["mixture"]), "--config", str(cfg),
                 "--targets", *(str(dataset / t) for t in rec["targets"]),
                 "--out-dir", str(tmp_path)])
    assert code in (0, 4)
    side = json.loads((tmp_path / "mixture.json").read_text())
    assert side["loss"] <= side["init_loss"]


def test_bad_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
