import csv
import json

import numpy as np
import pytest

from propspan.cli import main
from propspan.corpus import Sample, SpanAnnotation, parse_dataset, serialize_predictions, write_jsonl
from propspan.synthetic import trigger_corpus
from propspan.tagger import load_model


def write(path, samples):
    write_jsonl(str(path), serialize_predictions(samples, with_text=True))
    return str(path)


@pytest.fixture
def toy_files(tmp_path):
    train = write(tmp_path / "train.jsonl", trigger_corpus(120, seed=1))
    dev = write(tmp_path / "dev.jsonl", trigger_corpus(40, seed=2, id_prefix="d"))
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "paths.train": train,
        "paths.dev": dev,
        "paths.model": str(tmp_path / "model.bin"),
        "paths.telemetry": str(tmp_path / "telemetry.csv"),
        "features.hash_dim": 65536,
    }))
    return tmp_path, str(config)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_stats(capsys, toy_files):
    tmp, _ = toy_files
    code, out, _ = run(capsys, "stats", str(tmp / "train.jsonl"))
    assert code == 0
    assert "samples: 120" in out and "Loaded_Language" in out
    code, out, _ = run(capsys, "stats", "--json", str(tmp / "train.jsonl"), str(tmp / "dev.jsonl"))
    data = json.loads(out)
    assert [d["sample_count"] for d in data] == [120, 40]


def test_stats_errors(capsys, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert run(capsys, "stats", str(empty))[0] == 2
    code, _, err = run(capsys, "stats", str(tmp_path / "missing.jsonl"))
    assert code == 2 and "cannot read" in err


def test_train_predict_score_analyze(capsys, toy_files):
    tmp, config = toy_files
    code, out, _ = run(capsys, "train", "--config", config, "--quiet")
    assert code == 0
    assert "final validation span micro-F1: 1.0000" in out
    with open(tmp / "telemetry.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 15
    assert list(rows[0]) == ["epoch", "phase", "train_loss", "train_acc", "val_loss", "val_acc", "val_span_f1"]

    pred = tmp / "pred.jsonl"
    code, _, _ = run(capsys, "predict", str(tmp / "model.bin"), str(tmp / "train.jsonl"), str(pred))
    assert code == 0
    lines = pred.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 120
    parsed, warnings = parse_dataset(lines)
    assert warnings == [] and all(set(json.loads(l)) == {"id", "labels"} for l in lines)

    code, out, _ = run(capsys, "score", "--json", str(tmp / "train.jsonl"), str(pred))
    assert code == 0 and json.loads(out)["micro"]["f1"] == 1.0

    code, out, _ = run(capsys, "analyze", "--json", str(tmp / "train.jsonl"), str(pred))
    report = json.loads(out)
    assert code == 0 and report["off_diagonal_chars"] == 0


def test_predict_with_text(capsys, toy_files):
    tmp, config = toy_files
    assert run(capsys, "train", "--config", config, "--set", "train.phase1_epochs=1",
               "--set", "train.phase2_epochs=0", "--quiet")[0] == 0
    out = tmp / "p.jsonl"
    assert run(capsys, "predict", "--with-text", str(tmp / "model.bin"), str(tmp / "dev.jsonl"), str(out))[0] == 0
    first = json.loads(out.read_text(encoding="utf-8").splitlines()[0])
    assert "text" in first


def test_train_zero_epochs_writes_zero_model(capsys, toy_files):
    tmp, config = toy_files
    code, _, _ = run(capsys, "train", "--config", config, "--set", "train.phase1_epochs=0",
                     "--set", "train.phase2_epochs=0", "--quiet")
    assert code == 0
    model = load_model(str(tmp / "model.bin"))
    assert not np.any(model.emissions) and not np.any(model.transitions)
    assert (tmp / "telemetry.csv").read_text().strip() == "epoch,phase,train_loss,train_acc,val_loss,val_acc,val_span_f1"


def test_train_is_byte_identical_across_runs(capsys, toy_files, tmp_path):
    tmp, config = toy_files
    args = ("--set", "train.phase1_epochs=2", "--set", "train.phase2_epochs=1", "--seed", "5", "--quiet")
    assert run(capsys, "train", "--config", config, "--model", str(tmp / "a.bin"), *args)[0] == 0
    assert run(capsys, "train", "--config", config, "--model", str(tmp / "b.bin"), *args)[0] == 0
    assert (tmp / "a.bin").read_bytes() == (tmp / "b.bin").read_bytes()


def test_config_errors_exit_2_before_training(capsys, toy_files, tmp_path):
    _, config = toy_files
    code, _, err = run(capsys, "train", "--config", config, "--set", "train.phase1_epoch=3")
    assert code == 2 and "unknown config key" in err
    code, _, err = run(capsys, "train", "--config", config, "--set", "train.phase1_epochs=-1")
    assert code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"features.hash_dim": "big"}')
    assert run(capsys, "train", "--config", str(bad))[0] == 2


def test_flags_override_config(capsys, toy_files):
    tmp, config = toy_files
    alt = tmp / "alt.bin"
    code, _, _ = run(capsys, "train", "--config", config, "--model", str(alt), "--set", "train.phase1_epochs=1",
                     "--set", "train.phase2_epochs=0", "--quiet")
    assert code == 0 and alt.exists()


def test_predict_rejects_bad_model(capsys, tmp_path, toy_files):
    tmp, _ = toy_files
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"PROPSPAN" + (99).to_bytes(4, "little") + (0).to_bytes(4, "little"))
    code, _, err = run(capsys, "predict", str(junk), str(tmp / "dev.jsonl"), str(tmp_path / "o.jsonl"))
    assert code == 2 and "version" in err


def test_score_leaderboard_and_id_mismatch(capsys, tmp_path):
    gold = [Sample("1", "x" * 20, (SpanAnnotation("L", 0, 10),)), Sample("2", "y" * 20)]
    gold_path = write(tmp_path / "gold.jsonl", gold)
    perfect = write(tmp_path / "perfect.jsonl", gold)
    half = write(tmp_path / "half.jsonl", [Sample("1", "x" * 20, (SpanAnnotation("L", 5, 15),))])
    code, out, _ = run(capsys, "score", gold_path, half, perfect)
    assert code == 0
    rows = out.strip().splitlines()
    assert len(rows) == 3 and "perfect" in rows[1] and "half" in rows[2]

    code, out, _ = run(capsys, "score", gold_path, perfect)
    assert code == 0 and "F1=1.0000" in out

    stray = write(tmp_path / "stray.jsonl", [Sample("1", None), Sample("zz9", None), Sample("zz10", None)])
    code, _, err = run(capsys, "score", gold_path, stray)
    assert code == 2 and "'zz9'" in err


def test_analyze_reports_constructed_confusion(capsys, tmp_path):
    gold = [Sample("1", "x" * 30, (SpanAnnotation("L", 0, 10), SpanAnnotation("N", 15, 20)))]
    pred = [Sample("1", None, (SpanAnnotation("N", 0, 10), SpanAnnotation("N", 15, 20)))]
    g = write(tmp_path / "g.jsonl", gold)
    p = write(tmp_path / "p.jsonl", pred)
    code, out, _ = run(capsys, "analyze", "--json", g, p)
    report = json.loads(out)
    assert code == 0
    assert report["top_confused"][0] == {"gold": "L", "pred": "N", "chars": 10}
    assert report["total_chars"] == 30
    code, score_out, _ = run(capsys, "score", "--json", g, p)
    totals = json.loads(score_out)["totals"]
    assert (totals["gold_spans"], totals["pred_spans"]) == (report["gold_spans"], report["pred_spans"])
    code, text, _ = run(capsys, "analyze", g, p)
    assert "L -> N: 10" in text
