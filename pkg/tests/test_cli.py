import json

import pytest

from lexst.cli import main


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main([
        "synth", "--out-dir", str(out), "--num-classes", "3", "--vocab-size", "80",
        "--docs-per-class", "30", "--test-per-class", "8", "--doc-len", "10",
        "--keyword-slots", "4", "--seed", "1",
    ]) == 0
    return out


def _data_args(synth):
    return ["--data", str(synth / "data.jsonl"), "--test", str(synth / "test.jsonl"),
            "--kb", str(synth / "kb.tsv"), "--per-class", "5"]


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "seeds": [0],
        "selftrain": {
            "train": {"learning_rate": 0.05, "max_epochs": 4, "emb_dim": 8, "attn_dim": 4},
            "max_iterations": 2,
        },
    }))
    return path


def test_synth_writes_files(synth):
    assert sum(1 for _ in open(synth / "data.jsonl")) == 90
    assert (synth / "kb.tsv").read_text().count("\tsynonym\t") > 0


def test_selftrain_run_directory(synth, small_config, tmp_path, capsys):
    out = tmp_path / "run"
    args = ["selftrain", "--config", str(small_config), "--out-dir", str(out), "--dump-selection",
            "--lambda", "0.5", "--tau", "1", *_data_args(synth)]
    assert main(args) == 0
    summary = json.loads(capsys.readouterr().out)
    assert 0.0 <= summary["test_accuracy"] <= 1.0
    for name in ("history.json", "model.json", "lexicon.json", "manifest.json", "iter_00"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"]["selftrain"]["selection"] == {"lambdas": [0.5], "tau": 1}
    first = json.loads((out / "selection.jsonl").read_text().splitlines()[0])
    assert {"iteration", "doc_index", "probs", "chosen", "reason"} <= set(first)

    again = tmp_path / "run2"
    assert main([*args[:4], str(again), *args[5:]]) == 0
    assert (out / "history.json").read_bytes() == (again / "history.json").read_bytes()


def test_lexicon_dump_and_augment(synth, small_config, tmp_path, capsys):
    run = tmp_path / "t"
    assert main(["train", "--config", str(small_config), "--out-dir", str(run), *_data_args(synth)]) == 0
    capsys.readouterr()
    assert main(["lexicon", "dump", "--model", str(run / "model.json"), "--data", str(synth / "data.jsonl"),
                 "--k-percent", "50"]) == 0
    lexicon = json.loads(capsys.readouterr().out)
    assert set(lexicon) == {"class0", "class1", "class2"}

    out = tmp_path / "aug.jsonl"
    assert main(["augment", "--data", str(synth / "data.jsonl"), "--kb", str(synth / "kb.tsv"),
                 "--copies", "2", "--output", str(out)]) == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(rows) == 180 and {"text", "label"} <= set(rows[0])


def test_ablation_and_ksweep(synth, small_config, tmp_path, capsys):
    assert main(["ablation", "--config", str(small_config), "--out-dir", str(tmp_path), *_data_args(synth)]) == 0
    assert set(json.loads(capsys.readouterr().out)) == {"supervised", "classic_st", "lexicon_st", "full_lst"}
    assert (tmp_path / "report.json").exists()
    assert main(["ksweep", "--config", str(small_config), "--ks", "10", "100", *_data_args(synth)]) == 0
    assert set(json.loads(capsys.readouterr().out)) == {"k=10", "k=100"}


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--data", "missing.jsonl", "--test", "missing.jsonl"],
        ["selftrain", "--data", "missing.jsonl", "--test", "x"],
        ["train"],
    ],
)
def test_errors_exit_nonzero(argv, tmp_path, capsys):
    if argv[0] == "selftrain":
        argv = argv + ["--out-dir", str(tmp_path)]
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_bad_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code != 0
