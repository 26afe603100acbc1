import json
import os

import pytest

from conftest import FIXTURES
from quicwf import cli, reports
from quicwf.ingest import load_traces


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_k_spec_forms():
    assert cli.parse_k_spec("40") == [40]
    assert cli.parse_k_spec("5,10,40") == [5, 10, 40]
    assert cli.parse_k_spec("5:200:5") == list(range(5, 201, 5))
    assert len(cli.parse_k_spec(cli.build_parser().parse_args(
        ["sweep", "x", "--out", "y"]).k)) == 40
    for bad in ("0", "a", "5:1", "1:2:3:4", "5:10:0"):
        with pytest.raises(cli.CliError) as e:
            cli.parse_k_spec(bad)
        assert e.value.code == cli.EXIT_PARAMS


def test_ingest_happy_path(tmp_path, capsys):
    out = tmp_path / "gq.jsonl"
    assert run("ingest", os.path.join(FIXTURES, "gquic_second_chlo.pcap"), "--protocol", "gquic",
               "--out", out) == 0
    assert "conversations=2 tailored=2" in capsys.readouterr().out
    assert len(load_traces(out)) == 2
    assert reports.read_manifest(out)["protocol"] == "gquic"


def test_ingest_wrong_protocol_exit_3(tmp_path):
    assert run("ingest", os.path.join(FIXTURES, "https_ccs_rst.pcap"), "--protocol", "iquic",
               "--out", tmp_path / "x.jsonl") == cli.EXIT_EMPTY


def test_ingest_missing_file_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.pcap"
    assert run("ingest", missing, "--protocol", "https", "--out", tmp_path / "x") == 2
    assert str(missing) in capsys.readouterr().err


def test_ingest_garbage_exit_2(tmp_path):
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(b"not a capture at all")
    assert run("ingest", bad, "--protocol", "https", "--out", tmp_path / "x") == 2


def test_synth_counts_and_repeatability(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("synth", "--sites", 20, "--visits", 50, "--seed", 3, "--out", a) == 0
    assert len(load_traces(a)) == 1000
    assert run("synth", "--sites", 20, "--visits", 50, "--seed", 3, "--out", b) == 0
    # the manifest records the output path, so compare everything after it
    assert a.read_text().split("\n", 1)[1] == b.read_text().split("\n", 1)[1]


def test_synth_loss_in_manifest(tmp_path):
    out = tmp_path / "l.jsonl"
    assert run("synth", "--sites", 3, "--visits", 2, "--loss", 0.05, "--out", out) == 0
    man = reports.read_manifest(out)
    assert man["network"]["loss"] == 0.05 and "--loss" in man["argv"]
    assert man["version"]


def test_synth_invalid_exit_4(tmp_path):
    assert run("synth", "--loss", 1.5, "--out", tmp_path / "x") == cli.EXIT_PARAMS
    assert run("synth", "--sites", 1, "--out", tmp_path / "x") == cli.EXIT_PARAMS
    assert run("synth", "--mtu", 100, "--out", tmp_path / "x") == cli.EXIT_PARAMS


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("c") / "t.jsonl"
    assert run("synth", "--sites", 6, "--visits", 10, "--out", path) == 0
    return path


def test_sweep_single_k_rows(corpus, tmp_path):
    out = tmp_path / "sw"
    assert run("sweep", corpus, "--k", 20, "--algo", "rf", "--algo", "nb", "--folds", 5,
               "--trees", 10, "--out", out) == 0
    lines = (tmp_path / "sw.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1].split(",")[:5] == ["k", "algorithm", "feature_set", "early", "mean_accuracy"]
    assert [l.split(",")[:2] for l in lines[2:]] == [["20", "RF"], ["20", "NB"]]
    rows = [json.loads(l) for l in (tmp_path / "sw.jsonl").read_text().splitlines()]
    assert "manifest" in rows[0] and len(rows) == 3
    man = json.loads((tmp_path / "sw.manifest.json").read_text())
    assert man["algorithms"] == ["RF", "NB"] and man["ks"] == [20]


def test_sweep_stability_line(corpus, tmp_path):
    out = tmp_path / "st"
    assert run("sweep", corpus, "--k", "5,10", "--features", "transfer", "--folds", 5,
               "--trees", 5, "--out", out) == 0
    last = json.loads((tmp_path / "st.jsonl").read_text().splitlines()[-1])
    assert last["variance"] == "population" and "burst_count" in last["importance_stability"]


def test_topa_layout_and_consistency(corpus, tmp_path):
    out = tmp_path / "ta.csv"
    assert run("topa", corpus, "--k", "5:40:5", "--a-max", 5, "--folds", 5, "--trees", 10,
               "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "k,a=1,a=2,a=3,a=4,a=5,improve(1->5)"
    table = [l.split(",") for l in lines[2:]]
    assert len(table) == 8 and all(len(r) == 7 for r in table)
    for r in table:
        vals = [float(v) for v in r[1:6]]
        assert vals == sorted(vals) and float(r[6]) >= 0
    sw = tmp_path / "sw"
    assert run("sweep", corpus, "--k", "5:40:5", "--folds", 5, "--trees", 10, "--out", sw) == 0
    sweep_acc = [l.split(",")[4] for l in (tmp_path / "sw.csv").read_text().splitlines()[2:]]
    assert sweep_acc == [r[1] for r in table]


def test_topa_a_max_too_large(corpus, tmp_path):
    assert run("topa", corpus, "--a-max", 50, "--out", tmp_path / "x") == cli.EXIT_PARAMS


def test_eval_failure_exit_5(tmp_path, capsys):
    path = tmp_path / "tiny.jsonl"
    path.write_text('{"protocol": "IQUIC", "label": "a"}\n{"ts": 0.0, "dir": "+", "size": 60}\n'
                    '{"protocol": "IQUIC", "label": "b"}\n{"ts": 0.0, "dir": "+", "size": 60}\n')
    assert run("sweep", path, "--k", 5, "--folds", 2, "--out", tmp_path / "o") == cli.EXIT_EVAL
    assert "k=5, algorithm=RF" in capsys.readouterr().err


def test_bad_trace_file_exit_2(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"label": "a"}\n')
    assert run("sweep", path, "--out", tmp_path / "o") == 2
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert run("sweep", empty, "--out", tmp_path / "o") == cli.EXIT_EMPTY


def test_env_override_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("QUICWF_SEED", "17")
    monkeypatch.setenv("QUICWF_SITES", "3")
    out = tmp_path / "e.jsonl"
    assert run("synth", "--visits", 2, "--out", out) == 0
    argv = reports.read_manifest(out)["argv"]
    assert argv[argv.index("--seed") + 1] == "17" and argv[argv.index("--sites") + 1] == "3"
    assert run("synth", "--visits", 2, "--seed", 4, "--out", out) == 0
    argv = reports.read_manifest(out)["argv"]
    assert argv[argv.index("--seed") + 1] == "4"


def test_env_algo_list(corpus, tmp_path, monkeypatch):
    monkeypatch.setenv("QUICWF_ALGO", "knn,nb")
    out = tmp_path / "s"
    assert run("sweep", corpus, "--k", 10, "--folds", 5, "--out", out) == 0
    assert reports.read_manifest(tmp_path / "s.csv")["algorithms"] == ["KNN", "NB"]
    assert run("sweep", corpus, "--k", 10, "--folds", 5, "--algo", "rf", "--trees", 5,
               "--out", out) == 0
    assert reports.read_manifest(tmp_path / "s.csv")["algorithms"] == ["RF"]


def test_featurize(corpus, tmp_path):
    out = tmp_path / "m.csv"
    assert run("featurize", corpus, "--features", "transfer", "--k", 10, "--out", out) == 0
    header = out.read_text().splitlines()[0]
    assert header.startswith("unique_size:0:1461") and header.endswith("label")


def test_rerun_detects_changed_input(corpus, tmp_path):
    copy = tmp_path / "c.jsonl"
    copy.write_bytes(corpus.read_bytes())
    out = tmp_path / "r"
    assert run("sweep", copy, "--k", 10, "--folds", 5, "--trees", 5, "--out", out) == 0
    with open(copy, "a") as fh:
        fh.write('{"protocol": "IQUIC", "label": "zz"}\n')
    assert run("rerun", tmp_path / "r.csv") == 2
    assert run("rerun", tmp_path / "nothing.csv") == 2


def test_bad_env_value_is_param_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("QUICWF_SEED", "x")
    assert cli.main(["synth", "--sites", "2", "--visits", "2", "--out", str(tmp_path / "c.jsonl")]) == 4
    assert "QUICWF_SEED" in capsys.readouterr().err
