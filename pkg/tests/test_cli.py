import json
import subprocess
import sys
from pathlib import Path

import pytest

from sparseknn.cli import main
from sparseknn.dataset import read_header

from sparseknn import _backend


def exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def gen(tmp_path, name, count, seed, *extra):
    out = tmp_path / name
    assert main(["generate", "--count", str(count), "--dims", "2000", "--features", "10:30",
                 "--seed", str(seed), "--out", str(out), *extra]) == 0
    return out


def test_generate_example(tmp_path):
    out = tmp_path / "r.sknj"
    assert main(["generate", "--count", "10000", "--dims", "10000", "--features", "80:120",
                 "--seed", "7", "--out", str(out)]) == 0
    assert read_header(out).vector_count == 10000


def test_generate_zero(tmp_path):
    out = tmp_path / "e.sknj"
    assert main(["generate", "--count", "0", "--out", str(out)]) == 0
    assert read_header(out).vector_count == 0


@pytest.mark.parametrize("argv", [
    ["generate", "--count", "5", "--features", "200:100", "--out", "x"],
    ["generate", "--count", "-1", "--out", "x"],
    ["generate", "--count", "5", "--weights", "1:1", "--out", "x"],
    ["join", "a", "b", "--algo", "nope"],
    ["bench", "--axis", "colour"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_1(argv, capsys):
    assert exit_code(argv) == 1


def test_join_bad_k_exit_1(tmp_path):
    r = gen(tmp_path, "r", 10, 1)
    assert main(["join", str(r), str(r), "-k", "0"]) == 1


def test_missing_file_exit_2(tmp_path):
    assert main(["join", str(tmp_path / "nope"), str(tmp_path / "nope")]) == 2


def test_corrupt_file_exit_2(tmp_path):
    bad = tmp_path / "bad.sknj"
    bad.write_bytes(b"junk" * 10)
    assert main(["join", str(bad), str(bad)]) == 2


def test_malformed_spectra_exit_2(tmp_path, capsys):
    src = tmp_path / "s.txt"
    src.write_text("# 1\n10.0 1.0\n12.0 x\n")
    assert main(["convert", "--in", str(src), "--out", str(tmp_path / "o.sknj")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_convert_golden(tmp_path):
    data = Path(__file__).parent / "data"
    out = tmp_path / "g.sknj"
    assert main(["convert", "--in", str(data / "golden_spectra.txt"), "--out", str(out)]) == 0
    assert out.read_bytes() == (data / "golden_spectra.sknj").read_bytes()


def test_join_defaults_and_report(tmp_path):
    r, s = gen(tmp_path, "r", 50, 1), gen(tmp_path, "s", 200, 2, "--first-id", "1000")
    out, report = tmp_path / "o.tsv", tmp_path / "rep.jsonl"
    assert main(["join", str(r), str(s), "--out", str(out), "--report", str(report)]) == 0
    rows = [line.split("\t") for line in out.read_text().splitlines()]
    per_r = {}
    for rid, rank, sid, score in rows:
        per_r.setdefault(rid, []).append((int(rank), float(score)))
    assert max(len(v) for v in per_r.values()) == 5
    for ranks in per_r.values():
        assert [x for x, _ in ranks] == list(range(1, len(ranks) + 1))
        assert [y for _, y in ranks] == sorted((y for _, y in ranks), reverse=True)
    rec = json.loads(report.read_text())
    assert rec["algorithm"] == "iiib" and rec["k"] == 5 and rec["buffer_pct"] == 50.0
    assert rec["result_rows"] == len(rows)
    assert rec["io_time"] + rec["cpu_time"] <= rec["wall_time"]


def test_algorithms_give_same_scores(tmp_path):
    r, s = gen(tmp_path, "r", 40, 3), gen(tmp_path, "s", 120, 4, "--first-id", "1000")
    outputs = {}
    for algo in ("bf", "iib", "iiib"):
        out = tmp_path / f"{algo}.tsv"
        assert main(["join", str(r), str(s), "--algo", algo, "--buffer-pct", "10", "-k", "3",
                     "--page-size", "1024", "--out", str(out), "--report", str(tmp_path / "rep")]) == 0
        outputs[algo] = out.read_text()
    assert outputs["bf"] == outputs["iib"] == outputs["iiib"]


def test_global_flags_after_subcommand(tmp_path):
    r = gen(tmp_path, "r", 20, 5)
    rep = tmp_path / "rep"
    with _backend.use(_backend.name()):
        assert main(["join", str(r), str(r), "--page-size", "512", "--backend", "python",
                     "--out", str(tmp_path / "o"), "--report", str(rep)]) == 0
    rec = json.loads(rep.read_text())
    assert rec["page_size"] == 512 and rec["backend"] == "python"


def test_bench_grid_and_replay(tmp_path):
    out = tmp_path / "bench.jsonl"
    assert main(["bench", "--axis", "k", "--algos", "bf,iiib", "--count", "60", "--dims", "500",
                 "--features", "5:15", "--workdir", str(tmp_path / "w"), "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 8
    assert sorted({(r["value"], r["algorithm"]) for r in records}) == sorted(
        (k, a) for k in (5, 10, 15, 20) for a in ("bf", "iiib"))
    for rec in records:
        assert rec["io_time"] + rec["cpu_time"] <= rec["wall_time"]
    # replay one record from its own fields
    rec = next(r for r in records if r["algorithm"] == "iiib" and r["value"] == 10)
    r, s = tmp_path / "r.sknj", tmp_path / "s.sknj"
    for path, count, seed in ((r, rec["r_count"], rec["r_seed"]), (s, rec["s_count"], rec["s_seed"])):
        assert main(["generate", "--count", str(count), "--dims", str(rec["dims"]),
                     "--features", "%d:%d" % tuple(rec["features"]), "--seed", str(seed),
                     "--out", str(path)]) == 0
    rep = tmp_path / "rep"
    assert main(["join", str(r), str(s), "--algo", "iiib", "-k", str(rec["k"]),
                 "--buffer-pages", str(rec["buffer_pages"]), "--out", str(tmp_path / "o"),
                 "--report", str(rep)]) == 0
    again = json.loads(rep.read_text())
    for key in ("feature_visits", "postings_built", "postings_visited", "residual_visits",
                "r_blocks_read", "s_blocks_read", "result_rows"):
        assert again[key] == rec[key], key


def test_bench_values_override(tmp_path):
    out = tmp_path / "b.jsonl"
    assert main(["bench", "--axis", "relative-size", "--values", "30,90", "--algos", "iib",
                 "--r-count", "20", "--dims", "300", "--features", "3:8", "--repeat", "2",
                 "--workdir", str(tmp_path / "w"), "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert [(r["s_count"], r["repeat"]) for r in records] == [(30, 0), (30, 1), (90, 0), (90, 1)]
    assert all(r["r_count"] == 20 for r in records)


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.sknj"
    proc = subprocess.run([sys.executable, "-m", "sparseknn", "generate", "--count", "3", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert read_header(out).vector_count == 3
