import pytest

from wrsn_sched import cli
from wrsn_sched.formaters import SweepSummaryCsvFormater, load_instance, save_instance


def _run(argv):
    with pytest.raises(SystemExit) as exit_info:
        cli.main(argv)
    return exit_info.value.code


def _rows(path):
    return path.read_text().splitlines()


def test_gen_then_solve(tmp_path, capsys):
    assert _run(["gen", "--variant", "p2", "--n", "6", "--seed", "2", "--out", str(tmp_path)]) == cli.EXIT_OK
    instance_file = tmp_path / "p2_n6_s2.wrsn"
    assert load_instance(instance_file).n == 6

    out = tmp_path / "solve"
    argv = ["solve", "-i", str(instance_file), "--solvers", "greedy,brute,mst", "--out", str(out)]
    assert _run(argv) == cli.EXIT_OK
    results = _rows(out / "results.csv")
    assert results[0] == "solver,feasible,objective,distance_m,energy_J,wall_ms,status"
    assert [row.split(",")[0] for row in results[1:]] == ["greedy", "brute", "mst"]
    assert (out / "trace_greedy.csv").exists()
    assert "greedy: objective=" in capsys.readouterr().out


def test_require_feasible(tmp_path, p2_line):
    instance_file = save_instance(p2_line, tmp_path / "line")
    argv = ["solve", "-i", str(instance_file), "--solvers", "dp", "--out", str(tmp_path)]
    assert _run(argv) == cli.EXIT_OK
    assert _run(argv + ["--require-feasible"]) == cli.EXIT_FAILED


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--solvers", "simplex", "--n", "3"],
        ["solve", "--instance", "absent.wrsn"],
        ["sweep", "--axis", "speed", "--values", "1"],
        ["solve", "--n", "0"],
    ],
)
def test_invalid_input(tmp_path, argv):
    assert _run(argv + ["--out", str(tmp_path)]) == cli.EXIT_INVALID


def test_config_file(tmp_path):
    config = tmp_path / "sched.conf"
    config.write_text(f"variant = p2\nn = 4\nsolvers = greedy\nout = {tmp_path / 'from_file'}\n")
    assert _run(["solve", "-c", str(config)]) == cli.EXIT_OK
    assert (tmp_path / "from_file" / "results.csv").exists()


def test_dump_commands(tmp_path, p3_triple):
    instance_file = save_instance(p3_triple, tmp_path / "triple")
    assert _run(["dump-graph", "-i", str(instance_file), "--dt", "100", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert _rows(tmp_path / "edges.csv")[0] == "src,dst,weight_m"
    assert _rows(tmp_path / "dag.csv")[0] == "src_node,src_t,dst_node,dst_t"

    assert _run(["dump-coverage", "-i", str(instance_file), "--out", str(tmp_path)]) == cli.EXIT_OK
    assert _rows(tmp_path / "coverage.csv") == ["subregion_id,cover_count,r_ai,T,deficient", "0,3,3,2,false"]


def test_train_then_solve(tmp_path):
    out = tmp_path / "model"
    argv = ["train", "--variant", "p2", "--n", "4", "--episodes", "2", "--out", str(out)]
    assert _run(argv) == cli.EXIT_OK
    checkpoint = out / "params.params"
    assert checkpoint.exists()
    assert len(_rows(out / "training.csv")) == 3

    argv = ["solve", "--variant", "p2", "--n", "4", "--solvers", "dqn", "--checkpoint", str(checkpoint)]
    assert _run(argv + ["--out", str(tmp_path / "solve")]) == cli.EXIT_OK


def test_sweep(tmp_path):
    argv = ["sweep", "--variant", "p2", "--axis", "n", "--values", "3,4", "--solvers", "greedy,random"]
    assert _run(argv + ["--repetitions", "1", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert len(_rows(tmp_path / "runs.csv")) == 1 + 2 * 2
    summary = SweepSummaryCsvFormater().read(tmp_path / "summary.csv")
    assert [(row["value"], row["solver"]) for row in summary] == [
        ("3", "greedy"),
        ("3", "random"),
        ("4", "greedy"),
        ("4", "random"),
    ]
    assert (tmp_path / "timing.csv").exists()


def test_binary_instance_file(tmp_path, capsys):
    instance_file = tmp_path / "garbage.wrsn"
    instance_file.write_bytes(b"wrsn-instance v1 p3\n\xff\xfe garbage\n")
    assert _run(["solve", "--instance", str(instance_file), "--out", str(tmp_path)]) == cli.EXIT_INVALID
    assert "Unexpected error" not in capsys.readouterr().out
