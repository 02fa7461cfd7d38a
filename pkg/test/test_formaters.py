import numpy as np
import pytest

from wrsn_sched.embed import EmbeddingParams
from wrsn_sched.envs import replay_schedule, schedule_trace
from wrsn_sched.errors import CheckpointError, InstanceError, InstanceParseError, InstanceValidationError
from wrsn_sched.formaters import (
    CheckpointFormater,
    CoverageCsvFormater,
    EpisodeTraceCsvFormater,
    GraphEdgesCsvFormater,
    InstanceFormater,
    SolverResultCsvFormater,
    load_instance,
    save_instance,
)
from wrsn_sched.formaters.csv import cell
from wrsn_sched.geometry import build_subregions
from wrsn_sched.graph import build_graph, edge_rows
from wrsn_sched.instances import GenParams, Variant, generate_instance
from wrsn_sched.solver import SolverResult


@pytest.mark.parametrize("variant", list(Variant))
def test_instance_file_keeps_every_field(tmp_path, variant):
    params = GenParams.for_variant(variant, side=200.0) if variant is Variant.P3_KCOVERAGE else None
    instance = generate_instance(variant, 5, params, seed=4)
    path = save_instance(instance, tmp_path / "instance")
    assert path.suffix == ".wrsn"
    assert load_instance(path) == instance


def test_instance_file_comments_and_order(p2_line):
    formater = InstanceFormater()
    text = "# generated by hand\n\n" + formater.dumps(p2_line).replace("node id=1 x=100.0", "node x=100.0 id=1")
    assert formater.loads(text) == p2_line


def test_truncated_instance_file(p2_line):
    formater = InstanceFormater()
    lines = formater.dumps(p2_line).splitlines()
    with pytest.raises(InstanceParseError, match="truncated"):
        formater.loads("\n".join(lines[:-1]))
    with pytest.raises(InstanceParseError, match="truncated"):
        formater.loads(lines[0])


def test_bad_instance_fields(p2_line):
    formater = InstanceFormater()
    text = formater.dumps(p2_line)
    with pytest.raises(InstanceParseError) as error:
        formater.loads(text.replace("B0=0.0", "B0=lots", 1))
    assert error.value.field == "B0"
    assert error.value.line == 5
    with pytest.raises(InstanceParseError):
        formater.loads(text.replace("wrsn-instance v1", "wrsn-instance v9"))
    with pytest.raises(InstanceParseError):
        formater.loads(text + "depot x=1\n")
    with pytest.raises(InstanceParseError):
        formater.loads(text + "wp id=9 t=0.0 x=1.0 y=1.0\n")


def test_instance_file_is_validated(p2_line):
    formater = InstanceFormater()
    text = formater.dumps(p2_line).replace("B0=0.0", "B0=20000.0", 1)
    with pytest.raises(InstanceValidationError):
        formater.loads(text)


def test_missing_instance_file(tmp_path):
    with pytest.raises(InstanceError):
        load_instance(tmp_path / "absent.wrsn")


def test_checkpoint_round_trip(tmp_path):
    params = EmbeddingParams.init(p=3, rounds=2, rng=np.random.default_rng(9))
    formater = CheckpointFormater()
    path = formater.write(tmp_path / "nested" / "model", params)
    assert path.name == "model.params"
    loaded = formater.read(tmp_path / "nested" / "model")
    assert loaded.rounds == 2
    for name, value in params.as_dict().items():
        assert np.array_equal(getattr(loaded, name), value)


def test_bad_checkpoints(tmp_path):
    formater = CheckpointFormater()
    text = formater.dumps(EmbeddingParams.init(p=2, rounds=1))
    with pytest.raises(CheckpointError):
        formater.loads("")
    with pytest.raises(CheckpointError):
        formater.loads(text.replace("wrsn-params", "other"))
    with pytest.raises(CheckpointError):
        formater.loads(text.replace("p=2", "p=3"))
    with pytest.raises(CheckpointError):
        formater.loads("\n".join(text.splitlines()[:-1]))
    with pytest.raises(CheckpointError):
        formater.read(tmp_path / "absent.params")


def test_cell():
    assert cell(None) == ""
    assert cell(True) == "true"
    assert cell(0.1) == "0.1"
    assert cell(3) == "3"


def test_result_and_trace_csv(tmp_path, p2_line):
    state = replay_schedule(p2_line, (1, 2))
    results = SolverResultCsvFormater()
    path = results.write(tmp_path / "results.csv", [SolverResult.from_state("greedy", state, 1.5)])
    rows = results.read(path)
    assert list(rows[0]) == ["solver", "feasible", "objective", "distance_m", "energy_J", "wall_ms", "status"]
    assert rows[0]["feasible"] == "true"
    assert float(rows[0]["objective"]) == 2.0

    trace = EpisodeTraceCsvFormater().dumps(schedule_trace(state))
    assert trace.splitlines()[0] == "step,vertex,insert_pos,reward,clock_s,dist_m,energy_J"
    assert len(trace.splitlines()) == 3


def test_coverage_csv(p3_triple):
    text = CoverageCsvFormater().dumps(build_subregions(p3_triple))
    assert text == "subregion_id,cover_count,r_ai,T,deficient\n0,3,3,2,false\n"


def test_edges_csv(p2_line):
    text = GraphEdgesCsvFormater().dumps(edge_rows(build_graph(p2_line)))
    assert text.splitlines() == ["src,dst,weight_m", "1,2,100.0", "1,3,200.0", "2,3,100.0"]


def test_binary_files_are_parse_errors(tmp_path):
    garbage = b"wrsn-instance v1 p3\n\xff\xfe garbage\n"
    instance_file = tmp_path / "garbage.wrsn"
    instance_file.write_bytes(garbage)
    with pytest.raises(InstanceParseError, match="offset 20") as error:
        load_instance(instance_file)
    assert error.value.line == 2

    checkpoint_file = tmp_path / "garbage.params"
    checkpoint_file.write_bytes(garbage)
    with pytest.raises(CheckpointError, match="UTF-8"):
        CheckpointFormater().read(checkpoint_file)
