import csv
import io
from abc import abstractmethod
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Tuple

from wrsn_sched.dqn import TrainingLogEntry
from wrsn_sched.envs import EpisodeStep
from wrsn_sched.formater import WrsnFormater, number
from wrsn_sched.geometry import SubregionTable
from wrsn_sched.solver import SolverResult

if TYPE_CHECKING:
    from wrsn_sched.experiment import SweepRun, SweepSummary, SweepTiming


def cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return number(value)
    return str(value)


class CsvFormater(WrsnFormater):
    """One CSV file per dump, one row per record."""

    @property
    def ext(self):
        return ".csv"

    @abstractmethod
    def get_fieldnames(self) -> List[str]:
        ...

    @abstractmethod
    def build_row(self, record: Any) -> Dict[str, Any]:
        ...

    def dumps(self, records: Iterable[Any]) -> str:
        stream = io.StringIO()
        writer = csv.DictWriter(stream, fieldnames=self.get_fieldnames(), lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow({key: cell(value) for key, value in self.build_row(record).items()})
        return stream.getvalue()

    def read(self, filename: Path) -> List[Dict[str, str]]:
        with open(filename, "r", newline="") as csv_file:
            rows = list(csv.DictReader(csv_file))
        self.log.info(f"{len(rows)} {self.name} rows read from {filename}")
        return rows

    def write(self, filename: Path, data: Iterable[Any]) -> Path:
        filename = self.with_ext(filename)
        filename.parent.mkdir(parents=True, exist_ok=True)
        text = self.dumps(data)
        with open(filename, "w", newline="") as csv_file:
            csv_file.write(text)
        self.log.info(f"{text.count(chr(10)) - 1} {self.name} rows written to {filename}")
        return filename


class SolverResultCsvFormater(CsvFormater):
    @property
    def name(self):
        return "results"

    def get_fieldnames(self) -> List[str]:
        return ["solver", "feasible", "objective", "distance_m", "energy_J", "wall_ms", "status"]

    def build_row(self, record: SolverResult) -> Dict[str, Any]:
        return {
            "solver": record.solver,
            "feasible": record.feasible,
            "objective": record.objective,
            "distance_m": record.distance_m,
            "energy_J": record.energy_j,
            "wall_ms": record.wall_ms,
            "status": record.status,
        }


class EpisodeTraceCsvFormater(CsvFormater):
    @property
    def name(self):
        return "trace"

    def get_fieldnames(self) -> List[str]:
        return ["step", "vertex", "insert_pos", "reward", "clock_s", "dist_m", "energy_J"]

    def build_row(self, record: EpisodeStep) -> Dict[str, Any]:
        return {
            "step": record.step,
            "vertex": record.vertex,
            "insert_pos": record.insert_pos,
            "reward": record.reward,
            "clock_s": record.clock,
            "dist_m": record.distance,
            "energy_J": record.energy,
        }


class TrainingLogCsvFormater(CsvFormater):
    @property
    def name(self):
        return "training"

    def get_fieldnames(self) -> List[str]:
        return ["episode", "objective", "epsilon", "loss_mean", "eval_objective"]

    def build_row(self, record: TrainingLogEntry) -> Dict[str, Any]:
        return {
            "episode": record.episode,
            "objective": record.objective,
            "epsilon": record.epsilon,
            "loss_mean": record.loss_mean,
            "eval_objective": record.eval_objective,
        }


class CoverageCsvFormater(CsvFormater):
    @property
    def name(self):
        return "coverage"

    def get_fieldnames(self) -> List[str]:
        return ["subregion_id", "cover_count", "r_ai", "T", "deficient"]

    def build_row(self, record: Tuple[int, SubregionTable]) -> Dict[str, Any]:
        index, table = record
        return {
            "subregion_id": index,
            "cover_count": len(table.covering[index]),
            "r_ai": table.requesting_counts[index],
            "T": table.table[index],
            "deficient": table.deficient[index],
        }

    def dumps(self, records: Any) -> str:
        if isinstance(records, SubregionTable):
            records = [(index, records) for index in range(records.m)]
        return super().dumps(records)


class GraphEdgesCsvFormater(CsvFormater):
    @property
    def name(self):
        return "edges"

    def get_fieldnames(self) -> List[str]:
        return ["src", "dst", "weight_m"]

    def build_row(self, record: Tuple[int, int, float]) -> Dict[str, Any]:
        src, dst, weight = record
        return {"src": src, "dst": dst, "weight_m": float(weight)}


class DagEdgesCsvFormater(CsvFormater):
    @property
    def name(self):
        return "dag"

    def get_fieldnames(self) -> List[str]:
        return ["src_node", "src_t", "dst_node", "dst_t"]

    def build_row(self, record: Tuple[int, float, int, float]) -> Dict[str, Any]:
        src, src_t, dst, dst_t = record
        return {"src_node": src, "src_t": float(src_t), "dst_node": dst, "dst_t": float(dst_t)}


class SweepRunsCsvFormater(CsvFormater):
    @property
    def name(self):
        return "runs"

    def get_fieldnames(self) -> List[str]:
        return [
            "variant",
            "axis",
            "value",
            "repetition",
            "seed",
            "solver",
            "feasible",
            "objective",
            "distance_m",
            "energy_J",
            "status",
        ]

    def build_row(self, record: "SweepRun") -> Dict[str, Any]:
        return {
            "variant": record.variant,
            "axis": record.axis,
            "value": record.value,
            "repetition": record.repetition,
            "seed": record.seed,
            "solver": record.solver,
            "feasible": record.feasible,
            "objective": record.objective,
            "distance_m": record.distance_m,
            "energy_J": record.energy_j,
            "status": record.status,
        }


class SweepSummaryCsvFormater(CsvFormater):
    @property
    def name(self):
        return "summary"

    def get_fieldnames(self) -> List[str]:
        return [
            "variant",
            "axis",
            "value",
            "solver",
            "runs",
            "feasible_rate",
            "objective_mean",
            "objective_std",
            "distance_mean",
            "distance_std",
            "energy_mean",
            "energy_std",
        ]

    def build_row(self, record: "SweepSummary") -> Dict[str, Any]:
        return {name: getattr(record, name) for name in self.get_fieldnames()}


class SweepTimingCsvFormater(CsvFormater):
    @property
    def name(self):
        return "timing"

    def get_fieldnames(self) -> List[str]:
        return ["axis", "value", "repetition", "solver", "wall_ms"]

    def build_row(self, record: "SweepTiming") -> Dict[str, Any]:
        return {name: getattr(record, name) for name in self.get_fieldnames()}
