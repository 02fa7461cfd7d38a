from wrsn_sched.formaters.checkpoint import CheckpointFormater
from wrsn_sched.formaters.csv import (
    CoverageCsvFormater,
    CsvFormater,
    DagEdgesCsvFormater,
    EpisodeTraceCsvFormater,
    GraphEdgesCsvFormater,
    SolverResultCsvFormater,
    SweepRunsCsvFormater,
    SweepSummaryCsvFormater,
    SweepTimingCsvFormater,
    TrainingLogCsvFormater,
)
from wrsn_sched.formaters.instance import InstanceFormater, load_instance, save_instance
