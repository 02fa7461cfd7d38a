"""Text checkpoint of the embedding parameters.

    wrsn-params v1 p=<p> dx=<d_x> rounds=<T>
    theta1 <rows> <cols>
    <cols values>        # one line per row, repr floats
    ...
    theta7 <rows> <cols>
    ...
"""
from pathlib import Path
from typing import Dict, Iterator, List, Tuple

import numpy as np

from wrsn_sched.embed import PARAM_NAMES, EmbeddingParams
from wrsn_sched.errors import CheckpointError, InstanceParseError
from wrsn_sched.formater import WrsnFormater, number, parse_fields

MAGIC = "wrsn-params"
VERSION = "v1"


class CheckpointFormater(WrsnFormater):
    @property
    def ext(self):
        return ".params"

    @property
    def name(self):
        return "checkpoint"

    def dumps(self, params: EmbeddingParams) -> str:
        lines = [f"{MAGIC} {VERSION} p={params.p} dx={params.d_x} rounds={params.rounds}"]
        for name, matrix in params.as_dict().items():
            rows, cols = matrix.shape
            lines.append(f"{name} {rows} {cols}")
            lines += [" ".join(number(value) for value in row) for row in matrix]
        return "\n".join(lines) + "\n"

    def loads(self, text: str) -> EmbeddingParams:
        lines: Iterator[Tuple[int, str]] = (
            (index, line.strip()) for index, line in enumerate(text.splitlines(), start=1) if line.strip()
        )
        try:
            index, header = next(lines)
        except StopIteration:
            raise CheckpointError("empty checkpoint")
        tokens = header.split()
        if tokens[:2] != [MAGIC, VERSION]:
            raise CheckpointError(f"line {index}: expected '{MAGIC} {VERSION}' header, got {header!r}")
        try:
            fields = parse_fields(tokens[2:], index)
            p, d_x, rounds = (int(fields[key]) for key in ("p", "dx", "rounds"))
        except (InstanceParseError, KeyError, ValueError) as e:
            raise CheckpointError(f"line {index}: bad header {header!r}: {e}")

        matrices: Dict[str, np.ndarray] = {}
        for index, line in lines:
            tokens = line.split()
            if len(tokens) != 3 or tokens[0] not in PARAM_NAMES:
                raise CheckpointError(f"line {index}: expected 'theta<k> rows cols', got {line!r}")
            name = tokens[0]
            if name in matrices:
                raise CheckpointError(f"line {index}: {name} given twice")
            try:
                shape = (int(tokens[1]), int(tokens[2]))
            except ValueError:
                raise CheckpointError(f"line {index}: bad shape for {name}")
            rows: List[List[float]] = []
            for _ in range(shape[0]):
                try:
                    index, row = next(lines)
                    values = [float(value) for value in row.split()]
                except StopIteration:
                    raise CheckpointError(f"{name} truncated after {len(rows)} of {shape[0]} rows")
                except ValueError:
                    raise CheckpointError(f"line {index}: non-numeric value in {name}")
                if len(values) != shape[1]:
                    raise CheckpointError(f"line {index}: {name} row has {len(values)} values, expected {shape[1]}")
                rows.append(values)
            matrices[name] = np.array(rows, dtype=float).reshape(shape)

        missing = [name for name in PARAM_NAMES if name not in matrices]
        if missing:
            raise CheckpointError(f"missing matrices {missing}")
        params = EmbeddingParams(rounds=rounds, **matrices)
        if (params.p, params.d_x) != (p, d_x):
            raise CheckpointError(f"header announces p={p} dx={d_x}, matrices have p={params.p} dx={params.d_x}")
        return params

    def read(self, filename: Path) -> EmbeddingParams:
        filename = Path(filename)
        if not filename.exists() and self.with_ext(filename).exists():
            filename = self.with_ext(filename)
        try:
            raw = Path(filename).read_bytes()
        except OSError as e:
            raise CheckpointError(f"can not read checkpoint {filename}: {e}")
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"checkpoint {filename} is not UTF-8 text, invalid byte at offset {e.start}")
        params = self.loads(text)
        self.log.info(f"Loaded parameters p={params.p} rounds={params.rounds} from {filename}")
        return params

    def write(self, filename: Path, data: EmbeddingParams) -> Path:
        filename = self.with_ext(filename)
        filename.parent.mkdir(parents=True, exist_ok=True)
        filename.write_text(self.dumps(data), encoding="utf-8")
        self.log.info(f"Saved parameters p={data.p} rounds={data.rounds} to {filename}")
        return filename
