"""Reading and writing documents and CSV files."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from ..errors import IoError, SchemaError
from ..evaluator import Placement
from ..schema import PlacementDoc, WorkloadDoc, validate
from ..vnffg import Request, VnfType, request_from_spec, request_to_spec, type_to_spec, vnf_catalog


def read_document(path) -> dict:
    """YAML or JSON mapping from ``path``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError("", f"{path} is not valid YAML/JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("", f"{path} must hold a mapping at the top level")
    return data


def write_text(path, text: str, force: bool = False):
    path = Path(path)
    if path.exists() and not force:
        raise IoError(f"{path} exists; pass --force to overwrite")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}") from None


def write_document(path, data, force: bool = False):
    path = Path(path)
    if path.suffix == ".json":
        text = json.dumps(data, indent=1, sort_keys=False) + "\n"
    else:
        text = yaml.safe_dump(data, sort_keys=False)
    write_text(path, text, force)


# workloads ---------------------------------------------------------------

def workload_to_doc(requests: Sequence[Request], seed: int | None = None) -> dict:
    return {
        "seed": seed,
        "types": [type_to_spec(vt) for vt in vnf_catalog(requests).values()],
        "requests": [request_to_spec(r) for r in requests],
    }


def workload_from_doc(data: Mapping) -> list[Request]:
    doc = validate(WorkloadDoc, data)
    types = {t.id: VnfType(**t.model_dump()) for t in doc.types}
    out = []
    for k, r in enumerate(doc.requests):
        try:
            out.append(request_from_spec(r.model_dump(), types))
        except (ValueError, KeyError) as exc:
            raise SchemaError(f"requests.{k}", str(exc)) from None
    return out


def placement_from_doc(data: Mapping) -> Placement:
    doc = validate(PlacementDoc, data)
    return Placement.from_doc(doc.model_dump())


# CSV ---------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        # repr is locale independent and round-trips exactly
        return repr(v)
    if v is None:
        return ""
    return str(v)


def csv_text(rows: Iterable[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
