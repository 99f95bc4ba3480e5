"""
io.py

Plain-text persistence for the pipeline: trial CSVs, one-column sample CSVs,
per-subject triple CSVs, chain dumps and JSON result envelopes. Times are in
ms with at most three decimals; JSON carries no timestamps so that re-runs
with the same seed write identical bytes.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from logging_config import get_logger

from .errors import DataFormatError, SchemaVersionError
from .types import (
    SCHEMA_VERSION,
    Distribution,
    ExGaussianParams,
    MixtureSsrt,
    PosteriorChains,
    SessionMeta,
    SstDataset,
    SubjectClusterParams,
    SubjectTriples,
    Trial,
)
from .utils import SOFTWARE_VERSION

logger = get_logger(__name__)

PathLike = Union[str, Path]

TRIAL_COLUMNS = ["index", "kind", "ssd_ms", "rt_ms", "inhibited"]
TRIPLE_COLUMNS = ["subject", "mu", "sigma", "tau"]
COHORT_COLUMNS = ["subject", "cluster", "mu", "sigma", "tau"]
SAMPLE_COLUMN = "value"

_TRUE = {"true", "1"}
_FALSE = {"false", "0"}


def _fmt_ms(value: Optional[float]) -> str:
    if value is None:
        return ""
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def _read_frame(path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
    """Read a CSV as strings and require `columns` as its exact header."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataFormatError("file is empty; a header row is required", line=1)
    except pd.errors.ParserError as exc:
        raise DataFormatError(f"malformed CSV: {exc}")
    header = [str(c).strip() for c in frame.columns]
    if header != list(columns):
        raise DataFormatError(f"expected header {','.join(columns)}, got {','.join(header)}", line=1)
    frame.columns = header
    # short rows come back as NaN
    return frame.fillna("")


def _parse_float(text: str, field: str, line: int, required: bool) -> Optional[float]:
    text = text.strip()
    if text == "":
        if required:
            raise DataFormatError(f"missing {field}", line=line)
        return None
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"{field} is not a number: {text!r}", line=line)
    if not math.isfinite(value):
        raise DataFormatError(f"{field} must be finite", line=line)
    return value


# ---------------------------------------------------------------------------
# Trial CSV
# ---------------------------------------------------------------------------


def read_trials_csv(path: PathLike) -> SstDataset:
    """
    Parse a trial CSV (`index,kind,ssd_ms,rt_ms,inhibited`).

    Line numbers in errors count the header as line 1.
    """
    frame = _read_frame(path, TRIAL_COLUMNS)
    trials: List[Trial] = []
    for offset, row in enumerate(frame.to_dict("records")):
        line = offset + 2
        index_text = row["index"].strip()
        if not index_text.isdigit():
            raise DataFormatError(f"index must be a positive integer, got {index_text!r}", line=line)
        kind = row["kind"].strip().lower()
        if kind not in ("go", "stop"):
            raise DataFormatError(f"kind must be go or stop, got {row['kind']!r}", line=line)
        inhibited_text = row["inhibited"].strip().lower()
        if inhibited_text == "":
            inhibited = None
        elif inhibited_text in _TRUE:
            inhibited = True
        elif inhibited_text in _FALSE:
            inhibited = False
        else:
            raise DataFormatError(f"inhibited must be true or false, got {row['inhibited']!r}", line=line)
        try:
            trials.append(Trial(
                index=int(index_text),
                kind=kind,
                ssd_ms=_parse_float(row["ssd_ms"], "ssd_ms", line, required=False),
                rt_ms=_parse_float(row["rt_ms"], "rt_ms", line, required=False),
                inhibited=inhibited,
            ))
        except ValidationError as exc:
            raise DataFormatError(exc.errors()[0]["msg"], line=line)

    n_stop = sum(1 for t in trials if t.is_stop)
    meta = SessionMeta(
        n_trials=len(trials),
        stop_fraction=n_stop / len(trials) if trials else 0.0,
    )
    try:
        dataset = SstDataset(trials=trials, meta=meta)
    except ValidationError as exc:
        raise DataFormatError(exc.errors()[0]["msg"])
    logger.info(f"Read {len(trials)} trials ({n_stop} stop) from {path}")
    return dataset


def write_trials_csv(d: SstDataset, path: PathLike) -> None:
    rows = [
        {
            "index": str(t.index),
            "kind": t.kind,
            "ssd_ms": _fmt_ms(t.ssd_ms),
            "rt_ms": _fmt_ms(t.rt_ms),
            "inhibited": "" if t.inhibited is None else str(t.inhibited).lower(),
        }
        for t in d.trials
    ]
    pd.DataFrame(rows, columns=TRIAL_COLUMNS).to_csv(path, index=False, lineterminator="\n")
    logger.debug(f"Wrote {len(rows)} trials to {path}")


# ---------------------------------------------------------------------------
# Samples, triples, cohorts
# ---------------------------------------------------------------------------


def read_sample_csv(path: PathLike) -> np.ndarray:
    frame = _read_frame(path, [SAMPLE_COLUMN])
    values = [
        _parse_float(text, SAMPLE_COLUMN, offset + 2, required=True)
        for offset, text in enumerate(frame[SAMPLE_COLUMN])
    ]
    return np.asarray(values, dtype=float)


def write_sample_csv(values: Sequence[float], path: PathLike) -> None:
    frame = pd.DataFrame({SAMPLE_COLUMN: [_fmt_ms(float(v)) for v in values]})
    frame.to_csv(path, index=False, lineterminator="\n")


def read_triples_csv(path: PathLike, cluster: str = "S") -> SubjectTriples:
    """Per-subject (mu, sigma, tau) rows from `subject,mu,sigma,tau`."""
    frame = _read_frame(path, TRIPLE_COLUMNS)
    subjects, rows = [], []
    for offset, row in enumerate(frame.to_dict("records")):
        line = offset + 2
        triple = tuple(_parse_float(row[c], c, line, required=True) for c in ("mu", "sigma", "tau"))
        if not all(v > 0 for v in triple):
            raise DataFormatError("mu, sigma and tau must be > 0", line=line)
        subjects.append(row["subject"].strip() or str(offset + 1))
        rows.append(triple)
    return SubjectTriples(rows=rows, cluster=cluster, subjects=subjects)


def write_triples_csv(triples: SubjectTriples, path: PathLike) -> None:
    subjects = triples.subjects or [str(i + 1) for i in range(len(triples.rows))]
    frame = pd.DataFrame(
        [[s] + [_fmt_ms(v) for v in row] for s, row in zip(subjects, triples.rows)],
        columns=TRIPLE_COLUMNS,
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def read_cohort_csv(path: PathLike) -> List[SubjectClusterParams]:
    """
    Per-subject S/A/B SSRT triples in long form, `subject,cluster,mu,sigma,tau`.

    Every subject needs exactly one row per cluster.
    """
    frame = _read_frame(path, COHORT_COLUMNS)
    by_subject: Dict[str, Dict[str, ExGaussianParams]] = {}
    for offset, row in enumerate(frame.to_dict("records")):
        line = offset + 2
        cluster = row["cluster"].strip().upper()
        if cluster not in ("S", "A", "B"):
            raise DataFormatError(f"cluster must be S, A or B, got {row['cluster']!r}", line=line)
        values = [_parse_float(row[c], c, line, required=True) for c in ("mu", "sigma", "tau")]
        try:
            params = ExGaussianParams(mu=values[0], sigma=values[1], tau=values[2])
        except ValidationError as exc:
            raise DataFormatError(exc.errors()[0]["msg"], line=line)
        entry = by_subject.setdefault(row["subject"].strip(), {})
        if cluster in entry:
            raise DataFormatError(f"duplicate {cluster} row for subject {row['subject']!r}", line=line)
        entry[cluster] = params

    cohort = []
    for subject, entry in by_subject.items():
        missing = sorted({"S", "A", "B"} - entry.keys())
        if missing:
            raise DataFormatError(f"subject {subject!r} lacks cluster rows {','.join(missing)}")
        cohort.append(SubjectClusterParams(
            subject=subject, theta_s=entry["S"], theta_a=entry["A"], theta_b=entry["B"],
        ))
    return cohort


def write_cohort_csv(cohort: Sequence[SubjectClusterParams], path: PathLike) -> None:
    rows = []
    for i, c in enumerate(cohort):
        subject = c.subject or str(i + 1)
        for cluster, params in (("S", c.theta_s), ("A", c.theta_a), ("B", c.theta_b)):
            rows.append([subject, cluster] + [_fmt_ms(v) for v in params.as_tuple()])
    pd.DataFrame(rows, columns=COHORT_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def write_chains_csv(chains: PosteriorChains, path: PathLike) -> None:
    """One row per draw, burn-in included: chain, iteration, then one column per parameter."""
    n_chains, n_iter, _ = chains.draws.shape
    frame = pd.DataFrame(chains.draws.reshape(-1, len(chains.param_names)), columns=chains.param_names)
    frame.insert(0, "iteration", np.tile(np.arange(n_iter), n_chains))
    frame.insert(0, "chain", np.repeat(np.arange(n_chains), n_iter))
    frame.to_csv(path, index=False, float_format="%.6g", lineterminator="\n")
    logger.info(f"Dumped {n_chains} x {n_iter} draws to {path}")


# ---------------------------------------------------------------------------
# JSON envelopes
# ---------------------------------------------------------------------------


def to_jsonable(value: Any) -> Any:
    """Recursively turn models, arrays and numpy scalars into JSON-ready values."""
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("Infinity" if value > 0 else "-Infinity")
    return value


def envelope(result: Any, config: Any = None, seed: Optional[int] = None) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "software_version": SOFTWARE_VERSION,
        "seed": seed,
        "config": to_jsonable(config) if config is not None else {},
        "result": to_jsonable(result),
    }


def dumps_envelope(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_json(doc: Dict[str, Any], path: PathLike) -> None:
    Path(path).write_text(dumps_envelope(doc), encoding="utf-8")


def read_json(path: PathLike) -> Dict[str, Any]:
    """Load a JSON envelope and check its schema version."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc.msg}", line=exc.lineno)
    if not isinstance(doc, dict):
        raise DataFormatError("JSON document must be an object", line=1)
    if "schema_version" in doc and doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(doc["schema_version"], SCHEMA_VERSION)
    return doc


def read_distribution(path: PathLike) -> Distribution:
    """
    Read an SSRT distribution from JSON.

    Accepts a bare `{"mu", "sigma", "tau"}` or `{"w_a", "theta_a", "theta_b"}`
    object, or either one under the `result` key of an envelope.
    """
    doc = read_json(path)
    body = doc.get("result", doc)
    try:
        if "w_a" in body and "theta_a" in body:
            return MixtureSsrt.model_validate(body)
        return ExGaussianParams.model_validate(body)
    except ValidationError as exc:
        raise DataFormatError(f"not an SSRT distribution: {exc.errors()[0]['msg']}")
