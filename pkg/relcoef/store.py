"""
Files and records: distributions on disk, and the tables and JSON documents
the command line prints.
"""
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .coefficients import format_value
from .errors import DimensionError, DomainError
from .partition import Distribution, EventTable


FORMATS = {"json": ".json", "csv": ".csv", "npy": ".npy"}


def _format_of(fn, format=None, default=None):
    "The named format, or the one the file's suffix implies."
    if format is not None:
        if format not in FORMATS:
            raise ValueError(f"unknown format {format!r}")
        return format
    for fmt, ext in FORMATS.items():
        if fn.suffix == ext:
            return fmt
    if default is None:
        raise ValueError(f"couldn't guess format from extension {fn.suffix!r}")
    return default


################################################################################
### Distributions


def _table_for(size, events):
    if events is None:
        return None
    table = events if isinstance(events, EventTable) else EventTable(events)
    if table.n_atoms != size:
        raise DimensionError(f"{size} probabilities don't fit events {table.names}")
    return table


def _from_frame(df, events):
    if "p" not in df.columns:
        raise DomainError("distribution table needs a 'p' column")
    names = [c for c in df.columns if c != "p"]
    if not names:
        p = df["p"].to_numpy(dtype=np.float64)
        return Distribution(p, _table_for(p.size, events))

    table = EventTable(names)
    bits = df[names].to_numpy()
    if not np.isin(bits, [0, 1]).all():
        raise DomainError("event columns must hold 0 or 1")
    weights = 1 << np.arange(table.n - 1, -1, -1)
    atoms = bits.astype(np.int64) @ weights
    if np.unique(atoms).size != atoms.size:
        raise DomainError("an atom is listed more than once")
    p = np.zeros(table.n_atoms)
    p[atoms] = df["p"].to_numpy(dtype=np.float64)
    return Distribution(p, table)


def load_distribution(fn, format=None, events=None):
    """
    Read a distribution. Formats, picked by extension unless given:

      json: {"events": [...], "p": [...]} (events optional)
      csv:  a "p" column, plus 0/1 columns named after the events when the
            atoms are spelled out; unlisted atoms get probability 0
      npy:  a bare vector of 2^n probabilities

    `events` names the events when the file doesn't.
    """
    fn = Path(fn)
    format = _format_of(fn, format)
    if not fn.exists():
        raise OSError(f"file {fn} doesn't exist")

    if format == "json":
        with open(fn) as f:
            doc = json.load(f)
        if isinstance(doc, list):
            doc = {"p": doc}
        p = np.asarray(doc["p"], dtype=np.float64)
        names = doc.get("events", events)
        return Distribution(p, _table_for(p.size, names))

    elif format == "csv":
        return _from_frame(pd.read_csv(fn), events)

    elif format == "npy":
        p = np.load(fn)
        return Distribution(p, _table_for(p.size, events))


def save_distribution(fn, dist, format=None, add_suffix=True):
    fn = Path(fn)
    format = _format_of(fn, format, default="json")
    if not fn.suffix and add_suffix:
        fn = fn.with_suffix(FORMATS[format])

    if format == "json":
        with open(fn, "w") as f:
            json.dump({"events": list(dist.table.names), "p": dist.p.tolist()}, f)

    elif format == "csv":
        cols = dist.table.columns()
        df = pd.DataFrame({name: cols[name].astype(int) for name in dist.table.names})
        df["p"] = dist.p
        df.to_csv(fn, index=False)

    elif format == "npy":
        np.save(fn, dist.p)

    return fn


def parse_table(text):
    "The --table x,y,z,w form."
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise DomainError(f"bad table {text!r}: expected four numbers x,y,z,w") from None
    if len(vals) != 4:
        raise DomainError(f"bad table {text!r}: expected four numbers x,y,z,w")
    return vals


################################################################################
### Output


def to_jsonable(v):
    "JSON has no infinity or NaN: they go out as the strings 'inf' and 'undef'."
    v = float(v)
    if math.isnan(v):
        return "undef"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def from_jsonable(v):
    if v == "undef":
        return math.nan
    return float(v)


def report_frame(coefficients):
    "A coefficient report as a DataFrame, one row per coefficient."
    return pd.DataFrame(
        {
            "family": [c.family.name_long for c in coefficients],
            "range": [c.range.value for c in coefficients],
            "value": [format_value(c.value) for c in coefficients],
        },
        index=pd.Index([str(c.term) for c in coefficients], name="coefficient"),
    )


def report_records(coefficients):
    return [
        {
            "coefficient": str(c.term),
            "family": c.family.value,
            "range": c.range.value,
            "value": to_jsonable(c.value),
        }
        for c in coefficients
    ]


def interval_record(query, interval, witnesses=False, error=None):
    rec = {
        "query": str(query),
        "family": query.family.value,
        "range": query.range.value,
    }
    if interval is None:
        rec.update(lo="undef", hi="undef", status="UNKNOWN", message=str(error or ""))
        return rec
    rec.update(
        lo=to_jsonable(interval.lo),
        hi=to_jsonable(interval.hi),
        status=interval.status.value,
    )
    if interval.message:
        rec["message"] = interval.message
    if witnesses:
        for k in ["witness_lo", "witness_hi"]:
            w = getattr(interval, k)
            if w is not None:
                rec[k] = w.p.tolist()
    return rec


def interval_line(query, interval, error=None):
    "The text form, e.g. 'Q(T:A) = [3, 3] EXACT'."
    if interval is None:
        return f"{query} = UNKNOWN ({error})"
    if not interval.bounded:
        extra = f" ({interval.message})" if interval.message else ""
        return f"{query} = {interval.status.value}{extra}"
    return (
        f"{query} = [{format_value(interval.lo)}, {format_value(interval.hi)}] "
        f"{interval.status.value}"
    )


def results_document(program_fn, seed, elapsed_ms, records):
    return {
        "program": str(program_fn),
        "seed": seed,
        "elapsed_ms": elapsed_ms,
        "records": records,
    }


def load_results(text):
    "Parse a results document back, turning 'inf' and 'undef' into floats."
    doc = json.loads(text)
    for rec in doc["records"]:
        for k in ["lo", "hi"]:
            rec[k] = from_jsonable(rec[k])
    return doc
