"""File formats: NIfTI-1 label volumes, text fixtures and evaluation reports."""

from __future__ import annotations

import csv
import gzip
import json
import logging
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baseline import SCALAR_FIELDS, BaselineReport
from .mme import PROPERTIES, MMEResult, aggregate, macro_average, summarize
from .volume import LabelVolume, Spacing

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


# -- NIfTI-1 ------------------------------------------------------------------


class NiftiError(ValueError):
    pass


class BadMagicError(NiftiError):
    pass


class UnsupportedDatatypeError(NiftiError):
    pass


class TruncatedPayloadError(NiftiError):
    pass


class NegativeLabelError(NiftiError):
    pass


HEADER_SIZE = 348

# datatype code -> numpy type character
DATATYPES = {
    2: "u1",   # unsigned char
    4: "i2",   # signed short
    8: "i4",   # signed int
    16: "f4",  # float
}

FLOAT_LABEL_TOLERANCE = 1e-3


@dataclass(frozen=True)
class NiftiHeader:
    dims: tuple
    datatype: int
    bitpix: int
    pixdim: tuple
    vox_offset: float
    scl_slope: float
    scl_inter: float
    magic: bytes
    endian: str


def parse_nifti_header(raw: bytes) -> NiftiHeader:
    if len(raw) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header is {len(raw)} bytes, expected {HEADER_SIZE}")
    # a sane dim[0] (1..7) identifies the byte order
    endian = "<"
    ndim = struct.unpack_from("<h", raw, 40)[0]
    if not 1 <= ndim <= 7:
        endian = ">"
        ndim = struct.unpack_from(">h", raw, 40)[0]
        if not 1 <= ndim <= 7:
            raise NiftiError("cannot determine byte order: dim[0] out of range")
    sizeof_hdr = struct.unpack_from(endian + "i", raw, 0)[0]
    if sizeof_hdr != HEADER_SIZE:
        raise NiftiError(f"sizeof_hdr is {sizeof_hdr}, expected {HEADER_SIZE} (NIfTI-2 is not supported)")
    magic = raw[344:348]
    if magic == b"ni1\x00":
        raise BadMagicError("header/image pair (.hdr/.img) NIfTI files are not supported")
    if magic != b"n+1\x00":
        raise BadMagicError(f"bad NIfTI-1 magic {magic!r}")
    dim = struct.unpack_from(endian + "8h", raw, 40)
    datatype, bitpix = struct.unpack_from(endian + "2h", raw, 70)
    pixdim = struct.unpack_from(endian + "8f", raw, 76)
    vox_offset, scl_slope, scl_inter = struct.unpack_from(endian + "3f", raw, 108)
    if dim[0] not in (2, 3):
        raise NiftiError(f"only 2D or 3D volumes are supported, dim[0] = {dim[0]}")
    dims = tuple(int(n) for n in dim[1 : dim[0] + 1]) + (1,) * (3 - dim[0])
    if min(dims) < 1:
        raise NiftiError(f"invalid dimensions {dims}")
    return NiftiHeader(dims, datatype, bitpix, tuple(pixdim[1:4]), vox_offset, scl_slope, scl_inter, magic, endian)


def _open_bytes(path: Path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_nifti(path) -> LabelVolume:
    """Read a single-file NIfTI-1 label volume (``.nii`` or ``.nii.gz``).

    Spacing comes from ``pixdim`` (absolute value; zero becomes 1.0).  The
    orientation matrix and intensity scaling are ignored.
    """
    path = Path(path)
    raw = _open_bytes(path)
    hdr = parse_nifti_header(raw)
    if hdr.datatype not in DATATYPES:
        raise UnsupportedDatatypeError(f"unsupported NIfTI datatype code {hdr.datatype}")
    dtype = np.dtype(hdr.endian + DATATYPES[hdr.datatype])
    offset = max(int(hdr.vox_offset), HEADER_SIZE)
    count = int(np.prod(hdr.dims))
    need = offset + count * dtype.itemsize
    if len(raw) < need:
        raise TruncatedPayloadError(f"{path.name}: payload needs {need} bytes, file has {len(raw)}")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)

    if hdr.scl_slope not in (0.0, 1.0) or (hdr.scl_slope != 0.0 and hdr.scl_inter != 0.0):
        log.warning("%s: ignoring intensity scaling (slope=%g, inter=%g) for label data",
                    path.name, hdr.scl_slope, hdr.scl_inter)
    if dtype.kind == "f":
        if not np.all(np.isfinite(data)):
            raise NiftiError(f"{path.name}: non-finite label values")
        rounded = np.rint(data)
        if np.any(np.abs(data - rounded) > FLOAT_LABEL_TOLERANCE):
            raise NiftiError(f"{path.name}: float labels are not integral")
        data = rounded
    if data.size and data.min() < 0:
        raise NegativeLabelError(f"{path.name}: negative label {data.min()}")

    spacing = []
    for axis, p in zip("xyz", hdr.pixdim):
        p = abs(float(p))
        if p == 0 or not math.isfinite(p):
            log.warning("%s: pixdim along %s is %r, using 1.0", path.name, axis, p)
            p = 1.0
        spacing.append(p)
    return LabelVolume.from_flat(hdr.dims, data.astype(np.int64), Spacing(*spacing))


# -- text fixtures ------------------------------------------------------------


class FixtureError(ValueError):
    pass


def parse_fixture(text: str, source: str = "<fixture>") -> LabelVolume:
    """Parse ``w h d dx dy dz`` followed by ``w*h*d`` x-fastest integer labels."""
    tokens = [
        (m.group(), lineno, m.start() + 1)
        for lineno, line in enumerate(text.splitlines(), start=1)
        for m in re.finditer(r"\S+", line)
    ]
    if len(tokens) < 6:
        raise FixtureError(f"{source}: header needs 'w h d dx dy dz'")

    def number(kind, tok, lineno, col):
        try:
            return kind(tok)
        except ValueError:
            raise FixtureError(f"{source}:{lineno}:{col}: invalid token {tok!r}") from None

    dims = [number(int, *t) for t in tokens[:3]]
    spacing = [number(float, *t) for t in tokens[3:6]]
    labels = [number(int, *t) for t in tokens[6:]]
    expected = dims[0] * dims[1] * dims[2]
    if len(labels) != expected:
        raise FixtureError(f"{source}: expected {expected} labels, found {len(labels)}")
    return LabelVolume.from_flat(dims, np.array(labels, dtype=np.int64), Spacing(*spacing))


def read_fixture(path) -> LabelVolume:
    path = Path(path)
    return parse_fixture(path.read_text(), str(path))


def format_fixture(volume: LabelVolume) -> str:
    w, h, d = volume.dims
    sp = " ".join(repr(v) for v in volume.spacing.as_tuple())
    rows = volume.flat().reshape(-1, w)
    body = "\n".join(" ".join(str(v) for v in row) for row in rows)
    return f"{w} {h} {d} {sp}\n{body}\n"


def write_fixture(volume: LabelVolume, path) -> None:
    Path(path).write_text(format_fixture(volume))


def read_volume(path) -> LabelVolume:
    """Read a label volume, choosing the format from the file name."""
    name = Path(path).name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        return read_nifti(path)
    return read_fixture(path)


def image_id(path) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii", ".txt"):
        if name.lower().endswith(suffix):
            return name[: -len(suffix)]
    return name


# -- reports ------------------------------------------------------------------


@dataclass
class ReportEntry:
    image_id: str
    class_id: int
    params: dict
    mme: Optional[MMEResult] = None
    baseline: Optional[BaselineReport] = None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "class_id": self.class_id,
            "params": self.params,
            "mme": self.mme.to_dict()["properties"] if self.mme else None,
            "baseline": self.baseline.to_dict() if self.baseline else None,
        }

    @classmethod
    def from_dict(cls, data) -> "ReportEntry":
        mme = None
        if data.get("mme") is not None:
            p = data["params"]
            mme_params = {k: p[k] for k in ("theta_tp", "theta_fp", "beta", "connectivity")}
            mme = MMEResult.from_dict({"params": mme_params, "properties": data["mme"]})
        baseline = BaselineReport.from_dict(data["baseline"]) if data.get("baseline") is not None else None
        return cls(data["image_id"], int(data["class_id"]), dict(data["params"]), mme, baseline)


@dataclass
class ReportDocument:
    entries: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def build(cls, entries, errors=()) -> "ReportDocument":
        entries = sorted(entries, key=lambda e: (e.image_id, e.class_id))
        errors = sorted(errors, key=lambda e: (e["image_id"], str(e.get("class_id", ""))))
        return cls(entries, list(errors), aggregate_entries(entries))

    def find(self, image: str, class_id: int) -> ReportEntry:
        for e in self.entries:
            if e.image_id == image and e.class_id == int(class_id):
                return e
        raise KeyError(f"no entry for image {image!r}, class {class_id}")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "entries": [e.to_dict() for e in self.entries],
            "errors": self.errors,
            "aggregate": self.aggregate,
        }

    @classmethod
    def from_dict(cls, data) -> "ReportDocument":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {version!r}")
        return cls(
            [ReportEntry.from_dict(e) for e in data.get("entries", [])],
            list(data.get("errors", [])),
            dict(data.get("aggregate", {})),
            version,
        )


def _summary_dict(values) -> dict:
    s = summarize(values)
    return {"mean": s.mean, "std": s.std}


def baseline_aggregate(reports) -> dict:
    """Mean/std of each baseline metric; undefined HD/NSD values are excluded and counted."""
    out = {}
    for name in SCALAR_FIELDS:
        values = [getattr(r, name) for r in reports]
        out[name] = _aggregate_optional(values)
    taus = sorted({t for r in reports for t in r.nsd})
    for t in taus:
        out[f"nsd@{format(t, 'g')}"] = _aggregate_optional([r.nsd.get(t) for r in reports])
    return out


def _aggregate_optional(values) -> dict:
    kept = [v for v in values if v is not None]
    block = {"n": len(kept), "excluded": len(values) - len(kept)}
    if kept:
        block.update(_summary_dict(kept))
    else:
        block.update(mean=None, std=None)
    return block


def aggregate_entries(entries) -> dict:
    """Per-class image-wise mean/std and, for several classes, macro averages."""
    by_class = {}
    for e in entries:
        by_class.setdefault(e.class_id, []).append(e)
    classes = {}
    mme_aggs = {}
    for cid in sorted(by_class):
        group = by_class[cid]
        block = {"n": len(group)}
        results = [e.mme for e in group if e.mme is not None]
        if results:
            agg = aggregate(results)
            mme_aggs[cid] = agg
            block["mme"] = agg.to_dict()["properties"]
        reports = [e.baseline for e in group if e.baseline is not None]
        if reports:
            block["baseline"] = baseline_aggregate(reports)
        classes[str(cid)] = block
    out = {"classes": classes}
    if len(mme_aggs) > 1:
        out["macro"] = macro_average(mme_aggs)
    return out


def _round(value):
    """Round floats to 6 significant digits, recursively."""
    if isinstance(value, float):
        return float(format(value, ".6g")) if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    if isinstance(value, np.generic):
        return _round(value.item())
    return value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def csv_columns(doc: ReportDocument) -> list:
    taus = sorted({t for e in doc.entries if e.baseline for t in e.baseline.nsd})
    cols = ["image_id", "class_id", "property", "tp", "fp", "fn", "precision", "recall", "fbeta"]
    cols += ["accuracy", "voxel_precision", "voxel_recall", "voxel_fbeta", "dice", "iou",
             "volume_similarity", "hd_avg", "hd_p95", "hd_max"]
    cols += [f"nsd@{format(t, 'g')}" for t in taus]
    return cols


def _csv_rows(doc: ReportDocument):
    for e in doc.entries:
        base = {"image_id": e.image_id, "class_id": e.class_id}
        if e.baseline:
            b = e.baseline
            base.update(
                accuracy=b.accuracy, voxel_precision=b.precision, voxel_recall=b.recall,
                voxel_fbeta=b.fbeta, dice=b.dice, iou=b.iou, volume_similarity=b.volume_similarity,
                hd_avg=b.hd_avg, hd_p95=b.hd_p95, hd_max=b.hd_max,
            )
            base.update({f"nsd@{format(t, 'g')}": v for t, v in b.nsd.items()})
        if e.mme is None:
            yield base
            continue
        for prop in PROPERTIES:
            r = e.mme[prop]
            yield dict(base, property=prop, tp=r.counts.tp, fp=r.counts.fp, fn=r.counts.fn,
                       precision=r.prf.precision, recall=r.prf.recall, fbeta=r.prf.fbeta)


def write_report(doc: ReportDocument, format: str, path) -> None:
    """Write ``doc`` as schema-versioned JSON or as a flat CSV table.

    CSV has one row per (image, class, property), baseline columns repeated on
    each; a baseline-only entry produces a single row with an empty property.
    """
    path = Path(path)
    if format == "json":
        text = json.dumps(_round(doc.to_dict()), indent=2, sort_keys=False) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
    elif format == "csv":
        cols = csv_columns(doc)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            writer.writeheader()
            for row in _csv_rows(doc):
                writer.writerow({c: _fmt(row.get(c)) for c in cols})
    else:
        raise ValueError(f"unknown report format {format!r}")


def read_report(path) -> ReportDocument:
    with open(path) as fh:
        return ReportDocument.from_dict(json.load(fh))
