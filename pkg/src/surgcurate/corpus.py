"""Corpus data model: videos, clips, sources, domains, and inventory stats.

The corpus manifest is UTF-8 JSON-lines, one record per line, with a
"kind" field discriminating video records from clip records. Everything
in this module is a pure function over immutable records; a CorpusIndex
is built once and then shared read-only.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

from .apportion import as_fraction, round_half_away_from_zero


class CorpusError(Exception):
    """Base for corpus data-model failures."""


class ManifestParseError(CorpusError):
    """A manifest line could not be decoded into a known record."""


class UnknownDataset(CorpusError):
    """Dataset id missing from the domain mapping; never silently defaulted."""


class ZeroDimension(CorpusError):
    """Frame geometry with a zero or negative side."""


class FrameTooSmall(CorpusError):
    """Frame smaller than the requested crop size."""


class SourceStream(str, Enum):
    """Provenance stream of a video."""

    PUBLIC_CLINICAL = "PublicClinical"
    WEB_EDUCATIONAL = "WebEducational"
    PRIVATE = "Private"


class Domain(str, Enum):
    """Clinical domain of a dataset."""

    LAPAROSCOPY = "Laparoscopy"
    ENDOSCOPY = "Endoscopy"
    CATARACT = "Cataract"
    ROBOTIC = "Robotic"
    MIXED = "Mixed"


#: Domains entering macro-averaged evaluation (Mixed is corpus-only).
CLINICAL_DOMAINS = (
    Domain.LAPAROSCOPY,
    Domain.ENDOSCOPY,
    Domain.CATARACT,
    Domain.ROBOTIC,
)


@dataclass(frozen=True)
class VideoRecord:
    """One source video of the corpus."""

    video_id: str
    source: SourceStream
    dataset_id: str
    domain: Domain
    frame_count: int
    fps: Fraction
    duration_s: float

    def __post_init__(self) -> None:
        if self.frame_count < 0:
            raise ValueError(f"{self.video_id}: frame_count must be >= 0")
        if self.fps <= 0:
            raise ValueError(f"{self.video_id}: fps must be positive")
        if self.duration_s < 0:
            raise ValueError(f"{self.video_id}: duration_s must be >= 0")


@dataclass(frozen=True)
class ClipRecord:
    """A frame interval of a parent video; the unit of curation.

    Intervals within one video may overlap (sliding-window clipping is
    allowed); only clip ids must be unique.
    """

    clip_id: str
    video_id: str
    start_frame: int
    end_frame: int
    embedding_row: int | None = None


Record = Union[VideoRecord, ClipRecord]


@dataclass(frozen=True)
class Violation:
    code: str
    record_id: str
    message: str


@dataclass
class ValidationReport:
    """Violations are data, not failures; empty lists mean a valid record."""

    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations


def normalize_dataset_id(dataset_id: str) -> str:
    """Canonical lookup key: lowercase alphanumerics only."""
    return "".join(ch for ch in dataset_id.lower() if ch.isalnum())


class DomainMap:
    """Editable dataset-to-domain table; the shipped default covers the
    public datasets plus every benchmark dataset."""

    def __init__(self, mapping: Mapping[str, Domain]):
        self._table = {normalize_dataset_id(k): Domain(v) for k, v in mapping.items()}

    @classmethod
    def default(cls) -> "DomainMap":
        text = resources.files("surgcurate.data").joinpath("domain_map.json").read_text("utf-8")
        return cls.from_json_text(text)

    @classmethod
    def from_json_text(cls, text: str) -> "DomainMap":
        doc = json.loads(text)
        return cls(doc["datasets"])

    @classmethod
    def from_file(cls, path: str | Path) -> "DomainMap":
        return cls.from_json_text(Path(path).read_text("utf-8"))

    def __contains__(self, dataset_id: str) -> bool:
        return normalize_dataset_id(dataset_id) in self._table

    def __len__(self) -> int:
        return len(self._table)

    def domain_of(self, dataset_id: str) -> Domain:
        key = normalize_dataset_id(dataset_id)
        try:
            return self._table[key]
        except KeyError:
            raise UnknownDataset(
                f"dataset {dataset_id!r} is not in the domain mapping; "
                "add it to the mapping config rather than assuming a domain"
            ) from None

    def items(self) -> Iterator[tuple[str, Domain]]:
        return iter(sorted(self._table.items()))


def domain_of(dataset_id: str, mapping: DomainMap | None = None) -> Domain:
    """Deterministic dataset-to-domain lookup; unknown ids are an error."""
    return (mapping or DomainMap.default()).domain_of(dataset_id)


class CorpusIndex:
    """Read-shared index of a validated record set."""

    def __init__(self, records: Iterable[Record]):
        self.videos: dict[str, VideoRecord] = {}
        self.clips: dict[str, ClipRecord] = {}
        self._video_id_counts: Counter[str] = Counter()
        self._clip_id_counts: Counter[str] = Counter()
        for rec in records:
            if isinstance(rec, VideoRecord):
                self._video_id_counts[rec.video_id] += 1
                self.videos.setdefault(rec.video_id, rec)
            elif isinstance(rec, ClipRecord):
                self._clip_id_counts[rec.clip_id] += 1
                self.clips.setdefault(rec.clip_id, rec)
            else:
                raise TypeError(f"not a corpus record: {type(rec).__name__}")

    def duplicate_count(self, record: Record) -> int:
        if isinstance(record, VideoRecord):
            return self._video_id_counts[record.video_id]
        return self._clip_id_counts[record.clip_id]


def validate_record(record: Record, corpus: CorpusIndex) -> ValidationReport:
    """Check one record against the corpus index.

    Violations: duplicate id, dangling foreign key, interval out of range.
    Metadata inconsistency (frame count vs fps x duration) is a warning,
    not a violation.
    """
    report = ValidationReport()
    if corpus.duplicate_count(record) > 1:
        rid = record.video_id if isinstance(record, VideoRecord) else record.clip_id
        report.violations.append(Violation("duplicate id", rid, f"id {rid!r} occurs more than once"))

    if isinstance(record, VideoRecord):
        # consistency: |frame_count - fps*duration| within one frame per second of footage
        expected = record.fps * as_fraction(record.duration_s)
        slack = max(as_fraction(record.duration_s), Fraction(1))
        if abs(Fraction(record.frame_count) - expected) > slack:
            report.warnings.append(
                Violation(
                    "metadata mismatch",
                    record.video_id,
                    f"frame_count {record.frame_count} vs fps*duration ~ {float(expected):.1f}",
                )
            )
        return report

    parent = corpus.videos.get(record.video_id)
    if parent is None:
        report.violations.append(
            Violation("dangling foreign key", record.clip_id, f"video {record.video_id!r} not in corpus")
        )
    if record.start_frame < 0 or record.start_frame >= record.end_frame or (
        parent is not None and record.end_frame > parent.frame_count
    ):
        report.violations.append(
            Violation(
                "interval out of range",
                record.clip_id,
                f"[{record.start_frame}, {record.end_frame}) invalid"
                + (f" for parent with {parent.frame_count} frames" if parent else ""),
            )
        )
    return report


def validate_corpus(records: Iterable[Record]) -> ValidationReport:
    """Validate every record against the index built from all of them."""
    records = list(records)
    index = CorpusIndex(records)
    merged = ValidationReport()
    seen_dup: set[str] = set()
    for rec in records:
        rep = validate_record(rec, index)
        for v in rep.violations:
            # report each duplicated id once, not once per occurrence
            if v.code == "duplicate id":
                if v.record_id in seen_dup:
                    continue
                seen_dup.add(v.record_id)
            merged.violations.append(v)
        merged.warnings.extend(rep.warnings)
    return merged


@dataclass(frozen=True)
class CorpusCell:
    video_count: int = 0
    clip_count: int = 0
    frame_sum: int = 0


@dataclass
class CorpusStats:
    """Per (source, domain) counts plus corpus totals."""

    cells: dict[tuple[SourceStream, Domain], CorpusCell]

    @property
    def total_videos(self) -> int:
        return sum(c.video_count for c in self.cells.values())

    @property
    def total_clips(self) -> int:
        return sum(c.clip_count for c in self.cells.values())

    @property
    def total_frames(self) -> int:
        return sum(c.frame_sum for c in self.cells.values())

    def by_source(self, source: SourceStream) -> CorpusCell:
        video_count = clip_count = frame_sum = 0
        for (src, _), cell in self.cells.items():
            if src is source:
                video_count += cell.video_count
                clip_count += cell.clip_count
                frame_sum += cell.frame_sum
        return CorpusCell(video_count, clip_count, frame_sum)


def corpus_stats(records: Iterable[Record]) -> CorpusStats:
    """Count videos, clips, and frames per (source, domain) cell.

    Clips are attributed to their parent video's cell; clips with a missing
    parent are ignored here (they surface in validation instead).
    """
    records = list(records)
    index = CorpusIndex(records)
    videos: Counter[tuple[SourceStream, Domain]] = Counter()
    clips: Counter[tuple[SourceStream, Domain]] = Counter()
    frames: Counter[tuple[SourceStream, Domain]] = Counter()
    for rec in records:
        if isinstance(rec, VideoRecord):
            key = (rec.source, rec.domain)
            videos[key] += 1
            frames[key] += rec.frame_count
        else:
            parent = index.videos.get(rec.video_id)
            if parent is not None:
                clips[(parent.source, parent.domain)] += 1
    keys = set(videos) | set(clips) | set(frames)
    cells = {k: CorpusCell(videos[k], clips[k], frames[k]) for k in sorted(keys, key=lambda k: (k[0].value, k[1].value))}
    return CorpusStats(cells)


def inventory_report(stats: CorpusStats) -> str:
    """Markdown inventory table: one row per (source, domain), plus totals."""
    lines = [
        "| Source | Domain | Videos | Clips | Frames |",
        "| --- | --- | ---: | ---: | ---: |",
    ]
    for (src, dom), cell in stats.cells.items():
        lines.append(
            f"| {src.value} | {dom.value} | {cell.video_count:,} | {cell.clip_count:,} | {cell.frame_sum:,} |"
        )
    lines.append(
        f"| **Total** | | **{stats.total_videos:,}** | **{stats.total_clips:,}** | **{stats.total_frames:,}** |"
    )
    return "\n".join(lines) + "\n"


def _format_scale(stats: CorpusStats) -> str:
    videos_k = stats.total_videos / 1000.0
    frames_m = stats.total_frames / 1e6
    return f"{videos_k:.1f}K videos / {frames_m:.1f}M frames"


def scale_comparison_report(stats: CorpusStats, ours_label: str = "Ours") -> str:
    """Markdown table comparing this corpus against shipped reference scales."""
    text = resources.files("surgcurate.data").joinpath("pretraining_scale_reference.csv").read_text("utf-8")
    rows = list(csv.DictReader(text.splitlines()))
    lines = [
        "| Method | Domain Focus | Reported Scale |",
        "| --- | --- | --- |",
    ]
    for row in rows:
        lines.append(f"| {row['method']} | {row['domain_focus']} | {row['reported_scale']} |")
    lines.append(f"| **{ours_label}** | **Multi-Domain (4 major)** | **{_format_scale(stats)}** |")
    return "\n".join(lines) + "\n"


# -- preprocessing geometry --------------------------------------------------


def resize_shortest_side(width: int, height: int, target: int = 320) -> tuple[int, int]:
    """Scale a frame so its shortest side equals `target`, keeping aspect.

    The long side rounds half away from zero; idempotent when the short
    side already equals the target.
    """
    if width < 1 or height < 1:
        raise ZeroDimension(f"frame {width}x{height} has an empty side")
    if target < 1:
        raise ZeroDimension(f"target {target} must be >= 1")
    if width <= height:
        return target, round_half_away_from_zero(Fraction(height * target, width))
    return round_half_away_from_zero(Fraction(width * target, height)), target


@dataclass(frozen=True)
class CropRect:
    x: int
    y: int
    size: int


def random_crop_rect(
    width: int, height: int, size: int = 224, rng: np.random.Generator | None = None
) -> CropRect:
    """Uniform random crop offset, x drawn before y; geometry only."""
    if width < size or height < size:
        raise FrameTooSmall(f"frame {width}x{height} cannot fit a {size}x{size} crop")
    rng = rng if rng is not None else np.random.default_rng()
    x = int(rng.integers(0, width - size + 1))
    y = int(rng.integers(0, height - size + 1))
    return CropRect(x, y, size)


# -- manifest I/O -------------------------------------------------------------


def _fps_to_json(fps: Fraction) -> int | str:
    return int(fps) if fps.denominator == 1 else f"{fps.numerator}/{fps.denominator}"


def _fps_from_json(value) -> Fraction:
    if isinstance(value, bool):
        raise ManifestParseError("fps must be a number or ratio string")
    if isinstance(value, (int, str)):
        return as_fraction(value)
    if isinstance(value, float):
        return as_fraction(value)
    raise ManifestParseError(f"fps has unsupported type {type(value).__name__}")


def record_to_json(record: Record) -> dict:
    if isinstance(record, VideoRecord):
        return {
            "kind": "video",
            "video_id": record.video_id,
            "source": record.source.value,
            "dataset_id": record.dataset_id,
            "domain": record.domain.value,
            "frame_count": record.frame_count,
            "fps": _fps_to_json(record.fps),
            "duration_s": record.duration_s,
        }
    return {
        "kind": "clip",
        "clip_id": record.clip_id,
        "video_id": record.video_id,
        "start_frame": record.start_frame,
        "end_frame": record.end_frame,
        "embedding_row": record.embedding_row,
    }


def record_from_json(doc: Mapping) -> Record:
    try:
        kind = doc["kind"]
        if kind == "video":
            return VideoRecord(
                video_id=doc["video_id"],
                source=SourceStream(doc["source"]),
                dataset_id=doc["dataset_id"],
                domain=Domain(doc["domain"]),
                frame_count=int(doc["frame_count"]),
                fps=_fps_from_json(doc["fps"]),
                duration_s=float(doc["duration_s"]),
            )
        if kind == "clip":
            row = doc.get("embedding_row")
            return ClipRecord(
                clip_id=doc["clip_id"],
                video_id=doc["video_id"],
                start_frame=int(doc["start_frame"]),
                end_frame=int(doc["end_frame"]),
                embedding_row=None if row is None else int(row),
            )
    except (KeyError, ValueError, TypeError) as exc:
        raise ManifestParseError(f"bad corpus record: {exc}") from exc
    raise ManifestParseError(f"unknown record kind {doc.get('kind')!r}")


def read_corpus_manifest(path: str | Path) -> list[Record]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(f"{path}:{lineno}: not JSON: {exc}") from exc
            records.append(record_from_json(doc))
    return records


def write_corpus_manifest(records: Iterable[Record], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec), sort_keys=True) + "\n")
