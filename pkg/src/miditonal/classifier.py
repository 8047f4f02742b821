"""Melody / bass / harmony track roles: labels, assignment, extraction, scoring."""

from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateData
from .features import track_feature_table
from .forest import ROLES, ForestModel, ForestParams, load_model_file, save_model_file, train_forest
from .midi_io import (
    DRUM_CHANNEL,
    META_END_OF_TRACK,
    META_TEMPO,
    META_TIME_SIGNATURE,
    META_TRACK_NAME,
    Event,
    MidiFile,
    Track,
    build_note_list,
    meta,
    read_midi,
)

MODEL_DIR_ENV = "MIDITONAL_MODEL_DIR"

DEFAULT_KEYWORDS: dict[str, tuple[str, ...]] = {
    "melody": ("melody", "vocal", "lead", "voice", "melodia"),
    "bass": ("bass",),
    "harmony": ("chord", "pad", "guitar", "piano comp", "harmony"),
}


@dataclass
class LabeledTrack:
    features: np.ndarray
    labels: frozenset
    file_id: str
    track_index: int

    def __post_init__(self):
        self.labels = frozenset(self.labels)
        bad = self.labels - set(ROLES)
        if bad:
            raise ValueError(f"unknown role label(s) {sorted(bad)}")


@dataclass
class RoleAssignment:
    melody: int | None = None
    bass: int | None = None
    harmony: tuple[int, ...] = ()
    discarded: tuple[int, ...] = ()
    probabilities: dict = field(default_factory=dict)  # track -> {role: p}

    @property
    def assigned(self) -> list[tuple[str, int]]:
        out = []
        if self.melody is not None:
            out.append(("melody", self.melody))
        if self.bass is not None:
            out.append(("bass", self.bass))
        out.extend(("harmony", t) for t in self.harmony)
        return out

    @property
    def is_empty(self) -> bool:
        return not self.assigned

    def as_dict(self) -> dict:
        return {
            "melody": self.melody,
            "bass": self.bass,
            "harmony": list(self.harmony),
            "discarded": list(self.discarded),
            "probabilities": {str(t): p for t, p in sorted(self.probabilities.items())},
        }


# ---------------------------------------------------------------- labels


def keyword_table_from_config(path) -> dict[str, tuple[str, ...]]:
    """``[keywords]`` section: one comma-separated list per role."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    table = dict(DEFAULT_KEYWORDS)
    if parser.has_section("keywords"):
        for role, words in parser.items("keywords"):
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r} in keyword table")
            table[role] = tuple(w.strip().lower() for w in words.split(",") if w.strip())
    return table


def labels_from_name(name: str, keywords: Mapping[str, Sequence[str]] = DEFAULT_KEYWORDS) -> frozenset:
    lowered = name.lower()
    return frozenset(role for role, words in keywords.items() if any(w in lowered for w in words))


def read_label_file(path) -> dict[tuple[str, int], set]:
    """Delimited ``file_id, track_index, role`` rows; a header row is optional."""
    labels: dict[tuple[str, int], set] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if row[0].strip() == "file_id":
                continue
            if len(row) != 3:
                raise ValueError(f"label row needs 3 fields: {row}")
            file_id, idx, role = (c.strip() for c in row)
            role = role.lower()
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r} in label file")
            labels.setdefault((file_id, int(idx)), set()).add(role)
    return labels


def write_label_file(path, labels: Iterable[tuple[str, int, str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file_id", "track_index", "role"])
        for row in labels:
            writer.writerow(row)


def file_features(midi: MidiFile) -> dict[int, np.ndarray]:
    notes, timesig = build_note_list(midi)
    return track_feature_table(notes, timesig)


def labeled_tracks_from_file(
    midi: MidiFile,
    file_id: str,
    labels: Mapping[tuple[str, int], set] | None = None,
    keywords: Mapping[str, Sequence[str]] | None = DEFAULT_KEYWORDS,
) -> list[LabeledTrack]:
    """Every pitched track of a file that carries at least one label.

    Explicit labels take precedence; the keyword matcher over track names
    is used only for files absent from the label table.
    """
    feats = file_features(midi)
    names = {t.index: t.name_text for t in midi.tracks}
    explicit = {idx: roles for (fid, idx), roles in (labels or {}).items() if fid == file_id}
    if explicit:
        track_labels = {idx: frozenset(explicit.get(idx, ())) for idx in feats}
    elif keywords:
        track_labels = {idx: labels_from_name(names.get(idx, ""), keywords) for idx in feats}
    else:
        track_labels = {idx: frozenset() for idx in feats}
    if not any(track_labels.values()):
        return []
    return [LabeledTrack(feats[idx], track_labels[idx], file_id, idx) for idx in sorted(feats)]


def load_corpus(
    corpus_dir,
    label_file=None,
    keywords: Mapping[str, Sequence[str]] | None = DEFAULT_KEYWORDS,
) -> tuple[list[LabeledTrack], list[tuple[str, str]]]:
    """Labeled tracks from every ``.mid``/``.midi`` file below ``corpus_dir``.

    ``file_id`` is the path relative to ``corpus_dir`` with forward slashes.
    Returns the tracks and a list of ``(file_id, error)`` for unreadable files.
    """
    root = Path(corpus_dir)
    labels = read_label_file(label_file) if label_file else None
    out: list[LabeledTrack] = []
    failures = []
    for path in sorted(p for p in root.rglob("*") if p.suffix.lower() in (".mid", ".midi")):
        file_id = path.relative_to(root).as_posix()
        try:
            out.extend(labeled_tracks_from_file(read_midi(path), file_id, labels, keywords))
        except Exception as exc:  # one bad file never stops corpus loading
            failures.append((file_id, f"{type(exc).__name__}: {exc}"))
    return out, failures


# ---------------------------------------------------------------- training


def role_targets(data: Sequence[LabeledTrack], role: str) -> np.ndarray:
    return np.array([role in d.labels for d in data], dtype=np.int64)


def train_role_models(data: Sequence[LabeledTrack], params: ForestParams = ForestParams(), n_jobs: int = 1) -> dict[str, ForestModel]:
    if not data:
        raise DegenerateData("no labeled tracks to train on")
    X = np.vstack([d.features for d in data])
    return {role: train_forest(X, role_targets(data, role), role, params, n_jobs) for role in ROLES}


def stratified_split(data: Sequence[LabeledTrack], test_fraction: float = 0.25, seed: int = 42):
    """Seeded split that keeps each label-set stratum at ``test_fraction``."""
    rng = np.random.default_rng(seed)
    strata: dict[tuple, list[int]] = {}
    for i, d in enumerate(data):
        strata.setdefault(tuple(sorted(d.labels)), []).append(i)
    test_idx = []
    for key in sorted(strata):
        members = np.array(strata[key])
        rng.shuffle(members)
        n_test = int(round(len(members) * test_fraction))
        test_idx.extend(members[:n_test].tolist())
    test_set = set(test_idx)
    train = [d for i, d in enumerate(data) if i not in test_set]
    test = [d for i, d in enumerate(data) if i in test_set]
    return train, test


def evaluate(models: Mapping[str, ForestModel], data: Sequence[LabeledTrack]) -> dict[str, dict[str, dict[str, float]]]:
    """Per-role precision / recall / F1 for the False and True classes."""
    X = np.vstack([d.features for d in data])
    report = {}
    for role in ROLES:
        truth = role_targets(data, role).astype(bool)
        pred = models[role].predict(X)
        rows = {}
        for label, t, p in (("False", ~truth, ~pred), ("True", truth, pred)):
            tp = int((t & p).sum())
            precision = tp / int(p.sum()) if p.any() else 0.0
            recall = tp / int(t.sum()) if t.any() else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            rows[label] = {"precision": precision, "recall": recall, "f1": f1, "support": int(t.sum())}
        report[role] = rows
    return report


def format_report(report: Mapping[str, Mapping[str, Mapping[str, float]]]) -> str:
    lines = [f"{'track':<9}{'prediction':<12}{'precision':>10}{'recall':>9}{'F1 score':>10}{'support':>9}"]
    for role in ROLES:
        for i, label in enumerate(("False", "True")):
            r = report[role][label]
            lines.append(
                f"{role if i == 0 else '':<9}{label:<12}{r['precision']:>10.2f}{r['recall']:>9.2f}{r['f1']:>10.2f}{r['support']:>9d}"
            )
    return "\n".join(lines)


def model_paths(model_dir) -> dict[str, Path]:
    return {role: Path(model_dir) / f"{role}.forest" for role in ROLES}


def save_models(models: Mapping[str, ForestModel], model_dir) -> None:
    os.makedirs(model_dir, exist_ok=True)
    for role, path in model_paths(model_dir).items():
        save_model_file(models[role], path)


def load_models(model_dir) -> dict[str, ForestModel]:
    paths = model_paths(model_dir)
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise FileNotFoundError(f"missing model file(s): {', '.join(missing)}")
    return {role: load_model_file(path) for role, path in paths.items()}


# ---------------------------------------------------------------- assignment


def assign_roles(midi: MidiFile, models: Mapping[str, ForestModel]) -> RoleAssignment:
    """Greedy role matching by descending probability.

    Candidate ``(track, role)`` pairs with p > 0.5 are taken in order of
    probability (ties: melody, bass, harmony, then lower track index). A
    track keeps the first role it wins; melody and bass take one track each.
    Drum-only and unclaimed tracks are discarded.
    """
    feats = file_features(midi)
    probs = {}
    for idx, vec in feats.items():
        probs[idx] = {role: float(models[role].predict_proba(vec)[0]) for role in ROLES}

    pairs = [
        (-p, ROLES.index(role), idx, role)
        for idx, by_role in probs.items()
        for role, p in by_role.items()
        if p > 0.5
    ]
    pairs.sort()
    taken: dict[int, str] = {}
    melody = bass = None
    harmony = []
    for _, _, idx, role in pairs:
        if idx in taken:
            continue
        if role == "melody":
            if melody is not None:
                continue
            melody = idx
        elif role == "bass":
            if bass is not None:
                continue
            bass = idx
        else:
            harmony.append(idx)
        taken[idx] = role
    discarded = tuple(sorted(t.index for t in midi.tracks if t.index not in taken and _has_notes(t)))
    return RoleAssignment(melody, bass, tuple(sorted(harmony)), discarded, probs)


def _has_notes(track: Track) -> bool:
    return any(ev.is_channel and ev.is_note_on for ev in track.events)


def _is_conductor_event(ev: Event) -> bool:
    return ev.is_meta and ev.meta_type in (META_TEMPO, META_TIME_SIGNATURE)


def extract_tracks(midi: MidiFile, assignment: RoleAssignment) -> MidiFile:
    """Conductor track plus the assigned tracks, ordered melody, bass, harmony.

    Each output track is renamed to its role. Drum-channel events, tempo and
    time-signature events and the old track name are not copied into role
    tracks; everything else is copied unchanged.
    """
    by_index = {t.index: t for t in midi.tracks}
    conductor = sorted(
        (ev for t in midi.tracks for ev in t.events if _is_conductor_event(ev)),
        key=lambda ev: ev.tick,
    )
    out = [Track(0, conductor)]
    for role, idx in assignment.assigned:
        src = by_index[idx]
        events = [meta(0, META_TRACK_NAME, role.encode("ascii"))]
        for ev in src.events:
            if _is_conductor_event(ev):
                continue
            if ev.is_meta and ev.meta_type in (META_TRACK_NAME, META_END_OF_TRACK):
                continue
            if ev.is_channel and ev.channel == DRUM_CHANNEL:
                continue
            events.append(ev)
        out.append(Track(len(out), events))
    return MidiFile(1, midi.ppq, out)
