"""EEG preprocessing for the UCI alcoholism EEG database.

Each trial (64 channels x 256 time points) is reduced to a 16 x 64 matrix of
block medians: rows are 16 consecutive time blocks of 16 points, columns are
channels. A subject's matrix is the elementwise mean over their trials.

Trial files follow the UCI text layout::

    # co2a0000364.rd
    # 120 trials, 64 chans, 416 samples 368 post_stim samples
    # ...
    0 FP1 0 -8.921
    0 FP1 1 -8.433

i.e. ``trial channel sample value`` rows, with ``#`` comment lines. The
fourth character of the subject id is ``a`` (alcoholic) or ``c`` (control).
"""

from __future__ import annotations

import gzip
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingChannel, ParseError, ShortTrial
from .matnorm import MatrixDataset

log = logging.getLogger(__name__)

N_CHANNELS = 64
N_TIMES = 256
N_BLOCKS = 16
CLASS_NAMES = ("alcoholic", "control")
_SUBJECT_RE = re.compile(r"^(co\d([ac])\d+)", re.IGNORECASE)


@dataclass
class EegTrial:
    subject: str
    group: str  # "a" or "c"
    data: np.ndarray  # (channels, times)
    channels: list[str] = field(default_factory=list)


@dataclass
class PrepLog:
    trials_used: int = 0
    trials_skipped: int = 0
    files_unreadable: int = 0
    skipped: list[str] = field(default_factory=list)


def preprocess_trial(data):
    """Reduce one (64, 256) trial to a (16, 64) matrix of block medians."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < N_CHANNELS:
        raise MissingChannel(f"trial has {data.shape[0] if data.ndim == 2 else 0} channels")
    if data.shape[1] < N_TIMES:
        raise ShortTrial(f"trial has {data.shape[1]} time points, need {N_TIMES}")
    blocks = data[:N_CHANNELS, :N_TIMES].reshape(N_CHANNELS, N_BLOCKS, N_TIMES // N_BLOCKS)
    return np.median(blocks, axis=2).T


def preprocess_subject(trials):
    """Elementwise mean of the preprocessed trials of one subject."""
    mats = [preprocess_trial(t) for t in trials]
    if not mats:
        raise ValueError("subject has no trials")
    return np.mean(mats, axis=0)


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    return open(path)


def subject_from_name(name):
    m = _SUBJECT_RE.match(Path(name).name)
    if not m:
        return None
    return m.group(1).lower(), m.group(2).lower()


def parse_trial_file(path):
    """Parse one UCI trial file into an :class:`EegTrial`."""
    subject = None
    values = defaultdict(dict)
    order = []
    with _open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                words = line.lstrip("# ").split()
                if subject is None and words:
                    subject = subject_from_name(words[0])
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields")
            _, chan, sample, value = parts
            try:
                values[chan][int(sample)] = float(value)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if len(values[chan]) == 1 and chan not in order:
                order.append(chan)
    subject = subject or subject_from_name(path)
    if subject is None:
        raise ParseError(f"cannot determine subject id for {path}")
    if not order:
        raise ParseError(f"{path} has no samples")
    n_times = min(max(v) + 1 for v in values.values())
    data = np.full((len(order), n_times), np.nan)
    for c, chan in enumerate(order):
        for s, val in values[chan].items():
            if s < n_times:
                data[c, s] = val
    if np.isnan(data).any():
        raise ParseError(f"{path} has gaps in its sample indices")
    return EegTrial(subject[0], subject[1], data, order)


def _trial_files(root):
    for f in sorted(Path(root).rglob("*")):
        if f.is_file() and ".rd" in f.name:
            yield f


def load_eeg_directory(root, prep_log=None):
    """Preprocess every subject found under ``root``.

    Trials with missing channels or too few time points are skipped and
    counted in ``prep_log``. Labels: 1 = alcoholic, 2 = control. Returns
    ``(dataset, subject_ids)``.
    """
    prep_log = prep_log if prep_log is not None else PrepLog()
    per_subject = defaultdict(list)
    groups = {}
    for f in _trial_files(root):
        try:
            trial = parse_trial_file(f)
        except (ParseError, OSError, UnicodeDecodeError) as exc:
            prep_log.files_unreadable += 1
            log.warning("skipping unreadable file %s: %s", f, exc)
            continue
        try:
            mat = preprocess_trial(trial.data)
        except (MissingChannel, ShortTrial) as exc:
            prep_log.trials_skipped += 1
            prep_log.skipped.append(f"{f}: {exc}")
            continue
        per_subject[trial.subject].append(mat)
        groups[trial.subject] = trial.group
        prep_log.trials_used += 1
    subjects = sorted(per_subject)
    if not subjects:
        raise ParseError(f"no usable EEG trials under {root}")
    x = np.stack([np.mean(per_subject[s], axis=0) for s in subjects])
    y = np.array([1 if groups[s] == "a" else 2 for s in subjects])
    log.info(
        "EEG: %d subjects, %d trials used, %d skipped",
        len(subjects), prep_log.trials_used, prep_log.trials_skipped,
    )
    return MatrixDataset(x, y, CLASS_NAMES), subjects
