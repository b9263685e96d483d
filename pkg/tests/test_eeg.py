import gzip

import numpy as np
import pytest

from npmlda.eeg import (
    PrepLog,
    load_eeg_directory,
    parse_trial_file,
    preprocess_subject,
    preprocess_trial,
    subject_from_name,
)
from npmlda.errors import MissingChannel, ParseError, ShortTrial


def test_constant_trial():
    out = preprocess_subject([np.full((64, 256), 3.25)])
    assert out.shape == (16, 64)
    assert np.all(out == 3.25)


def test_ramp_medians():
    trial = np.zeros((64, 256))
    trial[5] = np.arange(1, 257)
    out = preprocess_trial(trial)
    expected = [8.5 + 16 * b for b in range(16)]
    assert out[:, 5].tolist() == expected
    assert out[-1, 5] == 248.5
    assert not np.delete(out, 5, axis=1).any()


def test_two_trials_average(rng):
    a, b = rng.standard_normal((2, 64, 256))
    out = preprocess_subject([a, b])
    assert np.allclose(out, (preprocess_trial(a) + preprocess_trial(b)) / 2, rtol=0, atol=1e-15)


def test_block_median_against_loop(rng):
    trial = rng.standard_normal((64, 256))
    out = preprocess_trial(trial)
    for t in (0, 7, 15):
        for c in (0, 31, 63):
            assert out[t, c] == np.median(sorted(trial[c, 16 * t:16 * t + 16]))


def test_missing_channel_and_short_trial():
    with pytest.raises(MissingChannel):
        preprocess_trial(np.zeros((63, 256)))
    with pytest.raises(ShortTrial):
        preprocess_trial(np.zeros((64, 200)))


def test_subject_from_name():
    assert subject_from_name("co2a0000364.rd.000") == ("co2a0000364", "a")
    assert subject_from_name("Co3C0000402.rd.gz") == ("co3c0000402", "c")
    assert subject_from_name("readme.txt") is None


def _write_trial(path, subject, data, channels=None, header=True):
    channels = channels or [f"CH{c}" for c in range(len(data))]
    lines = []
    if header:
        lines += [f"# {subject}.rd", "# 120 trials, 64 chans, 416 samples 368 post_stim samples",
                  "# S1 obj , trial 0"]
    for c, name in enumerate(channels):
        lines += [f"0 {name} {s} {float(v)!r}" for s, v in enumerate(data[c])]
    text = "\n".join(lines) + "\n"
    if path.suffix == ".gz":
        with gzip.open(path, "wt") as fh:
            fh.write(text)
    else:
        path.write_text(text)


def test_parse_trial_file(tmp_path, rng):
    data = rng.standard_normal((64, 256)).round(3)
    _write_trial(tmp_path / "x.rd.000", "co2a0000364", data)
    trial = parse_trial_file(tmp_path / "x.rd.000")
    assert trial.subject == "co2a0000364" and trial.group == "a"
    assert np.array_equal(trial.data, data)
    assert trial.channels[:2] == ["CH0", "CH1"]


def test_parse_gzip_and_name_fallback(tmp_path, rng):
    data = rng.standard_normal((64, 256)).round(3)
    path = tmp_path / "co3c0000402.rd.001.gz"
    _write_trial(path, None, data, header=False)
    trial = parse_trial_file(path)
    assert trial.group == "c"
    assert np.array_equal(trial.data, data)


def test_parse_bad_line(tmp_path):
    (tmp_path / "co2a0000001.rd.000").write_text("# co2a0000001.rd\n0 FP1 0\n")
    with pytest.raises(ParseError):
        parse_trial_file(tmp_path / "co2a0000001.rd.000")


def test_load_directory(tmp_path, rng):
    trials = {}
    for subj in ("co2a0000001", "co2c0000002"):
        d = tmp_path / subj
        d.mkdir()
        trials[subj] = [rng.standard_normal((64, 256)).round(4) for _ in range(2)]
        for i, t in enumerate(trials[subj]):
            _write_trial(d / f"{subj}.rd.{i:03d}", subj, t)
    _write_trial(tmp_path / "co2c0000002" / "co2c0000002.rd.009", "co2c0000002",
                 rng.standard_normal((60, 256)))
    (tmp_path / "co2a0000001" / "co2a0000001.rd.010").write_text("garbage here\n")
    log = PrepLog()
    ds, subjects = load_eeg_directory(tmp_path, log)
    assert subjects == ["co2a0000001", "co2c0000002"]
    assert ds.y.tolist() == [1, 2]
    assert ds.class_names == ("alcoholic", "control")
    assert (log.trials_used, log.trials_skipped, log.files_unreadable) == (4, 1, 1)
    assert np.allclose(ds.x[1], preprocess_subject(trials["co2c0000002"]), rtol=0, atol=1e-15)


def test_load_empty_directory(tmp_path):
    with pytest.raises(ParseError):
        load_eeg_directory(tmp_path)
