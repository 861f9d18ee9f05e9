import numpy as np
import pandas as pd
import pytest

from app.core.errors import IngestionError, SplitError
from app.models.settings import DatasetSettings, SplitSettings
from app.models.signals import DatasetDraft, Window
from app.services.ingestion import (
    GRAVITY,
    MOTIONSENSE_CLASSES,
    USC_SIPI_CLASSES,
    deoverlap_windows,
    load_dataset,
    load_motionsense,
    load_ridi,
    load_uci_har,
    load_usc_sipi,
    parse_ridi_sequence,
    read_motionsense,
    read_ridi,
    read_uci_har,
    read_usc_sipi,
    sniff_encoding,
    split_subjects,
    summarize,
    summarize_recordings,
)
from app.services.preprocessing import MaSpec


def _draft(n_subjects: int, per_subject: int = 2) -> DatasetDraft:
    windows = [
        Window(samples=np.zeros((4, 6)), label=0, subject=s, rate_hz=50)
        for s in range(n_subjects)
        for _ in range(per_subject)
    ]
    return DatasetDraft(name="draft", rate_hz=50, classes=["a"], windows=windows)


@pytest.mark.parametrize("subjects, expected", [(10, 2), (14, 3), (5, 1), (2, 1)])
def test_split_sizes(subjects, expected):
    dataset = split_subjects(_draft(subjects), test_fraction=0.2, seed=42)
    assert len(dataset.test_subjects) == expected
    assert dataset.train_subjects.isdisjoint(dataset.test_subjects)
    assert len(dataset.train) + len(dataset.test) == 2 * subjects


def test_split_is_seeded():
    a = split_subjects(_draft(10), 0.2, seed=1)
    b = split_subjects(_draft(10), 0.2, seed=1)
    assert a.test_subjects == b.test_subjects
    assert any(split_subjects(_draft(10), 0.2, seed=s).test_subjects != a.test_subjects for s in range(2, 8))


def test_single_subject_cannot_be_split():
    with pytest.raises(SplitError):
        split_subjects(_draft(1), 0.2, seed=0)


def test_ridi_placement_tags():
    assert parse_ridi_sequence("dan_leg2") == ("dan", "pocket")
    assert parse_ridi_sequence("hao_handheld1") == ("hao", "handheld")
    assert parse_ridi_sequence("ma_body") == ("ma", "body")
    with pytest.raises(IngestionError):
        parse_ridi_sequence("dan_shoe1")


def test_load_ridi(ridi_root):
    dataset = load_ridi(ridi_root, test_fraction=0.3, seed=0)
    assert dataset.rate_hz == 200
    assert dataset.window_length == 400
    assert len(dataset.train) + len(dataset.test) == 6
    assert {w.label for w in (*dataset.train, *dataset.test)} == {0, 1}
    assert len(dataset.test_subjects) == 1


def test_ridi_reload_is_identical(ridi_root):
    a = load_ridi(ridi_root, seed=3)
    b = load_ridi(ridi_root, seed=3)
    np.testing.assert_array_equal(
        np.stack([w.samples for w in a.train]), np.stack([w.samples for w in b.train])
    )


def test_ridi_empty_directory(tmp_path):
    with pytest.raises(IngestionError):
        load_ridi(tmp_path)


def test_ridi_missing_column_names_the_file(ridi_root):
    target = ridi_root / "dan_bag1" / "processed" / "data.csv"
    pd.read_csv(target).drop(columns=["gyro_z"]).to_csv(target, index=False)
    with pytest.raises(IngestionError, match="dan_bag1"):
        read_ridi(ridi_root)


def test_non_finite_rows_are_counted_and_split(ridi_root, caplog):
    target = ridi_root / "hang_leg2" / "processed" / "data.csv"
    frame = pd.read_csv(target)
    frame.loc[300, "acce_x"] = np.nan
    frame.to_csv(target, index=False)
    with caplog.at_level("WARNING"):
        recordings = read_ridi(ridi_root)
    assert recordings.provenance["rejected_rows"] == 1
    assert "rejected 1 non-finite rows" in caplog.text
    assert sorted(len(s) for s in recordings.streams)[:2] == [299, 300]


def test_load_motionsense_units_and_classes(motionsense_root):
    recordings = read_motionsense(motionsense_root)
    assert recordings.rate_hz == 50
    assert recordings.classes == MOTIONSENSE_CLASSES
    assert recordings.subjects == [1, 2, 3]
    first = recordings.streams[0]
    frame = pd.read_csv(motionsense_root / "A_DeviceMotion_data" / "dws_1" / "sub_1.csv")
    expected = (frame["gravity.x"] + frame["userAcceleration.x"]).to_numpy() * GRAVITY
    np.testing.assert_allclose(first.values[:, 0], expected)
    np.testing.assert_allclose(first.values[:, 3], frame["rotationRate.x"].to_numpy())
    assert set(first.labels.tolist()) == {MOTIONSENSE_CLASSES.index("stairs down")}
    dataset = load_motionsense(motionsense_root, seed=0)
    assert len(dataset.train) + len(dataset.test) == 3 * 6 * 2


def test_motionsense_unknown_activity_folder(motionsense_root):
    (motionsense_root / "A_DeviceMotion_data" / "run_2").mkdir()
    with pytest.raises(IngestionError, match="run_2"):
        read_motionsense(motionsense_root)


def test_deoverlap_rebuilds_streams():
    windows = np.arange(3 * 4 * 6, dtype=np.float64).reshape(3, 4, 6)
    streams = deoverlap_windows(windows, np.array([0, 0, 1]), np.array([5, 5, 5]), 50)
    assert len(streams) == 1
    stream = streams[0]
    assert len(stream) == 2 + 2 + 4
    np.testing.assert_array_equal(stream.values[:2], windows[0, :2])
    np.testing.assert_array_equal(stream.values[4:], windows[2])
    assert stream.labels.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]


def test_deoverlap_breaks_at_subject_change():
    windows = np.zeros((4, 4, 6))
    streams = deoverlap_windows(windows, np.zeros(4, dtype=int), np.array([1, 1, 2, 2]), 50)
    assert [(s.subject, len(s)) for s in streams] == [(1, 6), (2, 6)]


def test_load_uci_har(uci_har_root):
    recordings = read_uci_har(uci_har_root)
    assert recordings.provenance["layout"] == "inertial_signals"
    assert recordings.subjects == [1, 2, 3]
    assert [len(s) for s in recordings.streams] == [448, 448, 448]
    dataset = load_uci_har(uci_har_root, seed=0)
    assert len(dataset.train) + len(dataset.test) == 9
    labels = {w.label for w in (*dataset.train, *dataset.test)}
    # walking, sitting, stairs up, laying
    assert labels == {0, 3, 2, 5}


def test_uci_har_raw_layout(tmp_path):
    raw = tmp_path / "RawData"
    raw.mkdir()
    rng = np.random.default_rng(0)
    for exp, user in ((1, 1), (2, 2)):
        np.savetxt(raw / f"acc_exp{exp:02d}_user{user:02d}.txt", rng.normal(size=(300, 3)))
        np.savetxt(raw / f"gyro_exp{exp:02d}_user{user:02d}.txt", rng.normal(size=(300, 3)))
    # activity 7 is a postural transition and is skipped
    np.savetxt(raw / "labels.txt", np.array([[1, 1, 5, 1, 150], [1, 1, 7, 151, 200], [2, 2, 1, 11, 260]]), fmt="%d")
    recordings = read_uci_har(tmp_path)
    assert recordings.provenance["layout"] == "raw"
    assert [(s.subject, len(s), int(s.labels[0])) for s in recordings.streams] == [(1, 150, 4), (2, 250, 0)]


def test_uci_har_short_signal_file_names_the_file(uci_har_root):
    folder = uci_har_root / "UCI HAR Dataset" / "train" / "Inertial Signals"
    np.savetxt(folder / "body_gyro_z_train.txt", np.zeros((11, 128)), fmt="%.8e")
    with pytest.raises(IngestionError, match="body_gyro_z_train.txt"):
        read_uci_har(uci_har_root)


def test_uci_har_raw_gyro_mismatch_names_the_file(tmp_path):
    raw = tmp_path / "RawData"
    raw.mkdir()
    np.savetxt(raw / "acc_exp01_user01.txt", np.zeros((300, 3)))
    np.savetxt(raw / "gyro_exp01_user01.txt", np.zeros((299, 3)))
    np.savetxt(raw / "labels.txt", np.array([[1, 1, 5, 1, 150]]), fmt="%d")
    with pytest.raises(IngestionError, match="gyro_exp01_user01.txt"):
        read_uci_har(tmp_path)


def test_windows_are_float32(ridi_root):
    dataset = load_ridi(ridi_root, win_len=200, seed=0)
    assert {w.samples.dtype for w in (*dataset.train, *dataset.test)} == {np.dtype(np.float32)}


def test_load_usc_sipi(usc_sipi_root):
    recordings = read_usc_sipi(usc_sipi_root)
    assert recordings.provenance["excluded_files"] == 2
    assert recordings.classes == USC_SIPI_CLASSES
    stream = recordings.streams[0]
    assert np.abs(stream.values[:, 3:]).max() < np.abs(stream.values[:, :3]).max()
    dataset = load_usc_sipi(usc_sipi_root, seed=0)
    assert len(dataset.train) == len(dataset.test) == 10


def test_garbled_mat_file_names_the_file(usc_sipi_root):
    target = usc_sipi_root / "USC-HAD" / "Subject1" / "a1t1.mat"
    target.write_bytes(b"not a matlab file")
    with pytest.raises(IngestionError, match="a1t1.mat"):
        read_usc_sipi(usc_sipi_root)


def test_summarize_sums_to_total_minutes(motionsense_root):
    dataset = load_motionsense(motionsense_root, win_len=100, seed=0)
    table = summarize(dataset)
    assert list(table["class"]) == list(MOTIONSENSE_CLASSES)
    total_windows = len(dataset.train) + len(dataset.test)
    assert table["minutes"].sum() == pytest.approx(total_windows * 100 / 50 / 60)
    raw = summarize_recordings(read_motionsense(motionsense_root))
    assert raw["minutes"].sum() == pytest.approx(3 * 6 * 250 / 50 / 60)


def test_moving_average_variant_shortens_streams(ridi_root):
    plain = load_ridi(ridi_root, win_len=200, seed=0)
    denoised = load_ridi(ridi_root, win_len=200, seed=0, denoise=MaSpec(50))
    # 600 samples give 3 windows, 551 give 2
    assert len(plain.train) + len(plain.test) == 18
    assert len(denoised.train) + len(denoised.test) == 12


def test_cache_round_trip_and_corruption(ridi_root, tmp_path):
    settings = DatasetSettings(name="ridi", root=ridi_root)
    cache_dir = tmp_path / "cache"
    first = load_dataset(settings, SplitSettings(), cache_dir=cache_dir)
    cached = list(cache_dir.glob("ridi-*.imuw"))
    assert len(cached) == 1

    def fail():
        raise AssertionError("reader must not run on a cache hit")

    second = load_dataset(settings, SplitSettings(), cache_dir=cache_dir, reader=fail)
    assert second.test_subjects == first.test_subjects
    for fresh, cached_window in zip((*first.train, *first.test), (*second.train, *second.test)):
        assert fresh.samples.dtype == cached_window.samples.dtype == np.float32
        np.testing.assert_array_equal(cached_window.samples, fresh.samples)

    cached[0].write_bytes(b"XXXX" + cached[0].read_bytes()[4:])
    third = load_dataset(settings, SplitSettings(), cache_dir=cache_dir)
    assert len(third.train) == len(first.train)


def test_sniff_encoding(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    assert sniff_encoding(path) == "utf-8"
