from pathlib import Path
from typing import Callable, List

import numpy as np
import pandas as pd
import pytest
from scipy.io import savemat

from app.models.signals import N_CHANNELS, Dataset, LabeledStream, Window


def random_stream(n: int, label: int = 0, subject: int = 0, rate_hz: int = 50, seed: int = 0) -> LabeledStream:
    rng = np.random.default_rng(seed)
    return LabeledStream(
        values=rng.normal(size=(n, N_CHANNELS)),
        labels=np.full(n, label),
        subject=subject,
        rate_hz=rate_hz,
        source=f"synthetic-{subject}-{label}",
    )


def separable_windows(count: int, length: int, subjects: List[int], seed: int = 0) -> List[Window]:
    """Two classes: class 1 has a +3 offset on every channel, class 0 a -3 offset"""
    rng = np.random.default_rng(seed)
    windows = []
    for i in range(count):
        label = i % 2
        offset = 3.0 if label else -3.0
        samples = (rng.normal(scale=0.5, size=(length, N_CHANNELS)) + offset).astype(np.float32)
        windows.append(Window(samples=samples, label=label, subject=subjects[i % len(subjects)], rate_hz=50))
    return windows


@pytest.fixture
def stream_factory() -> Callable[..., LabeledStream]:
    return random_stream


@pytest.fixture
def separable_dataset() -> Dataset:
    return Dataset(
        name="synthetic",
        rate_hz=50,
        classes=("low", "high"),
        train=separable_windows(512, 24, subjects=[0, 1, 2, 3], seed=1),
        test=separable_windows(128, 24, subjects=[4, 5], seed=2),
    )


# ---------------------------------------------------------------------------
# Fake on-disk layouts of the public datasets
# ---------------------------------------------------------------------------

def _signal(rng: np.random.Generator, rows: int, columns: int = 3) -> np.ndarray:
    return rng.normal(size=(rows, columns))


@pytest.fixture
def ridi_root(tmp_path: Path) -> Path:
    """Three subjects with two placements each, 600 rows at 200 Hz"""
    rng = np.random.default_rng(10)
    root = tmp_path / "ridi"
    for subject in ("dan", "hang", "tang"):
        for tag in ("bag1", "leg2"):
            folder = root / f"{subject}_{tag}" / "processed"
            folder.mkdir(parents=True)
            acc, gyro = _signal(rng, 600), _signal(rng, 600)
            frame = pd.DataFrame(
                {
                    "time": np.arange(600) / 200.0,
                    "acce_x": acc[:, 0],
                    "acce_y": acc[:, 1],
                    "acce_z": acc[:, 2],
                    "gyro_x": gyro[:, 0],
                    "gyro_y": gyro[:, 1],
                    "gyro_z": gyro[:, 2],
                }
            )
            frame.to_csv(folder / "data.csv", index=False)
    return root


MOTIONSENSE_FOLDERS = ("dws_1", "jog_9", "sit_5", "std_6", "ups_3", "wlk_7")


@pytest.fixture
def motionsense_root(tmp_path: Path) -> Path:
    """Three subjects, every activity folder, 250 rows at 50 Hz"""
    rng = np.random.default_rng(11)
    root = tmp_path / "motionsense" / "A_DeviceMotion_data"
    for folder in MOTIONSENSE_FOLDERS:
        (root / folder).mkdir(parents=True)
        for subject in (1, 2, 3):
            rows = 250
            columns = {}
            for group in ("attitude.roll", "attitude.pitch", "attitude.yaw"):
                columns[group] = rng.normal(size=rows)
            for group in ("gravity", "rotationRate", "userAcceleration"):
                for axis in "xyz":
                    columns[f"{group}.{axis}"] = rng.normal(scale=0.3, size=rows)
            frame = pd.DataFrame(columns)
            frame.to_csv(root / folder / f"sub_{subject}.csv")
    return tmp_path / "motionsense"


UCI_SIGNALS = ("total_acc_x", "total_acc_y", "total_acc_z", "body_gyro_x", "body_gyro_y", "body_gyro_z")


def _write_uci_split(base: Path, split: str, activity: List[int], subjects: List[int], rng) -> None:
    folder = base / split / "Inertial Signals"
    folder.mkdir(parents=True)
    for name in UCI_SIGNALS:
        np.savetxt(folder / f"{name}_{split}.txt", rng.normal(size=(len(activity), 128)), fmt="%.8e")
    np.savetxt(base / split / f"y_{split}.txt", np.asarray(activity), fmt="%d")
    np.savetxt(base / split / f"subject_{split}.txt", np.asarray(subjects), fmt="%d")


@pytest.fixture
def uci_har_root(tmp_path: Path) -> Path:
    """Train subjects 1, 3; test subject 2; six windows each"""
    rng = np.random.default_rng(12)
    base = tmp_path / "uci" / "UCI HAR Dataset"
    _write_uci_split(base, "train", [1, 1, 1, 4, 4, 4] * 2, [1] * 6 + [3] * 6, rng)
    _write_uci_split(base, "test", [2, 2, 2, 6, 6, 6], [2] * 6, rng)
    return tmp_path / "uci"


@pytest.fixture
def usc_sipi_root(tmp_path: Path) -> Path:
    """Two subjects, activities 1, 6, 7, 8, 9 kept and 4 excluded, 400 rows at 100 Hz"""
    rng = np.random.default_rng(13)
    root = tmp_path / "usc" / "USC-HAD"
    for subject in (1, 2):
        folder = root / f"Subject{subject}"
        folder.mkdir(parents=True)
        for activity in (1, 4, 6, 7, 8, 9):
            savemat(
                str(folder / f"a{activity}t1.mat"),
                {"sensor_readings": rng.normal(size=(400, 6)), "activity_number": str(activity)},
            )
    return tmp_path / "usc"
