"""Uniformly sampled probe traces and their file formats."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np


@dataclass
class Waveform:
    labels: tuple[str, ...]
    dt: float
    t0: float
    data: np.ndarray  # shape (n_samples, n_probes)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.labels)) if self.labels else np.asarray(
            self.data, dtype=float
        ).reshape(len(self.data), 0)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("probe labels must be unique")

    def __len__(self) -> int:
        return self.data.shape[0]

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __getitem__(self, label: str) -> np.ndarray:
        try:
            return self.data[:, self.labels.index(label)]
        except ValueError:
            raise KeyError(label) from None

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def value_at(self, label: str, t: float | np.ndarray) -> np.ndarray:
        """Linearly interpolated sample(s) of one column."""
        return np.interp(t, self.times, self[label])

    def window(self, t_start: float, t_end: float) -> "Waveform":
        i0 = int(round((t_start - self.t0) / self.dt))
        i1 = int(round((t_end - self.t0) / self.dt))
        return Waveform(self.labels, self.dt, self.t0 + i0 * self.dt, self.data[i0 : i1 + 1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time"] + list(self.labels))
        for t, row in zip(self.times, self.data):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self, config: Mapping[str, Any] | None = None) -> str:
        env = {
            "config": dict(config or {}),
            "probes": list(self.labels),
            "dt": self.dt,
            "t0": self.t0,
            "columns": {lab: self.data[:, k].tolist() for k, lab in enumerate(self.labels)},
        }
        return json.dumps(env, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Waveform":
        env = json.loads(text)
        labels = tuple(env["probes"])
        cols = [env["columns"][lab] for lab in labels]
        data = np.array(cols, dtype=float).T if cols else np.zeros((0, 0))
        return cls(labels, env["dt"], env["t0"], data)

    @classmethod
    def from_csv(cls, text: str) -> "Waveform":
        rows = list(csv.reader(io.StringIO(text)))
        labels = tuple(rows[0][1:])
        arr = np.array([[float(v) for v in r] for r in rows[1:]])
        dt = float(arr[1, 0] - arr[0, 0]) if len(arr) > 1 else 0.0
        return cls(labels, dt, float(arr[0, 0]), arr[:, 1:])
