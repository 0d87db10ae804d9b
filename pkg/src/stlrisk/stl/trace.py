from __future__ import annotations

import csv
import dataclasses
import io

import numpy as np


@dataclasses.dataclass(frozen=True, eq=False)
class Trace:
    """States at steps ``t = 0..T`` sampled every ``dt`` seconds.

    ``states`` has shape ``(T + 1, n)``.
    """

    states: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] == 0:
            raise ValueError("trace needs a non-empty (steps, dim) array of states")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def last_step(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return self.states.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, Trace)
            and self.dt == other.dt
            and np.array_equal(self.states, other.states)
        )

    def to_csv(self, path=None) -> str:
        """Write ``t,s0,s1,...`` with the step index in ``t``; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"s{i}" for i in range(self.dim)])
        for t, row in enumerate(self.states):
            w.writerow([t] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, dt: float = 1.0) -> "Trace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:], dt)
