"""Linear plants with bounded (uniform box) noise, used for the gap-soundness scenarios.

``x+ = A x + B u + v`` and ``y = C x + w`` with ``v`` and ``w`` uniform on
boxes of the given half-widths. Combined with a Lipschitz controller this is
the smallest system on which the Lipschitz and iISS trajectory bounds can be
checked against simulation.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from ..gap import DisturbanceBounds, LipschitzConstants
from .models import System


def _mat(a) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=float))
    m.setflags(write=False)
    return m


def _vec(v, n) -> np.ndarray:
    out = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
    out.setflags(write=False)
    return out


@dataclasses.dataclass(frozen=True, eq=False)
class LinearSystem(System):
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    process_halfwidth: object = 0.0
    measurement_halfwidth: object = 0.0
    x0_halfwidth: object = 1.0  # initial state uniform on [-h, h]^n
    dt: float = 1.0

    def __post_init__(self):
        a, b, c = _mat(self.a), _mat(self.b), _mat(self.c)
        n = a.shape[0]
        if a.shape != (n, n) or b.shape[0] != n or c.shape[1] != n:
            raise ValueError(f"inconsistent shapes A{a.shape} B{b.shape} C{c.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "process_halfwidth", _vec(self.process_halfwidth, n))
        object.__setattr__(self, "measurement_halfwidth", _vec(self.measurement_halfwidth, c.shape[0]))
        object.__setattr__(self, "x0_halfwidth", _vec(self.x0_halfwidth, n))

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.c.shape[0]

    @property
    def control_dim(self) -> int:
        return self.b.shape[1]

    def initial_state(self, rng):
        return rng.uniform(-1.0, 1.0, size=self.state_dim) * self.x0_halfwidth

    def process_noise(self, rng, steps):
        return rng.uniform(-1.0, 1.0, size=(steps, self.state_dim)) * self.process_halfwidth

    def measurement_noise(self, rng, steps):
        return rng.uniform(-1.0, 1.0, size=(steps, self.obs_dim)) * self.measurement_halfwidth

    def step(self, x, u, v):
        return np.einsum("ij,bj->bi", self.a, x) + np.einsum("ij,bj->bi", self.b, u) + v

    def observe(self, x, w):
        return np.einsum("ij,bj->bi", self.c, x) + w

    def closed_loop(self, gain) -> np.ndarray:
        """``A + B K C`` for the output feedback ``u = K y``."""
        return self.a + self.b @ np.atleast_2d(gain) @ self.c

    def lipschitz_constants(self, l_u: float) -> LipschitzConstants:
        """Induced 2-norm constants; the noise enters with gain one."""
        return LipschitzConstants(
            l_f1=float(np.linalg.norm(self.a, 2)),
            l_f2=float(np.linalg.norm(self.b, 2)),
            l_f3=1.0,
            l_u=l_u,
            l_g1=float(np.linalg.norm(self.c, 2)),
            l_g2=1.0,
        )

    def disturbance_bounds(self) -> DisturbanceBounds:
        """``v* = 2 max ||v||``, ``w* = 2 max ||w||`` over the noise boxes."""
        return DisturbanceBounds.from_max_norms(
            float(np.linalg.norm(self.process_halfwidth)), float(np.linalg.norm(self.measurement_halfwidth))
        )

    def combined_disturbance_diameter(self, gain) -> float:
        """Diameter bound of ``d = v + B K w``, the disturbance seen by ``x+ = (A + BKC) x + d``."""
        bk = self.b @ np.atleast_2d(gain)
        return 2.0 * (float(np.linalg.norm(self.process_halfwidth))
                      + float(np.linalg.norm(bk, 2)) * float(np.linalg.norm(self.measurement_halfwidth)))


def stable_linear_system(n: int = 2, pole: float = 0.5, process_halfwidth: float = 0.1,
                         measurement_halfwidth: float = 0.0) -> LinearSystem:
    """``x+ = pole * x + v`` (input matrix zero columns are avoided by ``B = I``)."""
    eye = np.eye(n)
    return LinearSystem(pole * eye, eye, eye, process_halfwidth, measurement_halfwidth)


def scalar_lipschitz_system(measurement_halfwidth: float = 0.05) -> LinearSystem:
    """``x+ = 0.5 x + u + v`` with ``y = 0.5 x + w`` and no process noise.

    With ``u = tanh(y)`` the Lipschitz constants are
    ``(L_f1, L_f2, L_f3, L_u, L_g1, L_g2) = (0.5, 1, 1, 1, 0.5, 1)``.
    """
    return LinearSystem([[0.5]], [[1.0]], [[0.5]], 0.0, measurement_halfwidth)
