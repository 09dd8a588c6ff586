"""Parametric discrete memoryless channels with analytic parameter derivatives.

A channel family maps a parameter vector theta (confined to a box) to a
row-stochastic transition matrix W, where ``W[i, t] = P(Y = y_t | X = x_i)``.
Four concrete families are provided:

- :class:`BinarySymmetricChannel` (crossover probability theta),
- :class:`BinaryErasureChannel` (erasure probability theta, outputs
  ordered ``0, ?, 1``),
- :class:`GaussianSoftmaxChannel` (rows are softmaxes of squared-distance
  logits ``-(y_t - x_i)^2 / theta`` over fixed input/output grids),
- :class:`FixedTablePair` (two hard-coded tables addressed by label 1 or 2;
  not differentiable).

All models are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import NotDifferentiableError

# Probability-parameter boxes stay this far inside [0, 1].
PROB_EDGE = 1e-6

ROW_SUM_TOL = 1e-12
DERIV_ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class ChannelMatrix:
    """Row-stochastic transition matrix of a discrete memoryless channel."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ValueError("channel matrix must be 2-d")
        if np.any(entries < 0.0) or np.any(entries > 1.0):
            raise ValueError("channel matrix entries must lie in [0, 1]")
        row_sums = entries.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
            worst = float(np.max(np.abs(row_sums - 1.0)))
            raise ValueError(f"channel matrix rows must sum to 1 (max deviation {worst:.3e})")
        object.__setattr__(self, "entries", entries)
        entries.setflags(write=False)

    @property
    def n_inputs(self) -> int:
        return self.entries.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class ChannelParam:
    """Parameter vector constrained to a box.

    ``values`` has the same length as the bound vectors; the bounds define
    the feasible box (resource constraints on the transmitter side).
    """

    values: np.ndarray
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        lower = np.atleast_1d(np.asarray(self.lower_bounds, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper_bounds, dtype=float))
        if not (values.shape == lower.shape == upper.shape) or values.ndim != 1:
            raise ValueError("parameter values and bounds must be 1-d vectors of equal length")
        if np.any(lower >= upper):
            raise ValueError("lower bounds must be strictly below upper bounds")
        if np.any(values < lower) or np.any(values > upper):
            raise ValueError(
                f"parameter {values} outside box [{lower}, {upper}]"
            )
        for name, arr in (("values", values), ("lower_bounds", lower), ("upper_bounds", upper)):
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def with_values(self, values) -> "ChannelParam":
        """Same box, new values (values are clipped into the box)."""
        clipped = np.clip(np.atleast_1d(np.asarray(values, dtype=float)),
                          self.lower_bounds, self.upper_bounds)
        return ChannelParam(clipped, self.lower_bounds, self.upper_bounds)


@dataclass(frozen=True)
class GaussianSoftmaxSpec:
    """Input/output grids for the softmax channel family.

    Grids must be strictly increasing and the output grid must cover the
    span of the input grid.
    """

    input_points: np.ndarray
    output_points: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.input_points, dtype=float)
        y = np.asarray(self.output_points, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size < 2 or y.size < 2:
            raise ValueError("input and output grids must be 1-d with at least 2 points")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("grids must be strictly increasing")
        if y[0] > x[0] or y[-1] < x[-1]:
            raise ValueError("output grid must cover the span of the input grid")
        object.__setattr__(self, "input_points", x)
        object.__setattr__(self, "output_points", y)
        x.setflags(write=False)
        y.setflags(write=False)

    @staticmethod
    def default(n_inputs: int = 10, n_outputs: int = 50) -> "GaussianSoftmaxSpec":
        """Equally spaced inputs on [0, 1] and outputs on [-0.5, 1.5]."""
        return GaussianSoftmaxSpec(
            input_points=np.linspace(0.0, 1.0, n_inputs),
            output_points=np.linspace(-0.5, 1.5, n_outputs),
        )


class ChannelModel(ABC):
    """A parametric channel family: theta in a box -> row-stochastic matrix.

    Subclasses fill in ``name``, the alphabet sizes, the parameter box and
    the matrix (and, when differentiable, its parameter derivatives).
    """

    name: str
    n_inputs: int
    n_outputs: int
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    differentiable: bool = True

    @property
    def param_dim(self) -> int:
        return len(self.lower_bounds)

    def make_param(self, values) -> ChannelParam:
        return ChannelParam(values, self.lower_bounds, self.upper_bounds)

    def midpoint_param(self) -> ChannelParam:
        return self.make_param(0.5 * (self.lower_bounds + self.upper_bounds))

    def _values(self, theta) -> np.ndarray:
        """Coerce theta (ChannelParam, scalar or vector) to a validated vector."""
        if isinstance(theta, ChannelParam):
            values = theta.values
        else:
            values = np.atleast_1d(np.asarray(theta, dtype=float))
        if values.shape != (self.param_dim,):
            raise ValueError(f"{self.name}: expected {self.param_dim} parameter(s), got {values.shape}")
        if np.any(values < self.lower_bounds) or np.any(values > self.upper_bounds):
            raise ValueError(
                f"{self.name}: parameter {values} outside box "
                f"[{self.lower_bounds}, {self.upper_bounds}]"
            )
        return values

    def matrix_at(self, theta) -> ChannelMatrix:
        """Transition matrix W(theta)."""
        return ChannelMatrix(self._matrix(self._values(theta)))

    def d_matrix_d_theta(self, theta) -> list[np.ndarray]:
        """Analytic dW/dtheta_k, one N x M matrix per parameter component.

        Each row of every derivative matrix sums to zero (derivative of the
        row-stochastic constraint).
        """
        if not self.differentiable:
            raise NotDifferentiableError(f"{self.name} has no parameter derivative")
        return self._d_matrix(self._values(theta))

    @abstractmethod
    def _matrix(self, values: np.ndarray) -> np.ndarray: ...

    def _d_matrix(self, values: np.ndarray) -> list[np.ndarray]:
        raise NotDifferentiableError(f"{self.name} has no parameter derivative")


class BinarySymmetricChannel(ChannelModel):
    """Two symbols, crossover probability theta."""

    name = "bsc"
    n_inputs = 2
    n_outputs = 2

    def __init__(self):
        self.lower_bounds = np.array([PROB_EDGE])
        self.upper_bounds = np.array([1.0 - PROB_EDGE])

    def _matrix(self, values):
        t = values[0]
        return np.array([[1.0 - t, t], [t, 1.0 - t]])

    def _d_matrix(self, values):
        return [np.array([[-1.0, 1.0], [1.0, -1.0]])]


class BinaryErasureChannel(ChannelModel):
    """Two inputs, outputs ordered (0, ?, 1), erasure probability theta."""

    name = "bec"
    n_inputs = 2
    n_outputs = 3

    def __init__(self):
        self.lower_bounds = np.array([PROB_EDGE])
        self.upper_bounds = np.array([1.0 - PROB_EDGE])

    def _matrix(self, values):
        t = values[0]
        return np.array([[1.0 - t, t, 0.0], [0.0, t, 1.0 - t]])

    def _d_matrix(self, values):
        return [np.array([[-1.0, 1.0, 0.0], [0.0, 1.0, -1.0]])]


class GaussianSoftmaxChannel(ChannelModel):
    """Rows are softmaxes of ``-(y_t - x_i)^2 / theta`` over the output grid.

    theta > 0 acts as a temperature: small theta concentrates each row near
    the output points closest to the input point, large theta flattens it.
    """

    name = "gaussian_softmax"

    def __init__(self, spec: GaussianSoftmaxSpec, theta_min: float, theta_max: float):
        if not (0.0 < theta_min < theta_max):
            raise ValueError("need 0 < theta_min < theta_max")
        self.spec = spec
        self.n_inputs = len(spec.input_points)
        self.n_outputs = len(spec.output_points)
        self.lower_bounds = np.array([float(theta_min)])
        self.upper_bounds = np.array([float(theta_max)])
        # Squared distances d[i, t] = (y_t - x_i)^2, fixed per instance.
        diff = spec.output_points[None, :] - spec.input_points[:, None]
        self._sq_dist = diff**2
        self._sq_dist.setflags(write=False)

    def _matrix(self, values):
        t = values[0]
        if t <= 0.0:
            raise ValueError("gaussian_softmax requires theta > 0")
        logits = -self._sq_dist / t
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        return w / w.sum(axis=1, keepdims=True)

    def _d_matrix(self, values):
        t = values[0]
        w = self._matrix(values)
        # dW[i,t]/dtheta = W[i,t] * (d[i,t] - sum_k W[i,k] d[i,k]) / theta^2
        mean_sq = (w * self._sq_dist).sum(axis=1, keepdims=True)
        return [w * (self._sq_dist - mean_sq) / t**2]


class FixedTablePair(ChannelModel):
    """Two fixed 2x3 tables addressed by label values 1 and 2.

    A non-identifiability fixture: the two tables differ entrywise by at
    least 0.3 yet admit input distributions with identical output marginals.
    No derivative exists (the parameter is a discrete label).
    """

    name = "fixed_table_pair"
    n_inputs = 2
    n_outputs = 3
    differentiable = False

    TABLE_1 = np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1]])
    TABLE_2 = np.array([[0.5, 0.4, 0.1], [0.3, 0.6, 0.1]])

    def __init__(self):
        self.lower_bounds = np.array([1.0])
        self.upper_bounds = np.array([2.0])
        self.TABLE_1.setflags(write=False)
        self.TABLE_2.setflags(write=False)

    def _matrix(self, values):
        label = values[0]
        if abs(label - 1.0) < 1e-9:
            return self.TABLE_1.copy()
        if abs(label - 2.0) < 1e-9:
            return self.TABLE_2.copy()
        raise ValueError(f"fixed_table_pair label must be 1 or 2, got {label}")


def make_bsc() -> BinarySymmetricChannel:
    return BinarySymmetricChannel()


def make_bec() -> BinaryErasureChannel:
    return BinaryErasureChannel()


def make_gaussian_softmax(
    spec: GaussianSoftmaxSpec | None = None,
    theta_min: float = 0.1,
    theta_max: float = 5.0,
) -> GaussianSoftmaxChannel:
    """Softmax channel over the given grids (defaults: 10 inputs, 50 outputs)."""
    return GaussianSoftmaxChannel(spec or GaussianSoftmaxSpec.default(), theta_min, theta_max)


def make_fixed_table_pair() -> FixedTablePair:
    return FixedTablePair()
