"""Exact information measures on finite labeled alphabets.

All quantities are in nats (natural logarithm throughout). Weights below
``ZERO_TOL`` are treated as exact zeros inside log computations, so
0*log(0) = 0 holds without -inf*0 artifacts.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

# Mass below this is an exact zero for log purposes.
ZERO_TOL = 1e-15

# Allowed slack when checking that a distribution sums to one.
MASS_TOL = 1e-12


def _as_weights(values, name):
    w = np.asarray(values, dtype=np.float64)
    if w.ndim != 1:
        raise InputError(f"{name}: weights must be one-dimensional")
    if w.size < 1:
        raise InputError(f"{name}: length must be >= 1")
    if not np.all(np.isfinite(w)):
        raise InputError(f"{name}: weights must be finite")
    if np.any(w < 0):
        raise InputError(f"{name}: all weights must be >= 0")
    return w


def _check_labels(labels, name):
    labels = list(labels)
    if len(set(labels)) != len(labels):
        raise InputError(f"{name}: labels must be unique")
    return labels


@dataclass
class ProbVec:
    """Probability vector over an ordered, labeled finite alphabet."""

    labels: list
    weights: np.ndarray

    def __post_init__(self):
        self.labels = _check_labels(self.labels, "ProbVec")
        self.weights = _as_weights(self.weights, "ProbVec")
        if len(self.labels) != self.weights.size:
            raise InputError("ProbVec: labels and weights must have equal length")
        if abs(self.weights.sum() - 1.0) > MASS_TOL:
            raise InputError("ProbVec: weights must sum to 1 within 1e-12")

    def __len__(self):
        return self.weights.size

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"ProbVec: unknown label {label!r}") from None

    def reordered(self, labels):
        """Same distribution with the alphabet permuted to ``labels``.

        Distribution equality in rdgen requires identical label order; this
        is the normalization helper for comparing differently ordered vectors.
        """
        labels = list(labels)
        if sorted(map(repr, labels)) != sorted(map(repr, self.labels)):
            raise InputError("reordered: target labels are not a permutation")
        idx = [self.index(lab) for lab in labels]
        return ProbVec(labels, self.weights[idx])

    def to_json_dict(self):
        return {"labels": list(self.labels), "weights": [float(w) for w in self.weights]}

    @classmethod
    def from_json_dict(cls, obj):
        if not isinstance(obj, dict) or "labels" not in obj or "weights" not in obj:
            raise InputError("ProbVec JSON must be an object with 'labels' and 'weights'")
        return cls(obj["labels"], obj["weights"])


@dataclass
class JointTable:
    """Joint distribution over a product of two labeled alphabets."""

    row_labels: list
    col_labels: list
    cells: np.ndarray

    def __post_init__(self):
        self.row_labels = _check_labels(self.row_labels, "JointTable rows")
        self.col_labels = _check_labels(self.col_labels, "JointTable cols")
        c = np.asarray(self.cells, dtype=np.float64)
        if c.ndim != 2 or c.shape != (len(self.row_labels), len(self.col_labels)):
            raise InputError("JointTable: cells shape must match label lists")
        if not np.all(np.isfinite(c)):
            raise InputError("JointTable: cells must be finite")
        if np.any(c < 0):
            raise InputError("JointTable: all cells must be >= 0")
        if abs(c.sum() - 1.0) > MASS_TOL:
            raise InputError("JointTable: total mass must be 1 within 1e-12")
        self.cells = c

    def row_marginal(self):
        return ProbVec(self.row_labels, self.cells.sum(axis=1))

    def col_marginal(self):
        return ProbVec(self.col_labels, self.cells.sum(axis=0))

    def to_json_dict(self):
        return {
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "cells": [[float(x) for x in row] for row in self.cells],
        }

    @classmethod
    def from_json_dict(cls, obj):
        for key in ("row_labels", "col_labels", "cells"):
            if not isinstance(obj, dict) or key not in obj:
                raise InputError("JointTable JSON must carry row_labels, col_labels, cells")
        return cls(obj["row_labels"], obj["col_labels"], obj["cells"])


@dataclass
class Channel:
    """Conditional distribution (Markov kernel): one output row per input."""

    row_labels: list
    col_labels: list
    rows: np.ndarray

    def __post_init__(self):
        self.row_labels = _check_labels(self.row_labels, "Channel rows")
        self.col_labels = _check_labels(self.col_labels, "Channel cols")
        r = np.asarray(self.rows, dtype=np.float64)
        if r.ndim != 2 or r.shape != (len(self.row_labels), len(self.col_labels)):
            raise InputError("Channel: rows shape must match label lists")
        if not np.all(np.isfinite(r)):
            raise InputError("Channel: entries must be finite")
        if np.any(r < 0):
            raise InputError("Channel: all entries must be >= 0")
        if np.any(np.abs(r.sum(axis=1) - 1.0) > MASS_TOL):
            raise InputError("Channel: each row must sum to 1 within 1e-12")
        self.rows = r

    def joint_with(self, source: ProbVec) -> JointTable:
        if source.labels != self.row_labels:
            raise InputError("Channel: source labels do not match channel inputs")
        return JointTable(self.row_labels, self.col_labels, source.weights[:, None] * self.rows)

    def to_json_dict(self):
        return {
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "rows": [[float(x) for x in row] for row in self.rows],
        }

    @classmethod
    def from_json_dict(cls, obj):
        for key in ("row_labels", "col_labels", "rows"):
            if not isinstance(obj, dict) or key not in obj:
                raise InputError("Channel JSON must carry row_labels, col_labels, rows")
        return cls(obj["row_labels"], obj["col_labels"], obj["rows"])


def xlogx(w):
    """Elementwise w*log(w) with masses below ZERO_TOL treated as exact zeros."""
    w = np.asarray(w, dtype=np.float64)
    out = np.zeros_like(w)
    mask = w > ZERO_TOL
    out[mask] = w[mask] * np.log(w[mask])
    return out


def entropy(p: ProbVec) -> float:
    """Shannon entropy -sum p_i log p_i in nats."""
    h = -float(xlogx(p.weights).sum())
    return max(h, 0.0)


def entropy_of_weights(w) -> float:
    """Entropy of a raw weight array assumed to be a distribution."""
    return max(-float(xlogx(w).sum()), 0.0)


def binary_entropy(p: float) -> float:
    """h_b(p) = -p log p - (1-p) log(1-p), with 0 log 0 = 0."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"binary_entropy: p must lie in [0, 1], got {p}")
    total = 0.0
    if p > ZERO_TOL:
        total -= p * np.log(p)
    if 1.0 - p > ZERO_TOL:
        total -= (1.0 - p) * np.log(1.0 - p)
    return float(total)


def kl_divergence(q: ProbVec, p: ProbVec) -> float:
    """D(q || p) in nats; +inf when q is not absolutely continuous w.r.t. p."""
    if q.labels != p.labels:
        raise InputError("kl_divergence: distributions must share the alphabet")
    return kl_divergence_weights(q.weights, p.weights)


def kl_divergence_weights(qw, pw) -> float:
    qw = np.asarray(qw, dtype=np.float64)
    pw = np.asarray(pw, dtype=np.float64)
    q_pos = qw > ZERO_TOL
    if np.any(q_pos & (pw <= ZERO_TOL)):
        return float("inf")
    d = float(np.sum(qw[q_pos] * (np.log(qw[q_pos]) - np.log(pw[q_pos]))))
    return max(d, 0.0)


def mutual_information(j: JointTable) -> float:
    """I = H(row marginal) + H(col marginal) - H(joint), clipped at 0."""
    h_rows = entropy_of_weights(j.cells.sum(axis=1))
    h_cols = entropy_of_weights(j.cells.sum(axis=0))
    h_joint = entropy_of_weights(j.cells.ravel())
    return max(h_rows + h_cols - h_joint, 0.0)


def mutual_information_weights(cells) -> float:
    cells = np.asarray(cells, dtype=np.float64)
    h_rows = entropy_of_weights(cells.sum(axis=1))
    h_cols = entropy_of_weights(cells.sum(axis=0))
    h_joint = entropy_of_weights(cells.ravel())
    return max(h_rows + h_cols - h_joint, 0.0)


def empirical_type(sequence, alphabet) -> ProbVec:
    """Relative frequencies of ``sequence`` over ``alphabet`` (multiples of 1/m)."""
    alphabet = _check_labels(alphabet, "empirical_type alphabet")
    seq = list(sequence)
    if not seq:
        raise InputError("empirical_type: sequence must be nonempty")
    index = {lab: i for i, lab in enumerate(alphabet)}
    counts = np.zeros(len(alphabet), dtype=np.float64)
    for sym in seq:
        if sym not in index:
            raise InputError(f"empirical_type: symbol {sym!r} not in alphabet")
        counts[index[sym]] += 1.0
    return ProbVec(alphabet, counts / len(seq))


def product_joint(p_row: ProbVec, p_col: ProbVec) -> JointTable:
    """Independent coupling of two marginals."""
    return JointTable(p_row.labels, p_col.labels, np.outer(p_row.weights, p_col.weights))
