"""Polynomial dictionaries over the regression input ``(d, v, x)``."""

from __future__ import annotations

import itertools

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

SPECS = ("low", "interactions", "high")


def _exponents(spec: str, k: int) -> np.ndarray:
    if spec == "low":
        rows = [np.zeros(k, dtype=int)]
        for j in range(k):
            e = np.zeros(k, dtype=int)
            e[j] = 1
            rows.append(e)
        for a, b in itertools.combinations(range(k), 2):
            e = np.zeros(k, dtype=int)
            e[a] = e[b] = 1
            rows.append(e)
        return np.array(rows, dtype=int).reshape(-1, k)
    if spec == "interactions":
        rows = [np.array([1 if j in subset else 0 for j in range(k)], dtype=int)
                for size in range(k + 1) for subset in itertools.combinations(range(k), size)]
        return np.array(rows, dtype=int).reshape(-1, k)
    if spec == "high":
        rows = []
        for deg in range(5):
            for combo in itertools.combinations_with_replacement(range(k), deg):
                rows.append(np.bincount(np.array(combo, dtype=int), minlength=k))
        return np.array(rows, dtype=int).reshape(-1, k)
    raise ValueError(f"dictionary spec must be one of {SPECS}, got {spec!r}")


class Dictionary(BaseEstimator, TransformerMixin):
    """Monomial basis b_j(w) = prod_k w_k**E[j, k].

    ``"low"`` is the constant, every raw input and every pairwise product of
    distinct inputs; ``"interactions"`` is the product over every subset of
    distinct inputs; ``"high"`` is every monomial of total degree <= 4.  The
    first basis function is always the constant, and column 0 of the input is
    the one differentiated by :meth:`derivative_d`.
    """

    def __init__(self, spec="low"):
        self.spec = spec

    def fit(self, Z, y=None):
        Z = np.asarray(Z, dtype=float)
        self.n_inputs_ = Z.shape[1]
        self.exponents_ = _exponents(self.spec, self.n_inputs_)
        return self

    @classmethod
    def for_inputs(cls, spec: str, n_inputs: int) -> "Dictionary":
        d = cls(spec)
        d.n_inputs_ = n_inputs
        d.exponents_ = _exponents(spec, n_inputs)
        return d

    @property
    def n_features(self) -> int:
        return self.exponents_.shape[0]

    def _check(self, Z):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[None, :]
        if Z.shape[1] != self.n_inputs_:
            raise ValueError(f"expected {self.n_inputs_} input columns, got {Z.shape[1]}")
        return Z

    def _powers(self, Z):
        # pw[k][e] = Z[:, k] ** e for e in 0..max exponent
        top = int(self.exponents_.max(initial=0))
        pw = np.empty((Z.shape[1], top + 1, Z.shape[0]))
        pw[:, 0, :] = 1.0
        for e in range(1, top + 1):
            pw[:, e, :] = pw[:, e - 1, :] * Z.T
        return pw

    def transform(self, Z):
        Z = self._check(Z)
        pw = self._powers(Z)
        E = self.exponents_
        out = np.ones((Z.shape[0], E.shape[0]))
        for k in range(E.shape[1]):
            out *= pw[k, E[:, k], :].T
        return out

    def derivative_d(self, Z):
        """Analytic partial derivative of every basis function in column 0."""
        Z = self._check(Z)
        pw = self._powers(Z)
        E = self.exponents_
        out = np.ones((Z.shape[0], E.shape[0]))
        e0 = E[:, 0]
        out *= e0 * pw[0, np.maximum(e0 - 1, 0), :].T
        for k in range(1, E.shape[1]):
            out *= pw[k, E[:, k], :].T
        return out

    def names(self, input_names=None):
        if input_names is None:
            input_names = ["d"] + [f"z{k}" for k in range(1, self.n_inputs_)]
        out = []
        for e in self.exponents_:
            terms = [n if p == 1 else f"{n}^{p}" for n, p in zip(input_names, e) if p]
            out.append("*".join(terms) or "1")
        return out


def expand_dictionary(dictionary: Dictionary, Z) -> np.ndarray:
    return dictionary.transform(Z)
