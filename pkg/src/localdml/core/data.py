"""Observation container and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import IngestionError


@dataclass(frozen=True)
class ColumnRoles:
    """Which raw CSV columns play the outcome, treatment, localization and covariate roles."""

    y: str
    d: str
    v: str | None = None
    x: tuple[str, ...] = ()

    @classmethod
    def from_mapping(cls, roles: Mapping) -> "ColumnRoles":
        x = roles.get("x", ())
        if isinstance(x, str):
            x = (x,)
        return cls(y=roles["y"], d=roles["d"], v=roles.get("v"), x=tuple(x))

    def as_dict(self) -> dict:
        return {"y": self.y, "d": self.d, "v": self.v, "x": list(self.x)}


@dataclass(frozen=True, eq=False)
class Dataset:
    """n observations of (y, d, v, x).

    The regression input ``W`` is laid out as a feature matrix whose column 0
    is ``d``, column 1 is ``v`` (when present) and the remaining columns are
    ``x``; see :meth:`features`.
    """

    y: np.ndarray
    d: np.ndarray
    v: np.ndarray | None = None
    x: np.ndarray = field(default=None)
    roles: ColumnRoles | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        n = y.shape[0]
        x = np.zeros((n, 0)) if self.x is None else np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        v = None if self.v is None else np.asarray(self.v, dtype=float).ravel()
        if d.shape[0] != n or x.shape[0] != n or (v is not None and v.shape[0] != n):
            raise ValueError("all columns must have the same number of rows")
        for name, arr in (("y", y), ("d", d), ("v", v), ("x", x)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise IngestionError(f"column {name!r} contains missing or non-finite values")
        for name, arr in (("y", y), ("d", d), ("v", v), ("x", x)):
            if arr is not None:
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def has_v(self) -> bool:
        return self.v is not None

    def features(self) -> np.ndarray:
        cols = [self.d[:, None]]
        if self.v is not None:
            cols.append(self.v[:, None])
        cols.append(self.x)
        return np.hstack(cols)

    def subset(self, idx) -> "Dataset":
        return Dataset(
            y=self.y[idx],
            d=self.d[idx],
            v=None if self.v is None else self.v[idx],
            x=self.x[idx],
            roles=self.roles,
        )

    def to_csv(self, path) -> None:
        roles = self.roles or ColumnRoles(
            y="y", d="d", v="v" if self.has_v else None,
            x=tuple(f"x{j + 1}" for j in range(self.p)),
        )
        header = [roles.y, roles.d] + ([roles.v] if self.has_v else []) + list(roles.x)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(self.n):
                row = [self.y[i], self.d[i]]
                if self.has_v:
                    row.append(self.v[i])
                row.extend(self.x[i])
                w.writerow([repr(float(c)) for c in row])

    @classmethod
    def from_csv(cls, path, roles: ColumnRoles | Mapping) -> "Dataset":
        """Read a UTF-8 CSV with a header row. Column roles are never inferred."""
        if not isinstance(roles, ColumnRoles):
            roles = ColumnRoles.from_mapping(roles)
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise IngestionError(f"{path}: empty file") from None
            wanted = [roles.y, roles.d] + ([roles.v] if roles.v else []) + list(roles.x)
            missing = [c for c in wanted if c not in header]
            if missing:
                raise IngestionError(f"{path}: missing columns {missing}")
            pos = [header.index(c) for c in wanted]
            rows = []
            for lineno, raw in enumerate(reader, start=2):
                if not raw or all(not c.strip() for c in raw):
                    continue
                if len(raw) != len(header):
                    raise IngestionError(
                        f"{path}: row {lineno} has {len(raw)} fields, expected {len(header)}",
                        row=lineno,
                    )
                try:
                    vals = [float(raw[k]) for k in pos]
                except ValueError:
                    raise IngestionError(f"{path}: row {lineno} has a non-numeric value", row=lineno) from None
                if not all(math.isfinite(val) for val in vals):
                    raise IngestionError(f"{path}: row {lineno} has a missing value", row=lineno)
                rows.append(vals)
        if not rows:
            raise IngestionError(f"{path}: no data rows")
        arr = np.asarray(rows)
        k = 3 if roles.v else 2
        return cls(
            y=arr[:, 0],
            d=arr[:, 1],
            v=arr[:, 2] if roles.v else None,
            x=arr[:, k:],
            roles=roles,
        )


def as_dataset(y, d, v=None, x=None) -> Dataset:
    return Dataset(y=y, d=d, v=v, x=x)


def columns_of(data: Dataset) -> Sequence[str]:
    """Names of the feature-matrix columns, in :meth:`Dataset.features` order."""
    roles = data.roles
    if roles is None:
        names = ["d"] + (["v"] if data.has_v else []) + [f"x{j + 1}" for j in range(data.p)]
    else:
        names = [roles.d] + ([roles.v] if roles.v else []) + list(roles.x)
    return names
