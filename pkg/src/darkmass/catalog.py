"""Tracer catalogs of (x1, x2, v3) and their CSV representation."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    x1: float
    x2: float
    v3: float
    sigma_v3: Optional[float] = None

    def __post_init__(self):
        vals = (self.x1, self.x2, self.v3)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("observation coordinates must be finite")
        if self.sigma_v3 is not None and not (self.sigma_v3 >= 0 and math.isfinite(self.sigma_v3)):
            raise ValueError("sigma_v3 must be finite and non-negative")

    @property
    def rp(self):
        return math.hypot(self.x1, self.x2)


class ObservationSet:
    """Column store for a catalog; ``sigma_v3`` is ``None`` when absent."""

    def __init__(self, x1, x2, v3, sigma_v3=None):
        self.x1 = np.asarray(x1, dtype=float).ravel()
        self.x2 = np.asarray(x2, dtype=float).ravel()
        self.v3 = np.asarray(v3, dtype=float).ravel()
        n = self.x1.size
        if self.x2.size != n or self.v3.size != n:
            raise ValueError("catalog columns differ in length")
        if sigma_v3 is not None:
            sigma_v3 = np.asarray(sigma_v3, dtype=float).ravel()
            if sigma_v3.size != n:
                raise ValueError("sigma_v3 column differs in length")
            if np.any(sigma_v3 < 0):
                raise ValueError("sigma_v3 must be non-negative")
        self.sigma_v3 = sigma_v3
        cols = [self.x1, self.x2, self.v3] + ([sigma_v3] if sigma_v3 is not None else [])
        if not all(np.all(np.isfinite(c)) for c in cols):
            raise ValueError("catalog values must be finite")

    @classmethod
    def from_observations(cls, obs):
        obs = list(obs)
        sig = None
        if obs and all(o.sigma_v3 is not None for o in obs):
            sig = [o.sigma_v3 for o in obs]
        return cls([o.x1 for o in obs], [o.x2 for o in obs], [o.v3 for o in obs], sig)

    def __len__(self):
        return self.x1.size

    def __getitem__(self, k):
        sig = None if self.sigma_v3 is None else float(self.sigma_v3[k])
        return Observation(float(self.x1[k]), float(self.x2[k]), float(self.v3[k]), sig)

    @property
    def rp(self):
        return np.hypot(self.x1, self.x2)


def load_catalog(path):
    """Read a ``x1,x2,v3[,sigma_v3]`` CSV file.

    Raises :class:`CatalogError` with the offending line number for missing
    columns, non-numeric or non-finite fields, and for catalogs with no rows.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CatalogError(f"{path}: empty file") from None
        missing = [c for c in ("x1", "x2", "v3") if c not in header]
        if missing:
            raise CatalogError(f"{path}: missing column(s) {', '.join(missing)}")
        names = ["x1", "x2", "v3"] + (["sigma_v3"] if "sigma_v3" in header else [])
        idx = [header.index(c) for c in names]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise CatalogError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, i in zip(names, idx):
                try:
                    v = float(row[i])
                except ValueError:
                    raise CatalogError(f"{path}:{lineno}: non-numeric {name} {row[i]!r}") from None
                if not math.isfinite(v):
                    raise CatalogError(f"{path}:{lineno}: non-finite {name}")
                if name == "sigma_v3" and v < 0:
                    raise CatalogError(f"{path}:{lineno}: negative sigma_v3")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise CatalogError(f"{path}: catalog has no data rows")
    arr = np.array(rows)
    sig = arr[:, 3] if arr.shape[1] == 4 else None
    return ObservationSet(arr[:, 0], arr[:, 1], arr[:, 2], sig)


def write_catalog(data, path):
    cols = ["x1", "x2", "v3"] + (["sigma_v3"] if data.sigma_v3 is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(len(data)):
            vals = [data.x1[k], data.x2[k], data.v3[k]]
            if data.sigma_v3 is not None:
                vals.append(data.sigma_v3[k])
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")
