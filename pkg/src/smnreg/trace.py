"""Chain traces and their CSV persistence.

A trace CSV has one row per retained iteration: the iteration index, the
entries of ``beta`` in row-major order, then the lower triangle of ``Sigma``
in column-major order.  A JSON sidecar ``<stem>.meta.json`` records
dimensions, seed, mixing family, prior exponent and counts; recorded latent
draws go to ``<stem>.latents.csv``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from smnreg.distributions import spd_cholesky


def parameter_names(p: int, d: int) -> list:
    names = [f"beta_{i + 1}_{j + 1}" for i in range(p) for j in range(d)]
    names += [f"sigma_{i + 1}_{j + 1}" for j in range(d) for i in range(j, d)]
    return names


def _lower_colmajor(d: int):
    rows, cols = [], []
    for j in range(d):
        for i in range(j, d):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


@dataclass(frozen=True)
class ChainState:
    """A state ``(beta, Sigma)`` of the chain; ``Sigma`` must be SPD."""

    beta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (beta.shape[1], beta.shape[1]):
            raise ValueError(f"sigma must be {beta.shape[1]}x{beta.shape[1]}, got {sigma.shape}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)

    def sigma_cholesky(self) -> np.ndarray:
        return spd_cholesky(self.sigma, "sigma")


@dataclass
class ChainTrace:
    """Retained draws of a chain.

    ``betas`` has shape (N, p, d), ``sigmas`` (N, d, d), ``iterations`` (N,)
    holds the 1-based iteration index of each retained draw, and ``latents``
    (N, n) is present only when recording was requested.
    """

    betas: np.ndarray
    sigmas: np.ndarray
    iterations: np.ndarray
    latents: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.iterations)

    @property
    def p(self) -> int:
        return self.betas.shape[1]

    @property
    def d(self) -> int:
        return self.betas.shape[2]

    @property
    def states(self) -> list:
        return [ChainState(b, s) for b, s in zip(self.betas, self.sigmas)]

    @property
    def names(self) -> list:
        return parameter_names(self.p, self.d)

    def flat(self) -> np.ndarray:
        """(N, K) matrix with one column per entry of :attr:`names`."""
        N = len(self)
        rows, cols = _lower_colmajor(self.d)
        return np.hstack([self.betas.reshape(N, self.p * self.d), self.sigmas[:, rows, cols]])

    def to_csv(self, path) -> None:
        path = Path(path)
        table = np.hstack([np.asarray(self.iterations, dtype=float).reshape(-1, 1), self.flat()])
        fmt = ["%d"] + ["%.17g"] * (table.shape[1] - 1)
        np.savetxt(path, table, delimiter=",", fmt=fmt,
                   header=",".join(["iteration"] + self.names), comments="")
        meta = dict(self.meta, p=self.p, d=self.d, retained=len(self),
                    latents_recorded=self.latents is not None)
        _meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if self.latents is not None:
            np.savetxt(_latent_path(path), self.latents, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "ChainTrace":
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if not header or header[0] != "iteration":
            raise ValueError(f"{path} is not a trace file (missing iteration column)")
        cols = header[1:]
        p = sum(1 for c in cols if c.startswith("beta_") and c.endswith("_1"))
        d = sum(1 for c in cols if c.startswith("beta_1_"))
        if p == 0 or d == 0 or cols != parameter_names(p, d):
            raise ValueError(f"{path} has unexpected columns")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if table.size == 0:
            table = np.empty((0, len(header)))
        if table.shape[1] != len(header):
            raise ValueError(f"{path} rows do not match the header")
        N = table.shape[0]
        betas = table[:, 1:1 + p * d].reshape(N, p, d)
        rows, cidx = _lower_colmajor(d)
        sigmas = np.zeros((N, d, d))
        sigmas[:, rows, cidx] = table[:, 1 + p * d:]
        sigmas[:, cidx, rows] = table[:, 1 + p * d:]
        meta_path = _meta_path(path)
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        latents = None
        if _latent_path(path).exists():
            latents = np.loadtxt(_latent_path(path), delimiter=",", ndmin=2)
        return cls(betas, sigmas, table[:, 0].astype(int), latents, meta)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def _latent_path(path: Path) -> Path:
    return path.with_name(path.stem + ".latents.csv")
