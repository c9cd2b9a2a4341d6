"""Dense primal revised simplex with dual values and warm starts.

The solver works on ``min c.x  s.t.  A_r . x (>=|=|<=) b_r,  x >= 0``. Each
row gets a slack (inequalities) and an artificial column; phase I drives the
artificials out of the objective, phase II keeps any that remain basic at
an upper bound of zero. The basis is refactorised every iteration, which is
cheap at the few-hundred-row scale this is meant for.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lu_solve
from scipy.linalg.lapack import dgetrf

log = logging.getLogger(__name__)

GE, EQ, LE = ">=", "=", "<="
SENSES = (GE, EQ, LE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """Minimise ``c @ x`` subject to row constraints and ``x >= 0``.

    ``col_labels`` name the structural columns; they only matter for warm
    starts, where a basis from an earlier solve is matched by label.
    """

    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray
    col_labels: Sequence | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        n = self.c.shape[0]
        self.A = np.asarray(self.A, dtype=float)
        if self.A.size == 0:
            self.A = self.A.reshape(self.b.shape[0], n)
        if self.A.ndim != 2:
            raise ValueError("A must be two-dimensional")
        m = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError(f"A has {self.A.shape[1]} columns but c has {n} entries")
        if self.b.shape[0] != m:
            raise ValueError(f"A has {m} rows but b has {self.b.shape[0]} entries")
        self.senses = tuple(self.senses)
        if len(self.senses) != m:
            raise ValueError(f"{len(self.senses)} senses for {m} rows")
        bad = [s for s in self.senses if s not in SENSES]
        if bad:
            raise ValueError(f"unknown row sense {bad[0]!r}")
        if not (np.isfinite(self.c).all() and np.isfinite(self.A).all() and np.isfinite(self.b).all()):
            raise ValueError("coefficients must be finite")
        if self.col_labels is None:
            self.col_labels = tuple(range(n))
        else:
            self.col_labels = tuple(self.col_labels)
            if len(self.col_labels) != n:
                raise ValueError("col_labels length does not match the number of columns")
            if len(set(self.col_labels)) != n:
                raise ValueError("col_labels must be unique")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    basis: tuple = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class SimplexSolver:
    """Stateful simplex solver.

    When ``warm_start`` is on, the basis of the previous optimal solve is
    tried first; it is accepted only if every label still exists, the basis
    matrix is nonsingular and the basic solution is primal feasible. One
    instance must not be shared between threads.
    """

    def __init__(self, tol: float = 1e-9, feas_tol: float = 1e-7, max_iter: int = 200_000,
                 warm_start: bool = True):
        self.tol = tol
        self.feas_tol = feas_tol
        self.max_iter = max_iter
        self.warm_start = warm_start
        self._basis = None

    def reset(self):
        self._basis = None

    def solve(self, lp: LinearProgram, basis: Sequence | None = None) -> LpSolution:
        if basis is None and self.warm_start:
            basis = self._basis
        sol = _Simplex(lp, self).run(basis)
        if sol.optimal:
            self._basis = sol.basis
        return sol


def solve_lp(lp: LinearProgram) -> LpSolution:
    return SimplexSolver(warm_start=False).solve(lp)


class _Simplex:
    refactor_every = 50

    def __init__(self, lp: LinearProgram, opts: SimplexSolver):
        self.lp = lp
        self.tol = opts.tol
        self.feas_tol = opts.feas_tol
        self.max_iter = opts.max_iter
        m, n = lp.A.shape
        self.m, self.n = m, n

        sign = np.where(lp.b < 0, -1.0, 1.0)
        self.row_sign = np.ones(m)
        ineq = [r for r, s in enumerate(lp.senses) if s != EQ]
        S = np.zeros((m, len(ineq)))
        for j, r in enumerate(ineq):
            S[r, j] = -1.0 if lp.senses[r] == GE else 1.0
        self.art_start = n + len(ineq)
        self.n_total = n + len(ineq) + m
        self.A = np.hstack([lp.A, S, np.eye(m)])
        self.b = lp.b.copy()
        for r in np.flatnonzero(sign < 0):
            self._flip(r)
        self.labels = (
            [("x", lbl) for lbl in lp.col_labels]
            + [("s", r) for r in ineq]
            + [("a", r) for r in range(m)]
        )
        self.index = {lbl: j for j, lbl in enumerate(self.labels)}
        self.slack_of_row = {r: n + j for j, r in enumerate(ineq)}
        self.is_art = np.zeros(self.n_total, dtype=bool)
        self.is_art[self.art_start:] = True
        self.iterations = 0

    def _flip(self, r):
        # negate row r; the artificial of every row stays +e_r
        self.A[r, : self.art_start] *= -1.0
        self.b[r] = -self.b[r]
        self.row_sign[r] = -self.row_sign[r]

    # -- helpers -------------------------------------------------------------
    def _inverse(self, basis):
        B = self.A[:, basis]
        lu, piv, info = dgetrf(B)
        if info > 0:
            return None
        diag = np.abs(lu.diagonal())
        if diag.min() <= 1e-11 * max(1.0, diag.max()):
            return None
        return lu_solve((lu, piv), np.eye(self.m), check_finite=False)

    def _scale(self):
        return 1.0 + (np.abs(self.b).max() if self.m else 0.0)

    # -- driver --------------------------------------------------------------
    def run(self, warm) -> LpSolution:
        m = self.m
        if m == 0:
            if (self.lp.c < -self.tol).any():
                return LpSolution(UNBOUNDED, iterations=0)
            x = np.zeros(self.n)
            return LpSolution(OPTIMAL, x, np.zeros(0), 0.0, 0, ())

        basis = self._try_warm(warm) if warm is not None else None
        if basis is None:
            basis = self._crash()
        basis = self._phase_one(basis)
        if basis is None:
            return LpSolution(INFEASIBLE, iterations=self.iterations)

        cost = np.zeros(self.n_total)
        cost[: self.n] = self.lp.c
        status, basis, Binv = self._iterate(basis, cost, phase=2)
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, iterations=self.iterations)

        Binv = self._inverse(basis)
        xb = Binv @ self.b
        x_full = np.zeros(self.n_total)
        x_full[basis] = np.maximum(xb, 0.0)
        y = cost[basis] @ Binv
        x = x_full[: self.n]
        return LpSolution(
            OPTIMAL,
            x=x,
            y=y * self.row_sign,
            objective=float(self.lp.c @ x),
            iterations=self.iterations,
            basis=tuple(self.labels[j] for j in basis),
        )

    def _try_warm(self, labels):
        """Basis from earlier labels, padded with artificials for unknown rows.

        Accepted when nonsingular and primal feasible; basic artificials may
        be positive, phase I then starts from here.
        """
        basis = [self.index[lbl] for lbl in labels if lbl in self.index]
        if len(set(basis)) != len(basis) or len(basis) > self.m:
            return None
        if len(basis) < self.m:
            # rows appended since the basis was saved are the usual gap
            tail = [self.art_start + r for r in range(len(basis), self.m)]
            got = self._feasible_start(basis + tail)
            if got is not None:
                return got
            basis = self._complete(basis)
            if basis is None:
                return None
        return self._feasible_start(basis)

    def _feasible_start(self, basis):
        if len(set(basis)) != len(basis):
            return None
        Binv = self._inverse(basis)
        if Binv is None:
            return None
        xb = Binv @ self.b
        tol = self.feas_tol * self._scale()
        flipped = False
        for pos, j in enumerate(basis):
            if self.is_art[j] and xb[pos] < -tol:
                r = j - self.art_start
                if self.b[r] != 0:
                    return None
                self._flip(r)
                flipped = True
        if flipped:
            Binv = self._inverse(basis)
            if Binv is None:
                return None
            xb = Binv @ self.b
        if xb.min() < -tol:
            return None
        return basis

    def _complete(self, basis):
        """Fill a partial basis with artificials on rows its columns miss."""
        k = len(basis)
        order = np.arange(self.m)
        if k:
            lu, piv, info = dgetrf(self.A[:, basis])
            if info > 0:
                return None
            for i, p in enumerate(piv):
                order[[i, p]] = order[[p, i]]
        return basis + [self.art_start + int(r) for r in order[k:]]

    def _crash(self):
        basis = []
        for r in range(self.m):
            s = self.slack_of_row.get(r)
            if s is not None and self.A[r, s] > 0:
                basis.append(s)
            else:
                basis.append(self.art_start + r)
        return basis

    def _phase_one(self, basis):
        Binv = self._inverse(basis)
        xb = Binv @ self.b
        tol = self.feas_tol * self._scale()
        if not any(self.is_art[j] and xb[pos] > tol for pos, j in enumerate(basis)):
            return basis
        cost = np.zeros(self.n_total)
        cost[self.art_start:] = 1.0
        status, basis, Binv = self._iterate(basis, cost, phase=1)
        xb = Binv @ self.b
        infeas = sum(xb[pos] for pos, j in enumerate(basis) if self.is_art[j])
        if infeas > tol:
            return None
        return basis

    def _iterate(self, basis, cost, phase):
        """Simplex pivots from a feasible basis; returns (status, basis, Binv)."""
        tol = self.tol
        m = self.m
        A = self.A
        basis = list(basis)
        Binv = self._inverse(basis)
        if Binv is None:
            raise LpError("starting basis is singular")
        xb = Binv @ self.b
        since = 0
        bland = False
        stall = 0
        stall_limit = 3 * (m + self.n_total)
        best_obj = np.inf
        enterable = ~self.is_art  # artificials never re-enter

        while True:
            if self.iterations >= self.max_iter:
                raise LpError(f"simplex iteration limit ({self.max_iter}) reached")
            if since >= self.refactor_every:
                Binv = self._inverse(basis)
                if Binv is None:
                    raise LpError("basis became singular")
                xb = Binv @ self.b
                since = 0
            cb = cost[basis]
            y = cb @ Binv
            obj = float(cb @ xb)

            margin = 1e-12 * (1.0 + abs(best_obj)) if np.isfinite(best_obj) else 0.0
            if obj < best_obj - margin:
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if not bland and stall > stall_limit:
                    log.debug("switching to Bland's rule after %d stalled pivots", stall)
                    bland = True

            d = cost - y @ A
            eligible = enterable.copy()
            eligible[basis] = False
            cand = np.flatnonzero(eligible & (d < -tol))
            if cand.size == 0:
                return OPTIMAL, basis, Binv
            enter = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])

            u = Binv @ A[:, enter]
            ratios = np.full(m, np.inf)
            up = u > tol
            ratios[up] = np.maximum(xb[up], 0.0) / u[up]
            if phase == 2:
                # a basic artificial pinned at zero must not grow
                pinned = self.is_art[basis] & (u < -tol)
                ratios[pinned] = 0.0
            best = ratios.min()
            if not np.isfinite(best):
                if phase == 1:
                    raise LpError("phase I reported unbounded")
                return UNBOUNDED, basis, Binv
            ties = np.flatnonzero(ratios <= best + 1e-12)
            if bland:
                leave = int(ties[np.argmin(np.asarray(basis)[ties])])
            else:
                leave = int(ties[np.argmax(np.abs(u[ties]))])
            theta = ratios[leave]

            piv = u[leave]
            xb = xb - theta * u
            xb[leave] = theta
            row = Binv[leave] / piv
            Binv -= np.outer(u, row)
            Binv[leave] = row
            basis[leave] = enter
            since += 1
            self.iterations += 1
