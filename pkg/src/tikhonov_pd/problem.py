"""Linear equality constrained convex problems and their reference solutions.

A problem is ``min f(x) s.t. Ax = b`` with ``f`` convex and ``grad f``
Lipschitz. Quadratic problems ``f(x) = 0.5 x'Mx + q'x`` additionally expose
their KKT system, which is what the reference and minimal-norm solvers use.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgumentError, NoSolutionError
from .rng import SeededStream

#: relative singular-value cutoff used for every rank decision on KKT matrices
RANK_RCOND = 1e-10
#: absolute KKT residual allowed for reference solutions
KKT_TOL = 1e-8


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


class ConstrainedProblem:
    """Oracles for ``f`` and ``grad f`` plus the constraint ``Ax = b``.

    Parameters
    ----------
    objective, gradient : callable
        ``x -> float`` and ``x -> ndarray(n)``.
    A : array_like, shape (m, n)
        Constraint matrix. ``m = 0`` (no constraint) is allowed.
    b : array_like, shape (m,)
    lipschitz : float
        Lipschitz constant of the gradient.
    """

    def __init__(self, objective: Callable, gradient: Callable, A, b, lipschitz: float, name: str = ""):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise InvalidArgumentError(f"constraint matrix must be 2-D, got shape {A.shape}")
        b = np.asarray(b, dtype=float).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise InvalidArgumentError(
                f"constraint rhs has length {b.shape[0]}, expected {A.shape[0]}"
            )
        if A.shape[1] < 1:
            raise InvalidArgumentError("primal dimension must be positive")
        if not lipschitz >= 0 or not np.isfinite(lipschitz):
            raise InvalidArgumentError(f"lipschitz constant must be finite and >= 0, got {lipschitz}")
        self.objective = objective
        self.gradient = gradient
        self.A = _frozen(A)
        self.AT = _frozen(A.T)
        self.b = _frozen(b)
        self.lipschitz = float(lipschitz)
        self.name = name

    @property
    def dim_primal(self) -> int:
        return self.A.shape[1]

    @property
    def dim_dual(self) -> int:
        return self.A.shape[0]

    def residual(self, x) -> np.ndarray:
        """``Ax - b``."""
        return self.A @ x - self.b

    def check_primal(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim_primal,):
            raise InvalidArgumentError(f"primal vector has shape {x.shape}, expected ({self.dim_primal},)")
        return x

    def check_dual(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float)) if self.dim_dual else np.asarray(lam, dtype=float)
        if lam.shape != (self.dim_dual,):
            raise InvalidArgumentError(f"dual vector has shape {lam.shape}, expected ({self.dim_dual},)")
        return lam

    def quadratic(self) -> Optional["QuadraticProblem"]:
        """Quadratic form of the same problem, if one is known."""
        return None

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, n={self.dim_primal}, m={self.dim_dual})"


class QuadraticProblem(ConstrainedProblem):
    """``min 0.5 x'Mx + q'x  s.t.  Ax = b`` with ``M`` symmetric PSD."""

    def __init__(self, M, q, A, b, name: str = "qp"):
        M = np.asarray(M, dtype=float)
        q = np.asarray(q, dtype=float).reshape(-1)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidArgumentError(f"M must be square, got shape {M.shape}")
        if q.shape[0] != M.shape[0]:
            raise InvalidArgumentError(f"q has length {q.shape[0]}, expected {M.shape[0]}")
        if np.max(np.abs(M - M.T), initial=0.0) != 0.0:
            raise InvalidArgumentError("M must be exactly symmetric")
        eigs = np.linalg.eigvalsh(M)
        scale = max(np.linalg.norm(M, 2), 1.0)
        if eigs[0] < -1e-8 * scale:
            raise InvalidArgumentError(f"M is not positive semidefinite (min eigenvalue {eigs[0]:.3e})")
        self.M = _frozen(M)
        self.q = _frozen(q)
        super().__init__(self._objective, self._gradient, A, b, max(float(eigs[-1]), 0.0), name=name)
        if self.dim_primal != M.shape[0]:
            raise InvalidArgumentError(f"A has {self.dim_primal} columns, expected {M.shape[0]}")

    def _objective(self, x):
        return 0.5 * float(x @ (self.M @ x)) + float(self.q @ x)

    def _gradient(self, x):
        return self.M @ x + self.q

    def quadratic(self):
        return self

    def kkt_matrix(self) -> np.ndarray:
        """``[[M, A'], [A, 0]]``."""
        n, m = self.dim_primal, self.dim_dual
        K = np.zeros((n + m, n + m))
        K[:n, :n] = self.M
        K[:n, n:] = self.A.T
        K[n:, :n] = self.A
        return K

    def kkt_rhs(self) -> np.ndarray:
        return np.concatenate([-self.q, self.b])


class Example1Problem(ConstrainedProblem):
    """``min (m x1 + n x2 + e x3)^2  s.t.  m x1 - n x2 + e x3 = 0``."""

    def __init__(self, m: float, n: float, e: float):
        coeffs = np.array([m, n, e], dtype=float)
        if np.any(coeffs == 0.0):
            raise InvalidArgumentError(f"example1 coefficients must be nonzero, got {tuple(coeffs)}")
        self.coeffs = _frozen(coeffs)
        A = np.array([[m, -n, e]], dtype=float)
        super().__init__(
            self._objective, self._gradient, A, np.zeros(1),
            2.0 * float(coeffs @ coeffs), name=f"example1({m:g},{n:g},{e:g})",
        )

    def _objective(self, x):
        s = float(self.coeffs @ x)
        return s * s

    def _gradient(self, x):
        return (2.0 * float(self.coeffs @ x)) * self.coeffs

    def quadratic(self):
        c = self.coeffs
        return QuadraticProblem(2.0 * np.outer(c, c), np.zeros(3), self.A, self.b, name=self.name)

    def reference(self) -> "ReferenceSolution":
        """Closed form: the origin is optimal, minimal-norm, with zero multiplier."""
        zero3, zero1 = np.zeros(3), np.zeros(1)
        return ReferenceSolution(zero3, zero1, zero3, zero1, 0.0)


@dataclass(frozen=True)
class ReferenceSolution:
    """A primal-dual optimal pair, the minimal-norm pair and the optimal value."""

    x_star: np.ndarray
    lambda_star: np.ndarray
    x_bar_star: np.ndarray
    lambda_bar_star: np.ndarray
    f_star: float


# --------------------------------------------------------------------------
# Lagrangians


def lagrangian(problem: ConstrainedProblem, x, lam) -> float:
    """``f(x) + <lam, Ax - b>``."""
    x = problem.check_primal(x)
    lam = problem.check_dual(lam)
    return float(problem.objective(x)) + float(lam @ problem.residual(x))


def augmented_lagrangian(problem: ConstrainedProblem, x, lam, rho: float) -> float:
    """``lagrangian(x, lam) + rho/2 ||Ax - b||^2``."""
    if rho < 0:
        raise InvalidArgumentError(f"penalty rho must be >= 0, got {rho}")
    x = problem.check_primal(x)
    lam = problem.check_dual(lam)
    r = problem.residual(x)
    return float(problem.objective(x)) + float(lam @ r) + 0.5 * rho * float(r @ r)


def grad_x_augmented(problem: ConstrainedProblem, x, lam, rho: float) -> np.ndarray:
    """``grad f(x) + A'lam + rho A'(Ax - b)``."""
    if rho < 0:
        raise InvalidArgumentError(f"penalty rho must be >= 0, got {rho}")
    x = problem.check_primal(x)
    lam = problem.check_dual(lam)
    return problem.gradient(x) + problem.AT @ lam + rho * (problem.AT @ problem.residual(x))


def kkt_residual(problem: ConstrainedProblem, x, lam) -> tuple:
    """``(||grad f(x) + A'lam||, ||Ax - b||)``."""
    x = problem.check_primal(x)
    lam = problem.check_dual(lam)
    stationarity = float(np.linalg.norm(problem.gradient(x) + problem.AT @ lam))
    feasibility = float(np.linalg.norm(problem.residual(x)))
    return stationarity, feasibility


# --------------------------------------------------------------------------
# Generators


def make_example1(m: float, n: float, e: float) -> Example1Problem:
    return Example1Problem(m, n, e)


def make_random_qp(m_rows: int, n_cols: int, seed: int) -> QuadraticProblem:
    """Random QP: ``M = H'H`` and ``q``, ``A`` Gaussian; ``b`` uniform on [0, 1).

    Draw order from the seeded stream is H, q, A, b.
    """
    if m_rows < 1 or n_cols < 1:
        raise InvalidArgumentError(f"dimensions must be positive, got rows={m_rows}, cols={n_cols}")
    stream = SeededStream(seed)
    H = stream.normal((n_cols, n_cols))
    q = stream.normal(n_cols)
    A = stream.normal((m_rows, n_cols))
    b = stream.uniform(m_rows)
    M = H.T @ H
    M = 0.5 * (M + M.T)  # exact symmetry
    return QuadraticProblem(M, q, A, b, name=f"qp({m_rows},{n_cols},seed={seed})")


# --------------------------------------------------------------------------
# Reference solvers


def _kkt_svd(qp: QuadraticProblem):
    K = qp.kkt_matrix()
    rhs = qp.kkt_rhs()
    U, s, Vt = np.linalg.svd(K)
    rank = int(np.sum(s > RANK_RCOND * s[0])) if s.size and s[0] > 0 else 0
    z0 = Vt[:rank].T @ ((U[:, :rank].T @ rhs) / s[:rank])
    scale = max(1.0, float(np.linalg.norm(K, 2) * np.linalg.norm(z0) + np.linalg.norm(rhs)))
    if np.linalg.norm(K @ z0 - rhs) > KKT_TOL * scale:
        raise NoSolutionError(f"KKT system of {qp.name} is inconsistent")
    null = Vt[rank:].T
    return z0, null


def minimal_norm_solution(qp: QuadraticProblem) -> tuple:
    """Least-norm primal solution and its least-norm multiplier.

    The KKT solution set is ``z0 + null(K)``; the primal block is minimized
    over the null-space coordinates by least squares.
    """
    n = qp.dim_primal
    z0, null = _kkt_svd(qp)
    x0 = z0[:n]
    if null.shape[1]:
        w, *_ = np.linalg.lstsq(null[:n], -x0, rcond=RANK_RCOND)
        x_bar = x0 + null[:n] @ w
    else:
        x_bar = x0.copy()
    if qp.dim_dual:
        lam_bar, *_ = np.linalg.lstsq(qp.AT, -qp.gradient(x_bar), rcond=RANK_RCOND)
    else:
        lam_bar = np.zeros(0)
    residuals = kkt_residual(qp, x_bar, lam_bar)
    scale = max(1.0, float(np.linalg.norm(qp.M, 2)) * float(np.linalg.norm(x_bar)))
    if max(residuals) > KKT_TOL * scale:
        raise NoSolutionError(f"minimal-norm solve of {qp.name} left KKT residuals {residuals}")
    return x_bar, lam_bar


def solve_reference_qp(qp: QuadraticProblem) -> ReferenceSolution:
    """Direct least-norm solve of the KKT system, plus the minimal-norm pair."""
    n = qp.dim_primal
    z0, _ = _kkt_svd(qp)
    x_star, lam_star = z0[:n], z0[n:]
    x_bar, lam_bar = minimal_norm_solution(qp)
    return ReferenceSolution(x_star, lam_star, x_bar, lam_bar, qp.objective(x_star))


def reference_for(problem: ConstrainedProblem) -> ReferenceSolution:
    """Reference solution by closed form (example1) or KKT solve (quadratic)."""
    if isinstance(problem, Example1Problem):
        return problem.reference()
    qp = problem.quadratic()
    if qp is None:
        raise NoSolutionError(f"no reference solver for non-quadratic problem {problem.name}")
    return solve_reference_qp(qp)


# --------------------------------------------------------------------------
# Serialization


def problem_from_dict(spec: dict) -> ConstrainedProblem:
    """Build a problem from its JSON description.

    Accepted forms::

        {"kind": "example1", "m": 5, "n": 1, "e": 1}
        {"kind": "qp", "rows": 20, "cols": 40, "seed": 1}
        {"kind": "qp", "M": [[...]], "q": [...], "A": [[...]], "b": [...]}
    """
    kind = spec.get("kind")
    if kind == "example1":
        return make_example1(spec["m"], spec["n"], spec["e"])
    if kind == "qp":
        if "seed" in spec:
            return make_random_qp(int(spec["rows"]), int(spec["cols"]), int(spec["seed"]))
        A = np.asarray(spec["A"], dtype=float)
        M = np.asarray(spec["M"], dtype=float)
        if A.size == 0:
            A = A.reshape(0, M.shape[0])
        return QuadraticProblem(M, spec["q"], A, spec["b"])
    raise InvalidArgumentError(f"unknown problem kind {kind!r}")


def qp_to_dict(qp: QuadraticProblem) -> dict:
    return {"kind": "qp", "M": qp.M.tolist(), "q": qp.q.tolist(), "A": qp.A.tolist(), "b": qp.b.tolist()}
