"""Correlation of objective scores against subjective ratings.

PLCC, SROCC (average ranks on ties), RMSE after a monotonic 5-parameter
logistic mapping

    f(q) = b1 * (1/2 - 1/(1 + exp(b2 * (q - b3)))) + b4 * q + b5,

and a damped Gauss-Newton (Levenberg-Marquardt) fit of that mapping. The
linear map is nested in the family at b1 = 0, so a correct fit never loses to
the best straight line; the fitter runs from both the documented
initialization and the closed-form linear solution and keeps the better
optimum, making the nesting property hold by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import CorrelationError, FitError, ParseError

FIT_FTOL = 1e-10
FIT_MAX_ITER = 1000


@dataclass(frozen=True)
class LogisticParams:
    """Parameters of the 5-parameter logistic mapping; callable on scores."""

    beta1: float
    beta2: float
    beta3: float
    beta4: float
    beta5: float
    converged: bool = True

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3", "beta4", "beta5"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def __call__(self, objective):
        q = np.asarray(objective, dtype=np.float64)
        u = self.beta2 * (q - self.beta3)
        # 1/2 - 1/(1+exp(u)) == tanh(u/2)/2, overflow-free for any u
        return self.beta1 * 0.5 * np.tanh(0.5 * u) + self.beta4 * q + self.beta5

    def as_tuple(self):
        return (self.beta1, self.beta2, self.beta3, self.beta4, self.beta5)


def _as_pairs(objective, subjective, min_pairs):
    x = np.asarray(objective, dtype=np.float64).reshape(-1)
    y = np.asarray(subjective, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"objective has {x.size} values, subjective has {y.size}")
    if x.size < min_pairs:
        raise CorrelationError(f"need at least {min_pairs} pairs, got {x.size}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("scores must be finite")
    return x, y


def plcc(objective, subjective) -> float:
    """Pearson linear correlation coefficient."""
    x, y = _as_pairs(objective, subjective, 3)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    if denom == 0:
        raise CorrelationError("correlation undefined: zero variance on one side")
    return float(np.clip(np.sum(xc * yc) / denom, -1.0, 1.0))


def srocc(objective, subjective) -> float:
    """Spearman rank-order correlation; ties get average ranks."""
    x, y = _as_pairs(objective, subjective, 3)
    return plcc(rankdata(x), rankdata(y))


def rmse(objective, subjective, params: LogisticParams) -> float:
    """Root-mean-square error of the mapped objective scores."""
    x, y = _as_pairs(objective, subjective, 1)
    residual = params(x) - y
    return float(np.sqrt(np.mean(residual * residual)))


def _jacobian(p, x):
    b1, b2, b3, _, _ = p
    u = b2 * (x - b3)
    t = np.tanh(0.5 * u)
    sech2 = 1.0 - t * t
    jac = np.empty((x.size, 5), dtype=np.float64)
    jac[:, 0] = 0.5 * t
    jac[:, 1] = b1 * 0.25 * sech2 * (x - b3)
    jac[:, 2] = -b1 * 0.25 * sech2 * b2
    jac[:, 3] = x
    jac[:, 4] = 1.0
    return jac


def _model(p, x):
    return LogisticParams(*p)(x)


def _levenberg_marquardt(x, y, p0):
    """Damped least squares from `p0`; never accepts an uphill step.

    Returns (params, ssr, converged); converged means the relative residual
    improvement fell below FIT_FTOL (or no downhill step exists at all).
    """
    p = np.asarray(p0, dtype=np.float64).copy()
    residual = _model(p, x) - y
    ssr = float(residual @ residual)
    lam = 1e-3
    converged = False
    for _ in range(FIT_MAX_ITER):
        if ssr == 0.0:
            converged = True
            break
        jac = _jacobian(p, x)
        grad = jac.T @ residual
        hess = jac.T @ jac
        diag = np.diag(hess).copy()
        # dead parameters (e.g. b2/b3 while b1 == 0) leave zero diagonal
        # entries; floor them so the damping still regularizes the solve
        floor = max(diag.max(), 1.0) * 1e-14
        diag[diag < floor] = floor

        stepped = False
        for _ in range(60):
            try:
                delta = np.linalg.solve(hess + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = p + delta
            residual_new = _model(candidate, x) - y
            ssr_new = float(residual_new @ residual_new)
            if np.isfinite(ssr_new) and ssr_new <= ssr:
                stepped = True
                break
            lam *= 10.0
            if lam > 1e15:
                break
        if not stepped:
            # no downhill direction at any damping: stationary point
            converged = True
            break
        improvement = (ssr - ssr_new) / max(ssr, np.finfo(np.float64).tiny)
        p, residual, ssr = candidate, residual_new, ssr_new
        lam = max(lam / 3.0, 1e-12)
        if improvement < FIT_FTOL:
            converged = True
            break
    return p, ssr, converged


def fit_logistic(objective, subjective) -> LogisticParams:
    """Least-squares fit of the 5-parameter logistic mapping.

    Initialization: b1 = range(subjective), b2 = 1/std(objective),
    b3 = mean(objective), b4 = 0, b5 = mean(subjective). Converges when the
    relative residual change drops below 1e-10, capped at 1000 iterations;
    a non-converged run returns the best parameters found with
    ``converged=False``.
    """
    x, y = _as_pairs(objective, subjective, 5)
    std_x = float(np.std(x))
    if std_x == 0:
        raise FitError("objective scores are constant; the logistic fit is degenerate")

    p_doc = np.array(
        [y.max() - y.min(), 1.0 / std_x, x.mean(), 0.0, y.mean()], dtype=np.float64
    )
    design = np.column_stack([x, np.ones_like(x)])
    slope, intercept = np.linalg.lstsq(design, y, rcond=None)[0]
    p_lin = np.array([0.0, 1.0 / std_x, x.mean(), slope, intercept], dtype=np.float64)

    candidates = [_levenberg_marquardt(x, y, p0) for p0 in (p_doc, p_lin)]
    p, _, converged = min(candidates, key=lambda c: c[1])
    return LogisticParams(*p, converged=bool(converged))


def read_pairs_csv(path):
    """Read a scores CSV with header 'id,objective,subjective'.

    Returns (ids, objective, subjective); blank lines are skipped.
    """
    ids = []
    xs = []
    ys = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != [
            "id",
            "objective",
            "subjective",
        ]:
            raise ParseError(f"{path}: expected header 'id,objective,subjective'")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: expected 3 columns, got {len(row)}", line_no)
            try:
                x = float(row[1])
                y = float(row[2])
            except ValueError:
                raise ParseError(f"{path}: malformed number", line_no) from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ParseError(f"{path}: scores must be finite", line_no)
            ids.append(row[0].strip())
            xs.append(x)
            ys.append(y)
    if not ids:
        raise ParseError(f"{path}: no data rows")
    return ids, np.asarray(xs), np.asarray(ys)


def format_report(objective, subjective) -> str:
    """Evaluation report: correlations, post-mapping RMSE, fitted betas.

    PLCC and RMSE are computed on the mapped scores (SROCC is invariant to
    any monotonic mapping and is computed on the raw scores).
    """
    params = fit_logistic(objective, subjective)
    mapped_plcc = plcc(params(objective), subjective)
    lines = [
        f"n: {np.asarray(objective).size}",
        f"PLCC={mapped_plcc:.6f}",
        f"SROCC={srocc(objective, subjective):.6f}",
        f"RMSE={rmse(objective, subjective, params):.6f}",
        f"beta1: {params.beta1!r}",
        f"beta2: {params.beta2!r}",
        f"beta3: {params.beta3!r}",
        f"beta4: {params.beta4!r}",
        f"beta5: {params.beta5!r}",
        f"converged: {str(params.converged).lower()}",
    ]
    return "\n".join(lines) + "\n"
