"""The GEC recursion, its fixed-precision first-order variant and the
two-stage MAP schedule.

One iteration runs the half-step (i, j) = (1, 2) and then (2, 1):

    xhat_i  = g_i(r_i, gamma_i)
    eta_i   = 1 / d(Q_i)
    gamma_j = eta_i - gamma_i
    r_j     = (eta_i * xhat_i - gamma_i * r_i) / gamma_j
"""
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .diag import Diagonalizer
from .errors import ConfigError, DivergenceError, InvariantViolation
from .penalties import EstimateInfo, estimate

MAP = "map"
MMSE = "mmse"
JOINT = "joint"
FIRST_ORDER = "first_order"
TWO_STAGE_MAP = "two_stage_map"


def _norm_mode(mode):
    mode = str(mode).lower()
    if mode not in (MAP, MMSE):
        raise ConfigError(f"mode must be 'map' or 'mmse', got {mode!r}")
    return mode


@dataclass
class GecSide:
    """Message quantities held by one side of the recursion."""

    r: np.ndarray
    gamma: np.ndarray
    xhat: np.ndarray = None
    eta: np.ndarray = None

    @property
    def beta(self):
        return self.gamma * self.r


@dataclass
class GecState:
    side1: GecSide
    side2: GecSide
    iteration: int = 0
    clipped: int = 0
    floored: int = 0

    def side(self, i):
        return self.side1 if i == 1 else self.side2

    @property
    def xhat(self):
        return 0.5 * (self.side1.xhat + self.side2.xhat)

    @property
    def eta(self):
        return 0.5 * (self.side1.eta + self.side2.eta)


@dataclass
class GecConfig:
    mode: str = MMSE
    diagonalizer: Diagonalizer = field(default_factory=Diagonalizer.vector)
    init_r1: object = None
    init_gamma1: object = 1.0
    init_gamma2: object = 1.0
    max_iters: int = 500
    fixed_point_tol: float = 1e-8
    gamma_floor: float = 1e-8
    schedule: str = JOINT
    damping_factor: float = None
    first_order_tol: float = 1e-10
    first_order_max_iters: int = 10000
    stage2_consistency_tol: float = 1e-8

    def __post_init__(self):
        self.mode = _norm_mode(self.mode)
        if self.schedule not in (JOINT, FIRST_ORDER, TWO_STAGE_MAP):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.schedule == TWO_STAGE_MAP and self.mode != MAP:
            raise ConfigError("the two-stage schedule is defined for MAP mode only")
        for name in ("fixed_point_tol", "gamma_floor", "first_order_tol", "stage2_consistency_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.damping_factor is not None and not 0 < self.damping_factor <= 1:
            raise ConfigError("damping_factor must lie in (0, 1]")
        for name in ("init_gamma1", "init_gamma2"):
            if np.any(np.asarray(getattr(self, name), dtype=float) <= 0):
                raise ConfigError(f"{name} must be positive")

    def initial_vectors(self, n):
        r1 = np.zeros(n) if self.init_r1 is None else np.array(self.init_r1, dtype=float)
        g1 = np.broadcast_to(np.asarray(self.init_gamma1, dtype=float), (n,)).copy()
        g2 = np.broadcast_to(np.asarray(self.init_gamma2, dtype=float), (n,)).copy()
        if r1.shape != (n,):
            raise ConfigError(f"init_r1 must have length {n}")
        return r1, g1, g2


@dataclass
class IterRecord:
    iteration: int
    xhat1: np.ndarray
    xhat2: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    xhat_residual: float
    eta_residual: float
    grad_residual: float = None
    clipped: int = 0

    def as_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    termination: str = ""
    converged: bool = False
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return [getattr(rec, name) for rec in self.records]


def _check_penalties(penalties, diag):
    f1, f2 = penalties
    if f1.dim != f2.dim:
        raise ConfigError(f"penalty dimensions differ: {f1.dim} vs {f2.dim}")
    diag.check_dim(f1.dim)
    return f1.dim


def gec_half_step(state, i, penalties, mode=MMSE, diag=None, gamma_floor=1e-8, damping=None):
    """Estimate on side ``i``, then write the extrinsic messages of side ``j``.

    Returns a new state; the input state is not modified.
    """
    diag = diag or Diagonalizer.vector()
    mode = _norm_mode(mode)
    j = 2 if i == 1 else 1
    src = state.side(i)
    dst = state.side(j)
    info = EstimateInfo()
    xhat, q = estimate(penalties[i - 1], src.r, src.gamma, mode, diag, info)
    eta = 1.0 / q
    gamma_j = eta - src.gamma
    beta_j = eta * xhat - src.gamma * src.r
    low = ~(gamma_j > gamma_floor)
    if np.any(low):
        gamma_j = np.where(low, gamma_floor, gamma_j)
    if damping is not None and damping < 1 and dst.gamma is not None:
        gamma_j = damping * gamma_j + (1 - damping) * dst.gamma
        beta_j = damping * beta_j + (1 - damping) * dst.gamma * dst.r
    r_j = beta_j / gamma_j
    if not (np.all(np.isfinite(xhat)) and np.all(np.isfinite(eta)) and np.all(np.isfinite(r_j))):
        raise DivergenceError(f"non-finite update on side {i} at iteration {state.iteration}")
    new_src = replace(src, xhat=xhat, eta=eta)
    new_dst = replace(dst, r=r_j, gamma=gamma_j)
    sides = (new_src, new_dst) if i == 1 else (new_dst, new_src)
    return replace(state, side1=sides[0], side2=sides[1], clipped=state.clipped + int(np.count_nonzero(low)),
                   floored=state.floored + info.floored)


def gradient_residual(penalties, xhat, state=None):
    """Stationarity residual dist(0, df1(xhat) + df2(xhat)) in the sup norm.

    Smooth sides contribute their gradient; a single non-smooth side uses its
    subdifferential distance. When neither side is smooth the subgradients
    implied by the prox optimality conditions of ``state`` are used.
    """
    f1, f2 = penalties
    if f1.smooth and f2.smooth:
        return float(np.max(np.abs(f1.grad(xhat) + f2.grad(xhat))))
    if f2.smooth:
        return float(np.max(f1.subgrad_distance(xhat, f2.grad(xhat))))
    if f1.smooth:
        return float(np.max(f2.subgrad_distance(xhat, f1.grad(xhat))))
    if state is None:
        return None
    s1, s2 = state.side1, state.side2
    v = s1.gamma * (s1.r - s1.xhat) + s2.gamma * (s2.r - s2.xhat)
    return float(np.max(np.abs(v)))


def _record(state, penalties, mode, clipped):
    s1, s2 = state.side1, state.side2
    grad = gradient_residual(penalties, state.xhat, state) if mode == MAP else None
    return IterRecord(
        iteration=state.iteration,
        xhat1=s1.xhat, xhat2=s2.xhat, eta1=s1.eta, eta2=s2.eta,
        gamma1=s1.gamma, gamma2=s2.gamma,
        xhat_residual=float(np.max(np.abs(s1.xhat - s2.xhat))),
        eta_residual=float(np.max(np.abs(s1.eta - s2.eta))),
        grad_residual=grad, clipped=clipped,
    )


def initial_state(config, n):
    r1, g1, g2 = config.initial_vectors(n)
    return GecState(GecSide(r1, g1), GecSide(np.zeros(n), g2))


def run_gec(config, penalties, state=None):
    """Run the configured schedule; returns ``(state, trace)``.

    For the joint schedule the recursion stops once both consistency residuals
    have been below ``fixed_point_tol`` for two consecutive iterations (the eta
    residual is measured relative to max(1, ||eta||_inf)).
    """
    if config.schedule == TWO_STAGE_MAP:
        return run_two_stage_map(config, penalties)
    diag = config.diagonalizer
    n = _check_penalties(penalties, diag)
    if config.schedule == FIRST_ORDER:
        return _first_order_as_run(config, penalties, n)
    mode = config.mode
    state = state if state is not None else initial_state(config, n)
    trace = RunTrace()
    tol = config.fixed_point_tol
    below = 0
    first = None
    for it in range(1, config.max_iters + 1):
        clipped0 = state.clipped
        try:
            state = gec_half_step(state, 1, penalties, mode, diag, config.gamma_floor, config.damping_factor)
            state = gec_half_step(state, 2, penalties, mode, diag, config.gamma_floor, config.damping_factor)
        except DivergenceError as err:
            trace.termination = "diverged"
            err.trace = trace
            raise
        state = replace(state, iteration=it)
        rec = _record(state, penalties, mode, state.clipped - clipped0)
        trace.records.append(rec)
        scale = max(1.0, float(np.max(np.abs(state.side1.eta))))
        size = max(rec.xhat_residual, rec.eta_residual / scale)
        if first is None:
            # an exactly consistent start (e.g. a prox returning 0) must not make the guard hair-trigger
            first = max(size, 1.0)
        elif size > 1e6 * first:
            trace.termination = "diverged"
            raise DivergenceError(f"residual grew from {first:.3e} to {size:.3e}", trace)
        if rec.xhat_residual < tol and rec.eta_residual < tol * scale:
            below += 1
            if below >= 2:
                trace.termination = "converged"
                trace.converged = True
                break
        else:
            below = 0
    else:
        trace.termination = "max_iters"
    trace.extra["clipped"] = state.clipped
    trace.extra["floored"] = state.floored
    return state, trace


@dataclass
class FirstOrderResult:
    beta1: np.ndarray
    beta2: np.ndarray
    xhat1: np.ndarray
    xhat2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    residuals: list
    ratios: list
    converged: bool
    non_contraction: bool = False
    trajectory: list = None

    @property
    def xhat(self):
        return 0.5 * (self.xhat1 + self.xhat2)

    @property
    def r1(self):
        return self.beta1 / self.gamma1


def _gtilde(penalty, beta, gamma, mode, diag):
    if mode == MAP:
        return penalty.prox(beta / gamma, gamma)
    return estimate(penalty, beta / gamma, gamma, mode, diag)[0]


def run_first_order(beta_init, gamma1, gamma2, penalties, tol=1e-10, max_iters=10000, mode=MAP, diag=None,
                    keep_trajectory=False):
    """Fixed-precision recursion beta_j <- (Gamma_1 + Gamma_2) g~_i(beta_i) - beta_i.

    The per-sweep contraction ratio is measured on v_2 = Gamma^{-1/2} beta_2
    with Gamma = Gamma_1 + Gamma_2 in the Euclidean norm. A warning is issued
    and ``non_contraction`` set if the residual grows for 10 consecutive sweeps.
    With ``keep_trajectory`` every sweep's (r_1, xhat_1, r_2, xhat_2) is kept;
    ``tol=0`` runs exactly ``max_iters`` sweeps.
    """
    f1, f2 = penalties
    n = f1.dim
    mode = _norm_mode(mode)
    diag = diag or Diagonalizer.vector()
    g1 = np.broadcast_to(np.asarray(gamma1, dtype=float), (n,)).copy()
    g2 = np.broadcast_to(np.asarray(gamma2, dtype=float), (n,)).copy()
    if np.any(g1 <= 0) or np.any(g2 <= 0):
        raise ConfigError("first-order precisions must be positive")
    eta = g1 + g2
    w = 1.0 / np.sqrt(eta)
    beta1 = np.array(beta_init, dtype=float)
    residuals, ratios = [], []
    prev_beta2 = None
    prev_step = None
    increases = 0
    flagged = False
    converged = False
    beta2 = x1 = x2 = None
    traj = [] if keep_trajectory else None
    for _ in range(max_iters):
        x1 = _gtilde(f1, beta1, g1, mode, diag)
        beta2 = eta * x1 - beta1
        x2 = _gtilde(f2, beta2, g2, mode, diag)
        new_beta1 = eta * x2 - beta2
        if not np.all(np.isfinite(new_beta1)):
            raise DivergenceError("non-finite first-order iterate")
        if traj is not None:
            traj.append((beta1 / g1, x1, beta2 / g2, x2))
        res = float(np.max(np.abs(new_beta1 - beta1)))
        residuals.append(res)
        if prev_beta2 is not None:
            step = float(np.linalg.norm(w * (beta2 - prev_beta2)))
            if prev_step is not None and prev_step > 0:
                ratios.append(step / prev_step)
            prev_step = step
        else:
            prev_step = None
        if len(residuals) > 1 and res > residuals[-2]:
            increases += 1
            if increases >= 10 and not flagged:
                flagged = True
                warnings.warn("first-order recursion is not contracting", RuntimeWarning, stacklevel=2)
        else:
            increases = 0
        prev_beta2 = beta2
        beta1 = new_beta1
        if res < tol * max(1.0, float(np.max(np.abs(beta1)))):
            converged = True
            break
    x1 = _gtilde(f1, beta1, g1, mode, diag)
    beta2 = eta * x1 - beta1
    x2 = _gtilde(f2, beta2, g2, mode, diag)
    return FirstOrderResult(beta1, beta2, x1, x2, g1, g2, residuals, ratios, converged, flagged, traj)


def contraction_bound(gamma1, gamma2, c1, c2, rigorous=False):
    """Upper bound on the first-order Jacobian-product norm.

    ``c1`` and ``c2`` are (lower, upper) curvature bounds of f_1 and f_2. The
    default is the per-component bound max_n of the endpoint maximum of
    |gamma_2 - q_1||gamma_1 - q_2| / ((gamma_1 + q_1)(gamma_2 + q_2)), which is
    exact when the Jacobians commute with Diag(gamma); ``rigorous=True``
    returns the product of the two individual norm bounds instead.
    """
    gamma1 = np.atleast_1d(np.asarray(gamma1, dtype=float))
    gamma2 = np.atleast_1d(np.asarray(gamma2, dtype=float))
    a = np.maximum.reduce([np.abs(gamma2 - q) / (gamma1 + q) for q in c1])
    b = np.maximum.reduce([np.abs(gamma1 - q) / (gamma2 + q) for q in c2])
    if rigorous:
        return float(np.max(a) * np.max(b))
    return float(np.max(a * b))


def _first_order_as_run(config, penalties, n):
    r1, g1, g2 = config.initial_vectors(n)
    res = run_first_order(g1 * r1, g1, g2, penalties, config.first_order_tol,
                          config.first_order_max_iters, config.mode, config.diagonalizer)
    eta = g1 + g2
    state = GecState(GecSide(res.r1, g1, res.xhat1, eta), GecSide(res.beta2 / g2, g2, res.xhat2, eta.copy()),
                     iteration=len(res.residuals))
    trace = RunTrace(termination="converged" if res.converged else "max_iters", converged=res.converged)
    trace.extra["residuals"] = res.residuals
    trace.extra["ratios"] = res.ratios
    trace.extra["non_contraction"] = res.non_contraction
    return state, trace


def run_two_stage_map(config, penalties):
    """Stage 1: fixed-precision recursion to beta-residual ``first_order_tol``.
    Stage 2: full MAP-GEC from (r_1^0, gamma_1^0), asserting that each
    iterate keeps xhat_1 = xhat_2 = xhat.
    """
    if config.mode != MAP:
        raise ConfigError("the two-stage schedule is defined for MAP mode only")
    diag = config.diagonalizer
    n = _check_penalties(penalties, diag)
    r1, g1, g2 = config.initial_vectors(n)
    stage1 = run_first_order(g1 * r1, g1, g2, penalties, config.first_order_tol,
                             config.first_order_max_iters, MAP, diag)
    if not stage1.converged:
        raise InvariantViolation("stage 1 did not reach the first-order tolerance")
    xref = stage1.xhat1
    joint = replace(config, schedule=JOINT, init_r1=stage1.r1, init_gamma1=g1)
    state = initial_state(joint, n)
    state, trace = run_gec(joint, penalties, state)
    bound = config.stage2_consistency_tol * (1.0 + float(np.max(np.abs(xref))))
    drift = 0.0
    for rec in trace.records:
        d = max(float(np.max(np.abs(rec.xhat1 - xref))), float(np.max(np.abs(rec.xhat2 - xref))))
        drift = max(drift, d)
        if d > bound:
            raise InvariantViolation(
                f"stage-2 estimate drifted by {d:.3e} > {bound:.3e} at iteration {rec.iteration}")
    trace.extra["stage1_iterations"] = len(stage1.residuals)
    trace.extra["stage1_xhat"] = xref
    trace.extra["stage2_drift"] = drift
    return state, trace


def fixed_point_residuals(state, penalties, mode=MMSE, diag=None):
    """Re-evaluate both estimation functions at the state's (r_i, gamma_i).

    Returns the sup-norm residuals of eta_1 = eta_2, xhat_1 = xhat_2,
    eta = gamma_1 + gamma_2, xhat = (gamma_1 r_1 + gamma_2 r_2)/(gamma_1 + gamma_2)
    and, in MAP mode, the stationarity residual.
    """
    diag = diag or Diagonalizer.vector()
    mode = _norm_mode(mode)
    f1, f2 = penalties
    s1, s2 = state.side1, state.side2
    x1, q1 = estimate(f1, s1.r, s1.gamma, mode, diag)
    x2, q2 = estimate(f2, s2.r, s2.gamma, mode, diag)
    e1, e2 = 1.0 / q1, 1.0 / q2
    gsum = s1.gamma + s2.gamma
    comb = (s1.gamma * s1.r + s2.gamma * s2.r) / gsum
    out = {
        "eta_consistency": float(np.max(np.abs(e1 - e2))),
        "xhat_consistency": float(np.max(np.abs(x1 - x2))),
        "eta_sum": float(np.max(np.abs(e1 - gsum))),
        "xhat_combination": float(np.max(np.abs(x1 - comb))),
    }
    if mode == MAP:
        fresh = GecState(GecSide(s1.r, s1.gamma, x1, e1), GecSide(s2.r, s2.gamma, x2, e2))
        out["gradient"] = gradient_residual(penalties, 0.5 * (x1 + x2), fresh)
    return out


def second_order_map(P, gamma, stable=True):
    """G(gamma) = 1 ./ diag((P + Diag(gamma))^-1) - gamma.

    With ``stable`` each component is evaluated as the Schur complement
    P_nn - P_n,-n (P_-n + Diag(gamma_-n))^-1 P_-n,n, which avoids the
    cancellation of the direct form when gamma is large.
    """
    P = np.asarray(P, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (P.shape[0],))
    if not stable:
        return 1.0 / np.diag(np.linalg.inv(P + np.diag(gamma))) - gamma
    n = P.shape[0]
    out = np.empty(n)
    for k in range(n):
        rest = np.r_[0:k, k + 1:n]
        if rest.size == 0:
            out[k] = P[k, k]
            continue
        S = P[np.ix_(rest, rest)] + np.diag(gamma[rest])
        p = P[rest, k]
        out[k] = P[k, k] - p @ np.linalg.solve(S, p)
    return out
