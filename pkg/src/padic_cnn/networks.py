"""The hierarchical CNN models, their stability bounds, and stationary states.

Four networks are provided as right-hand-side builders for the fixed-step
integrators:

  * ContinuousCnn    dX = -X + A*f(X) + B*U + Z
  * DelayRdCnn       dX = -(lambda+1)X + J*X + A*f(X(t-r)) + B*U + Z
  * EdgeCnn          dX = -X + a f(X) + B*U + Z   (scalar pointwise gain a)
  * DenoiseRdCnn     dX = mu X + (lambda I - D_0^alpha)X + mu B*(X0 - f(X))

All convolutions carry the Haar weight p^{-l}.  Feedback/feedforward
couplings may be radial kernels (applied by FFT) or full matrices.

For the edge detector, the gain regimes split: a <= 1 has a unique
closed-form stationary state, while a > 1 has finitely many, classified
per cell by the drive w = B*U + Z into forced-positive (w >= a-1),
forced-negative (w <= 1-a), and free cells (strict inbetween, three
choices each).  The enumerated states are partially ordered by reverse
containment of their certainty sets; minimal elements are exactly the
bistable states, whose output is +-1 everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import (
    EnumerationLimitError,
    ParameterError,
    ValidationError,
)
from .funcspace import (
    GridFunction,
    OperatorMatrix,
    RadialKernel,
    vladimirov_row,
)

Coupling = Union[RadialKernel, OperatorMatrix, None]

FIXED_POINT_TOL = 1e-12
ENUMERATION_CAP = 10**6
EXHAUSTIVE_LEAF_CAP = 512


@dataclass(frozen=True)
class SigmoidSpec:
    """The output nonlinearity f(s) = (|s+1| - |s-1|)/2, i.e. clamp to [-1, 1].

    Lipschitz constant 1 and sup norm 1; both enter the stability bounds.
    """

    lipschitz: float = 1.0
    sup: float = 1.0

    def __call__(self, x):
        return np.clip(x, -1.0, 1.0)


SIGMOID = SigmoidSpec()


class _Coupling:
    """Haar-weighted application of a feedback/feedforward operator."""

    def __init__(self, op: Coupling, params):
        self.params = params
        if op is None:
            self.kind = "zero"
        elif isinstance(op, RadialKernel):
            if op.params != params:
                raise ParameterError("coupling kernel has mismatched parameters")
            self.kind = "radial"
            self._grid = op.as_grid().values
            row = params.haar_weight * self._grid
            self._row_hat = np.fft.rfft(row)
        elif isinstance(op, OperatorMatrix):
            if op.params != params:
                raise ParameterError("coupling matrix has mismatched parameters")
            self.kind = "matrix"
            self._entries = op.entries
        else:
            raise ParameterError(f"unsupported coupling type {type(op)!r}")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "radial":
            n = y.shape[0]
            return np.fft.irfft(self._row_hat * np.fft.rfft(y), n=n)
        return self.params.haar_weight * np.einsum("ij,j->i", self._entries, y)

    def haar_l1(self) -> float:
        """sup_i p^{-l} sum_j |A(i,j)|; for radial kernels this is ||A||_1."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "radial":
            return self.params.haar_weight * float(np.sum(np.abs(self._grid)))
        return self.params.haar_weight * float(
            np.max(np.sum(np.abs(self._entries), axis=1))
        )

    def sup(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "radial":
            return float(np.max(np.abs(self._grid)))
        return float(np.max(np.abs(self._entries)))


def _check_params(params, *objs):
    for obj in objs:
        if obj is None:
            continue
        if obj.params != params:
            raise ParameterError("network components have mismatched parameters")


# ---------------------------------------------------------------------------
# Network definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousCnn:
    """Space-invariant (or general) network with unit leak and sigmoid output."""

    A: Coupling
    B: Coupling
    U: GridFunction
    Z: GridFunction
    f: SigmoidSpec = SIGMOID

    def __post_init__(self):
        _check_params(self.U.params, self.A, self.B, self.Z)

    @property
    def params(self):
        return self.U.params


@dataclass(frozen=True)
class DelayRdCnn:
    """Reaction-diffusion network with jump-kernel diffusion and one delay.

    The history function supplies the state on [-r, 0]; its value at 0 is
    the initial condition.
    """

    J: RadialKernel
    lam: float
    A: Coupling
    B: Coupling
    U: GridFunction
    Z: GridFunction
    r: float
    history: Callable[[float], GridFunction]
    f: SigmoidSpec = SIGMOID

    def __post_init__(self):
        _check_params(self.U.params, self.J, self.A, self.B, self.Z)
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.r < 0:
            raise ParameterError(f"delay r must be >= 0, got {self.r}")
        grid = self.J.as_grid().values
        if np.min(grid) < 0:
            raise ValidationError("jump kernel must be nonnegative")
        mass = self.params.haar_weight * float(np.sum(grid))
        if abs(mass - 1.0) > 1e-10:
            raise ValidationError(
                f"jump kernel must have unit Haar mass, got {mass!r}"
            )

    @property
    def params(self):
        return self.U.params


@dataclass(frozen=True)
class EdgeCnn:
    """Edge detector with a pointwise scalar feedback gain a."""

    a: float
    B: Coupling
    U: GridFunction
    Z: GridFunction
    f: SigmoidSpec = SIGMOID

    def __post_init__(self):
        _check_params(self.U.params, self.B, self.Z)

    @property
    def params(self):
        return self.U.params


@dataclass(frozen=True)
class DenoiseRdCnn:
    """Reaction-diffusion denoiser driven by a noisy image X0.

    The flow is dX = mu X + (lambda I - D_0^alpha) X + mu B*(X0 - f(X));
    the initial condition is X0 itself.
    """

    mu: float
    alpha: float
    B: Coupling
    X0: GridFunction
    f: SigmoidSpec = SIGMOID

    def __post_init__(self):
        _check_params(self.X0.params, self.B)
        if self.alpha <= 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")

    @property
    def params(self):
        return self.X0.params


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------


def drive(net) -> GridFunction:
    """The constant part w = B*U + Z of a network's right-hand side."""
    params = net.params
    apply_B = _Coupling(net.B, params)
    w = apply_B(net.U.values) + net.Z.values
    return GridFunction(params, w)


def rhs_continuous(net: ContinuousCnn):
    """dX = -X + A*f(X) + (B*U + Z), with B*U + Z precomputed once."""
    params = net.params
    apply_A = _Coupling(net.A, params)
    w = drive(net).values
    f = net.f

    def rhs(t, x: GridFunction) -> GridFunction:
        return GridFunction(params, -x.values + apply_A(f(x.values)) + w)

    return rhs


def rhs_delay(net: DelayRdCnn):
    """dX = -(lambda+1)X + J*X + A*f(X(t-r)) + (B*U + Z)."""
    params = net.params
    apply_A = _Coupling(net.A, params)
    j_row = params.haar_weight * net.J.as_grid().values
    j_hat = np.fft.rfft(j_row)
    w = drive(net).values
    f = net.f
    leak = net.lam + 1.0
    n = params.n_leaves

    def rhs(t, x_now: GridFunction, x_delayed: GridFunction) -> GridFunction:
        diffused = np.fft.irfft(j_hat * np.fft.rfft(x_now.values), n=n)
        out = -leak * x_now.values + diffused + apply_A(f(x_delayed.values)) + w
        return GridFunction(params, out)

    return rhs


def rhs_edge(net: EdgeCnn):
    """dX = -X + a f(X) + (B*U + Z); the gain acts pointwise."""
    params = net.params
    w = drive(net).values
    a, f = net.a, net.f

    def rhs(t, x: GridFunction) -> GridFunction:
        return GridFunction(params, -x.values + a * f(x.values) + w)

    return rhs


def rhs_denoise(net: DenoiseRdCnn):
    """dX = mu X + L X + mu B*(X0 - f(X)), L the fractional heat generator.

    L is circulant for the radial singular kernel, so it is applied
    matrix-free by FFT; this matches the dense generator to roundoff.
    """
    params = net.params
    row = vladimirov_row(params, net.alpha)
    row_hat = np.fft.rfft(row)
    apply_B = _Coupling(net.B, params)
    x0 = net.X0.values
    mu, f = net.mu, net.f
    n = params.n_leaves

    def rhs(t, x: GridFunction) -> GridFunction:
        diffused = np.fft.irfft(row_hat * np.fft.rfft(x.values), n=n)
        out = mu * x.values + diffused + mu * apply_B(x0 - f(x.values))
        return GridFunction(params, out)

    return rhs


def delay_state(net: DelayRdCnn):
    """The DelayState (r, history) of a delay network, for integrate_delay."""
    from .dynamics import DelayState

    return DelayState(r=net.r, history_fn=net.history)


# ---------------------------------------------------------------------------
# Stability bounds
# ---------------------------------------------------------------------------


def stability_bound_continuous(net: ContinuousCnn, x0: GridFunction) -> float:
    """The a-priori sup bound ||X0|| + ||f|| ||A||_1 + ||U|| ||B||_1 + ||Z||.

    Every state of the network satisfies |X(x,t)| <= this bound for all t.
    """
    a_l1 = _Coupling(net.A, net.params).haar_l1()
    b_l1 = _Coupling(net.B, net.params).haar_l1()
    return (
        x0.sup_norm()
        + net.f.sup * a_l1
        + net.U.sup_norm() * b_l1
        + net.Z.sup_norm()
    )


def stability_bound_delay(net: DelayRdCnn) -> float | None:
    """The delay-network bound X_max / (lambda - 1), or None when lambda <= 1.

    X_max uses the locally-constant form: ||f|| max|A| + max|B| max|U|
    + max|Z|.  The jump kernel is normalized, so its L1 norm is 1; no
    uniform bound is claimed at or below lambda = 1.  Callers should add
    ||X0||_inf as a transient envelope before asserting on trajectories.
    """
    if net.lam <= 1.0:
        return None
    x_max = (
        net.f.sup * _Coupling(net.A, net.params).sup()
        + _Coupling(net.B, net.params).sup() * net.U.sup_norm()
        + net.Z.sup_norm()
    )
    return x_max / (net.lam - 1.0)


def stability_bound_denoise(net: DenoiseRdCnn, t: float) -> float:
    """Finite-horizon envelope for the denoiser flow at time t.

    Writing the forcing as feedback -mu B * f(X) plus input mu B * X0,
    the mild-solution estimate gives e^{mu t}||X0|| +
    (e^{mu t} - 1)/mu * (||mu B||_1 ||f|| + ||mu B||_1 ||X0||) for mu != 0
    and the linear-in-t version for mu = 0.
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t}")
    b_l1 = _Coupling(net.B, net.params).haar_l1()
    forcing = abs(net.mu) * b_l1 * (net.f.sup + net.X0.sup_norm())
    x0_sup = net.X0.sup_norm()
    if net.mu == 0.0:
        return x0_sup + t * forcing
    growth = np.exp(net.mu * t)
    return float(growth * x0_sup + (growth - 1.0) / net.mu * forcing)


# ---------------------------------------------------------------------------
# Stationary states of the edge detector
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StationaryState:
    """A fixed point of the edge detector, classified by (I_plus, I_minus).

    On I_plus the state is a + w, on I_minus it is -a + w, elsewhere
    w / (1 - a); bistable means the two certainty sets cover every cell.
    """

    i_plus: frozenset
    i_minus: frozenset
    values: GridFunction
    bistable: bool
    gain: float
    drive_values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, StationaryState):
            return NotImplemented
        return (
            self.i_plus == other.i_plus
            and self.i_minus == other.i_minus
            and _same_instance(self, other)
        )

    def __hash__(self):
        return hash((self.i_plus, self.i_minus))

    def middle(self) -> frozenset:
        n = self.values.params.n_leaves
        return frozenset(range(n)) - self.i_plus - self.i_minus


def _same_instance(s1: StationaryState, s2: StationaryState) -> bool:
    return (
        s1.values.params == s2.values.params
        and s1.gain == s2.gain
        and np.array_equal(s1.drive_values, s2.drive_values)
    )


def edge_residual(a: float, w: np.ndarray, values: np.ndarray,
                  f: SigmoidSpec = SIGMOID) -> float:
    """Sup-norm defect of the fixed-point system X = a f(X) + w."""
    return float(np.max(np.abs(-values + a * f(values) + w)))


def _make_state(params, a, w, plus_mask, minus_mask, f=SIGMOID) -> StationaryState:
    values = np.empty(params.n_leaves)
    middle_mask = ~(plus_mask | minus_mask)
    values[plus_mask] = a + w[plus_mask]
    values[minus_mask] = -a + w[minus_mask]
    if a == 1.0:
        values[middle_mask] = 0.0
    else:
        values[middle_mask] = w[middle_mask] / (1.0 - a)
    state = StationaryState(
        i_plus=frozenset(np.flatnonzero(plus_mask).tolist()),
        i_minus=frozenset(np.flatnonzero(minus_mask).tolist()),
        values=GridFunction(params, values),
        bistable=not np.any(middle_mask),
        gain=a,
        drive_values=w.copy(),
    )
    res = edge_residual(a, w, values, f)
    if res > FIXED_POINT_TOL:
        raise ValidationError(
            f"constructed stationary state has residual {res:.3e}"
        )
    return state


def stationary_edge(net: EdgeCnn) -> StationaryState:
    """The unique stationary state for gain a <= 1.

    For a < 1 the three-way branch on w = B*U + Z applies; for a = 1 the
    middle branch degenerates to the sign split with value 0 at w = 0.
    """
    a = net.a
    if a > 1.0:
        raise ParameterError(
            "gain a > 1 has multiple stationary states; use enumerate_stationary"
        )
    w = drive(net).values
    if a == 1.0:
        plus = w > 0.0
        minus = w < 0.0
    else:
        plus = w > 1.0 - a
        minus = w < -(1.0 - a)
    return _make_state(net.params, a, w, plus, minus, net.f)


def classify_cells(net: EdgeCnn):
    """(forced_plus, forced_minus, free) index arrays for gain a > 1.

    Cells at the thresholds w = a-1 and w = 1-a are forced: the middle
    branch needs the strict inequalities 1-a < w < a-1.
    """
    a = net.a
    if a <= 1.0:
        raise ParameterError("cell classification applies to gain a > 1 only")
    w = drive(net).values
    forced_plus = np.flatnonzero(w >= a - 1.0)
    forced_minus = np.flatnonzero(w <= 1.0 - a)
    free = np.flatnonzero((w > 1.0 - a) & (w < a - 1.0))
    return forced_plus, forced_minus, free


def enumerate_stationary(net: EdgeCnn, max_states: int = ENUMERATION_CAP,
                         sample: int | None = None,
                         seed: int = 0) -> list[StationaryState]:
    """All stationary states for gain a > 1, in lexicographic choice order.

    Every free cell independently joins I_plus, I_minus, or the middle
    set, so there are 3^(free cells) states.  Exhaustive enumeration is
    refused beyond ``max_states`` states (or beyond 512 leaves); pass
    ``sample`` to draw that many distinct choice vectors deterministically
    instead.

    Raises:
        EnumerationLimitError: when the instance exceeds the caps and no
            sample size was given.
    """
    params = net.params
    forced_plus, forced_minus, free = classify_cells(net)
    n_free = len(free)
    n_states = 3**n_free
    w = drive(net).values

    plus_base = np.zeros(params.n_leaves, dtype=bool)
    plus_base[forced_plus] = True
    minus_base = np.zeros(params.n_leaves, dtype=bool)
    minus_base[forced_minus] = True

    if sample is None:
        if n_states > max_states:
            raise EnumerationLimitError(
                f"{n_states} stationary states exceed the cap {max_states} "
                f"({n_free} free cells)",
                free_cells=n_free,
                state_count=n_states,
            )
        if params.n_leaves > EXHAUSTIVE_LEAF_CAP:
            raise EnumerationLimitError(
                f"exhaustive enumeration is limited to {EXHAUSTIVE_LEAF_CAP} "
                "leaves; pass a sample size",
                free_cells=n_free,
                state_count=n_states,
            )
        choice_vectors = itertools.product((0, 1, 2), repeat=n_free)
    else:
        rng = np.random.default_rng(seed)
        drawn = {
            tuple(rng.integers(0, 3, size=n_free).tolist())
            for _ in range(sample)
        }
        choice_vectors = sorted(drawn)

    states = []
    for choices in choice_vectors:
        plus = plus_base.copy()
        minus = minus_base.copy()
        for cell, choice in zip(free, choices):
            if choice == 0:
                plus[cell] = True
            elif choice == 1:
                minus[cell] = True
        states.append(_make_state(params, net.a, w, plus, minus, net.f))
    return states


# ---------------------------------------------------------------------------
# The partial order on stationary states
# ---------------------------------------------------------------------------


def poset_compare(s1: StationaryState, s2: StationaryState) -> str:
    """Compare two stationary states of the same network.

    Returns "equal", "leq" (s1 below s2), "geq", or "incomparable".
    s1 lies below s2 when s1 extends s2's certainty sets: I_plus(s2) a
    subset of I_plus(s1) and I_minus(s2) a subset of I_minus(s1).  Larger
    certainty sets sit lower, so bistable states are the minimal elements,
    and two distinct bistable states are incomparable.
    """
    if not _same_instance(s1, s2):
        raise ParameterError("states come from different networks")
    if s1.i_plus == s2.i_plus and s1.i_minus == s2.i_minus:
        return "equal"
    if s2.i_plus <= s1.i_plus and s2.i_minus <= s1.i_minus:
        return "leq"
    if s1.i_plus <= s2.i_plus and s1.i_minus <= s2.i_minus:
        return "geq"
    return "incomparable"


def minimal_states(states) -> list[StationaryState]:
    """States with nothing strictly below them under the partial order."""
    out = []
    for s in states:
        if not any(poset_compare(other, s) == "leq" for other in states):
            out.append(s)
    return out


def lattice_meet(s1, s2, states):
    """Greatest lower bound within the enumerated list, or None.

    Brute force: collect all common lower bounds and return the unique
    one that dominates the rest.  Pairs whose certainty sets conflict on
    some cell have no lower bound at all.
    """
    lower = [
        m
        for m in states
        if poset_compare(m, s1) in ("leq", "equal")
        and poset_compare(m, s2) in ("leq", "equal")
    ]
    for m in lower:
        if all(poset_compare(other, m) in ("leq", "equal") for other in lower):
            return m
    return None


def lattice_join(s1, s2, states):
    """Least upper bound within the enumerated list, or None."""
    upper = [
        u
        for u in states
        if poset_compare(s1, u) in ("leq", "equal")
        and poset_compare(s2, u) in ("leq", "equal")
    ]
    for u in upper:
        if all(poset_compare(u, other) in ("leq", "equal") for other in upper):
            return u
    return None


def lattice_check(states) -> dict:
    """Bounded-pair lattice audit over an enumerated state list.

    For every pair, the join (least upper bound) must exist; for every
    pair with at least one common lower bound, the meet must exist.
    Pairs whose certainty sets conflict (one state pins a cell positive,
    the other negative) have no common lower bound and are reported, not
    failed.
    """
    report = {
        "pairs": 0,
        "join_failures": 0,
        "meets_checked": 0,
        "meet_failures": 0,
        "unbounded_pairs": 0,
    }
    for s1, s2 in itertools.combinations(states, 2):
        report["pairs"] += 1
        if lattice_join(s1, s2, states) is None:
            report["join_failures"] += 1
        lower = [
            m
            for m in states
            if poset_compare(m, s1) in ("leq", "equal")
            and poset_compare(m, s2) in ("leq", "equal")
        ]
        if not lower:
            report["unbounded_pairs"] += 1
            continue
        report["meets_checked"] += 1
        if lattice_meet(s1, s2, states) is None:
            report["meet_failures"] += 1
    report["ok"] = report["join_failures"] == 0 and report["meet_failures"] == 0
    return report


def hasse_edges(states) -> list[tuple[int, int]]:
    """Covering relations (parent_index, child_index) of the partial order."""
    edges = []
    n = len(states)
    for i, j in itertools.permutations(range(n), 2):
        if poset_compare(states[j], states[i]) != "leq":
            continue
        covered = any(
            poset_compare(states[k], states[i]) == "leq"
            and poset_compare(states[j], states[k]) == "leq"
            for k in range(n)
            if k not in (i, j)
        )
        if not covered:
            edges.append((i, j))
    return edges
