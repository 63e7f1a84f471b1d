"""Discretized test functions on G_l and the linear operators acting on them.

A test function that is locally constant at scale p^{-l} is determined by
its p^l leaf coefficients; this module stores those coefficients as a
`GridFunction`.  Convolution carries the Haar weight p^{-l} per leaf, so
(f ** g)(k) = p^{-l} sum_i f(i) g(k - i), matching the continuum integral
of locally constant functions.

Two linear operators are assembled as matrices: the jump-kernel diffusion
operator J f(x) = integral of J(x-y)(f(y) - f(x)), and the generator
L = lambda*I - D_0^alpha of the fractional heat semigroup on the unit
ball.  Both are circulant with zero row sums and nonnegative
off-diagonals, i.e. honest Markov generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ParameterError, ValidationError
from .ptree import PadicNormValue, TreeParams, leaf_valuations

#: Largest dimension for which generator matrices are assembled densely.
DENSE_LIMIT = 4096

# Validation tolerances for tagged operator matrices.
GENERATOR_ROW_SUM_TOL = 1e-12
GENERATOR_OFFDIAG_TOL = -1e-14
STOCHASTIC_ROW_SUM_TOL = 1e-10
STOCHASTIC_ENTRY_TOL = -1e-14


def _exact_row_sums(arr: np.ndarray) -> np.ndarray:
    """Row sums in extended precision, so validation is order-independent.

    Plain float64 pairwise sums of a 4096-wide generator row carry ~1e-11
    of roundoff, which would drown the 1e-12 invariant being checked.
    """
    return arr.astype(np.longdouble).sum(axis=1).astype(np.float64)


@dataclass(frozen=True)
class GridFunction:
    """A real-valued function on G_l, stored as its p^l leaf values."""

    params: TreeParams
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.shape != (self.params.n_leaves,):
            raise ParameterError(
                f"expected {self.params.n_leaves} values, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("grid function contains non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, params: TreeParams) -> "GridFunction":
        return cls(params, np.zeros(params.n_leaves))

    @classmethod
    def constant(cls, params: TreeParams, value: float) -> "GridFunction":
        return cls(params, np.full(params.n_leaves, float(value)))

    @classmethod
    def delta(cls, params: TreeParams, at: int = 0) -> "GridFunction":
        vals = np.zeros(params.n_leaves)
        vals[at] = 1.0
        return cls(params, vals)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def haar_mass(self) -> float:
        """p^{-l} * sum of leaf values, the integral over the unit ball."""
        return self.params.haar_weight * float(np.sum(self.values))


@dataclass(frozen=True)
class RadialKernel:
    """A radial function k(x) = profile(|x|_p) on G_l.

    ``profile[e]`` is the value on the norm class p^{-e} for e = 0..l-1;
    ``profile[l]`` is the value at the zero norm (the leaf 0 class, where
    the convention |0|_p = 0 forces an explicit choice).
    """

    params: TreeParams
    profile: np.ndarray

    def __post_init__(self):
        arr = np.array(self.profile, dtype=np.float64)
        if arr.shape != (self.params.l + 1,):
            raise ParameterError(
                f"profile must have length l+1 = {self.params.l + 1}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("radial profile contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "profile", arr)

    def as_grid(self) -> GridFunction:
        vals = self.profile[leaf_valuations(self.params)]
        return GridFunction(self.params, vals)

    def haar_l1(self) -> float:
        """Haar-weighted l1 norm p^{-l} * sum |k(i)|."""
        grid = self.profile[leaf_valuations(self.params)]
        return self.params.haar_weight * float(np.sum(np.abs(grid)))

    def haar_mass(self) -> float:
        grid = self.profile[leaf_valuations(self.params)]
        return self.params.haar_weight * float(np.sum(grid))

    def sup(self) -> float:
        return float(np.max(np.abs(self.profile)))


def sample_radial(profile_fn, params: TreeParams) -> RadialKernel:
    """Evaluate a closed-form radial expression on every norm class.

    ``profile_fn`` receives the float norm value: p^{-e} for the classes
    e = 0..l-1 and 0.0 for the zero class.
    """
    p = params.p
    vals = [profile_fn(float(p) ** (-e)) for e in range(params.l)]
    vals.append(profile_fn(0.0))
    arr = np.array(vals, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("radial profile evaluated to a non-finite value")
    return RadialKernel(params, arr)


@dataclass(frozen=True)
class OperatorMatrix:
    """A dense linear operator on GridFunctions, optionally tagged.

    Tags carry validation: a "generator" must have zero row sums and
    nonnegative off-diagonals; a "stochastic" matrix must have nonnegative
    entries and unit row sums.
    """

    params: TreeParams
    entries: np.ndarray
    tag: str | None = None

    def __post_init__(self):
        n = self.params.n_leaves
        arr = np.array(self.entries, dtype=np.float64)
        if arr.shape != (n, n):
            raise ParameterError(f"expected a {n}x{n} matrix, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("operator matrix contains non-finite entries")
        if self.tag == "generator":
            row_sums = _exact_row_sums(arr)
            if np.max(np.abs(row_sums)) > GENERATOR_ROW_SUM_TOL:
                raise ValidationError(
                    "generator row sums deviate from 0 by "
                    f"{np.max(np.abs(row_sums)):.3e}"
                )
            off = arr - np.diag(np.diag(arr))
            if np.min(off) < GENERATOR_OFFDIAG_TOL:
                raise ValidationError(
                    f"generator off-diagonal entry {np.min(off):.3e} < 0"
                )
        elif self.tag == "stochastic":
            if np.min(arr) < STOCHASTIC_ENTRY_TOL:
                raise ValidationError(
                    f"stochastic entry {np.min(arr):.3e} < 0"
                )
            row_sums = _exact_row_sums(arr)
            if np.max(np.abs(row_sums - 1.0)) > STOCHASTIC_ROW_SUM_TOL:
                raise ValidationError("stochastic row sums deviate from 1")
        elif self.tag not in (None, "convolution"):
            raise ParameterError(f"unknown operator tag {self.tag!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    def apply(self, f: GridFunction) -> GridFunction:
        """Matrix-vector product with a fixed, thread-independent reduction."""
        if f.params != self.params:
            raise ParameterError("mismatched tree parameters")
        out = np.einsum("ij,j->i", self.entries, f.values)
        return GridFunction(self.params, out)


# ---------------------------------------------------------------------------
# Haar-weighted group convolution
# ---------------------------------------------------------------------------


def _check_same_params(f: GridFunction, g: GridFunction) -> TreeParams:
    if f.params != g.params:
        raise ParameterError("mismatched tree parameters")
    return f.params


def haar_convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Direct O(N^2) Haar convolution (f ** g)(k) = p^{-l} sum f(i) g(k-i).

    This is the reference path; `haar_convolve_fast` must agree with it
    entrywise to 1e-12.
    """
    params = _check_same_params(f, g)
    n = params.n_leaves
    idx = np.arange(n)
    if n <= 2048:
        gathered = g.values[(idx[:, None] - idx[None, :]) % n]
        out = params.haar_weight * np.einsum("ki,i->k", gathered, f.values)
    else:
        out = np.empty(n)
        for k in range(n):
            out[k] = np.einsum("i,i->", f.values, g.values[(k - idx) % n])
        out *= params.haar_weight
    return GridFunction(params, out)


def haar_convolve_fast(f: GridFunction, g: GridFunction) -> GridFunction:
    """Haar convolution via a length-p^l fast cyclic transform."""
    params = _check_same_params(f, g)
    out = params.haar_weight * cyclic_convolve_fft(f.values, g.values)
    return GridFunction(params, out)


def cyclic_convolve_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Plain cyclic convolution over Z/NZ computed with real FFTs."""
    n = a.shape[0]
    return np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(b), n=n)


def convolution_operator(kernel: RadialKernel) -> OperatorMatrix:
    """The matrix A(i,j) = kernel(|i-j|_p), without the Haar weight."""
    params = kernel.params
    n = params.n_leaves
    if n > DENSE_LIMIT:
        raise ParameterError(
            f"dense convolution matrices are capped at {DENSE_LIMIT} leaves"
        )
    grid = kernel.as_grid().values
    idx = np.arange(n)
    entries = grid[(idx[:, None] - idx[None, :]) % n]
    return OperatorMatrix(params, entries, tag="convolution")


# ---------------------------------------------------------------------------
# Generators: jump-kernel diffusion and the fractional Laplacian on Z_p
# ---------------------------------------------------------------------------


def j_operator_row(kernel: RadialKernel) -> np.ndarray:
    """First circulant row of the diffusion operator for a jump kernel.

    Requires kernel >= 0 with unit Haar mass; entry 0 is the diagonal.
    """
    params = kernel.params
    grid = kernel.as_grid().values
    if np.min(grid) < 0:
        raise ValidationError(
            f"jump kernel must be nonnegative, min value {np.min(grid):.3e}"
        )
    mass = params.haar_weight * float(np.sum(grid))
    if abs(mass - 1.0) > 1e-10:
        raise ValidationError(
            f"jump kernel must have unit Haar mass, got {mass!r}"
        )
    row = params.haar_weight * grid
    row[0] = 0.0
    row[0] = -math.fsum(row)
    return row


def build_J_operator(kernel: RadialKernel) -> OperatorMatrix:
    """Dense generator of the ultradiffusion (Jf)(k) = p^{-l} sum J(i)(f(k-i)-f(k))."""
    return _circulant_generator(kernel.params, j_operator_row(kernel))


def vladimirov_lambda(p: int, alpha: float) -> float:
    """The constant (p-1) p^alpha / (p^{alpha+1} - 1) of the unit-ball heat theory."""
    if alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    return (p - 1) * float(p) ** alpha / (float(p) ** (alpha + 1) - 1.0)


def vladimirov_row(params: TreeParams, alpha: float) -> np.ndarray:
    """First circulant row of L = lambda*I - D_0^alpha restricted to scale l.

    For functions locally constant at scale p^{-l} the singular integral
    over the zero class vanishes identically, so the row has no j = 0
    contribution beyond the balancing diagonal.
    """
    if alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    p = params.p
    c_alpha = (1.0 - float(p) ** alpha) / (1.0 - float(p) ** (-alpha - 1.0))
    vals = leaf_valuations(params).astype(np.float64)
    # |j|^{-(alpha+1)} = p^{v(alpha+1)}; the zero leaf is excluded exactly.
    row = (-c_alpha) * params.haar_weight * float(p) ** (vals * (alpha + 1.0))
    row[0] = 0.0
    row[0] = -math.fsum(row)
    return row


def build_vladimirov_generator(params: TreeParams, alpha: float) -> OperatorMatrix:
    """Dense generator L = lambda*I - D_0^alpha of the heat semigroup on Z_p."""
    return _circulant_generator(params, vladimirov_row(params, alpha))


def _circulant_generator(params: TreeParams, row: np.ndarray) -> OperatorMatrix:
    n = params.n_leaves
    if n > DENSE_LIMIT:
        raise ParameterError(
            f"dense generator assembly is capped at {DENSE_LIMIT} leaves; "
            "use the circulant row with matrix-free application instead"
        )
    idx = np.arange(n)
    entries = row[(idx[:, None] - idx[None, :]) % n]
    # The circulant row already balances its diagonal by compensated
    # summation, and every row is a permutation of it, so exact row sums
    # are identical across rows and bounded by one rounding of the total.
    return OperatorMatrix(params, entries, tag="generator")


def circulant_apply(row: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Apply a circulant operator given its first row, via FFT."""
    return cyclic_convolve_fft(row, values)


# ---------------------------------------------------------------------------
# The heat kernel Z_0 on the unit ball
# ---------------------------------------------------------------------------


def _kahan_add(acc: float, comp: float, term: float) -> tuple[float, float]:
    y = term - comp
    t = acc + y
    comp = (t - acc) - y
    return t, comp


def heat_kernel_Z(norm_value: PadicNormValue, t: float, alpha: float,
                  a: float = 1.0) -> float:
    """The oscillatory-integral heat kernel evaluated by annulus decomposition.

    The defining integral over Q_p is split into norm spheres |xi| = p^g;
    on each sphere the character integral is p^g (1 - 1/p) when
    |x| <= p^{-g}, -p^{g-1} when |x| = p^{-g+1}, and 0 otherwise, which
    collapses the integral to a rapidly convergent sum over g.

    Args:
        norm_value: |x|_p of the evaluation point (zero norm allowed).
        t: time, > 0.
        alpha: diffusion exponent, > 0.
        a: time-scale factor multiplying t in the symbol.

    Returns:
        Z(x, t), which depends on x only through |x|_p.
    """
    if t <= 0:
        raise ParameterError(f"t must be > 0, got {t}")
    if alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    if a <= 0:
        raise ParameterError(f"a must be > 0, got {a}")
    p = norm_value.p
    te = a * t
    ln_p = math.log(p)

    if norm_value.is_zero:
        # Start above the scale where the symbol kills every term.
        gamma = max(1, math.ceil(math.log(746.0 / te) / (alpha * ln_p)) + 1)
        boundary = 0.0
    else:
        m = norm_value.exponent
        gamma = m
        boundary = float(p) ** m * math.exp(-te * float(p) ** (alpha * (m + 1)))

    acc, comp = 0.0, 0.0
    one_minus = 1.0 - 1.0 / p
    while True:
        weight = float(p) ** gamma
        term = weight * one_minus * math.exp(-te * float(p) ** (alpha * gamma))
        acc, comp = _kahan_add(acc, comp, term)
        if weight < 1e-18 * max(1.0, abs(acc)):
            # Remaining spheres sum to p^{gamma-1} up to O(te * p^{gamma(1+alpha)}).
            acc, comp = _kahan_add(acc, comp, float(p) ** (gamma - 1))
            break
        gamma -= 1
    return acc - boundary


def heat_kernel_c(p: int, t: float, alpha: float, series_terms: int = 80) -> float:
    """The mass-restoring constant c(t) of the unit-ball heat kernel.

    c(t) = 1 - (1 - 1/p) e^{lambda t} sum_n (-1)^n t^n / (n! (1 - p^{-n alpha - 1})),
    summed with compensated summation until terms fall below 1e-14 of the
    partial sum, with a hard cap of 200 terms.

    Raises:
        AccuracyError: if the factorial tail bound cannot be brought below
            1e-10 within the allowed number of terms.
    """
    if series_terms < 1:
        raise ParameterError("series_terms must be >= 1")
    lam = vladimirov_lambda(p, alpha)
    cap = min(series_terms, 200)
    acc, comp = 0.0, 0.0
    base = 1.0  # t^n / n!
    n = 0
    while n < cap:
        term = base / (1.0 - float(p) ** (-n * alpha - 1.0))
        if n % 2 == 1:
            term = -term
        acc, comp = _kahan_add(acc, comp, term)
        n += 1
        base *= t / n
        if n > t and abs(base) <= 1e-14 * abs(acc):
            break
    # Tail of sum_{k >= n} t^k/k! against the geometric envelope.
    if n + 1 <= t:
        raise AccuracyError(
            f"{n} terms cannot bound the tail for t = {t}",
            tail_estimate=math.inf,
        )
    tail = base / (1.0 - t / (n + 1)) * p / (p - 1)
    if abs(tail) >= 1e-10:
        raise AccuracyError(
            f"series tail {abs(tail):.3e} >= 1e-10 after {n} terms",
            tail_estimate=abs(tail),
        )
    return 1.0 - (1.0 - 1.0 / p) * math.exp(lam * t) * acc


def heat_kernel_Z0(norm_value: PadicNormValue, t: float, alpha: float,
                   a: float = 1.0, series_terms: int = 80) -> float:
    """The unit-ball heat kernel Z_0(x, t) = e^{lambda t} Z(x, t) + c(t).

    With the default a = 1 this is the transition density of the Markov
    semigroup generated by lambda*I - D_0^alpha; a general a rescales time
    (Z_0 at time a*t), keeping unit mass.

    Returns:
        A value >= -1e-8 (the kernel is nonnegative up to roundoff).
    """
    p = norm_value.p
    te = a * t
    lam = vladimirov_lambda(p, alpha)
    z = heat_kernel_Z(norm_value, t, alpha, a=a)
    c = heat_kernel_c(p, te, alpha, series_terms=series_terms)
    out = math.exp(lam * te) * z + c
    if out < -1e-8:
        raise ValidationError(
            f"heat kernel evaluated to {out:.3e} < -1e-8; series failure"
        )
    return out


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

CSV_HEADER = "index,norm_exponent,value"


def write_grid_csv(gf: GridFunction, path) -> None:
    """Write one row per leaf in increasing index order.

    The norm_exponent column holds e with |i|_p = p^{-e}; the zero leaf is
    written with the sentinel exponent l (its norm is 0 by convention).
    """
    vals = leaf_valuations(gf.params)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for i, v in enumerate(gf.values):
            fh.write(f"{i},{vals[i]},{v:.17g}\n")


def _params_from_size(n: int) -> TreeParams:
    if n < 2:
        raise ValidationError(f"cannot infer (p, l) from {n} rows")
    p = 2
    while n % p != 0:
        p += 1
    l = 0
    m = n
    while m % p == 0:
        m //= p
        l += 1
    if m != 1:
        raise ValidationError(f"{n} rows is not a prime power")
    return TreeParams(p, l)


def read_grid_csv(path) -> GridFunction:
    """Read the CSV format written by `write_grid_csv`."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValidationError(f"unexpected CSV header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    params = _params_from_size(len(rows))
    vals = np.empty(len(rows))
    expected = leaf_valuations(params)
    for idx, (i_s, e_s, v_s) in enumerate(rows):
        if int(i_s) != idx or int(e_s) != expected[idx]:
            raise ValidationError(f"row {idx} has inconsistent index metadata")
        vals[idx] = float(v_s)
    return GridFunction(params, vals)
