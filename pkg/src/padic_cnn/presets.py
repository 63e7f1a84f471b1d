"""Embedded experiment presets and the closed-form kernel-spec format.

Run configurations are plain JSON documents (schema 1).  Kernels and
inputs are named by closed-form specs instead of value dumps:

    {"type": "omega", "scale_exp": r}        indicator of |x|_p <= p^{-r}
    {"type": "radial_expr", "expr": "..."}   expression in n = |x|_p
    {"type": "radial_piecewise", "pieces": [
        {"if_norm_le_exp": k, "expr": "..."}, ..., {"expr": "..."}]}
    {"type": "const", "value": c}
    {"type": "scale", "coeff": c, "of": {...}}
    {"type": "sum", "terms": [{...}, ...]}

Inputs (leaf functions) additionally accept:

    {"type": "monna_expr", "expr": "..."}    expression in m = Monna(x)
    {"type": "values", "values": [...]}      explicit per-leaf vector

Expressions use a restricted arithmetic grammar with sin, cos, tan,
exp, log, sqrt, abs, and the constants pi and e; no other names are
evaluated.  The three desk experiments ship as embedded presets:
``edge1d_p3l5``, ``delay_p2l5``, and ``denoise_a075``.
"""

from __future__ import annotations

import ast
import copy
import math

import numpy as np

from .dynamics import StepperConfig
from .errors import ConfigError
from .funcspace import GridFunction, RadialKernel, sample_radial
from .networks import ContinuousCnn, DelayRdCnn, DenoiseRdCnn, EdgeCnn
from .ptree import TreeParams, leaf_norms, monna_vector

SCHEMA_VERSION = 1

_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}

_BIN_OPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
    ast.Mod: lambda a, b: a % b,
}


def eval_expr(expr: str, variables: dict[str, float]) -> float:
    """Evaluate a restricted arithmetic expression.

    Only numbers, the declared variables, pi/e, the whitelisted
    functions, and +-*/**% are accepted; anything else raises ConfigError.
    """

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise ConfigError(f"non-numeric constant {node.value!r}")
        if isinstance(node, ast.Name):
            if node.id in variables:
                return float(variables[node.id])
            if node.id in _CONSTANTS:
                return _CONSTANTS[node.id]
            raise ConfigError(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
            return _BIN_OPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -walk(node.operand)
            if isinstance(node.op, ast.UAdd):
                return walk(node.operand)
        if isinstance(node, ast.Call):
            if isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS:
                if node.keywords:
                    raise ConfigError("keyword arguments are not allowed")
                return _FUNCTIONS[node.func.id](*[walk(a) for a in node.args])
            raise ConfigError("only whitelisted functions may be called")
        raise ConfigError(f"unsupported syntax in expression: {ast.dump(node)}")

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"invalid expression {expr!r}: {exc}") from exc
    return walk(tree)


# ---------------------------------------------------------------------------
# Kernel and input resolution
# ---------------------------------------------------------------------------


def _radial_profile_fn(spec: dict, params: TreeParams):
    kind = spec.get("type")
    if kind == "omega":
        threshold = float(params.p) ** (-int(spec["scale_exp"]))
        return lambda n: 1.0 if n <= threshold else 0.0
    if kind == "radial_expr":
        expr = spec["expr"]
        return lambda n: eval_expr(expr, {"n": n})
    if kind == "radial_piecewise":
        pieces = spec["pieces"]

        def piecewise(n):
            for piece in pieces:
                if "if_norm_le_exp" in piece:
                    if n <= float(params.p) ** (-int(piece["if_norm_le_exp"])):
                        return eval_expr(piece["expr"], {"n": n})
                else:
                    return eval_expr(piece["expr"], {"n": n})
            raise ConfigError("piecewise spec has no default piece")

        return piecewise
    if kind == "const":
        value = float(spec["value"])
        return lambda n: value
    if kind == "scale":
        inner = _radial_profile_fn(spec["of"], params)
        coeff = float(spec["coeff"])
        return lambda n: coeff * inner(n)
    if kind == "sum":
        inners = [_radial_profile_fn(t, params) for t in spec["terms"]]
        return lambda n: sum(f(n) for f in inners)
    raise ConfigError(f"unknown radial kernel spec type {kind!r}")


def resolve_radial(spec: dict, params: TreeParams) -> RadialKernel:
    """Build a RadialKernel from its closed-form spec."""
    if not isinstance(spec, dict):
        raise ConfigError(f"kernel spec must be an object, got {spec!r}")
    return sample_radial(_radial_profile_fn(spec, params), params)


def resolve_input(spec: dict, params: TreeParams) -> GridFunction:
    """Build a leaf function from its spec (radial, Monna, or explicit)."""
    if not isinstance(spec, dict):
        raise ConfigError(f"input spec must be an object, got {spec!r}")
    kind = spec.get("type")
    if kind == "monna_expr":
        expr = spec["expr"]
        monna = monna_vector(params)
        norms = leaf_norms(params)
        values = np.array(
            [
                eval_expr(expr, {"m": m, "n": n})
                for m, n in zip(monna, norms)
            ]
        )
        return GridFunction(params, values)
    if kind == "values":
        values = np.asarray(spec["values"], dtype=np.float64)
        if values.shape != (params.n_leaves,):
            raise ConfigError(
                f"explicit input needs {params.n_leaves} values, "
                f"got {values.shape}"
            )
        return GridFunction(params, values)
    return resolve_radial(spec, params).as_grid()


def resolve_history(spec: dict, params: TreeParams):
    """Build the delay history function s -> GridFunction from its spec."""
    kind = spec.get("type")
    if kind == "separable":
        space = resolve_input(spec["space"], params).values
        time_expr = spec["time_expr"]

        def history(s: float) -> GridFunction:
            return GridFunction(params, space * eval_expr(time_expr, {"s": s}))

        return history
    if kind == "const":
        value = float(spec["value"])
        return lambda s: GridFunction.constant(params, value)
    raise ConfigError(f"unknown history spec type {kind!r}")


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_OMEGA_EVERYWHERE = {"type": "omega", "scale_exp": 0}

PRESETS: dict[str, dict] = {
    # One-dimensional edge detector on the ternary depth-5 tree.
    "edge1d_p3l5": {
        "schema": SCHEMA_VERSION,
        "preset": "edge1d_p3l5",
        "kind": "continuous",
        "p": 3,
        "l": 5,
        "scheme": "rk4",
        "dt": 0.05,
        "t_end": 25.0,
        "stride": 1,
        "network": {
            "A": {"type": "scale", "coeff": 2.0,
                  "of": {"type": "omega", "scale_exp": 5}},
            "B": {"type": "scale", "coeff": 243.0,
                  "of": {"type": "sum", "terms": [
                      {"type": "scale", "coeff": 27.0,
                       "of": {"type": "omega", "scale_exp": 5}},
                      {"type": "scale", "coeff": -1.0,
                       "of": {"type": "omega", "scale_exp": 3}},
                  ]}},
            "U": {"type": "monna_expr", "expr": "cos(6*pi*m)"},
            "Z": {"type": "scale", "coeff": -1.0,
                  "of": {"type": "omega", "scale_exp": 5}},
            "X0": {"type": "const", "value": 0.0},
        },
    },
    # Reaction-diffusion network with delay on the binary depth-5 tree.
    "delay_p2l5": {
        "schema": SCHEMA_VERSION,
        "preset": "delay_p2l5",
        "kind": "delay",
        "p": 2,
        "l": 5,
        "scheme": "rk4",
        "dt": 0.05,
        "t_end": 30.0,
        "stride": 1,
        "lambda": 0.5,
        "r": 4.0,
        "network": {
            "J": {"type": "scale", "coeff": 4.0,
                  "of": {"type": "omega", "scale_exp": 2}},
            "A": {"type": "radial_expr", "expr": "-4*sin(pi*(1-n))"},
            "B": {"type": "radial_expr", "expr": "cos(pi*(1-n))"},
            "U": {"type": "radial_expr", "expr": "sin(pi*(1-n))"},
            "Z": {"type": "scale", "coeff": -0.15, "of": _OMEGA_EVERYWHERE},
            "history": {
                "type": "separable",
                "time_expr": "sin(pi*s)",
                "space": {"type": "radial_piecewise", "pieces": [
                    {"if_norm_le_exp": 3, "expr": "cos(pi*n)"},
                    {"expr": "exp(-n)"},
                ]},
            },
        },
    },
    # Image denoiser: fractional diffusion plus saturating reaction.
    "denoise_a075": {
        "schema": SCHEMA_VERSION,
        "preset": "denoise_a075",
        "kind": "denoise",
        "p": 2,
        "l": 10,
        "scheme": "rk4",
        "dt": 0.01,
        "t_end": 3.0,
        "stride": 10,
        "mu": 3.0,
        "alpha": 0.75,
        "network": {
            "B": {"type": "sum", "terms": [
                {"type": "omega", "scale_exp": 2},
                {"type": "scale", "coeff": -1.0, "of": _OMEGA_EVERYWHERE},
            ]},
        },
    },
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; available: {known}")
    return copy.deepcopy(PRESETS[name])


def validate_config(config: dict) -> dict:
    if not isinstance(config, dict):
        raise ConfigError("run config must be a JSON object")
    if config.get("schema") != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported config schema {config.get('schema')!r}; "
            f"expected {SCHEMA_VERSION}"
        )
    for key in ("kind", "p", "l"):
        if key not in config:
            raise ConfigError(f"config is missing the {key!r} field")
    return config


def tree_params(config: dict) -> TreeParams:
    return TreeParams(int(config["p"]), int(config["l"]))


def stepper_config(config: dict) -> StepperConfig:
    return StepperConfig(
        scheme=config.get("scheme", "rk4"),
        dt=float(config["dt"]),
        t_end=float(config["t_end"]),
        stride=int(config.get("stride", 1)),
    )


def build_continuous(config: dict):
    """(network, X0) for a kind = "continuous" config."""
    params = tree_params(config)
    net_spec = config["network"]
    net = ContinuousCnn(
        A=resolve_radial(net_spec["A"], params) if net_spec.get("A") else None,
        B=resolve_radial(net_spec["B"], params) if net_spec.get("B") else None,
        U=resolve_input(net_spec["U"], params),
        Z=resolve_input(net_spec["Z"], params),
    )
    x0 = resolve_input(net_spec.get("X0", {"type": "const", "value": 0.0}), params)
    return net, x0


def build_delay(config: dict) -> DelayRdCnn:
    params = tree_params(config)
    net_spec = config["network"]
    return DelayRdCnn(
        J=resolve_radial(net_spec["J"], params),
        lam=float(config["lambda"]),
        A=resolve_radial(net_spec["A"], params) if net_spec.get("A") else None,
        B=resolve_radial(net_spec["B"], params) if net_spec.get("B") else None,
        U=resolve_input(net_spec["U"], params),
        Z=resolve_input(net_spec["Z"], params),
        r=float(config["r"]),
        history=resolve_history(net_spec["history"], params),
    )


def build_edge(config: dict) -> EdgeCnn:
    params = tree_params(config)
    net_spec = config["network"]
    return EdgeCnn(
        a=float(config["a"]),
        B=resolve_radial(net_spec["B"], params) if net_spec.get("B") else None,
        U=resolve_input(net_spec["U"], params),
        Z=resolve_input(net_spec["Z"], params),
    )


def build_denoise(config: dict, x0: GridFunction) -> DenoiseRdCnn:
    params = tree_params(config)
    if x0.params != params:
        raise ConfigError(
            f"image grid has parameters {x0.params}, config says {params}"
        )
    return DenoiseRdCnn(
        mu=float(config["mu"]),
        alpha=float(config["alpha"]),
        B=resolve_radial(config["network"]["B"], params),
        X0=x0,
    )
