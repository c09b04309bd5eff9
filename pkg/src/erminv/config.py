"""Experiment configuration: TOML (or JSON mirror) loading and validation.

Every run writes the fully resolved configuration into its summary so
outputs are self-describing; all validation happens before any compute.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import ConfigError
from .indexing import AxisCosSpace, CoefficientVector, DiskSpace, MultiIndex, TrigSpace
from .models import TruthSpec, validate_density_truth
from .operators import convolution_operator, radon2d_operator, tomography2d_operator
from .spaces import Ellipsoid

__all__ = ["load_config", "resolve", "ResolvedConfig"]

_MODEL_KINDS = {"white-noise", "density", "tomography"}
_OPERATOR_KINDS = {"convolution", "radon2d", "tomography2d"}
_ESTIMATOR_KINDS = {"delta-net", "dense", "additive"}


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from err
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: invalid TOML: {err}") from err


def _get(table: dict, key: str, default=None, required=False, section=""):
    if key not in table:
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    return table[key]


def _parse_overrides(entries, parse_value=float):
    out = {}
    for item in entries or []:
        try:
            idx = MultiIndex.from_token(str(item["index"]))
            out[idx] = parse_value(item["value"])
        except (KeyError, ValueError) as err:
            raise ConfigError(f"malformed override entry {item!r}: {err}") from err
    return out


class ResolvedConfig:
    """Validated configuration with constructed model objects."""

    def __init__(self, raw: dict):
        self.raw = raw
        model = raw.get("model", {})
        self.model_kind = _get(model, "kind", required=True, section="model")
        if self.model_kind not in _MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {sorted(_MODEL_KINDS)}")

        op_table = raw.get("operator", {})
        self.operator_kind = _get(op_table, "kind", required=True, section="operator")
        if self.operator_kind not in _OPERATOR_KINDS:
            raise ConfigError(f"operator.kind must be one of {sorted(_OPERATOR_KINDS)}")

        cls = raw.get("class", {})
        self.s = float(_get(cls, "s", required=True, section="class"))
        self.L = float(_get(cls, "L", required=True, section="class"))
        self.d = int(_get(cls, "d", 1))
        self.C1 = float(_get(cls, "C1", 1.0))
        self.C2 = float(_get(cls, "C2", 1.0))
        self.a0 = float(_get(cls, "a0", 1.0))

        if self.operator_kind == "convolution":
            if self.model_kind == "tomography":
                raise ConfigError("tomography model needs the tomography2d operator")
            q = float(_get(op_table, "q", required=True, section="operator"))
            overrides = _parse_overrides(op_table.get("overrides"))
            self.operator = convolution_operator(
                self.d, q, scale=float(_get(op_table, "scale", 1.0)),
                b0=float(_get(op_table, "b0", 1.0)), overrides=overrides or None,
            )
            space = TrigSpace(self.d)
        else:
            if self.d != 2:
                raise ConfigError("Radon operators require class.d = 2")
            if op_table.get("overrides"):
                raise ConfigError("singular-value overrides apply to convolution filters only")
            self.operator = (
                radon2d_operator() if self.operator_kind == "radon2d" else tomography2d_operator()
            )
            space = DiskSpace()
        if self.model_kind == "tomography" and self.operator_kind != "tomography2d":
            raise ConfigError("tomography model needs operator.kind = 'tomography2d'")

        self.space = space
        self.ellipsoid = Ellipsoid(
            space, s=self.s, L=self.L, C1=self.C1, C2=self.C2, a0=self.a0
        )

        est = raw.get("estimator", {})
        self.estimator_kind = _get(est, "kind", "dense")
        if self.estimator_kind not in _ESTIMATOR_KINDS:
            raise ConfigError(f"estimator.kind must be one of {sorted(_ESTIMATOR_KINDS)}")
        self.epsilon = float(_get(est, "epsilon", 1e-9))
        self.delta_coef = float(_get(est, "delta_coef", 1.0))
        self.fixed_delta = est.get("delta")
        self.net_cap = int(_get(est, "net_cap", 2**24))
        self.components = est.get("components", [])
        if self.estimator_kind == "additive":
            self._resolve_additive()

        exp = raw.get("experiment", {})
        self.n = int(_get(exp, "n", 1024))
        self.ns = [int(v) for v in _get(exp, "ns", [2**k for k in range(8, 17)])]
        self.reps = int(_get(exp, "reps", 100))
        self.master_seed = int(_get(exp, "master_seed", 0))
        self.tolerance = float(_get(exp, "tolerance", 0.15))
        if self.n < 1 or any(n < 1 for n in self.ns):
            raise ConfigError("sample sizes must be positive")

        ns_table = raw.get("net_stats", {})
        self.net_deltas = [float(v) for v in _get(ns_table, "deltas", [0.4, 0.2, 0.1, 0.05])]
        self.net_stats_packing = bool(_get(ns_table, "packing", True))
        self.packing_cap = int(_get(ns_table, "packing_cap", 2**12))

        bound = raw.get("bound", {})
        self.bound_C_tau = float(_get(bound, "C_tau", 32.0))
        self.bound_xi = float(_get(bound, "xi", 0.26))

        self.output_dir = raw.get("output", {}).get("dir", "out")
        self.truth = self._resolve_truth(raw.get("truth", {}))

    # -- truth ---------------------------------------------------------------

    def _resolve_truth(self, table: dict) -> TruthSpec:
        law = _get(table, "law", "power")
        margin = float(_get(table, "margin", 0.2))
        density_mode = self.model_kind in ("density", "tomography")
        explicit = table.get("coefficients")
        entries: dict = {}
        if explicit:
            entries = _parse_overrides(explicit)
        elif law == "zero":
            entries = {}
        elif law == "uniform":
            if not density_mode:
                raise ConfigError("truth.law = 'uniform' only makes sense in density modes")
        elif law == "power":
            exponent = float(_get(table, "exponent", self.s + 1.01))
            amplitude = float(_get(table, "amplitude", 0.5))
            max_level = int(_get(table, "max_level", 50))
            if not 0.0 < amplitude < 1.0:
                raise ConfigError("truth.amplitude must lie in (0, 1)")
            entries = self._power_law_entries(exponent, amplitude, max_level, density_mode, margin)
        else:
            raise ConfigError(f"unknown truth.law {law!r}")

        if density_mode:
            if self.space.tag == "disk":
                truth = TruthSpec(
                    CoefficientVector(entries, self.space.tag), self.ellipsoid,
                    positivity_margin=margin, uniform_base=True,
                )
            else:
                entries[MultiIndex((0,) * self.d, (0,) * self.d)] = 1.0
                truth = TruthSpec(
                    CoefficientVector(entries, self.space.tag), self.ellipsoid,
                    positivity_margin=margin,
                )
            validate_density_truth(truth, self.operator)
            return truth
        return TruthSpec(CoefficientVector(entries, self.space.tag), self.ellipsoid)

    def _power_law_entries(self, exponent, amplitude, max_level, density_mode, margin):
        indices = [i for i in self.space.indices_up_to(max_level) if i.total >= 1]
        if self.space.tag.startswith("trig"):
            # cosine components only: keeps density-mode truths simple
            indices = [i for i in indices if all(k == 0 for k in i.parity)]
        raw = {i: i.total ** (-exponent) for i in indices}
        wsq = sum(self.ellipsoid.weight(i) ** 2 * v * v for i, v in raw.items())
        target = amplitude * self.L
        scale = target / math.sqrt(wsq)
        if density_mode:
            # keep the perturbation's sup norm below 1 - margin
            sup = sum(abs(v) for v in raw.values()) * math.sqrt(2.0) ** self.d * scale
            if sup > 1.0 - margin:
                scale *= (1.0 - margin) / sup
        return {i: v * scale for i, v in raw.items()}

    # -- additive ------------------------------------------------------------

    def _resolve_additive(self):
        if self.operator_kind != "convolution":
            raise ConfigError("additive estimation is defined for the convolution model")
        if len(self.components) < 2:
            raise ConfigError("additive estimator needs at least 2 components")
        if len(self.components) > self.d:
            raise ConfigError("more additive components than coordinate axes")
        self.additive = []
        for i, comp in enumerate(self.components):
            axis = int(_get(comp, "axis", i))
            s = float(_get(comp, "s", required=True, section=f"components[{i}]"))
            L = float(_get(comp, "L", required=True, section=f"components[{i}]"))
            q = float(_get(comp, "q", required=True, section=f"components[{i}]"))
            coef = float(_get(comp, "delta_coef", 1.0))
            amplitude = float(_get(comp, "amplitude", 0.5))
            exponent = float(_get(comp, "exponent", s + 1.01))
            max_level = int(_get(comp, "max_level", 50))
            e = Ellipsoid(AxisCosSpace(axis, self.d), s=s, L=L)
            op = convolution_operator(self.d, q)
            self.additive.append(
                {
                    "axis": axis, "s": s, "L": L, "q": q, "delta_coef": coef,
                    "amplitude": amplitude, "exponent": exponent,
                    "max_level": max_level, "ellipsoid": e, "operator": op,
                }
            )

    def additive_truths(self):
        out = []
        for comp in self.additive:
            e = comp["ellipsoid"]
            indices = e.space.indices_up_to(comp["max_level"])
            raw = {i: i.total ** (-comp["exponent"]) for i in indices}
            wsq = sum(e.weight(i) ** 2 * v * v for i, v in raw.items())
            scale = comp["amplitude"] * comp["L"] / math.sqrt(wsq)
            cv = CoefficientVector({i: v * scale for i, v in raw.items()}, e.space.tag)
            out.append(TruthSpec(cv, e))
        return out


def resolve(raw: dict) -> ResolvedConfig:
    return ResolvedConfig(raw)
