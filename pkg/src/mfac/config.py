"""Experiment configuration files.

Plain INI text with five fixed sections ([plant], [controller],
[estimator], [simulation], [output]); unknown sections or keys are
rejected.  Serialization is canonical (fixed section/key order, shortest
exact float text), so parse -> serialize -> parse is a fixed point.
A bundled ``example1`` preset carries the benchmark experiment settings.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .controller import BASELINE_NORMS, VARIANTS, ControllerConfig
from .estimator import EstimatorConfig
from .ffdl import Dimensions, Pjm
from .simulation import (
    ENGINES,
    Benchmark10Spec,
    ConstantReference,
    Example1Reference,
    LoopConfig,
    LtiSpec,
)

__all__ = ["ConfigError", "ExperimentConfig", "resolve_config_path"]


class ConfigError(ValueError):
    """Unusable experiment configuration (parse or validation failure)."""


_SECTIONS = ("plant", "controller", "estimator", "simulation", "output")
_KEYS = {
    "plant": ("name", "y2_typo_fix", "y2_cross_denominator",
              "a_blocks", "b_blocks", "y_init", "u_init"),
    "controller": ("variant", "lambda", "rho", "baseline_norm"),
    "estimator": ("mu", "eta", "reset_enabled", "reset_epsilon", "phi_init"),
    "simulation": ("m", "l_y", "l_u", "horizon", "reference",
                   "reference_value", "engine"),
    "output": ("directory", "svg"),
}


def _fmt_num(x: float) -> str:
    """Shortest exact text for a float; integral values lose the point."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _fmt_vector(v) -> str:
    return " ".join(_fmt_num(x) for x in np.asarray(v, dtype=float))


def _fmt_matrix(mat) -> str:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    return " ; ".join(_fmt_vector(row) for row in mat)


def _fmt_blocks(blocks) -> str:
    return " | ".join(_fmt_matrix(b) for b in blocks)


def _parse_vector(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse vector from {text!r}") from exc


def _parse_matrix(text: str, what: str) -> np.ndarray:
    rows = [_parse_vector(r, what) for r in text.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{what}: ragged matrix rows in {text!r}")
    return np.vstack(rows)


def _parse_blocks(text: str, what: str) -> tuple:
    return tuple(_parse_matrix(b, what) for b in text.split("|"))


def _parse_bool(text: str, what: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected a boolean, got {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment file: a LoopConfig plus output policy."""

    loop: LoopConfig
    out_dir: str = "out"
    svg: bool = False

    # -- construction ------------------------------------------------------

    @classmethod
    def from_string(cls, text: str, origin: str = "<string>") -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=origin)
        except configparser.Error as exc:
            raise ConfigError(f"{origin}: {exc}") from exc

        for section in parser.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"{origin}: unknown section [{section}]")
            for key in parser[section]:
                if key not in _KEYS[section]:
                    raise ConfigError(f"{origin}: unknown key {key!r} in [{section}]")
        for section in _SECTIONS:
            if section not in parser:
                raise ConfigError(f"{origin}: missing section [{section}]")

        def get(section, key, default=None):
            if parser.has_option(section, key):
                return parser.get(section, key)
            if default is None:
                raise ConfigError(f"{origin}: [{section}] needs key {key!r}")
            return default

        try:
            m = int(get("simulation", "m"))
            l_y = int(get("simulation", "l_y"))
            l_u = int(get("simulation", "l_u"))
            horizon = int(get("simulation", "horizon"))
        except ValueError as exc:
            raise ConfigError(f"{origin}: {exc}") from exc
        try:
            dims = Dimensions(m, l_y, l_u)
        except ValueError as exc:
            raise ConfigError(f"{origin}: {exc}") from exc

        plant_name = get("plant", "name")
        allowed = {
            "benchmark10": ("name", "y2_typo_fix", "y2_cross_denominator"),
            "lti": ("name", "a_blocks", "b_blocks", "y_init", "u_init"),
        }.get(plant_name)
        if allowed is None:
            raise ConfigError(f"{origin}: unknown plant {plant_name!r}")
        for key in parser["plant"]:
            if key not in allowed:
                raise ConfigError(
                    f"{origin}: key {key!r} does not apply to plant {plant_name!r}")
        if plant_name == "benchmark10":
            plant = Benchmark10Spec(
                y2_typo_fix=_parse_bool(get("plant", "y2_typo_fix", "false"),
                                        "plant.y2_typo_fix"),
                y2_cross_denominator=_parse_bool(
                    get("plant", "y2_cross_denominator", "false"),
                    "plant.y2_cross_denominator"),
            )
        else:
            a_text = parser.get("plant", "a_blocks", fallback="")
            plant = LtiSpec(
                a_blocks=tuple(tuple(map(tuple, b)) for b in
                               (_parse_blocks(a_text, "plant.a_blocks") if a_text.strip() else ())),
                b_blocks=tuple(tuple(map(tuple, b)) for b in
                               _parse_blocks(get("plant", "b_blocks"), "plant.b_blocks")),
                y_init=tuple(_parse_vector(parser.get("plant", "y_init", fallback=""),
                                           "plant.y_init"))
                if parser.has_option("plant", "y_init") else (),
                u_init=tuple(_parse_vector(parser.get("plant", "u_init", fallback=""),
                                           "plant.u_init"))
                if parser.has_option("plant", "u_init") else (),
            )

        ref_name = get("simulation", "reference")
        if ref_name == "example1":
            reference = Example1Reference()
        elif ref_name == "constant":
            values = _parse_vector(get("simulation", "reference_value"),
                                   "simulation.reference_value")
            reference = ConstantReference(values=tuple(values))
        else:
            raise ConfigError(f"{origin}: unknown reference {ref_name!r}")

        engine = get("simulation", "engine", "auto")
        if engine not in ENGINES:
            raise ConfigError(f"{origin}: unknown engine {engine!r}")

        variant = get("controller", "variant", "proposed")
        if variant not in VARIANTS:
            raise ConfigError(f"{origin}: unknown controller variant {variant!r}")
        norm = get("controller", "baseline_norm", "spectral")
        if norm not in BASELINE_NORMS:
            raise ConfigError(f"{origin}: unknown baseline_norm {norm!r}")
        try:
            controller = ControllerConfig(
                lam=float(get("controller", "lambda")),
                rho=tuple(_parse_vector(get("controller", "rho"), "controller.rho")),
                variant=variant,
                baseline_norm=norm,
            )
            phi_init = _parse_matrix(get("estimator", "phi_init"), "estimator.phi_init")
            estimator = EstimatorConfig(
                mu=float(get("estimator", "mu")),
                eta=float(get("estimator", "eta")),
                phi_init=Pjm(dims, phi_init),
                reset_enabled=_parse_bool(get("estimator", "reset_enabled", "true"),
                                          "estimator.reset_enabled"),
                reset_epsilon=float(get("estimator", "reset_epsilon", "1e-5")),
            )
            loop = LoopConfig(dims=dims, estimator=estimator, controller=controller,
                              plant=plant, reference=reference, horizon=horizon,
                              engine=engine)
        except ValueError as exc:
            raise ConfigError(f"{origin}: {exc}") from exc

        return cls(
            loop=loop,
            out_dir=get("output", "directory", "out"),
            svg=_parse_bool(get("output", "svg", "false"), "output.svg"),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_string(text, origin=str(path))

    # -- serialization -----------------------------------------------------

    def to_string(self) -> str:
        loop = self.loop
        out = io.StringIO()

        out.write("[plant]\n")
        out.write(f"name = {loop.plant.name}\n")
        if isinstance(loop.plant, Benchmark10Spec):
            out.write(f"y2_typo_fix = {str(loop.plant.y2_typo_fix).lower()}\n")
            out.write(f"y2_cross_denominator = "
                      f"{str(loop.plant.y2_cross_denominator).lower()}\n")
        elif isinstance(loop.plant, LtiSpec):
            if loop.plant.a_blocks:
                out.write(f"a_blocks = {_fmt_blocks(loop.plant.a_blocks)}\n")
            out.write(f"b_blocks = {_fmt_blocks(loop.plant.b_blocks)}\n")
            if loop.plant.y_init:
                out.write(f"y_init = {_fmt_vector(loop.plant.y_init)}\n")
            if loop.plant.u_init:
                out.write(f"u_init = {_fmt_vector(loop.plant.u_init)}\n")
        else:
            raise ConfigError(f"plant {loop.plant.name!r} has no file form")

        out.write("\n[controller]\n")
        out.write(f"variant = {loop.controller.variant}\n")
        out.write(f"lambda = {_fmt_num(loop.controller.lam)}\n")
        out.write(f"rho = {_fmt_vector(loop.controller.rho)}\n")
        out.write(f"baseline_norm = {loop.controller.baseline_norm}\n")

        est = loop.estimator
        out.write("\n[estimator]\n")
        out.write(f"mu = {_fmt_num(est.mu)}\n")
        out.write(f"eta = {_fmt_num(est.eta)}\n")
        out.write(f"reset_enabled = {str(est.reset_enabled).lower()}\n")
        out.write(f"reset_epsilon = {_fmt_num(est.reset_epsilon)}\n")
        out.write(f"phi_init = {_fmt_matrix(est.phi_init.flat)}\n")

        out.write("\n[simulation]\n")
        out.write(f"m = {loop.dims.m}\n")
        out.write(f"l_y = {loop.dims.l_y}\n")
        out.write(f"l_u = {loop.dims.l_u}\n")
        out.write(f"horizon = {loop.horizon}\n")
        out.write(f"reference = {loop.reference.name}\n")
        if isinstance(loop.reference, ConstantReference):
            out.write(f"reference_value = {_fmt_vector(loop.reference.values)}\n")
        out.write(f"engine = {loop.engine}\n")

        out.write("\n[output]\n")
        out.write(f"directory = {self.out_dir}\n")
        out.write(f"svg = {str(self.svg).lower()}\n")
        return out.getvalue()

    def with_variant(self, variant: str) -> "ExperimentConfig":
        return replace(self, loop=replace(
            self.loop, controller=replace(self.loop.controller, variant=variant)))


def resolve_config_path(name_or_path) -> Path:
    """Locate a config: an existing file, or a bundled preset by name."""
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name.removesuffix(".cfg")
    preset = resources.files("mfac").joinpath("presets", f"{stem}.cfg")
    if preset.is_file():
        return Path(str(preset))
    raise ConfigError(f"config file not found: {name_or_path}")
