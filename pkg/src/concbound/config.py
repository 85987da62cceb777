"""Run configuration: a flat ``key = value`` document with dotted sections.

Example::

    command = verify
    seed = 42
    replications = 20000
    output.format = jsonl
    ensemble.family = symmetric_pareto
    ensemble.alpha = 4.5
    ensemble.n = 100
    ensemble.N = 50
    check.1.kind = moment
    check.1.p = 4
    check.1.l = 1
    check.1.eps = 1

Blank lines and lines starting with ``#`` are ignored. Singleton sections
are ``output``, ``ensemble``, ``simulate``, ``grid`` and ``combinatorics``;
``request``, ``check`` and ``target`` are indexed lists (``request.<i>.key``)
ordered by index. List values are comma separated. :func:`dump_config`
writes the canonical form, which :func:`parse_config` reads back to an
equal RunConfig.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace

from .bounds import BoundFamily, BoundRequest, Direction, MomentEnvelopeSpec, ProcessScale
from .errors import ConcboundError, UsageError

COMMANDS = ("bound", "simulate", "verify", "combinatorics", "regimes")
FORMATS = ("csv", "jsonl")
CHECK_KINDS = ("moment", "truncation", "averaging", "mgf", "combinatorics")

_NEEDS_P_GE_L = {
    BoundFamily.MAIN_UPPER, BoundFamily.MAIN_LOWER, BoundFamily.TRUNCATED_UPPER, BoundFamily.TRUNCATED_LOWER,
    BoundFamily.SYMMETRIZATION, BoundFamily.FINITE_CLASS, BoundFamily.FINITE_CLASS_GENERAL,
    BoundFamily.BOUNDED_PART, BoundFamily.TRUNCATION_BIAS,
}


# ---------------------------------------------------------------- value codecs

def _to_int(text):
    try:
        f = float(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(text) if re.fullmatch(r"[+-]?\d+", text) else int(f)


def _to_float(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _to_str(text):
    if not text:
        raise ValueError("expected a non-empty string")
    return text


def _to_floats(text):
    return [_to_float(t.strip()) for t in text.split(",") if t.strip()]


def _to_ints(text):
    return [_to_int(t.strip()) for t in text.split(",") if t.strip()]


def format_value(v):
    """Shortest round-trip text for a config or output value."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(format_value(x) for x in v)
    return str(v)


def _opt(conv, default=None, required=False):
    return field(default=default, metadata={"conv": conv, "required": required})


def _lst(conv, default=()):
    return field(default_factory=lambda: list(default), metadata={"conv": conv, "required": False})


# ---------------------------------------------------------------- sections

@dataclass
class OutputSection:
    path: str | None = _opt(_to_str)
    format: str | None = _opt(_to_str)


@dataclass
class EnsembleSection:
    family: str = _opt(_to_str, "rademacher")
    n: int = _opt(_to_int, required=True)
    N: int = _opt(_to_int, required=True)
    dependence: str = _opt(_to_str, "iid-across-cells")
    low: float | None = _opt(_to_float)
    high: float | None = _opt(_to_float)
    alpha: float | None = _opt(_to_float)
    dof: float | None = _opt(_to_float)
    scale: float | None = _opt(_to_float)

    def build(self, seed):
        from .simulate import BoundedUniform, EnsembleConfig, Rademacher, StudentT, SymmetricPareto

        kind = self.family
        if kind == "rademacher":
            fam = Rademacher()
        elif kind == "bounded_uniform":
            fam = BoundedUniform(low=-1.0 if self.low is None else self.low,
                                 high=1.0 if self.high is None else self.high)
        elif kind == "symmetric_pareto":
            if self.alpha is None:
                raise UsageError("ensemble.alpha: required for symmetric_pareto")
            fam = SymmetricPareto(alpha=self.alpha, scale=1.0 if self.scale is None else self.scale)
        elif kind == "student_t":
            if self.dof is None:
                raise UsageError("ensemble.dof: required for student_t")
            fam = StudentT(dof=self.dof, scale=1.0 if self.scale is None else self.scale)
        else:
            raise UsageError(f"ensemble.family: unknown family {kind!r}")
        return EnsembleConfig(n=self.n, N=self.N, family=fam, dependence=self.dependence, seed=seed)


@dataclass
class RequestSection:
    family: str = _opt(_to_str, required=True)
    l: float | None = _opt(_to_float)
    eps: float | None = _opt(_to_float)
    K: float | None = _opt(_to_float)
    A: float | None = _opt(_to_float)
    x: float | None = _opt(_to_float)
    mean: float | None = _opt(_to_float)
    p: float = _opt(_to_float, 2.0)
    M: float = _opt(_to_float, 1.0)
    n: int = _opt(_to_int, required=True)
    N: int = _opt(_to_int, 1)
    sigma: float = _opt(_to_float, 0.0)
    sigma_trunc: float | None = _opt(_to_float)

    def build(self):
        return (
            BoundRequest(family=BoundFamily(self.family), l=self.l, eps=self.eps, K=self.K, A=self.A,
                         x=self.x, mean=self.mean),
            MomentEnvelopeSpec(p=self.p, M=self.M),
            ProcessScale(n=self.n, N=self.N, sigma=self.sigma, sigma_trunc=self.sigma_trunc),
        )


@dataclass
class CheckSection:
    kind: str = _opt(_to_str, required=True)
    p: float = _opt(_to_float, 2.0)
    l: float = _opt(_to_float, 1.0)
    eps: float = _opt(_to_float, 1.0)
    direction: str = _opt(_to_str, "upper")
    replications: int | None = _opt(_to_int)
    bound_scale: float = _opt(_to_float, 1.0)
    A: float = _opt(_to_float, 2.0)
    values: list = _lst(_to_floats, (-1.0, 1.0))
    probs: list = _lst(_to_floats, (0.5, 0.5))
    m_max: int = _opt(_to_int, 6)
    n_max: int = _opt(_to_int, 6)
    family: str = _opt(_to_str, "uniform")
    alpha: float | None = _opt(_to_float)
    n: int = _opt(_to_int, 10)


@dataclass
class TargetSection:
    l: float = _opt(_to_float, required=True)
    eps: float = _opt(_to_float, required=True)
    direction: str = _opt(_to_str, "upper")


@dataclass
class SimulateSection:
    K: float | None = _opt(_to_float)
    p: float | None = _opt(_to_float)


@dataclass
class GridSection:
    l: list = _lst(_to_floats)
    p: list = _lst(_to_floats)
    n: list = _lst(_to_ints)
    N: list = _lst(_to_ints)
    M: float = _opt(_to_float, 1.0)

    def rows(self):
        return [(l, p, n, N) for l in self.l for p in self.p for n in self.n for N in self.N]


@dataclass
class CombinatoricsSection:
    m_max: int = _opt(_to_int, 6)
    n_max: int = _opt(_to_int, 6)


_SINGLETONS = {
    "output": OutputSection,
    "ensemble": EnsembleSection,
    "simulate": SimulateSection,
    "grid": GridSection,
    "combinatorics": CombinatoricsSection,
}
_LISTS = {"request": RequestSection, "check": CheckSection, "target": TargetSection}
_LIST_ATTR = {"request": "requests", "check": "checks", "target": "targets"}


@dataclass
class RunConfig:
    command: str | None = _opt(_to_str)
    seed: int = _opt(_to_int, 0)
    replications: int = _opt(_to_int, 100_000)
    margin_sigmas: float = _opt(_to_float, 3.0)
    pilot_fraction: float = _opt(_to_float, 0.2)
    # multiplies every check's bound; values < 1 corrupt the suite on purpose
    bound_scale: float = _opt(_to_float, 1.0)
    output: OutputSection = field(default_factory=OutputSection)
    ensemble: EnsembleSection | None = None
    simulate: SimulateSection = field(default_factory=SimulateSection)
    grid: GridSection = field(default_factory=GridSection)
    combinatorics: CombinatoricsSection = field(default_factory=CombinatoricsSection)
    requests: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    targets: list = field(default_factory=list)

    def ensemble_config(self):
        section = self.ensemble or EnsembleSection(n=100, N=50)
        return section.build(self.seed)

    def output_format(self):
        if self.output.format:
            return self.output.format
        return "jsonl" if self.command in ("verify", "simulate") else "csv"


def _scalar_fields(cls):
    return [f for f in fields(cls) if "conv" in f.metadata]


def _fill(cls, raw, prefix):
    known = {f.name: f for f in _scalar_fields(cls)}
    values = {}
    for key, text in raw.items():
        f = known.get(key)
        if f is None:
            raise UsageError(f"{prefix}{key}: unknown key")
        try:
            values[key] = f.metadata["conv"](text)
        except ValueError as exc:
            raise UsageError(f"{prefix}{key}: {exc}") from None
    for f in known.values():
        if f.metadata["required"] and f.name not in values:
            raise UsageError(f"{prefix}{f.name}: missing required key")
    try:
        return cls(**values)
    except ConcboundError as exc:
        raise UsageError(f"{prefix.rstrip('.')}: {exc}") from None


_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_.]*)\s*=\s*(.*?)\s*$")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config document; raises UsageError naming the key."""
    top, singles, lists = {}, {}, {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        # '#' starts a comment anywhere; no value contains one
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _LINE.match(stripped)
        if not m:
            raise UsageError(f"line {lineno}: expected 'key = value'")
        key, value = m.group(1), m.group(2)
        if key in seen:
            raise UsageError(f"{key}: duplicate key")
        seen.add(key)
        parts = key.split(".")
        if len(parts) == 1:
            top[key] = value
        elif parts[0] in _SINGLETONS and len(parts) == 2:
            singles.setdefault(parts[0], {})[parts[1]] = value
        elif parts[0] in _LISTS and len(parts) == 3 and parts[1].isdigit():
            lists.setdefault(parts[0], {}).setdefault(int(parts[1]), {})[parts[2]] = value
        else:
            raise UsageError(f"{key}: unknown key")

    cfg = _fill(RunConfig, top, "")
    for name, raw in singles.items():
        setattr(cfg, name, _fill(_SINGLETONS[name], raw, f"{name}."))
    for name, by_index in lists.items():
        items = [_fill(_LISTS[name], by_index[i], f"{name}.{i}.") for i in sorted(by_index)]
        setattr(cfg, _LIST_ATTR[name], items)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig, command=None):
    """Invariant checks; ``command`` overrides cfg.command for per-command requirements."""
    command = command or cfg.command
    if cfg.command is not None and cfg.command not in COMMANDS:
        raise UsageError(f"command: must be one of {COMMANDS}, got {cfg.command!r}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise UsageError("seed: must fit in 64 unsigned bits")
    if cfg.replications < 1:
        raise UsageError("replications: must be positive")
    if not cfg.margin_sigmas >= 0:
        raise UsageError("margin_sigmas: must be >= 0")
    if not 0 < cfg.pilot_fraction <= 0.5:
        raise UsageError("pilot_fraction: must lie in (0, 0.5]")
    if not cfg.bound_scale > 0:
        raise UsageError("bound_scale: must be > 0")
    if cfg.output.format is not None and cfg.output.format not in FORMATS:
        raise UsageError(f"output.format: must be one of {FORMATS}")
    for i, r in enumerate(cfg.requests, 1):
        try:
            fam = BoundFamily(r.family)
        except ValueError:
            raise UsageError(f"request.{i}.family: unknown bound family {r.family!r}") from None
        if fam in _NEEDS_P_GE_L and r.l is not None and r.p < r.l:
            raise UsageError(f"request.{i}: p >= l violated (l={r.l!r}, p={r.p!r})")
        try:
            r.build()
        except ConcboundError as exc:
            raise UsageError(f"request.{i}: {exc}") from None
    for i, c in enumerate(cfg.checks, 1):
        if c.kind not in CHECK_KINDS:
            raise UsageError(f"check.{i}.kind: must be one of {CHECK_KINDS}")
        if c.kind in ("moment", "truncation") and c.p < c.l:
            raise UsageError(f"check.{i}: p >= l violated (l={c.l!r}, p={c.p!r})")
        if c.direction not in (d.value for d in Direction):
            raise UsageError(f"check.{i}.direction: must be upper or lower")
    for i, t in enumerate(cfg.targets, 1):
        if t.direction not in (d.value for d in Direction):
            raise UsageError(f"target.{i}.direction: must be upper or lower")
    if cfg.ensemble is not None:
        try:
            cfg.ensemble.build(cfg.seed)
        except ConcboundError as exc:
            raise UsageError(f"ensemble: {exc}") from None
    if command == "bound" and not cfg.requests:
        raise UsageError("request: the bound command needs at least one request")
    if command == "simulate" and not cfg.targets:
        raise UsageError("target: the simulate command needs at least one target")
    if command == "regimes":
        for key in ("l", "p", "n", "N"):
            if cfg.grid.l and not getattr(cfg.grid, key):
                raise UsageError(f"grid.{key}: missing required key")
    return cfg


def _emit(lines, prefix, obj):
    for f in _scalar_fields(type(obj)):
        v = getattr(obj, f.name)
        if v is None or (isinstance(v, list) and not v and not f.metadata["required"]):
            continue
        if isinstance(v, float) and not math.isfinite(v):
            raise UsageError(f"{prefix}{f.name}: non-finite values cannot be serialized")
        lines.append(f"{prefix}{f.name} = {format_value(v)}")


def dump_config(cfg: RunConfig) -> str:
    """Canonical serialization; parse_config(dump_config(c)) == c."""
    lines = []
    _emit(lines, "", cfg)
    for name in _SINGLETONS:
        obj = getattr(cfg, name)
        if obj is not None:
            _emit(lines, f"{name}.", obj)
    for name, attr in _LIST_ATTR.items():
        for i, obj in enumerate(getattr(cfg, attr), 1):
            _emit(lines, f"{name}.{i}.", obj)
    return "\n".join(lines) + "\n"


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Copy with command-line overrides applied (None leaves a value unchanged)."""
    out = replace(cfg)
    for key in ("command", "seed", "replications"):
        if kw.get(key) is not None:
            setattr(out, key, kw[key])
    if kw.get("out") is not None or kw.get("format") is not None:
        out.output = replace(cfg.output,
                             path=kw.get("out") or cfg.output.path,
                             format=kw.get("format") or cfg.output.format)
    return out
