"""Scenario files: an INI-style, line-oriented ``[section]`` / ``key = value`` format.

Example::

    [scenario]
    name = fig4-lf-vs-mf/mf

    [network]
    m = 2
    v = 1.0, 1.0
    mu = 6.0, 4.0
    l = 0.5

    [grid]
    h = 0.01
    tau = 0.01          ; or: cfl = 1
    T = 30.0
    coords = interface  ; interface | center | local

    [initial]
    flux = 4.0, 4.0     ; one constant per processor, or flux.1 ... flux.m per-cell rows
    queues = 0.0, 1.0

    [lyapunov]
    p = 1.0, 1.0        ; a single value applies to every processor
    eta = 0.5, 0.5
    c = 1.0, 1.0
    eta_tilde = 0.5, 0.5

    [feedback]
    kind = mixed        ; open-loop | linear | mixed
    kappa = 0.7788007830714049
    profile = 0:4, 5:0  ; open-loop breakpoints time:value
    coupling = hard     ; hard | smoothed
    epsilon = 1e-06

    [output]
    stride = 1

Unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import difflib
import math
import re

from .discretization import CouplingMode
from .errors import ParseError, ValidationError
from .experiments import Scenario
from .feedback import Linear, Mixed, OpenLoop
from .lyapunov import LyapunovWeights
from .network import COORDINATE_CONVENTIONS, GridSpec, NetworkSpec, validate_network

SCHEMA = {
    "scenario": {"name"},
    "network": {"m", "v", "mu", "l"},
    "grid": {"h", "tau", "cfl", "t", "coords"},
    "initial": {"flux", "queues"},
    "lyapunov": {"p", "eta", "c", "eta_tilde"},
    "feedback": {"kind", "kappa", "profile", "coupling", "epsilon"},
    "output": {"stride"},
}
REQUIRED = {
    "network": ("v", "mu", "l"),
    "grid": ("h", "t"),
    "initial": ("flux",),
    "lyapunov": ("eta",),
    "feedback": ("kind",),
}
_FLUX_ROW = re.compile(r"flux\.(\d+)$")
# long spellings used only to suggest the short key
ALIASES = {
    "velocity": "v", "velocities": "v", "speed": "v",
    "capacity": "mu", "capacities": "mu",
    "length": "l", "processors": "m",
    "dt": "tau", "dx": "h", "horizon": "t", "time": "t",
    "gain": "kappa", "law": "kind", "eps": "epsilon",
    "queue": "queues", "etatilde": "eta_tilde",
}


class _Source:
    """Maps ``(section, key)`` back to line numbers of the raw text."""

    def __init__(self, text):
        self.lines = {}
        section = None
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            if line.startswith("[") and "]" in line:
                section = line[1:line.index("]")].strip().lower()
                self.lines.setdefault((section, None), no)
                continue
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            self.lines.setdefault((section, key), no)

    def line(self, section, key=None):
        return self.lines.get((section, key))


def _suggest(word, choices):
    pool = {c: c for c in choices}
    pool.update({a: k for a, k in ALIASES.items() if k in choices})
    close = difflib.get_close_matches(word, sorted(pool), n=1)
    return f"; did you mean {pool[close[0]]!r}?" if close else ""


def _number(text, src, section, key):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", src.line(section, key), f"{section}.{key}") from None
    if not math.isfinite(value):
        raise ParseError(f"value must be finite, got {text!r}", src.line(section, key), f"{section}.{key}")
    return value


def _numbers(text, src, section, key):
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(p == "" for p in parts):
        raise ParseError(f"malformed list {text!r}", src.line(section, key), f"{section}.{key}")
    return tuple(_number(p, src, section, key) for p in parts)


def _per_processor(text, m, src, section, key):
    vals = _numbers(text, src, section, key)
    if len(vals) == 1:
        return vals * m
    if len(vals) != m:
        raise ParseError(
            f"expected 1 or {m} values, got {len(vals)}", src.line(section, key), f"{section}.{key}"
        )
    return vals


def parse_text(text: str) -> Scenario:
    """Parse scenario text into a validated :class:`Scenario`."""
    src = _Source(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None

    for section in cp.sections():
        if section not in SCHEMA:
            raise ParseError(f"unknown section [{section}]{_suggest(section, SCHEMA)}", src.line(section))
        for key in cp[section]:
            if section == "initial" and _FLUX_ROW.match(key):
                continue
            if key not in SCHEMA[section]:
                raise ParseError(
                    f"unknown key {key!r} in [{section}]{_suggest(key, SCHEMA[section])}",
                    src.line(section, key), f"{section}.{key}",
                )
    for section, keys in REQUIRED.items():
        for key in keys:
            if section == "initial" and cp.has_section(section) and any(_FLUX_ROW.match(k) for k in cp[section]):
                continue
            if not cp.has_option(section, key):
                raise ParseError(f"missing required key [{section}] {key}", src.line(section), f"{section}.{key}")

    sec = cp["network"]
    v = _numbers(sec["v"], src, "network", "v")
    mu = _numbers(sec["mu"], src, "network", "mu")
    if "m" in sec:
        m = int(_number(sec["m"], src, "network", "m"))
        if m != len(v) or m != len(mu):
            raise ParseError(f"m={m} does not match v/mu lengths {len(v)}/{len(mu)}", src.line("network", "m"), "network.m")
    else:
        m = len(v)
    if len(mu) != len(v):
        raise ParseError("v and mu must have the same length", src.line("network", "mu"), "network.mu")
    network = NetworkSpec(v, mu, _number(sec["l"], src, "network", "l"))

    sec = cp["grid"]
    h = _number(sec["h"], src, "grid", "h")
    T = _number(sec["t"], src, "grid", "t")
    if ("tau" in sec) == ("cfl" in sec):
        raise ParseError("give exactly one of tau or cfl", src.line("grid"), "grid.tau")
    if "tau" in sec:
        grid = GridSpec(h, _number(sec["tau"], src, "grid", "tau"), T)
    else:
        grid = GridSpec.from_cfl(h, _number(sec["cfl"], src, "grid", "cfl"), max(v), T)
    coords = sec.get("coords", "interface").strip()
    if coords not in COORDINATE_CONVENTIONS:
        raise ParseError(f"coords must be one of {COORDINATE_CONVENTIONS}", src.line("grid", "coords"), "grid.coords")

    cfg = validate_network(network, grid, coords=coords)

    sec = cp["initial"]
    rows = {int(_FLUX_ROW.match(k).group(1)): k for k in sec if _FLUX_ROW.match(k)}
    if rows:
        if sorted(rows) != list(range(1, m + 1)):
            raise ParseError(f"per-cell flux needs rows flux.1 .. flux.{m}", src.line("initial"), "initial.flux")
        table = []
        for e in range(1, m + 1):
            row = _numbers(sec[rows[e]], src, "initial", rows[e])
            if len(row) != cfg.N:
                raise ParseError(f"expected {cfg.N} cell values", src.line("initial", rows[e]), f"initial.{rows[e]}")
            table.append(row)
        initial_flux = tuple(table)
    else:
        initial_flux = _per_processor(sec["flux"], m, src, "initial", "flux")
    queues = _per_processor(sec.get("queues", "0"), m, src, "initial", "queues")

    sec = cp["lyapunov"]
    eta = _per_processor(sec["eta"], m, src, "lyapunov", "eta")
    try:
        weights = LyapunovWeights(
            _per_processor(sec.get("p", "1"), m, src, "lyapunov", "p"),
            eta,
            _per_processor(sec.get("c", "1"), m, src, "lyapunov", "c"),
            _per_processor(sec.get("eta_tilde", sec["eta"]), m, src, "lyapunov", "eta_tilde"),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    sec = cp["feedback"]
    kind = sec["kind"].strip().lower()
    kappa = _number(sec["kappa"], src, "feedback", "kappa") if "kappa" in sec else None
    try:
        if kind == "linear":
            if kappa is None:
                raise ParseError("linear feedback needs kappa", src.line("feedback", "kind"), "feedback.kappa")
            law = Linear(kappa)
        elif kind == "mixed":
            law = Mixed(kappa)
        elif kind == "open-loop":
            law = OpenLoop(_breakpoints(sec.get("profile", "0:0"), src))
        else:
            raise ParseError(
                f"unknown feedback kind {kind!r}{_suggest(kind, ('linear', 'mixed', 'open-loop'))}",
                src.line("feedback", "kind"), "feedback.kind",
            )
        coupling_kind = sec.get("coupling", "hard").strip().lower()
        eps = _number(sec["epsilon"], src, "feedback", "epsilon") if "epsilon" in sec else None
        coupling = CouplingMode(coupling_kind, eps if coupling_kind == "smoothed" else None)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    stride = 1
    if cp.has_section("output") and "stride" in cp["output"]:
        stride = int(_number(cp["output"]["stride"], src, "output", "stride"))
        if stride < 1:
            raise ParseError("stride must be >= 1", src.line("output", "stride"), "output.stride")

    name = cp["scenario"].get("name", "scenario").strip() if cp.has_section("scenario") else "scenario"
    return Scenario(
        name=name, network=network, grid=grid, weights=weights, law=law,
        initial_flux=initial_flux, initial_queues=queues, coords=coords,
        coupling=coupling, stride=stride,
    )


def _breakpoints(text, src):
    pts = []
    for part in text.split(","):
        if ":" not in part:
            raise ParseError(f"profile entries must be time:value, got {part.strip()!r}",
                             src.line("feedback", "profile"), "feedback.profile")
        t, u = part.split(":", 1)
        pts.append((_number(t.strip(), src, "feedback", "profile"), _number(u.strip(), src, "feedback", "profile")))
    return tuple(pts)


def parse_config(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def _fmt(values):
    return ", ".join(repr(float(x)) for x in values)


def format_config(sc: Scenario) -> str:
    """Serialize a scenario so that :func:`parse_text` reproduces it exactly."""
    lines = [
        "[scenario]", f"name = {sc.name}", "",
        "[network]", f"m = {sc.network.m}", f"v = {_fmt(sc.network.velocities)}",
        f"mu = {_fmt(sc.network.capacities)}", f"l = {sc.network.length!r}", "",
        "[grid]", f"h = {sc.grid.h!r}", f"tau = {sc.grid.tau!r}", f"T = {sc.grid.T!r}",
        f"coords = {sc.coords}", "",
        "[initial]",
    ]
    if sc.initial_flux and isinstance(sc.initial_flux[0], tuple):
        lines += [f"flux.{e} = {_fmt(row)}" for e, row in enumerate(sc.initial_flux, start=1)]
    else:
        lines.append(f"flux = {_fmt(sc.initial_flux)}")
    lines += [f"queues = {_fmt(sc.initial_queues)}", ""]
    w = sc.weights
    lines += [
        "[lyapunov]", f"p = {_fmt(w.p)}", f"eta = {_fmt(w.eta)}", f"c = {_fmt(w.c)}",
        f"eta_tilde = {_fmt(w.eta_tilde)}", "",
        "[feedback]",
    ]
    law = sc.law
    if isinstance(law, Linear):
        lines += ["kind = linear", f"kappa = {law.kappa!r}"]
    elif isinstance(law, Mixed):
        lines.append("kind = mixed")
        if law.kappa is not None:
            lines.append(f"kappa = {law.kappa!r}")
    else:
        lines += ["kind = open-loop", "profile = " + ", ".join(f"{t!r}:{u!r}" for t, u in law.breakpoints)]
    lines.append(f"coupling = {sc.coupling.kind}")
    if sc.coupling.kind == "smoothed":
        lines.append(f"epsilon = {sc.coupling.epsilon!r}")
    lines += ["", "[output]", f"stride = {sc.stride}", ""]
    return "\n".join(lines)
