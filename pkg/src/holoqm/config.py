"""Plain-text experiment configuration.

One ``key = value`` pair per line; ``#`` starts a comment.  Keys before the
first ``[section]`` header are global; each header opens a new record, and a
header may repeat (one ``[atom]`` per connection atom).  The grammar is in
``docs/config_grammar.md``.
"""

from __future__ import annotations

import hashlib
import math
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from holoqm.connection import BallAtom, ConnectionForm, prescribed_tube, place_tube, random_ball_form
from holoqm.hyp2 import Moebius
from holoqm.lie_targets import Target, get_target
from holoqm.surface_group import ALPHABET, LETTERS, octagon_rep, reduce

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SECTION = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_-]*)\]$")

COMMON_KEYS = {
    "experiment", "target", "mode", "seed", "tol", "report_tol", "out", "threads", "words",
    "generators", "random_atoms", "atom_radius", "atom_amplitude",
}
EXPERIMENT_KEYS = {
    "holonomy": set(),
    "defect-scan": {"min_length", "max_length", "count", "conjugators", "bootstrap", "stokes_max_length"},
    "hbg": {"max_power"},
    "kazhdan": {
        "free_generators", "b", "g", "m0", "doublings", "pair_max_length", "pair_lengths", "pair_count",
        "margin", "tube_length", "tube_radius",
    },
    "heisenberg-lab": {
        "x_words", "lattice_targets", "a", "b", "exponents", "n_max", "lattice_words", "lattice_pairs",
        "word_length", "tubes", "tube_length", "tube_radius",
    },
    "brooks": {"pairs"},
    "area-audit": {"triangles", "quadrature", "max_radius"},
}
SECTION_KEYS = {
    "atom": {"kind", "center", "radius", "covector", "value", "anchor", "prescribe", "length"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass
class Entry:
    value: str
    line: int


@dataclass
class Section:
    name: str
    line: int
    entries: dict[str, Entry] = field(default_factory=dict)


@dataclass
class RawConfig:
    source: str
    globals: dict[str, Entry]
    sections: list[Section]
    digest: str


def parse_config(text: str, source: str = "<config>") -> RawConfig:
    glob: dict[str, Entry] = {}
    sections: list[Section] = []
    block = glob
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            sections.append(Section(m.group(1), n))
            block = sections[-1].entries
            continue
        if line.startswith("["):
            raise ConfigError(f"malformed section header {line!r}", n, source)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", n, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"invalid key {key!r}", n, source)
        if key in block:
            raise ConfigError(f"duplicate key {key!r} (first set on line {block[key].line})", n, source)
        block[key] = Entry(value, n)
    return RawConfig(source, glob, sections, hashlib.sha256(text.encode()).hexdigest())


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named stage, derived from the run seed."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ExperimentConfig:
    experiment: str
    raw: RawConfig
    seed: int = 0
    tol: float = 1e-9
    report_tol: float = 1e-8
    threads: int = 1
    out: str | None = None

    # typed access; errors point at the offending line

    def _entry(self, key: str) -> Entry | None:
        return self.raw.globals.get(key)

    def _fail(self, key: str, msg: str):
        e = self._entry(key)
        raise ConfigError(f"{key}: {msg}", e.line if e else None, self.raw.source)

    def has(self, key: str) -> bool:
        return key in self.raw.globals

    def get_str(self, key: str, default: str | None = None) -> str:
        e = self._entry(key)
        if e is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}", None, self.raw.source)
            return default
        return e.value

    def get_float(self, key: str, default: float | None = None) -> float:
        e = self._entry(key)
        if e is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}", None, self.raw.source)
            return default
        return _to_float(e, self.raw.source)

    def get_int(self, key: str, default: int | None = None, minimum: int | None = None) -> int:
        e = self._entry(key)
        if e is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}", None, self.raw.source)
            return default
        val = _to_int(e, self.raw.source)
        if minimum is not None and val < minimum:
            raise ConfigError(f"{key} must be >= {minimum}", e.line, self.raw.source)
        return val

    def get_bool(self, key: str, default: bool) -> bool:
        e = self._entry(key)
        if e is None:
            return default
        v = e.value.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {e.value!r}", e.line, self.raw.source)

    def get_words(self, key: str, default=()) -> list[str]:
        e = self._entry(key)
        if e is None:
            return list(default)
        return [_to_word(w, e, self.raw.source) for w in e.value.split()]

    def get_vector(self, key: str, default=None) -> np.ndarray | None:
        e = self._entry(key)
        if e is None:
            return None if default is None else np.asarray(default, dtype=float)
        return np.array([_to_float(Entry(t, e.line), self.raw.source) for t in e.value.split()])

    def get_rows(self, key: str, default=None) -> list[list[str]] | None:
        """``;``-separated rows of whitespace-separated tokens."""
        e = self._entry(key)
        if e is None:
            return default
        return [r.split() for r in e.value.split(";") if r.strip()]

    @property
    def digest(self) -> str:
        return self.raw.digest


def _to_float(e: Entry, source: str) -> float:
    try:
        v = float(e.value)
    except ValueError:
        raise ConfigError(f"expected a number, got {e.value!r}", e.line, source) from None
    if not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {e.value!r}", e.line, source)
    return v


def _to_int(e: Entry, source: str) -> int:
    try:
        return int(e.value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {e.value!r}", e.line, source) from None


def _to_word(w: str, e: Entry, source: str) -> str:
    if w in ("1", "e"):
        return ""
    if any(ch not in LETTERS for ch in w):
        raise ConfigError(f"word {w!r} uses letters outside {LETTERS!r}", e.line, source)
    return reduce(w)


def load_config(path: str | Path | None, experiment: str, text: str | None = None) -> ExperimentConfig:
    """Parse and validate; ``path=None`` gives an all-defaults configuration."""
    if text is None:
        if path is None:
            text, source = "", "<defaults>"
        else:
            p = Path(path)
            try:
                text = p.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read configuration: {exc.strerror}", None, str(p)) from None
            source = str(p)
    else:
        source = str(path) if path else "<config>"
    raw = parse_config(text, source)
    allowed = COMMON_KEYS | EXPERIMENT_KEYS.get(experiment, set())
    for key, e in raw.globals.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} for experiment {experiment!r}", e.line, source)
    for sec in raw.sections:
        if sec.name not in SECTION_KEYS:
            raise ConfigError(f"unknown section [{sec.name}]", sec.line, source)
        for key, e in sec.entries.items():
            if key not in SECTION_KEYS[sec.name]:
                raise ConfigError(f"unknown key {key!r} in [{sec.name}]", e.line, source)
    if "experiment" in raw.globals and raw.globals["experiment"].value != experiment:
        e = raw.globals["experiment"]
        raise ConfigError(f"configuration is for {e.value!r}, not {experiment!r}", e.line, source)
    cfg = ExperimentConfig(experiment, raw)
    cfg.seed = cfg.get_int("seed", 0)
    cfg.tol = cfg.get_float("tol", 1e-9)
    cfg.report_tol = cfg.get_float("report_tol", 1e-8)
    cfg.threads = cfg.get_int("threads", 1, minimum=1)
    cfg.out = cfg.get_str("out", "") or None
    if cfg.tol <= 0:
        cfg._fail("tol", "must be positive")
    return cfg


# ---------------------------------------------------------------- building from a configuration


def config_target(cfg: ExperimentConfig, default: str = "su2") -> Target:
    name = cfg.get_str("target", default)
    try:
        return get_target(name)
    except ValueError as exc:
        cfg._fail("target", str(exc))


def check_generator_file(cfg: ExperimentConfig) -> None:
    """Optional ``generators`` file: one ``letter a_re a_im b_re b_im`` line per generator.

    Only the regular-octagon group is supported, so the file must agree with
    the built-in generators to 1e-9.
    """
    if not cfg.has("generators"):
        return
    e = cfg._entry("generators")
    path = Path(e.value)
    if not path.is_absolute() and cfg.raw.source not in ("<config>", "<defaults>"):
        path = Path(cfg.raw.source).parent / path
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"generator matrix file {str(path)!r}: {exc.strerror}", e.line, cfg.raw.source) from None
    rep = octagon_rep()
    seen = set()
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if len(line) != 5 or line[0] not in ALPHABET:
            raise ConfigError(f"expected 'letter a_re a_im b_re b_im'", n, str(path))
        try:
            a_re, a_im, b_re, b_im = (float(x) for x in line[1:])
        except ValueError:
            raise ConfigError("non-numeric matrix entry", n, str(path)) from None
        m = Moebius(complex(a_re, a_im), complex(b_re, b_im))
        g = rep.gens[line[0]]
        if max(abs(m.a - g.a), abs(m.b - g.b)) > 1e-9:
            raise ConfigError(f"generator {line[0]!r} differs from the regular-octagon group", n, str(path))
        seen.add(line[0])
    missing = set(ALPHABET) - seen
    if missing:
        raise ConfigError(f"generator file lacks {''.join(sorted(missing))!r}", e.line, cfg.raw.source)


def build_form(cfg: ExperimentConfig, target: Target, rng: np.random.Generator | None = None) -> ConnectionForm:
    """Connection from ``[atom]`` sections, or ``random_atoms`` random balls, or the trivial one."""
    rep = octagon_rep()
    form = ConnectionForm(target, (), rep)
    n_random = cfg.get_int("random_atoms", 0, minimum=0)
    if n_random:
        rng = rng if rng is not None else rng_stream(cfg.seed, "atoms")
        form = random_ball_form(
            target, rng, n_random, cfg.get_float("atom_radius", 0.4), cfg.get_float("atom_amplitude", 1.0)
        )
    atoms = [s for s in cfg.raw.sections if s.name == "atom"]
    src = cfg.raw.source
    tubes = []
    for sec in atoms:
        get = sec.entries.get
        kind = get("kind", Entry("ball", sec.line)).value
        value = _vec(sec, "value", target.dim, src, required=False)
        if kind == "ball":
            center = _vec(sec, "center", 2, src)
            cov = _vec(sec, "covector", 2, src)
            radius = _pos(sec, "radius", 0.4, src)
            c = complex(*center)
            if abs(c) >= 1:
                raise ConfigError("ball centre must lie in the unit disk", sec.entries["center"].line, src)
            if value is None:
                raise ConfigError("ball atom needs 'value'", sec.line, src)
            form = form.with_atom(BallAtom(c, radius, tuple(cov), tuple(value)))
        elif kind == "tube":
            if "anchor" not in sec.entries:
                raise ConfigError("tube atom needs an 'anchor' word", sec.line, src)
            anchor = _to_word(sec.entries["anchor"].value, sec.entries["anchor"], src)
            if not anchor:
                raise ConfigError("tube anchor must be a nontrivial word", sec.entries["anchor"].line, src)
            tubes.append((sec, anchor, value))
        else:
            raise ConfigError(f"unknown atom kind {kind!r}", get("kind").line, src)
    if tubes:
        from holoqm.connection import PlacementError, class_paths

        classes = [rep.conj_class_data(a) for _, a, _ in tubes]
        for k, (sec, anchor, value) in enumerate(tubes):
            others = [p for j, c in enumerate(classes) if j != k for p in class_paths(c)]
            length = _pos(sec, "length", 0.6, src)
            radius = _pos(sec, "radius", 0.08, src)
            try:
                if "prescribe" in sec.entries:
                    want = target.exp(_vec(sec, "prescribe", target.dim, src))
                    atom = prescribed_tube(classes[k], form, want, others, tol=min(cfg.tol, 1e-10), length=length, radius=radius)
                else:
                    if value is None:
                        raise ConfigError("tube atom needs 'value' or 'prescribe'", sec.line, src)
                    cand = place_tube(classes[k], form, others, length, radius)
                    atom = type(cand)(cand.frame, cand.length, cand.radius, tuple(value), cand.anchor, cand.window_start)
            except PlacementError as exc:
                raise ConfigError(f"tube on {anchor!r}: {exc}", sec.line, src) from None
            form = form.with_atom(atom)
    return form


def _vec(sec: Section, key: str, dim: int, src: str, required: bool = True) -> np.ndarray | None:
    e = sec.entries.get(key)
    if e is None:
        if required:
            raise ConfigError(f"[{sec.name}] needs {key!r}", sec.line, src)
        return None
    vals = [_to_float(Entry(t, e.line), src) for t in e.value.split()]
    if len(vals) != dim:
        raise ConfigError(f"{key} needs {dim} numbers, got {len(vals)}", e.line, src)
    return np.array(vals)


def _pos(sec: Section, key: str, default: float, src: str) -> float:
    e = sec.entries.get(key)
    if e is None:
        return default
    v = _to_float(e, src)
    if v <= 0:
        raise ConfigError(f"{key} must be positive", e.line, src)
    return v
