"""Plain-text ``key = value`` run configuration with command-line overrides.

Map specs: ``identity``, ``dilation:c``, ``ellipse:t``, ``rotation:theta``,
``affine:a11,a12,a21,a22[,b1,b2]``, ``file:path``; a map may be followed by
perturbation terms, e.g. ``identity+0.05*hre:2+0.02*radial:1``.

Field specs: ``dilation``, ``rotation``, ``translation:dx,dy``, ``hre:k``,
``him:k``, ``radial:j``, ``random:degree:seed[:scale]``, ``file:path``, and sums
``hre:2+0.5*radial:1``.
"""
from dataclasses import dataclass, fields, replace
import hashlib
import re

from .errors import ConfigError
from .geometry import DomainMap, PerturbationField

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad numeric list {text!r} in {what}") from None


def _read_file(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _split_terms(spec):
    """Split on '+' that separates terms (not exponent signs or number signs)."""
    parts, cur = [], ""
    for ch in spec:
        if ch == "+" and cur and not re.search(r"[eE]$", cur) and not cur.endswith(("*", ":", ",")):
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def _scaled_term(term):
    m = re.fullmatch(rf"({_NUM})\s*\*\s*(.+)", term)
    if m:
        return float(m.group(1)), m.group(2)
    return 1.0, term


def parse_field(spec):
    """Perturbation field from a spec string."""
    total = None
    for term in _split_terms(spec):
        coef, body = _scaled_term(term)
        f = _single_field(body) * coef
        total = f if total is None else total + f
    if total is None:
        raise ConfigError(f"empty field spec {spec!r}")
    return total


def _single_field(spec):
    name, _, arg = spec.partition(":")
    try:
        if name == "dilation":
            return PerturbationField.dilation()
        if name == "rotation":
            return PerturbationField.rotation()
        if name == "translation":
            return PerturbationField.translation(_floats(arg, spec))
        if name in ("hre", "him"):
            return PerturbationField.harmonic_gradient(int(arg), name[1:])
        if name == "radial":
            return PerturbationField.radial(int(arg))
        if name == "random":
            bits = arg.split(":")
            scale = float(bits[2]) if len(bits) > 2 else 1.0
            return PerturbationField.random(int(bits[0]), int(bits[1]), scale)
        if name == "file":
            return PerturbationField.from_text(_read_file(arg), "psi", provenance=spec)
    except ConfigError:
        raise
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad field spec {spec!r}: {exc}") from None
    raise ConfigError(f"unknown field spec {spec!r}")


def parse_map(spec):
    """Domain map from a spec string (base map plus optional perturbation terms)."""
    terms = _split_terms(spec)
    if not terms:
        raise ConfigError("empty map spec")
    phi = _single_map(terms[0])
    for term in terms[1:]:
        coef, body = _scaled_term(term)
        phi = phi.perturbed(_single_field(body), coef)
    return phi


def _single_map(spec):
    name, _, arg = spec.partition(":")
    try:
        if name == "identity":
            return DomainMap.identity()
        if name == "dilation":
            return DomainMap.dilation(float(arg))
        if name == "ellipse":
            return DomainMap.ellipse(float(arg))
        if name == "rotation":
            return DomainMap.rotation(float(arg))
        if name == "affine":
            v = _floats(arg, spec)
            if len(v) not in (4, 6):
                raise ConfigError(f"affine needs 4 or 6 numbers, got {len(v)}")
            b = v[4:] if len(v) == 6 else (0.0, 0.0)
            return DomainMap.affine([[v[0], v[1]], [v[2], v[3]]], b)
        if name == "file":
            return DomainMap.from_text(_read_file(arg), "phi", provenance=spec)
    except ConfigError:
        raise
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad map spec {spec!r}: {exc}") from None
    raise ConfigError(f"unknown map spec {spec!r}")


def _int_tuple(text):
    text = str(text).strip().strip("{}[]()")
    if "-" in text and "," not in text:
        a, b = text.split("-")
        return tuple(range(int(a), int(b) + 1))
    return tuple(int(v) for v in text.split(",") if v.strip())


@dataclass
class RunConfig:
    """Every tunable of a run. Field names are the config-file keys."""

    n: int = 1
    m: int = 0
    d: int = 16
    G: int = 40
    M: int = 96
    map: str = "identity"
    field: str = "dilation"
    fields: str = ""
    F: tuple = (1,)
    h: int = 1
    count: int = 10
    cluster_rtol: float = 1e-6
    tol: float = 1e-5
    check: str = "all"
    u1: int = 1
    u2: int = 2
    family: str = "ellipse"
    t_min: float = -0.2
    t_max: float = 0.2
    t_steps: int = 9
    gtol: float = 1e-6
    max_iters: int = 200
    dictionary_degree: int = 4
    target_volume: float = None
    mode: str = "min"
    seed: int = 0
    workers: int = 1
    out: str = ""

    def validate(self):
        if not 0 <= self.m < self.n <= 3:
            raise ConfigError(f"need 0 <= m < n <= 3, got n={self.n}, m={self.m}")
        if self.d < 0 or self.G < 1 or self.M < 16:
            raise ConfigError("need d >= 0, G >= 1, M >= 16")
        for name in ("cluster_rtol", "tol", "gtol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.cluster_rtol < 0.1:
            raise ConfigError("cluster_rtol must lie in (0, 0.1)")
        F = tuple(self.F)
        if not F or min(F) < 1 or F != tuple(range(F[0], F[0] + len(F))):
            raise ConfigError(f"F must be a contiguous set of labels >= 1, got {list(F)}")
        if not 1 <= self.h <= len(F):
            raise ConfigError(f"h={self.h} outside 1..{len(F)}")
        if self.count < max(F):
            raise ConfigError("count must cover the cluster labels")
        if self.workers < 1 or self.max_iters < 0 or self.t_steps < 1:
            raise ConfigError("workers, t_steps must be >= 1 and max_iters >= 0")
        if self.mode not in ("min", "max"):
            raise ConfigError("mode must be 'min' or 'max'")
        if self.target_volume is not None and not self.target_volume > 0:
            raise ConfigError("target_volume must be positive")
        return self

    def phi(self):
        return parse_map(self.map)

    def psi(self):
        return parse_field(self.field)

    def field_list(self):
        return [parse_field(s) for s in self.fields.split(";") if s.strip()]

    def to_text(self):
        lines = []
        for f in fields(self):
            if f.name in ("workers", "out"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def fingerprint(self):
        """64-bit hash of the canonical config text (thread count and output path excluded)."""
        return hashlib.blake2b(self.to_text().encode(), digest_size=8).hexdigest()


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, value):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if value is None:
        return None
    typ = _TYPES[key]
    try:
        if key == "F":
            return _int_tuple(value)
        if key == "target_volume":
            return None if str(value).lower() in ("", "none") else float(value)
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
        return str(value)
    except ValueError:
        raise ConfigError(f"bad value {value!r} for {key}") from None


def parse_text(text):
    """``{key: raw value}`` from ``key = value`` lines (``#`` starts a comment)."""
    out = {}
    for k, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {k}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def load(path=None, overrides=None, base=None):
    """Config from defaults, then ``path``, then ``overrides`` (later wins)."""
    cfg = base or RunConfig()
    values = {}
    if path:
        values.update(parse_text(_read_file(path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kw = {k: _coerce(k, v) for k, v in values.items()}
    return replace(cfg, **kw).validate()
