"""Experiment specifications, the INI config format and config hashing."""
from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .demand import CATALOG, Constants, Family, get_family, make_lower_bound_family_k0
from .errors import ConfigFormatError
from .noise import NOISE_KINDS, NoiseModel

STUDY_KINDS = ("batch", "scaling", "separation", "simulate")


@dataclass(frozen=True)
class FamilySpec:
    name: str = "linear"
    theta: Optional[tuple] = None  # fixed parameter; None samples the middle of the box
    sample_frac: float = 0.8
    param_lo: Optional[tuple] = None  # optional box override
    param_hi: Optional[tuple] = None
    price_domain: Optional[tuple] = None
    c2: Optional[float] = None
    c_star: Optional[float] = None
    c_s: Optional[float] = None
    c_sg: Optional[float] = None

    def family(self) -> Family:
        base = get_family(self.name)
        if self.param_lo is None and self.param_hi is None and self.price_domain is None:
            return base
        return Family(
            base.tag,
            self.param_lo if self.param_lo is not None else base.param_lo,
            self.param_hi if self.param_hi is not None else base.param_hi,
            self.price_domain if self.price_domain is not None else base.price_domain,
            scale=base.scale,
            sensitivity_s=base.sensitivity_s,
            name=base.name,
        )

    def constants(self, fallback: Constants) -> Optional[Constants]:
        """Explicit constants merged over ``fallback``; None when nothing is overridden."""
        vals = {"c2": self.c2, "c_star": self.c_star, "c_s": self.c_s, "c_sg": self.c_sg}
        if all(v is None for v in vals.values()):
            return None
        return Constants(**{k: (v if v is not None else getattr(fallback, k)) for k, v in vals.items()})


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian_clipped"
    sigma: float = 0.1

    def model(self) -> NoiseModel:
        return NoiseModel(self.kind, self.sigma)


@dataclass(frozen=True)
class ExperimentSpec:
    policies: tuple = ("cm",)
    family: FamilySpec = field(default_factory=FamilySpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    horizons: tuple = (1000,)
    replications: int = 1
    seed: int = 0
    output_dir: Optional[str] = None
    study: str = "batch"
    icm_m: Optional[int] = None
    icm_s: Optional[int] = None
    workers: int = 1
    test_mode: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigFormatError("replications must be at least 1")
        if not self.horizons or any(int(n) < 1 for n in self.horizons):
            raise ConfigFormatError("horizons must be positive integers")
        if self.study not in STUDY_KINDS:
            raise ConfigFormatError(f"unknown study kind {self.study!r}")
        if self.family.name not in CATALOG:
            raise ConfigFormatError(f"unknown family {self.family.name!r}; choose from {sorted(CATALOG)}")
        if self.noise.kind not in NOISE_KINDS:
            raise ConfigFormatError(f"unknown noise kind {self.noise.kind!r}")

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        """Canonical content; execution-only fields (output_dir, workers) are excluded."""
        d = asdict(self)
        d.pop("output_dir")
        d.pop("workers")
        return _jsonable(d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["experiment"] = {
            "policies": ", ".join(self.policies),
            "horizons": ", ".join(str(int(n)) for n in self.horizons),
            "replications": str(self.replications),
            "seed": str(self.seed),
            "study": self.study,
            "workers": str(self.workers),
        }
        for key in ("output_dir", "icm_m", "icm_s"):
            if getattr(self, key) is not None:
                cp["experiment"][key] = str(getattr(self, key))
        if self.test_mode:
            cp["experiment"]["test_mode"] = "true"
        fam = {}
        for f in fields(FamilySpec):
            v = getattr(self.family, f.name)
            if v is None:
                continue
            fam[f.name] = ", ".join(repr(float(x)) for x in v) if isinstance(v, tuple) else _fmt(v)
        cp["family"] = fam
        cp["noise"] = {"kind": self.noise.kind, "sigma": repr(float(self.noise.sigma))}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def replace(self, **changes) -> "ExperimentSpec":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ExperimentSpec(**d)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


_FAMILY_PARSERS = {
    "name": str,
    "theta": _floats,
    "sample_frac": float,
    "param_lo": _floats,
    "param_hi": _floats,
    "price_domain": _floats,
    "c2": float,
    "c_star": float,
    "c_s": float,
    "c_sg": float,
}

_EXPERIMENT_PARSERS = {
    "policies": lambda s: tuple(p.strip() for p in s.split(",") if p.strip()),
    "horizons": lambda s: tuple(int(float(x)) for x in s.replace(",", " ").split()),
    "replications": int,
    "seed": int,
    "output_dir": str,
    "study": str,
    "icm_m": int,
    "icm_s": int,
    "workers": int,
    "test_mode": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}

_NOISE_PARSERS = {"kind": str, "sigma": float}

_SECTIONS = {"experiment": _EXPERIMENT_PARSERS, "family": _FAMILY_PARSERS, "noise": _NOISE_PARSERS}


def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].strip() == key:
            return i
    return 0


def parse_ini(text: str) -> dict:
    """Parse the INI format into ``{section: {key: value}}`` with typed values."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigFormatError(f"malformed config: {exc}") from None
    out: dict = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            line = next((i for i, ln in enumerate(text.splitlines(), 1) if ln.strip() == f"[{section}]"), 0)
            raise ConfigFormatError(f"line {line}: unknown section [{section}]")
        parsers = _SECTIONS[section]
        out[section] = {}
        for key, raw in cp[section].items():
            line = _line_of(text, section, key)
            if key not in parsers:
                raise ConfigFormatError(f"line {line}: unknown key {key!r} in [{section}]")
            try:
                out[section][key] = parsers[key](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigFormatError(f"line {line}: bad value for [{section}] {key}: {raw!r} ({exc})") from None
    return out


def spec_from_sections(sections: dict) -> ExperimentSpec:
    exp = dict(sections.get("experiment", {}))
    fam = FamilySpec(**sections.get("family", {}))
    nz = NoiseSpec(**sections.get("noise", {}))
    try:
        return ExperimentSpec(family=fam, noise=nz, **exp)
    except TypeError as exc:
        raise ConfigFormatError(str(exc)) from None


def spec_from_ini(text: str) -> ExperimentSpec:
    return spec_from_sections(parse_ini(text))


def merge_sections(base: dict, overrides: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for section, vals in overrides.items():
        out.setdefault(section, {}).update({k: v for k, v in vals.items() if v is not None})
    return out


def lower_bound_fixture(t: int, n: int) -> dict:
    """Definition record of the k=0 lower-bound instance (for the ``fixtures`` command)."""
    m = make_lower_bound_family_k0(t, n)
    return {
        "kind": "lower_bound_k0",
        "n": n,
        "t": t,
        "delta": (1.0 - float(m.theta[0])) / 2.0,
        "slope": float(m.theta[0]),
        "demand": "1 - slope * p",
        "price_domain": list(m.price_domain),
        "p_star": m.optimal_price(),
    }
