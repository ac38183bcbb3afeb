"""Experiment configuration: a JSON-compatible description of one run.

A SimConfig collects everything an experiment needs (domain, wall
model, initial data, grids, seed) in plain data so that runs are
diffable and hashable.  Builders turn the declarative sections into
the live objects the solvers consume.
"""

import dataclasses
import json

import numpy as np

from .flux_solver import InitialData, SolverConfig
from .steady_state import TemperatureProfile
from .transport import DampingModel


class ConfigError(ValueError):
    """Invalid configuration; the message lists every offending field."""


_PROFILE_KINDS = ("constant", "slab", "disk")
_INITIAL_KINDS = ("uniform_maxwellian", "scaled_steady", "separable")

_MC_DEFAULTS = {"n_particles": 200000, "n_time_bins": None,
                "n_boundary_bins": 16, "killing": False}
_RATES_DEFAULTS = {"window": None}
_LLN_DEFAULTS = {"n_values": (20, 50, 100), "m_values": (1, 2, 4),
                 "gamma_factors": (10.0, 17.8, 31.6, 56.2, 100.0),
                 "trials": 150000}
_TRANSPORT_DEFAULTS = {"times": None, "n_x": 24}


@dataclasses.dataclass
class SimConfig:
    """Declarative description of one experiment."""

    d: int = 1
    alpha: float = 1.0
    profile: dict = dataclasses.field(
        default_factory=lambda: {"kind": "constant", "T": 1.0})
    initial: dict = dataclasses.field(
        default_factory=lambda: {"kind": "uniform_maxwellian",
                                 "rho0": 1.0, "T0": 1.0})
    damping: dict = None
    t_max: float = 50.0
    dt: float = 0.05
    n_theta: int = 128
    n_phi: int = 64
    series_tol: float = 1e-12
    survival_tol: float = 1e-10
    seed: int = 0
    out_dir: str = "out"
    mc: dict = None
    rates: dict = None
    lln: dict = None
    transport: dict = None

    def __post_init__(self):
        self.validate()

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(
                "unknown configuration fields: " + ", ".join(sorted(unknown)))
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self):
        out = dataclasses.asdict(self)
        return {k: v for k, v in out.items() if v is not None}

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    # -- validation ----------------------------------------------------------

    def validate(self):
        bad = []
        if self.d not in (1, 2):
            bad.append(f"d: must be 1 or 2, got {self.d!r}")
        if not (isinstance(self.alpha, (int, float))
                and 0.0 < self.alpha <= 1.0):
            bad.append(f"alpha: must lie in (0, 1], got {self.alpha!r}")
        bad += self._check_profile()
        bad += self._check_initial()
        bad += self._check_damping()
        for name, lo in (("t_max", 0.0), ("dt", 0.0), ("series_tol", 0.0),
                         ("survival_tol", 0.0)):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > lo):
                bad.append(f"{name}: must be positive, got {v!r}")
        for name in ("n_theta", "n_phi"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 4):
                bad.append(f"{name}: must be an integer >= 4, got {v!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            bad.append(f"seed: must be a nonnegative integer, got "
                       f"{self.seed!r}")
        if self.mc is not None:
            n = dict(_MC_DEFAULTS, **self.mc).get("n_particles")
            if not (isinstance(n, int) and n >= 1):
                bad.append(f"mc.n_particles: must be a positive integer, "
                           f"got {n!r}")
        if bad:
            raise ConfigError("invalid configuration: " + "; ".join(bad))

    def _check_profile(self):
        p = self.profile
        if not isinstance(p, dict) or "kind" not in p:
            return ["profile: must be an object with a 'kind' key"]
        kind = p["kind"]
        if kind not in _PROFILE_KINDS:
            return [f"profile.kind: must be one of {_PROFILE_KINDS}, "
                    f"got {kind!r}"]
        bad = []
        if kind == "slab":
            if self.d != 1:
                bad.append("profile: slab profile requires d = 1")
            for key in ("t_left", "t_right"):
                v = p.get(key, 1.0)
                if not (isinstance(v, (int, float)) and v > 0.0):
                    bad.append(f"profile.{key}: must be positive, got {v!r}")
        elif kind == "disk":
            if self.d != 2:
                bad.append("profile: disk profile requires d = 2")
            v = p.get("mean", 1.0)
            if not (isinstance(v, (int, float)) and v > 0.0):
                bad.append(f"profile.mean: must be positive, got {v!r}")
        else:
            v = p.get("T", 1.0)
            if not (isinstance(v, (int, float)) and v > 0.0):
                bad.append(f"profile.T: must be positive, got {v!r}")
        return bad

    def _check_initial(self):
        g = self.initial
        if not isinstance(g, dict) or "kind" not in g:
            return ["initial: must be an object with a 'kind' key"]
        kind = g["kind"]
        if kind not in _INITIAL_KINDS:
            return [f"initial.kind: must be one of {_INITIAL_KINDS}, "
                    f"got {kind!r}"]
        bad = []
        if kind != "separable":
            v = g.get("rho0", 1.0)
            if not (isinstance(v, (int, float)) and v > 0.0):
                bad.append(f"initial.rho0: must be positive, got {v!r}")
        if kind != "scaled_steady":
            v = g.get("T0", 1.0)
            if not (isinstance(v, (int, float)) and v > 0.0):
                bad.append(f"initial.T0: must be positive, got {v!r}")
        return bad

    def _check_damping(self):
        dmp = self.damping
        if dmp is None:
            return []
        if not isinstance(dmp, dict):
            return ["damping: must be an object"]
        bad = []
        nu0 = dmp.get("nu0", 0.0)
        if not (isinstance(nu0, (int, float)) and nu0 >= 0.0):
            bad.append(f"damping.nu0: must be nonnegative, got {nu0!r}")
        p_nu = dmp.get("p_nu", 0.0)
        if not (isinstance(p_nu, (int, float)) and 0.0 <= p_nu <= 1.0):
            bad.append(f"damping.p_nu: must lie in [0, 1], got {p_nu!r}")
        kappa = dmp.get("kappa", 1.0)
        if not (isinstance(kappa, (int, float)) and kappa > 0.0):
            bad.append(f"damping.kappa: must be positive, got {kappa!r}")
        return bad

    # -- builders ------------------------------------------------------------

    def build_profile(self):
        p = self.profile
        if p["kind"] == "constant":
            return TemperatureProfile.constant(self.d, p.get("T", 1.0))
        if p["kind"] == "slab":
            return TemperatureProfile.slab(p.get("t_left", 1.0),
                                           p.get("t_right", 1.0))
        return TemperatureProfile.disk(
            p.get("mean", 1.0),
            cos_coeffs=tuple(p.get("cos_coeffs", ())),
            sin_coeffs=tuple(p.get("sin_coeffs", ())))

    def build_initial(self):
        g = self.initial
        if g["kind"] == "uniform_maxwellian":
            return InitialData.uniform_maxwellian(g.get("rho0", 1.0),
                                                  g.get("T0", 1.0))
        if g["kind"] == "scaled_steady":
            return InitialData.scaled_steady(g.get("rho0", 1.0))
        base = g.get("base", 1.0)
        bump = g.get("bump", 0.5)
        width = g.get("width", 0.35)

        def rho(x):
            r2 = float(np.sum(np.square(np.asarray(x, dtype=float))))
            return base + bump * np.exp(-r2 / width ** 2)

        return InitialData.separable(rho, g.get("T0", 1.0))

    def build_damping(self):
        if self.damping is None:
            return None
        return DampingModel(nu0=self.damping.get("nu0", 0.0),
                            p_nu=self.damping.get("p_nu", 0.0),
                            kappa=self.damping.get("kappa", 1.0))

    def solver_config(self, profile=None, initial=None):
        return SolverConfig(
            d=self.d, alpha=self.alpha,
            profile=profile if profile is not None else self.build_profile(),
            initial=initial if initial is not None else self.build_initial(),
            t_max=self.t_max, dt=self.dt, n_theta=self.n_theta,
            n_phi=self.n_phi, series_tol=self.series_tol,
            survival_tol=self.survival_tol)

    def section(self, name):
        """Subcommand options with defaults filled in."""
        defaults = {"mc": _MC_DEFAULTS, "rates": _RATES_DEFAULTS,
                    "lln": _LLN_DEFAULTS, "transport": _TRANSPORT_DEFAULTS}
        out = dict(defaults[name])
        given = getattr(self, name)
        if given:
            out.update(given)
        return out

    def flux_fingerprint(self):
        """The subset of fields that determine a deterministic flux solve,
        serialized canonically.  Two configs with equal fingerprints
        produce identical flux histories."""
        sub = {"d": self.d, "alpha": self.alpha, "profile": self.profile,
               "initial": self.initial, "damping": self.damping,
               "t_max": self.t_max, "dt": self.dt, "n_theta": self.n_theta,
               "n_phi": self.n_phi, "series_tol": self.series_tol,
               "survival_tol": self.survival_tol}
        return json.dumps(sub, sort_keys=True)
