import copy
import os
from pathlib import Path
from typing import Any, Optional

import yaml

from .density import Region
from .exceptions import ConfigError, QuantizerError
from .i18n import Messages
from .lattice import LatticeGeometry, build_geometry

OUT_DIR_ENV = "RPQ_OUT_DIR"

DEFAULTS: dict = {
    "geometry": {"T": 6, "spatial_sizes": [4], "time_boundary": "dirichlet", "reflection": "site"},
    "mass": 1.0,
    "truncation": 3,
    "sobolev_r": 1,
    "tolerances": {"rp_tol": 1e-10, "rank_tol": 1e-10, "op_tol": 1e-10},
    "epsilons": [0.5, 1.0],
    "derivative_cap": 4,
    "seed": 42,
    "samples": {"c1": 20, "c3": 50, "field_bound": 100, "local_field": 50, "lemma": 20},
    "rp_check_degree": 2,
    "wick_order": 8,
    "density": {"degrees": 2, "coincident_times": True, "eps_gap": 1, "regions": []},
    "out_dir": "rpq-out",
    "language": "en-US",
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


class Config:
    def __init__(self, config_dict: dict, config_file: Path, messages: Optional[Messages] = None):
        if not isinstance(config_dict, dict):
            config_dict = {}
        self.data = _merge(DEFAULTS, config_dict)
        self.config_file = config_file
        self.messages = messages or Messages(self.data.get("language", "en-US"))
        self._validate()

    def _validate(self):
        m = self.messages
        for name in ("rp_tol", "rank_tol", "op_tol"):
            value = self._get_nested(f"tolerances.{name}")
            if not isinstance(value, (int, float)) or not 0 < value < 1:
                raise ConfigError(m.t("config.bad_tolerance", field=f"tolerances.{name}", value=value))

        try:
            self._geometry = LatticeGeometry.from_dict(self.data["geometry"])
        except (QuantizerError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(m.t("config.bad_geometry", error=str(e)))

        if not float(self.data["mass"]) > 0:
            raise ConfigError(m.t("config.bad_mass", value=self.data["mass"]))
        if int(self.data["truncation"]) < 1:
            raise ConfigError(m.t("config.bad_truncation", value=self.data["truncation"]))
        if not self.epsilons or any(not float(e) > 0 for e in self.epsilons):
            raise ConfigError(m.t("config.bad_epsilon", value=self.data["epsilons"]))
        if int(self.data["sobolev_r"]) < 0:
            raise ConfigError(m.t("config.bad_sobolev", value=self.data["sobolev_r"]))

        self._regions = [self._region(entry) for entry in self._get_nested("density.regions") or []]

    def _region(self, entry: dict) -> Region:
        m = self.messages
        label = str(entry.get("label", ""))
        # sites may be left out only on a lattice with no spatial axes
        required = ("times", "sites") if self._geometry.s else ("times",)
        for key in required:
            if key not in entry:
                raise ConfigError(m.t("config.missing_field", field=f"density.regions.{key}"))
        times = list(entry.get("times", []))
        points = [tuple(p) for p in entry.get("sites", [[]])]
        if not times or not points:
            raise ConfigError(m.t("config.empty_region", label=label))
        if any(int(t) < 1 or int(t) > self._geometry.T for t in times):
            raise ConfigError(m.t("config.bad_region_times", label=label, times=times))
        for p in points:
            if len(p) != self._geometry.s or any(
                not 0 <= v < n for v, n in zip(p, self._geometry.spatial_sizes)
            ):
                raise ConfigError(m.t("config.bad_region_point", label=label, point=list(p)))
        return Region.box(times, points, label)

    def _get_nested(self, key_path: str) -> Any:
        value = self.data
        for key in key_path.split("."):
            if isinstance(value, dict):
                value = value.get(key)
            else:
                return None
        return value

    @property
    def geometry(self) -> LatticeGeometry:
        return self._geometry

    @property
    def mass(self) -> float:
        return float(self.data["mass"])

    @property
    def truncation(self) -> int:
        return int(self.data["truncation"])

    @property
    def sobolev_r(self) -> int:
        return int(self.data["sobolev_r"])

    @property
    def rp_tol(self) -> float:
        return float(self._get_nested("tolerances.rp_tol"))

    @property
    def rank_tol(self) -> float:
        return float(self._get_nested("tolerances.rank_tol"))

    @property
    def op_tol(self) -> float:
        return float(self._get_nested("tolerances.op_tol"))

    @property
    def epsilons(self) -> list[float]:
        return [float(e) for e in self.data.get("epsilons") or []]

    @property
    def derivative_cap(self) -> int:
        return int(self.data["derivative_cap"])

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @seed.setter
    def seed(self, value: int):
        self.data["seed"] = int(value)

    def samples(self, name: str) -> int:
        return int(self._get_nested(f"samples.{name}"))

    @property
    def rp_check_degree(self) -> int:
        return int(self.data["rp_check_degree"])

    @property
    def wick_order(self) -> int:
        return int(self.data["wick_order"])

    @property
    def density_degree(self) -> int:
        return int(self._get_nested("density.degrees"))

    @property
    def coincident_times(self) -> bool:
        return bool(self._get_nested("density.coincident_times"))

    @property
    def eps_gap(self) -> int:
        return int(self._get_nested("density.eps_gap"))

    @property
    def regions(self) -> list[Region]:
        return list(self._regions)

    @property
    def language(self) -> str:
        return self.data.get("language", "en-US")

    def out_dir(self, override: Optional[Path] = None) -> Path:
        if override is not None:
            return Path(override)
        env = os.environ.get(OUT_DIR_ENV)
        if env:
            return Path(env)
        out = Path(self.data["out_dir"])
        return out if out.is_absolute() else (self.config_file.parent / out).resolve()

    def echo(self) -> dict:
        """The effective settings, as written into the report."""
        return {k: v for k, v in self.data.items() if k not in ("out_dir", "language")}

    @staticmethod
    def load(config_file: Path) -> "Config":
        temp_messages = Messages()

        if not config_file.exists():
            raise ConfigError(temp_messages.t("config.file_not_found", path=str(config_file)))

        try:
            data = yaml.safe_load(config_file.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            raise ConfigError(temp_messages.t("config.invalid_yaml", error=str(e)))

        if not isinstance(data, dict):
            raise ConfigError(temp_messages.t("config.invalid_yaml", error=type(data).__name__))
        return Config(data, config_file, Messages(data.get("language", "en-US")))

    @staticmethod
    def from_dict(data: dict, base_dir: Optional[Path] = None) -> "Config":
        return Config(data, (base_dir or Path.cwd()) / "config.yaml")

    @staticmethod
    def create(output_file: Optional[Path] = None, language: Optional[str] = None) -> Path:
        template_path = Path(__file__).parent.parent / "templates" / "config.yaml"

        if not template_path.exists():
            raise ConfigError(Messages().t("config.template_missing", path=str(template_path)))

        content = template_path.read_text(encoding="utf-8")
        if language:
            content = content.replace('language: "en-US"', f'language: "{language}"')

        output_file = output_file or Path("rpq.yaml")
        output_file.write_text(content, encoding="utf-8")
        return output_file
