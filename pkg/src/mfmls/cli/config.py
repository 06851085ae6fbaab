"""Strict JSON experiment configuration.

Configs are plain JSON with an explicit ``version`` field. The schema is
closed: unknown keys anywhere raise :class:`ConfigError`, because a silently
ignored typo ("cardnalities") can corrupt a whole study. All randomness is
seeded from the config (or the ``--seed`` override); there is no wall-clock
seeding path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..geometry.cloud import BallRestriction, PointCloud
from ..geometry.mesh import TriMesh, load_obj, sample_mesh
from ..geometry.presets import cyclide, cyclide_patch_center, sphere, torus
from ..geometry.sampling import sample_quasi_uniform
from ..geometry.surface import AlgebraicSurface

CONFIG_VERSION = 1

_TOP_KEYS = {
    "version",
    "surface",
    "degrees",
    "cardinalities",
    "restriction",
    "target",
    "sigma_list",
    "trials",
    "seed",
    "output_dir",
    "eval_count",
    "kernel_order",
    "noise_reference",
}
_TOP_REQUIRED = {"version", "surface", "degrees", "cardinalities", "seed"}


# --- named target functions ---------------------------------------------------

def _target_trig(pts: np.ndarray) -> np.ndarray:
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    return (
        np.cos(np.pi * (x - 0.3))
        * np.sin(2 * np.pi * (y - 0.2))
        * np.cos(3 * np.pi * (z - 0.1))
    )


def _target_affine(pts: np.ndarray) -> np.ndarray:
    return 0.5 + pts[:, 0] - 2.0 * pts[:, 1] + 0.25 * pts[:, 2]


def _target_quadratic(pts: np.ndarray) -> np.ndarray:
    return 1.0 + pts[:, 0] * pts[:, 1] - pts[:, 2] ** 2 + 0.5 * pts[:, 1]


#: Named test functions selectable via the config ``target`` field.
TARGETS = {
    "trig": _target_trig,
    "affine": _target_affine,
    "quadratic": _target_quadratic,
}


def _check_keys(d: dict, allowed: set, required: set, where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")
    missing = sorted(required - set(d))
    if missing:
        raise ConfigError(f"missing required key(s) {missing} in {where}")


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _int_list(value, where: str, minimum: int) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where} must be a nonempty list")
    out = tuple(_as_int(v, f"{where} entry") for v in value)
    if any(v < minimum for v in out):
        raise ConfigError(f"{where} entries must be >= {minimum}, got {list(out)}")
    return out


class SurfaceHandle:
    """Uniform sampling front for algebraic surfaces and triangle meshes."""

    def __init__(self, surface: AlgebraicSurface | None, mesh: TriMesh | None):
        if (surface is None) == (mesh is None):
            raise ValueError("exactly one of surface/mesh must be given")
        self.surface = surface
        self.mesh = mesh

    @property
    def is_algebraic(self) -> bool:
        return self.surface is not None

    @property
    def ambient_dim(self) -> int:
        return self.surface.ambient_dim if self.surface is not None else 3

    def sample(
        self, n: int, seed: int, within: BallRestriction | None = None
    ) -> PointCloud:
        if self.surface is not None:
            return sample_quasi_uniform(self.surface, n, seed, within=within)
        if within is not None:
            raise ConfigError("mesh surfaces do not support a restriction")
        return sample_mesh(self.mesh, n, seed)


def _parse_surface(spec, where: str = "surface") -> tuple[SurfaceHandle, dict]:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    if "preset" in spec and "coefficients" in spec:
        raise ConfigError(f"{where} cannot mix a preset with raw coefficients")
    if "preset" in spec:
        name = spec["preset"]
        if name == "sphere":
            _check_keys(spec, {"preset", "radius"}, {"preset"}, where)
            radius = _as_number(spec.get("radius", 1.0), f"{where}.radius")
            if radius <= 0:
                raise ConfigError(f"{where}.radius must be positive")
            return SurfaceHandle(sphere(radius), None), dict(spec)
        if name == "torus":
            _check_keys(
                spec, {"preset", "ring_radius", "tube_radius"}, {"preset"}, where
            )
            ring = _as_number(spec.get("ring_radius", 1.0), f"{where}.ring_radius")
            tube = _as_number(spec.get("tube_radius", 1 / 3), f"{where}.tube_radius")
            if not 0 < tube < ring:
                raise ConfigError(f"{where}: need 0 < tube_radius < ring_radius")
            return SurfaceHandle(torus(ring, tube), None), dict(spec)
        if name == "cyclide":
            _check_keys(spec, {"preset", "a", "b", "d"}, {"preset"}, where)
            a = _as_number(spec.get("a", 2.0), f"{where}.a")
            b = _as_number(spec.get("b", 1.9), f"{where}.b")
            d = _as_number(spec.get("d", 1.0), f"{where}.d")
            return SurfaceHandle(cyclide(a, b, d), None), dict(spec)
        if name == "mesh":
            _check_keys(spec, {"preset", "path"}, {"preset", "path"}, where)
            path = spec["path"]
            if not isinstance(path, str):
                raise ConfigError(f"{where}.path must be a string")
            try:
                mesh = load_obj(path)
            except OSError as exc:
                raise ConfigError(f"cannot read mesh file {path!r}: {exc}") from exc
            return SurfaceHandle(None, mesh), dict(spec)
        raise ConfigError(
            f"unknown surface preset {name!r}; "
            "expected sphere, torus, cyclide, or mesh"
        )
    if "coefficients" in spec:
        _check_keys(spec, {"coefficients", "bbox"}, {"coefficients", "bbox"}, where)
        coeff_map = spec["coefficients"]
        if not isinstance(coeff_map, dict) or not coeff_map:
            raise ConfigError(f"{where}.coefficients must be a nonempty object")
        parsed = {}
        dims = set()
        for key, val in coeff_map.items():
            try:
                exponent = tuple(int(part) for part in key.split(","))
            except ValueError:
                raise ConfigError(
                    f"{where}.coefficients key {key!r} is not a comma-separated "
                    "exponent tuple like '2,0,0'"
                ) from None
            if any(e < 0 for e in exponent):
                raise ConfigError(f"{where}.coefficients exponents must be >= 0")
            dims.add(len(exponent))
            parsed[exponent] = _as_number(val, f"{where}.coefficients[{key!r}]")
        if len(dims) != 1:
            raise ConfigError(f"{where}.coefficients keys have mixed lengths")
        dim = dims.pop()
        bbox = np.asarray(spec["bbox"], dtype=float)
        if bbox.shape != (2, dim):
            raise ConfigError(
                f"{where}.bbox must be [[lo...], [hi...]] with {dim} coordinates"
            )
        if not np.all(bbox[0] < bbox[1]):
            raise ConfigError(f"{where}.bbox lower corner must be below upper corner")
        surface = AlgebraicSurface.from_coefficients(dim, parsed, bbox)
        return SurfaceHandle(surface, None), dict(spec)
    raise ConfigError(f"{where} needs either a 'preset' or raw 'coefficients'")


def _parse_restriction(
    spec, handle: SurfaceHandle, surface_spec: dict
) -> BallRestriction:
    where = "restriction"
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    _check_keys(spec, {"center", "radius"}, {"center", "radius"}, where)
    radius = _as_number(spec["radius"], f"{where}.radius")
    if radius <= 0:
        raise ConfigError(f"{where}.radius must be positive")
    if not handle.is_algebraic:
        raise ConfigError("mesh surfaces do not support a restriction")
    center = spec["center"]
    if center == "patch":
        if surface_spec.get("preset") != "cyclide":
            raise ConfigError(
                f"{where}.center 'patch' is only defined for the cyclide preset"
            )
        center = cyclide_patch_center(
            surface_spec.get("a", 2.0),
            surface_spec.get("b", 1.9),
            surface_spec.get("d", 1.0),
        )
    else:
        if not isinstance(center, list):
            raise ConfigError(f"{where}.center must be 'patch' or a coordinate list")
        center = np.asarray(
            [_as_number(c, f"{where}.center entry") for c in center], dtype=float
        )
        if center.shape != (handle.ambient_dim,):
            raise ConfigError(
                f"{where}.center needs {handle.ambient_dim} coordinates"
            )
    return BallRestriction(np.asarray(center, dtype=float), radius)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description shared by every CLI command."""

    surface: SurfaceHandle
    surface_spec: dict
    degrees: tuple[int, ...]
    cardinalities: tuple[int, ...]
    seed: int
    restriction: BallRestriction | None
    target_name: str | None
    sigma_list: tuple[float, ...] | None
    trials: int | None
    output_dir: str
    eval_count: int | None
    kernel_order: int | None
    noise_reference: str

    def target(self):
        """Resolve the named target function, or fail with ConfigError."""
        if self.target_name is None:
            raise ConfigError(
                f"this command needs a 'target'; known names: {sorted(TARGETS)}"
            )
        return TARGETS[self.target_name]

    def default_eval_count(self) -> int:
        """Documented defaults: 2^16 globally, ~8000 on a restricted patch."""
        if self.eval_count is not None:
            return self.eval_count
        return 8192 if self.restriction is not None else 65536


def parse_config(data) -> ExperimentConfig:
    """Validate a decoded JSON object into an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(data, _TOP_KEYS, _TOP_REQUIRED, "config")
    version = _as_int(data["version"], "version")
    if version != CONFIG_VERSION:
        raise ConfigError(
            f"unsupported config version {version}; expected {CONFIG_VERSION}"
        )
    handle, surface_spec = _parse_surface(data["surface"])
    degrees = _int_list(data["degrees"], "degrees", minimum=0)
    cardinalities = _int_list(data["cardinalities"], "cardinalities", minimum=1)
    seed = _as_int(data["seed"], "seed")

    restriction = None
    if data.get("restriction") is not None:
        restriction = _parse_restriction(data["restriction"], handle, surface_spec)

    target_name = data.get("target")
    if target_name is not None:
        if target_name not in TARGETS:
            raise ConfigError(
                f"unknown target {target_name!r}; known names: {sorted(TARGETS)}"
            )

    sigma_list = None
    if data.get("sigma_list") is not None:
        raw = data["sigma_list"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("sigma_list must be a nonempty list")
        sigma_list = tuple(_as_number(s, "sigma_list entry") for s in raw)
        if any(s < 0 for s in sigma_list):
            raise ConfigError("sigma_list entries must be >= 0")

    trials = None
    if data.get("trials") is not None:
        trials = _as_int(data["trials"], "trials")
        if trials < 2:
            raise ConfigError(
                f"trials must be >= 2 (std is undefined otherwise), got {trials}"
            )

    eval_count = None
    if data.get("eval_count") is not None:
        eval_count = _as_int(data["eval_count"], "eval_count")
        if eval_count < 1:
            raise ConfigError("eval_count must be >= 1")

    kernel_order = None
    if data.get("kernel_order") is not None:
        kernel_order = _as_int(data["kernel_order"], "kernel_order")

    noise_reference = data.get("noise_reference", "clean")
    if noise_reference not in ("clean", "exact"):
        raise ConfigError(
            f"noise_reference must be 'clean' or 'exact', got {noise_reference!r}"
        )

    output_dir = data.get("output_dir", "mfmls_out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string")

    return ExperimentConfig(
        surface=handle,
        surface_spec=surface_spec,
        degrees=degrees,
        cardinalities=cardinalities,
        seed=seed,
        restriction=restriction,
        target_name=target_name,
        sigma_list=sigma_list,
        trials=trials,
        output_dir=output_dir,
        eval_count=eval_count,
        kernel_order=kernel_order,
        noise_reference=noise_reference,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
    return parse_config(data)
