import numpy as np
import pytest
import yaml

from rp_quantizer.core import PhysicalSpace, QuantumDynamics, build_covariance, build_geometry


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="module")
def line_space():
    """s = 0 on the whole time line; the transfer is exact here."""
    geom = build_geometry(2, [], "infinite", "site")
    return PhysicalSpace(build_covariance(geom, 1.0), 2)


@pytest.fixture(scope="module")
def ring_space():
    geom = build_geometry(2, [4], "infinite", "site")
    return PhysicalSpace(build_covariance(geom, 1.0), 1)


@pytest.fixture(scope="module")
def small_dynamics():
    geom = build_geometry(2, [2], "infinite", "site")
    return QuantumDynamics.build(PhysicalSpace(build_covariance(geom, 1.0), 2))


@pytest.fixture(scope="module")
def density_space():
    geom = build_geometry(4, [4], "dirichlet", "site")
    return PhysicalSpace(build_covariance(geom, 1.0), 2)


@pytest.fixture
def minimal_config_dict():
    return {
        "geometry": {"T": 2, "spatial_sizes": [], "time_boundary": "dirichlet", "reflection": "site"},
        "mass": 1.0,
        "truncation": 1,
        "epsilons": [1.0],
        "derivative_cap": 2,
        "seed": 7,
        "samples": {"c1": 3, "c3": 5, "field_bound": 4, "local_field": 3, "lemma": 3},
        "rp_check_degree": 2,
        "wick_order": 6,
        "density": {"degrees": 1, "regions": [{"label": "column", "times": [1, 2], "sites": [[]]}]},
        "language": "en-US",
    }


@pytest.fixture
def write_config(tmp_path):
    def _write(data: dict, name: str = "rpq.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path

    return _write
