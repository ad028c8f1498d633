import warnings

import pytest

from holo_rmt import channel, geometry
from holo_rmt.validate import desk_geometry


@pytest.fixture(scope="session")
def desk():
    """Desk-scale geometry (n=37) with both profiles, built once per run."""
    geom = desk_geometry(3.38)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lat = (geometry.rx_lattice(geom), geometry.tx_lattice(geom))
        sep = channel.profile_separable_isotropic(*lat, geom.wavelength)
        nonsep = channel.profile_nonseparable_gaussian(sep, *lat, 1.0)
    return {"geom": geom, "lattices": lat, "sep": sep, "nonsep": nonsep}


@pytest.fixture(autouse=True)
def _silence_profile_floor_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings(
            "ignore", message="variance profile entries below the positivity floor.*")
        yield
