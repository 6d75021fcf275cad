import numpy as np
import pytest

from dislo.currents import DislocationSystem, Loop
from dislo.dissipation import DissipationParams
from dislo.energy import (ElasticDensityParams, HexMesh, Loading, Ramp,
                          shear_profile)
from dislo.evolve import Model, run
from dislo.grid import Grid
from dislo.slipfield import BurgersTable, Mollifier

SQUARE = np.array([[0.3, 0.3, 0.5], [0.7, 0.3, 0.5],
                   [0.7, 0.7, 0.5], [0.3, 0.7, 0.5]])


def square_loop(center_z=0.5, mult=1):
    nodes = SQUARE.copy()
    nodes[:, 2] = center_z
    return Loop(nodes, mult, 0)


def make_model(grid_cells=8, mesh_cells=8, amplitude=None, ramp_rate=1.0,
               weight=0.02, **kw):
    grid = Grid(grid_cells)
    loading = None
    if amplitude is not None:
        loading = Loading(profile=shear_profile(amplitude), ramp=Ramp(rate=ramp_rate))
    defaults = dict(
        grid=grid,
        mesh=HexMesh(mesh_cells),
        table=BurgersTable([[1.0, 0.0, 0.0]]),
        eta=Mollifier.for_grid(grid, 3.0),
        elastic=ElasticDensityParams(r=6.0),
        dparams=DissipationParams(weights=np.array([np.eye(3) * weight])),
        zeta=0.1,
        loading=loading,
        gamma_cap=4.0,
    )
    defaults.update(kw)
    return Model(**defaults)


@pytest.fixture(scope="session")
def shear_model():
    return make_model(amplitude=400.0, n_random=8, stability_probe_moves=2)


@pytest.fixture(scope="session")
def shear_result(shear_model):
    return run(shear_model, DislocationSystem([square_loop()]), T=1.0, N=10, seed=0)


@pytest.fixture(scope="session")
def shear_slow_result():
    model = make_model(amplitude=400.0, ramp_rate=0.5, n_random=8,
                       stability_probe_moves=2)
    return run(model, DislocationSystem([square_loop()]), T=2.0, N=10, seed=0)


@pytest.fixture(scope="session")
def quiescent_result():
    model = make_model(grid_cells=6, mesh_cells=6, n_random=4,
                       stability_probe_moves=2)
    return run(model, DislocationSystem([square_loop()]), T=1.0, N=3, seed=0)
