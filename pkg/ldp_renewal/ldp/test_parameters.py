import pytest

from .exceptions import ConfigError
from .parameters import RateParameters, SimulationParameters

@pytest.mark.parametrize("cls", [RateParameters, SimulationParameters])
def test_every_field_is_described(cls):
    params = cls()
    assert set(params.keys()) == set(cls.defaults) == set(cls.name_map) == set(cls.description_map)
    assert len(params.names()) == len(params.descriptions()) == len(params.keys())

def test_defaults_and_overrides():
    params = RateParameters({"objective_noise": 1e-3}, beta_tol=1e-6)
    assert params.objective_noise == 1e-3
    assert params.beta_tol == 1e-6
    assert params.gamma_rtol == RateParameters.defaults["gamma_rtol"]
    assert RateParameters.decode(params.encode()) == params

@pytest.mark.parametrize("values", [
    {"objective_noise": 2.0},
    {"objective_noise": 0.0},
    {"outward_slope": 1.0},
    {"newton": 3},
])
def test_invalid(values):
    with pytest.raises(ConfigError):
        RateParameters(values)

def test_simulation_validation():
    with pytest.raises(ConfigError):
        SimulationParameters(confidence=1.0)
    with pytest.raises(ConfigError):
        SimulationParameters(n_runs=50)
