"""Rolling-decision market simulator with a ground-truth elasticity oracle."""

from .consumers import ConsumerSpec, ConsumerState, JobSpec, ThermalParams, consumer_decide
from .forecaster import ForecasterSpec, ForecasterState, fit_forecaster, plain_forecast, rolling_forecast
from .prices import PriceProcessSpec, synth_prices
from .scenario import Scenario, SimulationResult, builtin_scenario, load_scenario, run_scenario, write_oracle_csv
from .simulate import OracleResult, SimulationTrace, oracle_at, simulate
from .weather import WeatherSpec, synth_weather

__all__ = [
    "ConsumerSpec",
    "ConsumerState",
    "ForecasterSpec",
    "ForecasterState",
    "JobSpec",
    "OracleResult",
    "PriceProcessSpec",
    "Scenario",
    "SimulationResult",
    "SimulationTrace",
    "ThermalParams",
    "WeatherSpec",
    "builtin_scenario",
    "consumer_decide",
    "fit_forecaster",
    "load_scenario",
    "oracle_at",
    "plain_forecast",
    "rolling_forecast",
    "run_scenario",
    "simulate",
    "synth_prices",
    "synth_weather",
    "write_oracle_csv",
]
