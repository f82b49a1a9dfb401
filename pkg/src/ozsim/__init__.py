"""ozsim: deterministic discrete-event simulator of a gold-backed token exchange.

Four cooperating agents (compliance, issuance, market making, risk control)
operate over a simulated 1-second-block ledger carrying a reserve-ceiling mint
guard and a price-swing circuit breaker.  Scenario configs drive load, fault
injection, and governance schedules; every run is reproducible byte-for-byte
from (config, seed).
"""

from .config import ConfigError, ScenarioConfig, load_bundled, load_config, resolve_scenario
from .runner import RunResult, Simulation, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "Simulation",
    "load_bundled",
    "load_config",
    "resolve_scenario",
    "run_scenario",
    "__version__",
]
