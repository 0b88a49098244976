"""Python front end for the rclab simulator.

Every call runs to completion in C++ with the GIL released and returns plain
dicts and lists.
"""

import json
import os

from . import _core
from ._core import AlgorithmRejected

__all__ = ["ab", "run_workload", "sweep", "noise_demo", "lint", "oracle_mcs", "AlgorithmRejected"]


def _text(scenario):
    if scenario is None:
        return ""
    return json.dumps(scenario)


def ab(scenario=None, base_dir=".", threads=0):
    """Paired A/B test; `scenario` is a dict in the scenario-file schema."""
    return json.loads(_core.ab(_text(scenario), os.fspath(base_dir), threads))


def run_workload(kind="peak_throughput", algorithm="minstrel", scenario=None, base_dir="."):
    """One workload under one algorithm. `kind` is a name or a workload dict."""
    return json.loads(_core.run_workload(_text(scenario), json.dumps(kind), algorithm, os.fspath(base_dir)))


def sweep(rssi_dbm=-60.0, frames_per_rate=10, cycles=100, seed=1):
    return json.loads(_core.sweep(rssi_dbm, frames_per_rate, cycles, seed))


def noise_demo(seed=1, trials=200, constant=False, b_second=False, identical=False):
    return json.loads(_core.noise_demo(seed, trials, constant, b_second, identical))


def lint(source, verify=False):
    return json.loads(_core.lint(source, verify))


def oracle_mcs(rssi_dbm):
    return _core.oracle_mcs(rssi_dbm)
