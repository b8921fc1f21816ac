"""Instance-aware separator configuration for a branch-and-cut MILP solver.

Instances, schedules, solver results and configs cross the boundary as JSON; this
package decodes them into plain dicts.
"""

import json
import os

from . import _l2sep
from ._l2sep import (
    ConfigError,
    NumericalError,
    ParseError,
    RefusalError,
    ValidationError,
    aggregate,
    clipped_reward,
    config_bits,
    config_string,
    gap_improvement,
    rel_improvement,
    separators,
    stages,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "ParseError",
    "RefusalError",
    "ValidationError",
    "aggregate",
    "clipped_reward",
    "config_bits",
    "config_string",
    "gap_improvement",
    "generate",
    "preset",
    "read_report",
    "rel_improvement",
    "restrict",
    "run_pipeline",
    "run_stage",
    "separators",
    "solve",
    "stages",
]


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def generate(cls, seed, a=0, b=0):
    """Generate one instance of a benchmark class; returns the instance document."""
    return json.loads(_l2sep.generate(cls, seed, a, b))


def solve(instance, schedule=None, params=None, seed=0):
    """Solve an instance (dict or JSON text). The default schedule turns every separator on."""
    return json.loads(
        _l2sep.solve(
            _dump(instance),
            None if schedule is None else _dump(schedule),
            None if params is None else _dump(params),
            seed,
        )
    )


def restrict(configs, instances, table, size, threshold=None, r_min=-1.5):
    """Greedy subspace restriction of a reward table given as rows of clipped rewards."""
    return json.loads(_l2sep.restrict(configs, instances, table, size, threshold, r_min))


def preset(cls, which="desk"):
    """Experiment configuration preset: desk, full or smoke."""
    return json.loads(_l2sep.preset(cls, which))


def run_pipeline(config, out, jobs=1, force=False):
    """Run every missing stage of an experiment and return the report directory."""
    _l2sep.run_pipeline(_dump(config), os.fspath(out), jobs, force)
    return os.path.join(os.fspath(out), "report")


def run_stage(config, out, stage, jobs=1):
    _l2sep.run_stage(_dump(config), os.fspath(out), stage, jobs)


def read_report(out):
    """Rows of report/results.csv as dicts."""
    import csv

    with open(os.path.join(os.fspath(out), "report", "results.csv"), newline="") as f:
        rows = list(csv.DictReader(f))
    for r in rows:
        for k in ("median", "iqm", "mean", "std"):
            r[k] = float(r[k])
        r["count"] = int(r["count"])
    return rows
