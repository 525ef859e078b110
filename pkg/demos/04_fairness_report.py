"""
Comparing controllers on fairness and efficiency
================================================

Four controllers on the heterogeneous three-zone network, a few seeds each.
Zone 2 has one gate carrying three times its peers' demand.
"""

import tempfile
from pathlib import Path

import pandas as pd

from fairgate.cli import RunConfig, run_experiments
from fairgate.metrics import format_table
from fairgate.scenario import builtin_path

out = Path(tempfile.mkdtemp(prefix="fairgate_"))
config = RunConfig(builtin_path("heterogeneous"), ("none", "gating", "prop-qb", "maxmin-qb"),
                   seeds=(0, 1, 2), output_dir=out, parallelism=1)

# Same call the CLI makes: traces first, then the two aggregate reports
fair_csv, nfd_csv = run_experiments(config)
report = pd.read_csv(fair_csv, dtype={"zone": str})

pd.set_option("display.width", 160)
cols = ["zone", "controller", "queues_mean", "queues_max", "queues_std"]
print(format_table(report)[cols].to_string(index=False))

# Efficiency for the whole network
print(report.loc[report.zone == "all", ["controller", "flow", "speed"]].to_string(index=False))

# Scatter data for the fundamental diagram, one row per cycle
pts = pd.read_csv(nfd_csv, dtype={"zone": str})
print(pts.groupby(["controller", "zone"])[["n", "flow"]].max().round(1))
print("reports in", out)
