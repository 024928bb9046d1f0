"""Drive the command line tool: validate a config, sweep it, and read the slope table.

Run: python3 demos/06_cli_sweep.py
"""

import json
import tempfile
from pathlib import Path

from batchedmg.harness.cli import main

cfg = {
    "algorithm": "main",
    "env": {"name": "rps_chain", "horizon": 2, "n_states": 2, "seed": 0},
    "K_grid": [1024, 4096, 16384],
    "seeds": [0, 1, 2],
    "constants": {"C": 0.05, "C1": 0.05, "bias_scale": 0.0},
    "grid_resolution": 4,
}
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "sweep.json"
    path.write_text(json.dumps(cfg, indent=2))
    assert main(["validate-config", "--config", str(path)]) == 0
    assert main(["sweep", "--config", str(path), "--out", str(Path(tmp) / "out")]) == 0
    print((Path(tmp) / "out" / "slopes.csv").read_text())
