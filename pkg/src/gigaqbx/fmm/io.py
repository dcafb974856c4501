"""Result exports: potentials as ``.npy`` and CSV, ledger as JSON."""
import csv
import json

import numpy as np


def write_potentials(prefix, targets, potential):
    """Write ``prefix.npy`` (float64 potentials) and ``prefix.csv`` (x, y, z, value)."""
    potential = np.asarray(potential, dtype=np.float64)
    np.save(f"{prefix}.npy", potential)
    with open(f"{prefix}.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "z", "potential"])
        for t, v in zip(np.asarray(targets), potential):
            w.writerow([repr(float(t[0])), repr(float(t[1])), repr(float(t[2])), repr(float(v))])
    return f"{prefix}.npy", f"{prefix}.csv"


def write_ledger(path, ledger):
    with open(path, "w") as f:
        json.dump(ledger.to_dict(), f, indent=2, sort_keys=True)
    return path
