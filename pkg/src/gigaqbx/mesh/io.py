"""Mesh container and diagnostic exports.

Container layout (all little-endian)::

    8 bytes   magic b"GQBXMESH"
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header
    ...       float64 node block, shape (K, Np, 3), C order

The header carries ``version``, ``order``, ``stage``, ``nelements``,
``nodes_per_element`` and the genealogy arrays ``root``, ``parent`` and
``ref_vertices`` (``K x 3 x 2``).
"""
import csv
import json
import struct

import numpy as np

from .discretization import SurfaceDiscretization

MAGIC = b"GQBXMESH"
VERSION = 1


def save_mesh(path, disc: SurfaceDiscretization):
    header = {
        "version": VERSION,
        "order": int(disc.order),
        "stage": disc.stage,
        "nelements": int(disc.nelements),
        "nodes_per_element": int(disc.nodes.shape[1]),
        "dtype": "<f8",
        "root": disc.root.tolist(),
        "parent": disc.parent.tolist(),
        "ref_vertices": disc.ref_vertices.tolist(),
    }
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        f.write(np.ascontiguousarray(disc.nodes, dtype="<f8").tobytes())


def load_mesh(path):
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise ValueError(f"{path}: not a mesh container")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen))
        if header["version"] != VERSION:
            raise ValueError(f"unsupported mesh container version {header['version']}")
        shape = (header["nelements"], header["nodes_per_element"], 3)
        nodes = np.frombuffer(f.read(), dtype="<f8").reshape(shape).copy()
    return SurfaceDiscretization(
        header["order"], nodes, header["stage"], np.array(header["root"], dtype=np.int64),
        np.array(header["ref_vertices"], dtype=np.float64).reshape(-1, 3, 2),
        np.array(header["parent"], dtype=np.int64))


def write_element_diagnostics(path, disc: SurfaceDiscretization):
    """CSV with one row per element: eta, scaled curvature, extreme curvatures."""
    k1, k2 = disc.curvatures_at()
    kappa = disc.scaled_curvature() if disc.order >= 2 else np.zeros(disc.nelements)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["element", "root", "eta", "scaled_curvature", "k_max", "k_min"])
        for i in range(disc.nelements):
            w.writerow([i, int(disc.root[i]), repr(float(disc.eta[i])), repr(float(kappa[i])),
                        repr(float(k1[i].max())), repr(float(k2[i].min()))])
