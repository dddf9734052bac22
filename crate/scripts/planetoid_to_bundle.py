#!/usr/bin/env python3
"""Convert a Planetoid citation dataset (Cora, Citeseer, Pubmed) to a bundle.

Input is the raw Planetoid directory with files ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}.
Output is a bundle directory:

    manifest.json   {"name", "n", "m_pairs", "F", "C"}
    edges.tsv       header "i<TAB>j", then one undirected pair per line with i < j
    features.csv    n rows of F comma-separated values, no header
    labels.txt      n lines, one class index each

Self-loops and duplicate pairs are dropped. Citeseer's isolated test nodes
without features get zero rows and the label of class 0, matching the usual
loaders; check the printed statistics against the published table.

Usage: planetoid_to_bundle.py <raw_dir> <name> <out_dir>
"""

import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main(raw_dir: str, name: str, out_dir: str) -> None:
    raw = Path(raw_dir)
    x, y, tx, ty, allx, ally, graph = (load(raw, name, p) for p in ["x", "y", "tx", "ty", "allx", "ally", "graph"])
    test_index = [int(line) for line in open(raw / f"ind.{name}.test.index")]
    test_sorted = np.sort(test_index)

    if name == "citeseer":
        full = range(min(test_index), max(test_index) + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - min(test_sorted), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - min(test_sorted), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    labels = np.vstack((ally, ty))
    labels[test_index, :] = labels[test_sorted, :]
    features = np.asarray(features.todense())
    labels = labels.argmax(axis=1)
    n = features.shape[0]

    pairs = set()
    for i, nbrs in graph.items():
        for j in nbrs:
            if i != j and i < n and j < n:
                pairs.add((min(i, j), max(i, j)))
    pairs = sorted(pairs)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"name": name, "n": n, "m_pairs": len(pairs), "F": features.shape[1], "C": int(labels.max()) + 1}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    with open(out / "edges.tsv", "w") as f:
        f.write("i\tj\n")
        f.writelines(f"{i}\t{j}\n" for i, j in pairs)
    with open(out / "features.csv", "w") as f:
        for row in features:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    (out / "labels.txt").write_text("".join(f"{int(c)}\n" for c in labels))
    print(json.dumps({**manifest, "directed_edges": 2 * len(pairs)}))


if __name__ == "__main__":
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    main(*sys.argv[1:])
