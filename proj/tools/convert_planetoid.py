#!/usr/bin/env python3
"""Convert a Planetoid citation dataset (ind.<name>.* pickles) into a graph bundle.

The Planetoid distribution ships eight files per dataset:
  ind.<name>.x        csr_matrix, features of the labeled training nodes
  ind.<name>.y        ndarray, one-hot labels for ind.<name>.x
  ind.<name>.tx       csr_matrix, features of the test nodes
  ind.<name>.ty       ndarray, one-hot labels for ind.<name>.tx
  ind.<name>.allx     csr_matrix, features of all non-test nodes
  ind.<name>.ally     ndarray, one-hot labels for ind.<name>.allx
  ind.<name>.graph    dict {node: [neighbor, ...]}
  ind.<name>.test.index  text, one test-node id per line (unsorted)

Output bundle layout (consumed by the CLI's --data flag):
  meta.json     {"n": ..., "f": ..., "c": ..., "name": ...}
  edges.tsv     one undirected edge per line, "u<TAB>v" with u < v, deduplicated
  features.tsv  n rows of f tab-separated values
  labels.tsv    n rows, one integer class id per line
  splits.json   {"train": [...], "val": [...], "test": [...]}

Split convention matches the common semi-supervised protocol: the first
len(y) nodes are train, the next 500 are validation, and test.index is the
test set. Requires numpy and scipy (the pickles contain scipy matrices).
"""

import argparse
import json
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def load_pickle(path):
    with open(path, "rb") as f:
        # the upstream pickles were written by python 2
        return pickle.load(f, encoding="latin1")


def load_parts(input_dir, name):
    parts = {}
    for suffix in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        path = os.path.join(input_dir, f"ind.{name}.{suffix}")
        if not os.path.exists(path):
            sys.exit(f"error: missing {path}")
        parts[suffix] = load_pickle(path)
    index_path = os.path.join(input_dir, f"ind.{name}.test.index")
    if not os.path.exists(index_path):
        sys.exit(f"error: missing {index_path}")
    with open(index_path) as f:
        parts["test_index"] = [int(line) for line in f if line.strip()]
    return parts


def assemble(parts):
    """Reorder test rows into their graph positions; returns features, labels, splits."""
    test_idx = np.asarray(parts["test_index"], dtype=np.int64)
    test_sorted = np.sort(test_idx)

    tx, ty = parts["tx"], parts["ty"]
    span = int(test_sorted[-1]) - int(test_sorted[0]) + 1
    if span > tx.shape[0]:
        # citeseer has isolated test nodes that are absent from tx; pad the
        # gap with zero rows (their labels stay all-zero and argmax to 0,
        # matching the usual treatment; they are unreachable by training)
        tx_full = sp.lil_matrix((span, tx.shape[1]))
        tx_full[test_sorted - test_sorted[0], :] = tx
        tx = tx_full.tocsr()
        ty_full = np.zeros((span, ty.shape[1]), dtype=ty.dtype)
        ty_full[test_sorted - test_sorted[0], :] = ty
        ty = ty_full

    features = sp.vstack((parts["allx"], tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    features = features.tocsr()

    onehot = np.vstack((parts["ally"], ty))
    onehot[test_idx, :] = onehot[test_sorted, :]
    labels = onehot.argmax(axis=1)

    n_train = parts["y"].shape[0]
    splits = {
        "train": list(range(n_train)),
        "val": list(range(n_train, n_train + 500)),
        "test": [int(i) for i in test_sorted],
    }
    return features, labels, splits


def undirected_edges(graph, n):
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u == v or u >= n or v >= n:
                continue
            edges.add((u, v) if u < v else (v, u))
    return sorted(edges)


def fmt(v):
    if v == int(v):
        return str(int(v))
    return format(v, ".17g")


def write_bundle(out_dir, name, features, labels, splits, edges):
    os.makedirs(out_dir, exist_ok=True)
    n, f = features.shape
    c = int(labels.max()) + 1

    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump({"n": n, "f": f, "c": c, "name": name}, fh, indent=2)
        fh.write("\n")

    with open(os.path.join(out_dir, "edges.tsv"), "w") as fh:
        for u, v in edges:
            fh.write(f"{u}\t{v}\n")

    dense = features.toarray()
    with open(os.path.join(out_dir, "features.tsv"), "w") as fh:
        for i in range(n):
            fh.write("\t".join(fmt(v) for v in dense[i]))
            fh.write("\n")

    with open(os.path.join(out_dir, "labels.tsv"), "w") as fh:
        for y in labels:
            fh.write(f"{int(y)}\n")

    with open(os.path.join(out_dir, "splits.json"), "w") as fh:
        json.dump(splits, fh, indent=2)
        fh.write("\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input", required=True, help="directory containing the ind.<name>.* files")
    ap.add_argument("--dataset", default="cora", help="dataset name (cora, citeseer, pubmed)")
    ap.add_argument("--out", required=True, help="output bundle directory")
    args = ap.parse_args()

    parts = load_parts(args.input, args.dataset)
    features, labels, splits = assemble(parts)
    edges = undirected_edges(parts["graph"], features.shape[0])
    write_bundle(args.out, args.dataset, features, labels, splits, edges)

    n, f = features.shape
    print(f"wrote {args.out}: n={n} f={f} c={int(labels.max()) + 1} edges={len(edges)} "
          f"train={len(splits['train'])} val={len(splits['val'])} test={len(splits['test'])}")


if __name__ == "__main__":
    main()
