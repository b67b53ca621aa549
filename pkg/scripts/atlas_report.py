#!/usr/bin/env python3
"""Print a structural summary of every atlas fixture: shape, circulant
size, expanded girth, and the shift-sum gauge report where applicable."""

import sys

from qcfactor import ising, qc, tanner
from qcfactor.construct import atlas, atlas_names


def main() -> int:
    for name in atlas_names():
        obj = atlas(name)
        if isinstance(obj, qc.ExponentMatrix):
            H = qc.expand(obj)
            g, _ = tanner.qc_girth_search(obj)
            gauge = ising.shbf_gauge_check(obj)
            print(
                f"{name}: {obj.rows}x{obj.cols} blocks, L={obj.L}, "
                f"expanded {H.nrows}x{H.ncols} nnz={H.nnz}, "
                f"girth={'acyclic' if g is None else g}, "
                f"gauge rows={''.join('T' if r else 'f' for r in gauge.rows)}"
            )
        else:
            G = tanner.tanner(obj)
            g = tanner.girth(G)
            print(
                f"{name}: binary {obj.nrows}x{obj.ncols} nnz={obj.nnz}, "
                f"girth={'acyclic' if g is None else g}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
