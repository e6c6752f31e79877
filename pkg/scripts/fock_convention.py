"""Gram-based P_k(0) against k lam / pi for Fock weights of several strengths."""
import argparse
import math

from bergkern import exact as ex
from bergkern import geometry as geo


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--lam", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--k", type=int, nargs="+", default=[8, 16, 32, 64])
    p.add_argument("--radius", type=float, default=1.0)
    args = p.parse_args(argv)

    print("lam    k    dim   P_k(0)            rel.err")
    for lam in args.lam:
        for k in args.k:
            basis = ex.section_basis(geo.fock([lam]), k, radius=args.radius)
            v = ex.bergman_kernel_function(basis, [0j])
            print(f"{lam:<5g}  {k:<3d}  {basis.dim:<4d}  {v:<16.12f}  {abs(v / (k * lam / math.pi) - 1):.1e}")


if __name__ == "__main__":
    main()
