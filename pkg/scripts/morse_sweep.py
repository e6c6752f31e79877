"""Stratum integrals I_0, I_1 for CP^1 weights with a growing bump and for perturbed tori."""
import argparse

import numpy as np

from bergkern import geometry as geo
from bergkern import morse as mo


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--eps", type=float, nargs="+", default=list(np.round(np.linspace(0, 2, 9), 3)))
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--torus-eps", type=float, nargs="*", default=[0.0, 0.1, 0.3])
    args = p.parse_args(argv)

    print("family  eps      I0          I1          I0-I1")
    for eps in args.eps:
        rep = mo.morse_report(geo.cp1_fs(eps=eps, sigma=args.sigma))
        i0, i1 = rep.q_integrals
        print(f"cp1_fs  {eps:<7.3f}  {i0:.8f}  {i1:.8f}  {i0 - i1:.8f}")
    for eps in args.torus_eps:
        rep = mo.morse_report(geo.torus(1, 1.0, eps))
        i0, i1 = rep.q_integrals
        print(f"torus   {eps:<7.3f}  {i0:.8f}  {i1:.8f}  {i0 - i1:.8f}")


if __name__ == "__main__":
    main()
