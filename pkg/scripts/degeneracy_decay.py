"""P_k(x)/k for the weight |z|^4/4 on a ray through the flat point z = 0."""
import argparse

from bergkern import exact as ex
from bergkern import geometry as geo


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--k", type=int, nargs="+", default=[8, 16, 32, 64])
    p.add_argument("--x", type=float, nargs="+", default=[0.0, 0.1, 0.25, 0.5, 1.0])
    args = p.parse_args(argv)

    model = geo.chart_expression("abs2(z1)^2/4")
    rows = ex.degeneracy_scan(model, args.k, [[complex(x)] for x in args.x])
    print("k     " + "  ".join(f"x={x:<8g}" for x in args.x))
    for k in args.k:
        vals = [r.density for r in rows if r.k == k]
        print(f"{k:<5d} " + "  ".join(f"{v:<10.6f}" for v in vals))
    b0 = [r.b0 for r in rows if r.k == args.k[0]]
    print("b0    " + "  ".join(f"{v:<10.6f}" for v in b0))


if __name__ == "__main__":
    main()
