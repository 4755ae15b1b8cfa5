"""Sweep b at fixed a=1 on a split directory and print test Recall@20 / NDCG@20.

b=0 uses the single-inverse closed form; b>0 uses the fast per-column solver.
lambda and p stay fixed so the effect of b is isolated.
"""

import argparse

from deql.coefficients import Hyperparameters
from deql.data import load_split
from deql.metrics import evaluate
from deql.pipeline import fit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("split_dir")
    ap.add_argument("--b-list", default="0,0.1,0.25,0.5,0.75,1,1.25,1.5,1.75,2")
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.0)
    args = ap.parse_args()
    data, _, _ = load_split(args.split_dir)
    print("b\trecall@20\tndcg@20")
    for b in (float(x) for x in args.b_list.split(",")):
        if b == 0:
            hp = Hyperparameters(1.0, 0.0, args.p, args.lam, "b_zero")
        else:
            hp = Hyperparameters(1.0, b, args.p, args.lam, "l2" if args.lam else "plain")
        model = fit(data.train, hp, drop_zero_items=True).model
        rep = evaluate(model, data.test_input, data.test_target, (20,))
        print(f"{b:g}\t{rep.recall_at_k[20]:.4f}\t{rep.ndcg_at_k[20]:.4f}")


if __name__ == "__main__":
    main()
