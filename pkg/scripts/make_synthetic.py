"""Write a synthetic implicit-feedback dataset as a user<TAB>item file.

Default sizes mirror the smallest benchmark in the literature this package
targets (about 1,000 users, 900 items, 15 interactions per user).
"""

import argparse

from deql.synthetic import latent_interactions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--users", type=int, default=1006)
    ap.add_argument("--items", type=int, default=896)
    ap.add_argument("--rank", type=int, default=8)
    ap.add_argument("--avg-items", type=float, default=15.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    R = latent_interactions(args.users, args.items, args.rank, args.avg_items, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("# user\titem\n")
        for u, i in zip(R.users.tolist(), R.items.tolist()):
            fh.write(f"u{u}\ti{i}\n")
    print(f"wrote {R.nnz} interactions ({R.num_users} users, {R.num_items} items) to {args.out}")


if __name__ == "__main__":
    main()
