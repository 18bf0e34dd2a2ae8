"""Decompose the race disparity in two-year recidivism on the public COMPAS file.

Usage: python3 scripts/compas_recipe.py compas-scores-two-years.csv
"""
import argparse
import json

from spurdecomp import compas
from spurdecomp.estimate import bootstrap_decomposition


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv")
    ap.add_argument("--replicates", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = compas.load_compas(args.csv)
    est = bootstrap_decomposition(data, compas.diagram(), compas.X0, compas.OUTCOME,
                                  order=compas.ORDER, replicates=args.replicates, seed=args.seed)
    print(json.dumps({"n": data.n, **est.to_dict()}, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
