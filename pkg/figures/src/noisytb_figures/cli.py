"""One command per figure: CSV paths in, one image out.

Exit codes: 0 on success, 2 on schema violations or bad arguments.
"""

from __future__ import annotations

import argparse
import sys

from .render import FigureRecipe, render
from .resultcsv import ResultCSVError

_DESCRIPTIONS = {
    1: "mean squared position against the 4/gamma diffusion guides",
    2: "centre-of-mass subdiffusion with the sqrt(t) guide",
    3: "rescaled packet width gamma^2 M[var] vs gamma*t",
    4: "asymptotic width vs gamma over gamma^-2 and gamma^-1.76 guides",
    5: "width and participation number vs gamma*t, wide-open comparison",
}


def _main(figure_id: int, argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog=f"noisytb-fig{figure_id}",
        description=f"Figure {figure_id}: {_DESCRIPTIONS[figure_id]}.")
    parser.add_argument("csv", nargs="+", help="input result CSV files")
    parser.add_argument("-o", "--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        recipe = FigureRecipe.load(figure_id, args.csv, args.out)
        path = render(recipe)
    except ResultCSVError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


def fig1_main(argv=None) -> int:
    return _main(1, argv)


def fig2_main(argv=None) -> int:
    return _main(2, argv)


def fig3_main(argv=None) -> int:
    return _main(3, argv)


def fig4_main(argv=None) -> int:
    return _main(4, argv)


def fig5_main(argv=None) -> int:
    return _main(5, argv)


if __name__ == "__main__":
    sys.exit(_main(int(sys.argv[1]), sys.argv[2:]))
