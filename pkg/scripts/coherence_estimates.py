"""Closed-form coherence estimates next to the published values."""

from _common import parser, save
from nvpair.coherence import all_reports
from nvpair.io import Table


def main():
    args = parser(__doc__).parse_args()
    reports = all_reports()
    for r in reports:
        quoted = "" if r.published_value is None else f" (published {r.published_value:g})"
        print(f"{r.name}: {r.formula_output:.4g} {r.units}{quoted}")
    table = Table("coherence", {"estimator": [r.name for r in reports],
                                "formula_output": [r.formula_output for r in reports],
                                "units": [r.units for r in reports]},
                  comments=[f"{r.name}: {r.convention_notes}" for r in reports])
    print("wrote", save(table, args.out_dir, "coherence_estimates", {}))


if __name__ == "__main__":
    main()
