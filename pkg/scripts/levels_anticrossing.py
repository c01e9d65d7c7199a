"""Energy levels of the NV-N pair versus field and the anticrossing near 514 G."""

import numpy as np

from _common import parser, save
from nvpair.io import Table
from nvpair.levels import find_lac, sweep_levels
from nvpair.spin import format_label, nv_n_pair


def main():
    args = parser(__doc__).parse_args()
    config = {"d_fs_mhz": 2881.0, "r_nm": 1.5}
    system = nv_n_pair(d_fs=2881.0, r_nm=1.5)
    sweep = sweep_levels(system, 0.0, 700.0, 351)
    # one column per diabatic branch, labelled at zero field
    branches = sorted(set(sweep.labels[0]), key=lambda lab: sweep.branch(lab)[0])
    cols = {"b_gauss": sweep.b_values}
    for k, lab in enumerate(branches):
        cols[f"E{k}_mhz"] = sweep.branch(lab)
    b_c, gap_c = find_lac(system)
    b_u, _ = find_lac(nv_n_pair(d_fs=2881.0, coupled=False))
    comments = [f"level {k}: {format_label(lab)}" for k, lab in enumerate(branches)]
    table = Table("levels", cols, meta={"b_lac_coupled": b_c, "gap_mhz": gap_c, "b_lac_uncoupled": b_u},
                  comments=comments)
    print(f"uncoupled crossing {b_u:.3f} G; coupled anticrossing {b_c:.3f} G with gap {gap_c:.3f} MHz")
    print("wrote", save(table, args.out_dir, "levels_anticrossing", config))


if __name__ == "__main__":
    main()
