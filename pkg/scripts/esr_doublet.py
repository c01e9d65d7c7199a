"""ESR spectrum at 40 G with and without the NV-N coupling."""

import numpy as np

from _common import parser, save
from nvpair.io import Table
from nvpair.levels import doublet_frequencies, esr_spectrum
from nvpair.spin import nv_n_pair


def main():
    args = parser(__doc__).parse_args()
    grid = np.linspace(2720.0, 3020.0, 6001)
    coupled = esr_spectrum(nv_n_pair(r_nm=1.5), linewidth=2.0, grid=grid)
    bare = esr_spectrum(nv_n_pair(coupled=False), linewidth=2.0, grid=grid)
    f_a, f_astar = doublet_frequencies(coupled)
    table = Table("spectrum", {"freq_mhz": grid, "coupled": coupled.amplitude, "uncoupled": bare.amplitude},
                  meta={"f_a_mhz": f_a, "f_astar_mhz": f_astar, "splitting_mhz": abs(f_astar - f_a)})
    print(f"AA* doublet at {f_a:.3f} / {f_astar:.3f} MHz, splitting {abs(f_astar - f_a):.3f} MHz")
    print("wrote", save(table, args.out_dir, "esr_doublet", {"b_gauss": 40.0, "r_nm": 1.5}))


if __name__ == "__main__":
    main()
