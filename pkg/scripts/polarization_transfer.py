"""Steady-state N polarisation and 15N hyperfine components versus field."""

import numpy as np

from _common import parser, save
from nvpair.io import Table
from nvpair.poltransfer import NuclearParams, RateParams, nuclear_polarization_model, polarization_curve


def main():
    args = parser(__doc__).parse_args()
    params = RateParams(d_fs=2881.0)
    b, pol = polarization_curve(params, np.linspace(400.0, 620.0, 2201))
    mag = np.abs(pol)
    above = b[mag >= mag.max() / 2]
    print(f"|P| peaks at {b[np.argmax(mag)]:.1f} G, half-max width {above[-1] - above[0]:.1f} G")
    save(Table("poltransfer", {"b_gauss": b, "polarization": pol}), args.out_dir, "polarization_transfer",
         {"d_fs": 2881.0})
    bn, i1, i2 = nuclear_polarization_model(params, 3.03, np.linspace(460.0, 570.0, 1101), NuclearParams())
    k = np.argmin(np.abs(bn - params.b_resonance))
    print(f"at resonance the hyperfine components are {i1[k]:.3f} and {i2[k]:.3f}")
    print("wrote", save(Table("nuclear", {"b_gauss": bn, "i_component1": i1, "i_component2": i2}),
                        args.out_dir, "nuclear_polarization", {"d_fs": 2881.0}))


if __name__ == "__main__":
    main()
