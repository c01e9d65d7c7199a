"""Hahn echo of the coupled pair and its modulation spectrum."""

import numpy as np

from _common import parser, save
from nvpair.dynamics import eseem_spectrum, hahn_echo_curve
from nvpair.io import Table
from nvpair.levels import doublet_splitting
from nvpair.spin import nv_n_pair


def main():
    p = parser(__doc__)
    p.add_argument("--n14", action="store_true", help="include the 14N nucleus of the N defect")
    args = p.parse_args()
    system = nv_n_pair(r_nm=1.5, n14_on_n=args.n14)
    tau = np.arange(1024) * 0.002
    curve = hahn_echo_curve(system, tau)
    spec = eseem_spectrum(curve)
    name = "echo_eseem_14n" if args.n14 else "echo_eseem"
    save(Table("echo", {"tau_us": curve.tau, "amplitude": curve.amplitude}), args.out_dir, name + "_echo",
         {"n14": args.n14})
    comments = [f"peak freq_mhz={f:.6g} magnitude={m:.6g}" for f, m in spec.peaks]
    print(f"dominant modulation {spec.peaks[0][0]:.3f} MHz; bare-pair ESR splitting {doublet_splitting(nv_n_pair()):.3f} MHz")
    print("wrote", save(Table("eseem", {"freq_mhz": spec.freq, "magnitude": spec.magnitude}, comments=comments),
                        args.out_dir, name + "_spectrum", {"n14": args.n14}))


if __name__ == "__main__":
    main()
