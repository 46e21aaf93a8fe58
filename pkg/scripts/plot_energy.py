"""Plot energy components and the identity residual from a trajectory CSV.

Usage: python scripts/plot_energy.py out/trajectory.csv [energy.png]
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from inextbeam.io import read_trajectory_csv


def main(argv):
    if not 1 <= len(argv) <= 2:
        print(__doc__.strip(), file=sys.stderr)
        return 1
    cols = read_trajectory_csv(argv[0])
    t = cols["t"]
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for name in ("E_kinetic", "E_inertial", "E_bend", "E_nl", "E_total"):
        if (cols[name] > 0).any():
            top.semilogy(t, cols[name], label=name)
    top.set_ylabel("energy")
    top.legend()
    bottom.plot(t, cols["identity_residual"])
    bottom.set_xlabel("t")
    bottom.set_ylabel("identity residual")
    fig.tight_layout()
    out = argv[1] if len(argv) == 2 else "energy.png"
    fig.savefig(out, dpi=120)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
