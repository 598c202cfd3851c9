"""Sum rate versus elements per microstrip at K=N_d=5, rho=10 dB.

The SDR arm gets slow beyond a few hundred elements, so the closed-form
arm is the default here. Extra flags are forwarded to
``onebit-dma sweep-elements``.

    python scripts/fig1c.py --trials 20 --out fig1c.csv
"""
import sys

from onebit_dma.cli import main

DEFAULTS = ["sweep-elements", "--k", "5", "--nd", "5", "--rho-db", "10",
            "--grid", "20:260:40", "--arms", "dma-closed-form,fd"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
