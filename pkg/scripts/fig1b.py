"""Sum rate versus number of microstrips at K=5, N_e=20, rho=10 dB.

Extra flags are forwarded to ``onebit-dma sweep-microstrips``.

    python scripts/fig1b.py --trials 50 --out fig1b.csv
"""
import sys

from onebit_dma.cli import main

DEFAULTS = ["sweep-microstrips", "--k", "5", "--ne", "20", "--rho-db", "10",
            "--grid", "5:25:5", "--arms", "dma-sdr,dma-closed-form,fd"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
