"""Command-line entry point for hyperforecast.

Usage:
    python manage.py gen-synthetic --n 8 --t 400 --m 2 --out runs/toy
    python manage.py train --data runs/toy/synthetic.csv --set model.tau=12 --out runs/toy
    python manage.py forecast --data runs/toy/synthetic.csv --checkpoint runs/toy/checkpoint.ckpt
    python manage.py evaluate --data runs/toy/synthetic.csv --checkpoint runs/toy/checkpoint.ckpt
    python manage.py ablate --synthetic --seed 3 --out runs/ablation
    python manage.py export-structure --data ... --checkpoint ... --attention
    python manage.py sweep --synthetic --grid model.m=2,5,8
"""

import os

from dotenv import load_dotenv

load_dotenv()
os.environ.setdefault("HF_ENV", "dev")

from hyperforecast.cli import cli


if __name__ == "__main__":
    cli(prog_name="manage.py")
