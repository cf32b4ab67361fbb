"""Run simulation configs through the CLI and write one results CSV each.

    python scripts/run_configs.py                 # every config in scripts/configs
    python scripts/run_configs.py gap threshold   # selected ones
    python scripts/run_configs.py --reps 20 gap   # quick look with fewer reps

Results go to results/<name>.csv. Set SMC_WORKERS to use several processes.
"""
import argparse
import configparser
import sys
import tempfile
import time
from pathlib import Path

from smcomplete import cli

HERE = Path(__file__).resolve().parent
CONFIGS = HERE / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", help="config names without .ini")
    ap.add_argument("--reps", type=int, help="override the replication count")
    ap.add_argument("--out-dir", default=str(HERE.parent / "results"))
    args = ap.parse_args()

    names = args.names or sorted(p.stem for p in CONFIGS.glob("*.ini"))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in names:
        path = CONFIGS / f"{name}.ini"
        if not path.exists():
            sys.exit(f"no config {path}")
        if args.reps:
            parser = configparser.ConfigParser(interpolation=None)
            parser.read(path)
            parser["experiment"]["reps"] = str(args.reps)
            tmp = tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False)
            parser.write(tmp)
            tmp.close()
            path = Path(tmp.name)
        start = time.perf_counter()
        code = cli.main(["simulate", str(path), "--out", str(out_dir / f"{name}.csv")])
        print(f"{name}: exit {code} in {time.perf_counter() - start:.0f}s -> {out_dir / name}.csv")
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
