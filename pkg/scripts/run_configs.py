"""Run every config in scripts/configs through the CLI.

The subcommand is taken from the file name prefix (amse_, phase_, expand_,
qstar_, mc_).  Outputs land in the directory given by --out-dir.

    python scripts/run_configs.py --out-dir results [--skip-mc]
"""
import argparse
import pathlib
import sys

from bridgelab.cli import main as cli_main

HERE = pathlib.Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--skip-mc", action="store_true")
    args = ap.parse_args()
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for cfg in sorted((HERE / "configs").glob("*.json")):
        sub = cfg.stem.split("_")[0]
        if sub == "mc" and args.skip_mc:
            continue
        argv = [sub, "--config", str(cfg), "--out", str(out / f"{cfg.stem}.csv")]
        if args.threads:
            argv += ["--threads", str(args.threads)]
        code = cli_main(argv)
        print(f"{cfg.name}: exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
