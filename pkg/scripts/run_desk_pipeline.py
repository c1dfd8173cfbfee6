"""Run the whole CLI pipeline at desk scale on the bundled MNIST subset.

    python scripts/run_desk_pipeline.py runs/desk --samples 20 --jobs 4

Steps: ingest (train and test), pretrain, finetune, train-mlp, corrupt,
impute with both networks, evaluate against the mean baseline, report.
"""
import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from swarmimpute import cli  # noqa: E402


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", nargs="?", default="runs/desk")
    parser.add_argument("--data", default=str(ROOT / "data" / "mnist"))
    parser.add_argument("--train-limit", type=int, default=2000)
    parser.add_argument("--samples", type=int, default=20)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    out, data = Path(args.out), Path(args.data)
    if not (data / "mnist5k-train-images-idx3-ubyte").exists():
        sys.exit(f"no IDX files in {data}; run scripts/prepare_mnist_subset.py first")
    common = ["--out", str(out), "--scale", "desk"]
    steps = [
        ["ingest", "--images", data / "mnist5k-train-images-idx3-ubyte",
         "--labels", data / "mnist5k-train-labels-idx1-ubyte", "--limit", args.train_limit],
        ["ingest", "--images", data / "mnist5k-test-images-idx3-ubyte",
         "--labels", data / "mnist5k-test-labels-idx1-ubyte", "--name", "test"],
        ["pretrain", "--train", out / "train"],
        ["finetune", "--train", out / "train"],
        ["train-mlp", "--train", out / "train"],
        ["corrupt", "--test", out / "test", "--samples", args.samples],
        ["impute", "--model", out / "deep_ae.model", "--masked", out / "masked", "--jobs", args.jobs],
        ["impute", "--model", out / "mlp_ae.model", "--masked", out / "masked", "--jobs", args.jobs,
         "--method", "mlp_ae+fa"],
        ["evaluate", "--values", out / "deep_ae+fa-values.csv", out / "mlp_ae+fa-values.csv",
         "--train", out / "train", "--masked", out / "masked"],
        ["report", "--values", out / "deep_ae+fa-values.csv", "--timing", out / "deep_ae+fa-timing.csv"],
    ]
    for step in steps:
        argv = [str(x) for x in step] + common
        print("swarmimpute", " ".join(argv), flush=True)
        code = cli.main(argv)
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
