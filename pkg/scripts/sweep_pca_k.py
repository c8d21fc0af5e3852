"""Accuracy as a function of the PCA size, per voting scale and for the full vote.

    python3 scripts/sweep_pca_k.py --ks 5,10,20,50,100 --snr-db 5
"""
import argparse

from curvelet_faces.cli import parse_int_list
from curvelet_faces.ensemble import PipelineConfig
from curvelet_faces.harness import DatasetSpec, SplitPolicy, run_experiment, synthetic_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", default="synthetic", help="dataset directory or 'synthetic'")
    ap.add_argument("--ks", default="5,10,20,50,100")
    ap.add_argument("--snr-db", type=float, default=5.0, help="synthetic noise level")
    ap.add_argument("--train-count", type=int, default=5)
    args = ap.parse_args()

    if args.dataset == "synthetic":
        data = synthetic_dataset(snr_db=args.snr_db, seed=0)
    else:
        data = DatasetSpec(args.dataset)
    policy = SplitPolicy(args.train_count)
    subsets = {"scale 1": (1,), "scale 2": (2,), "scale 3": (3,), "scale 4": (4,), "vote": (1, 2, 3, 4)}
    print("k".rjust(5) + "".join(name.rjust(10) for name in subsets))
    for k in parse_int_list(args.ks):
        row = [run_experiment(data, policy, PipelineConfig(pca_k=k, scales=s)).accuracy
               for s in subsets.values()]
        print(f"{k:5d}" + "".join(f"{a:10.3f}" for a in row))


if __name__ == "__main__":
    main()
