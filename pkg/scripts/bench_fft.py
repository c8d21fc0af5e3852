"""Forward-transform cost relative to one 2-D FFT across image sizes.

    python3 scripts/bench_fft.py --sizes 64,128,256,512
"""
import argparse

from curvelet_faces.cli import parse_int_list
from curvelet_faces.fdct import build_windows
from curvelet_faces.harness import bench_fft


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256,512")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--num-scales", type=int, default=4)
    args = ap.parse_args()
    print(f"{'size':>6} {'fft ms':>9} {'fdct ms':>9} {'ratio':>7} {'redundancy':>11}")
    for n in parse_int_list(args.sizes):
        res = bench_fft(n, args.runs, num_scales=args.num_scales)
        red = build_windows(n, n, args.num_scales).coefficient_count() / (n * n)
        print(f"{n:6d} {res['fft_ms']:9.3f} {res['fdct_ms']:9.3f} {res['ratio']:7.1f} {red:11.2f}")


if __name__ == "__main__":
    main()
