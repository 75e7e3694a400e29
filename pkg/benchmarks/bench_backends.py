"""Compare the compiled and pure-Python kernel backends on one workload.

    python benchmarks/bench_backends.py --count 1000 --dims 5000 --features 40:80

Prints one JSON line per (backend, algorithm) with cpu time and the work
counters, then the speed-up of the compiled backend per algorithm. Both
backends must report identical counters.
"""
import argparse
import json
import statistics
import sys
import tempfile
from pathlib import Path

from sparseknn import _backend
from sparseknn.bench import run_once
from sparseknn.datagen import SyntheticSpec, generate
from sparseknn.join import JoinConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--dims", type=int, default=5000)
    ap.add_argument("--features", default="40:80")
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--buffer-pct", type=float, default=50.0)
    ap.add_argument("--algos", default="bf,iib,iiib")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = _backend.available()
    if "cython" not in backends:
        print("compiled backend not built; nothing to compare", file=sys.stderr)
        return 1
    lo, hi = (int(x) for x in args.features.split(":"))
    with tempfile.TemporaryDirectory() as tmp:
        r, s = Path(tmp, "r.sknj"), Path(tmp, "s.sknj")
        generate(SyntheticSpec(args.count, args.dims, (lo, hi), seed=1), r)
        generate(SyntheticSpec(args.count, args.dims, (lo, hi), seed=2, first_id=args.count), s)
        cpu = {}
        for algo in args.algos.split(","):
            config = JoinConfig.for_inputs(r, s, buffer_pct=args.buffer_pct, k=args.k, algorithm=algo)
            work = {}
            for backend in backends:
                with _backend.use(backend):
                    runs = [run_once(r, s, config) for _ in range(args.repeat)]
                counters = runs[0][0]
                cpu[backend, algo] = statistics.median(c.cpu_time for c, _, _ in runs)
                work[backend] = counters.work()
                print(json.dumps({"backend": backend, "algorithm": algo,
                                  "cpu_time": cpu[backend, algo], **counters.work()}))
            if work["python"] != work["cython"]:
                print(f"counter mismatch for {algo}: {work}", file=sys.stderr)
                return 2
        for algo in args.algos.split(","):
            print(f"{algo}: compiled backend {cpu['python', algo] / cpu['cython', algo]:.1f}x faster")
    return 0


if __name__ == "__main__":
    sys.exit(main())
