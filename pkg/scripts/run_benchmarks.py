"""Run every shipped instance through each relaxation method and tabulate the outcome.

    python3 scripts/run_benchmarks.py [--methods substitution,augmentation,lc] [--json out.json]
"""

import argparse
import json
import time

from daerelax import instances
from daerelax.relax import RelaxationOptions, relax
from daerelax.textio import parse_dae

# the ring modulator needs the affine selection for substitution to succeed
RING_SELECTION = {1: {"p": (0, 0, 1, 1, 1, 1) + (0,) * 9, "q": (1,) * 15,
                      "r": 10, "I": (2, 3, 4, 5, 9, 11, 12), "J": (2, 4, 5, 9, 10, 11, 12)}}


def run(name, method):
    sys = parse_dae(instances.text(name))
    overrides = RING_SELECTION if name == "ring_modulator" else {}
    t0 = time.perf_counter()
    rep = relax(sys, RelaxationOptions(method=method, overrides=overrides))
    return {
        "instance": name,
        "method": method,
        "status": rep.final_status,
        "delta_hats": [int(d) if d != float("-inf") else None for d in rep.delta_hats],
        "steps": len(rep.steps),
        "size": rep.final_system.n,
        "determinant": rep.final_determinant,
        "error": rep.error_type,
        "seconds": round(time.perf_counter() - t0, 3),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--methods", default="substitution,augmentation,lc")
    ap.add_argument("--instances", default=",".join(instances.NAMES))
    ap.add_argument("--json", help="write the rows here")
    args = ap.parse_args()

    rows = [run(n, m) for n in args.instances.split(",") for m in args.methods.split(",")]
    head = f"{'instance':16} {'method':13} {'status':14} {'delta-hat':14} {'n':>3} {'seconds':>8}  error"
    print(head)
    print("-" * len(head))
    for r in rows:
        dh = "->".join("-inf" if d is None else str(d) for d in r["delta_hats"])
        print(f"{r['instance']:16} {r['method']:13} {r['status']:14} {dh:14} {r['size']:>3} "
              f"{r['seconds']:>8.3f}  {r['error'] or ''}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
