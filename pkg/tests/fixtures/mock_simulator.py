"""
Stand-in external simulator: reads one JSON request {"id", "x"} from stdin and
answers {"id", "f1", "f2", "g"} on stdout.

Modes (first argument): ok (default), nan, fail, bad-id, sleep.
"""

import json
import sys
import time


def respond(x):
    f1 = sum(v * v for v in x)
    f2 = sum((v - 1.0) ** 2 for v in x)
    g = sum(x) - 0.75 * len(x)
    return f1, f2, g


def main() -> int:
    mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
    request = json.loads(sys.stdin.readline())
    if mode == "fail":
        print("simulated crash", file=sys.stderr)
        return 3
    if mode == "sleep":
        time.sleep(float(sys.argv[2]) if len(sys.argv) > 2 else 5.0)
    f1, f2, g = respond(request["x"])
    if mode == "nan":
        f1 = float("nan")
    request_id = request["id"] + 1 if mode == "bad-id" else request["id"]
    print(json.dumps({"id": request_id, "f1": f1, "f2": f2, "g": g}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
