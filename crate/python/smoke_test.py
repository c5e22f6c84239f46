"""Smoke test for the qmcse extension module.

Uses an installed `qmcse` if there is one, otherwise loads the library built
by `cargo build -p qmcse-python` from the workspace target directory.
"""
import importlib.machinery
import importlib.util
import json
import math
import os
import sys
import tempfile
from pathlib import Path


def load():
    try:
        import qmcse

        return qmcse
    except ImportError:
        pass
    root = Path(__file__).resolve().parent.parent / "target"
    names = ["libqmcse.so", "libqmcse.dylib", "qmcse.dll"]
    for profile in ("release", "debug"):
        for name in names:
            lib = root / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("qmcse", str(lib))
                spec = importlib.util.spec_from_loader("qmcse", loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("qmcse extension not found; run `cargo build -p qmcse-python` first")


def main():
    q = load()

    assert q.empirical_quantile([5.0, 1.0, 9.0], 0.5) == 5.0
    assert abs(q.ecdf([1.0, 2.0, 3.0], 2.0) - 2 / 3) < 1e-15

    values, flags = q.run_regenerative_rw(30.0, 2.5, 500, seed=7)
    assert len(values) == len(flags) and flags[-1] and sum(flags) == 500
    for est in (
        q.bm_quantile_ci(values, 0.5),
        q.sbm_quantile_ci(values, 0.5),
        q.rs_quantile_ci(values, flags, 0.5),
    ):
        assert est.ci_low <= est.point <= est.ci_high, est
        assert math.isclose(est.half_width(), est.multiplier * est.mcse, rel_tol=1e-12)
        print(est)

    const = q.bm_quantile_ci([2.5] * 100, 0.9)
    assert (const.ci_low, const.ci_high, const.avar) == (2.5, 2.5, 0.0)

    gamma = q.gamma_eps(0.5, 0.1, 0.99999)
    assert abs(gamma - 0.037422) < 5e-7
    assert abs(q.bound_uniform_improved(4700, gamma) - 0.101) < 1e-3
    assert abs(q.bound_uniform(400_000, 25_000, gamma) - 0.101) < 1e-3
    assert q.min_sample_size("uniform-improved", gamma, 0.101) == 4708
    assert 0.0 <= q.regen_prob_accepted(0.3, -0.2, 30.0, 2.5) <= 1.0

    try:
        q.bound_uniform_improved(50, gamma)
    except ValueError as err:
        assert "validity domain" in str(err)
    else:
        raise AssertionError("expected a domain error")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "trace.csv")
        with open(path, "w") as fh:
            fh.write("index,value,regen\n")
            for i, (v, f) in enumerate(zip(values, flags)):
                fh.write(f"{i},{v!r},{int(f)}\n")
        rows = q.quantile_report(path, [0.5, 0.75], ["BM", "SBM", "RS"])
        assert [r.method for r in rows] == ["BM", "SBM", "RS"] * 2

    config = {"kind": "tour-stats", "replications": 2, "tours": [2000], "seed": 3}
    report = json.loads(q.run_experiment(json.dumps(config), workers=2))
    row = report["body"]["rows"][0]
    assert abs(row["mean_length"] - 3.58) < 0.4, row
    assert report["provenance"]["config"]["v"] == 30.0

    assert len(q.run_linchpin(100, seed=1, init="stationary")) == 100
    print(f"qmcse {q.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
