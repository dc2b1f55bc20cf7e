"""Smoke test for the lowdeg_py extension.

Build and run from the workspace root:

    cargo build --release -p lowdeg-py --features extension-module
    cp target/release/liblowdeg_py.so crates/py/python/lowdeg_py.so
    python3 crates/py/python/smoke_test.py
"""

import os
import sys
import tempfile
from fractions import Fraction

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import lowdeg_py as ld


def frac(text):
    return Fraction(text)


def main():
    print("lowdeg_py", ld.__version__)

    honest = ld.gen_table(5, 4, 3, 1, "honest", seed=1)
    assert len(honest) == 780, len(honest)
    est = ld.agreement(honest)
    assert est["value"] == "1/1", est
    assert ld.agreement(honest, mode="pointwise")["value"] == "1/1"

    planted = ld.gen_table(7, 4, 3, 1, "planted", seed=2, rho=0.8)
    exact = frac(ld.agreement(planted)["value"])
    mc = ld.agreement(planted, mode="mc", samples=40_000, seed=3)["value"]
    assert abs(float(exact) - mc) < 0.02, (exact, mc)

    rep = ld.decode(planted, seed=4)
    g = planted.header()["generator"]["g"]
    assert rep["results"][0]["g"] == g
    assert abs(rep["results"][0]["support_value"] - 0.8) < 0.05

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "t.json")
        h = planted.save(path)
        again = ld.Table.load(path)
        assert again.content_hash() == h == planted.content_hash()
        assert ld.Table.from_json(planted.to_json()).content_hash() == h

    plane = ld.gen_table(5, 4, 2, 1, "planted", seed=5, rho=0.8)
    eq = ld.equivalence(plane, 2, 1, 0)
    names = {i["name"]: i["pass"] for i in eq["inequalities"]}
    assert names["upper_bound"] and names["point_check_below_partial"], names

    g6 = ld.spectral_report("g6", 3, 3)
    assert abs(g6["residual"]) < 1e-9 and 0.5 <= g6["ratio"] <= 2.0, g6
    suite = ld.sampling_suite("g6", 3, 2, seed=6, trials=5, indicators=10)
    assert suite["all_pass"], suite

    try:
        ld.spectral_report("g1", 4, 2)
    except ld.LowdegError as e:
        assert e.args[1] == 2, e.args
    else:
        raise AssertionError("expected an out-of-range error")

    try:
        ld.gen_table(4, 3, 3, 1, "honest", seed=1)
    except ld.LowdegError as e:
        assert "not prime" in e.args[0]
    else:
        raise AssertionError("expected a not-prime error")
    assert ld.gen_table(4, 3, 3, 1, "honest", seed=1, e=2).q == 4

    print("smoke test passed")


if __name__ == "__main__":
    main()
