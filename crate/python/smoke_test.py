"""Smoke test of the gmwmx Python bindings.

Build and install the extension first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/gmwmx_py-*.whl

then run `python python/smoke_test.py`.
"""

import json
import math
import os
import tempfile

import gmwmx_py as g


def main():
    model = g.NoiseModel("wn(10)+pl(6,0.9)")
    assert model.param_names == ["sigma2_wn", "sigma2_pl", "alpha_pl"], model.param_names
    assert model.params == [10.0, 6.0, 0.9]
    assert model.is_stationary and not g.NoiseModel("wn+fl").is_stationary

    path = model.simulate(1024, seed=1)
    assert len(path) == 1024 and all(math.isfinite(v) for v in path)

    miss = g.MissingnessModel(0.05, 0.2)
    assert abs(miss.mu - 0.8) < 1e-15
    mask = miss.simulate(50_000, seed=2)
    est = g.MissingnessModel.estimate(mask)
    assert abs(est.p1 - 0.05) < 0.01 and abs(est.p2 - 0.2) < 0.02, est

    wv, counts = g.empirical_wv(path, 5)
    assert len(wv) == 5 and counts[0] == 1023
    theo = model.wavelet_variance(1024, 5, miss)
    assert len(theo) == 5 and all(v > 0 for v in theo)

    epochs, values, mask = g.simulate_setting("A1", n=3650, missing=3, seed=4)
    fit = g.estimate(values, mask, "wn+pl", t0=epochs[0])
    assert fit.beta_names[:2] == ["intercept", "trend"]
    assert len(fit.beta) == 6 and len(fit.phi) == 6
    for b, se, (lo, hi), row in zip(fit.beta, fit.std_errors, fit.intervals, range(6)):
        assert se == math.sqrt(fit.phi[row][row])
        assert lo < b < hi
    assert fit.gamma_names == model.param_names
    report = json.loads(fit.to_json())
    assert [b["estimate"] for b in report["beta"]] == fit.beta

    with tempfile.TemporaryDirectory() as d:
        f = os.path.join(d, "s.mom")
        with open(f, "w") as fh:
            fh.write("# offset 51546\n51544 1.0\n51545 2.0\n51547 4.0\n")
        e, v, z, offsets = g.read_mom(f)
        assert z == [1, 1, 0, 1] and v == [1.0, 2.0, 0.0, 4.0] and offsets == [51546.0]

    try:
        g.NoiseModel("wn+bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown component accepted")

    print("python smoke test passed:", fit)


if __name__ == "__main__":
    main()
