"""Smoke test for the Python bindings.

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import json
import os
import tempfile

import cmsdr_py


def main():
    cfg = cmsdr_py.default_config()
    assert cfg["method"] == "CM_SDP"

    cfg.update(taps=[[1.0, 0.0]], snr_db=None, order=0, frame_len=64, seed=3)
    report = cmsdr_py.run_trial(cfg)
    assert report["ber"] == 0.0, report
    assert report["solver"]["status"] == "Optimal"
    assert cmsdr_py.run_trial(json.dumps(cfg))["ber"] == 0.0

    alist = cmsdr_py.generate_code(24, 12, seed=1)
    info = cmsdr_py.check_code(alist)
    assert info["asymmetric"] and info["rank"] == 12, info

    # min t  s.t.  (t, 3, 4) in SOC(3)
    problem = {
        "format": "cmsdr-conic-v1", "n": 1, "m": 3, "c": [1.0], "b": [0.0, 3.0, 4.0],
        "A": {"rows": [0], "cols": [0], "values": [-1.0]},
        "cones": {"soc": [3]},
    }
    sol = cmsdr_py.solve(problem)
    assert abs(sol["primal_objective"] - 5.0) < 1e-5, sol

    with tempfile.TemporaryDirectory() as d:
        out = os.path.join(d, "sweep.csv")
        res = cmsdr_py.sweep([10.0], 2, ["MMSE_GENIE", "CMA_SGD"], {"order": 2, "frame_len": 32}, out)
        assert len(res["reports"]) == 4
        with open(out) as fh:
            assert len(fh.read().splitlines()) == 5

    try:
        cmsdr_py.run_trial({"frame_len": 0})
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")
    print("python bindings ok")


if __name__ == "__main__":
    main()
