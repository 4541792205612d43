import math

import pytest

import seqpm


def test_map_values():
    # T_0.1(0.25) from a 30-digit evaluation.
    assert seqpm.apply_map(0.1, 0.25) == pytest.approx(0.48325824788420185, rel=1e-14)
    assert seqpm.map_derivative(0.1, 0.5) == pytest.approx(2.1, rel=1e-14)
    y = seqpm.apply_map(0.2, 0.3)
    assert seqpm.inverse_left(0.2, y) == pytest.approx(0.3, rel=1e-12)
    assert seqpm.orbit([0.2] * 5, 0.3)[-1] == pytest.approx(0.93741840756091711, rel=1e-12)


def test_ulam_columns_are_stochastic():
    m = seqpm.ulam_matrix(0.2, cells=128)
    sums = [0.0] * 128
    for i in range(128):
        for e in range(m["indptr"][i], m["indptr"][i + 1]):
            sums[m["indices"][e]] += m["data"][e]
    assert max(abs(s - 1.0) for s in sums) < 1e-12
    assert len(m["cuts"]) == 129


def test_decomposition_residual():
    recs = seqpm.decomposition([0.1, 0.2, 0.05] * 20, cells=512)
    assert len(recs) == 59
    assert all(r["martingale_residual"] < 1e-10 for r in recs)
    assert all(r["v"] >= 0.0 for r in recs)


def test_kolmogorov_tail():
    assert seqpm.kolmogorov_tail(1.0) == pytest.approx(0.269999671677355, rel=1e-12)


def test_configs():
    assert "decay" in seqpm.experiment_kinds()
    text = seqpm.default_config("decay")
    assert seqpm.validate(text) == []
    errors = seqpm.validate('kind = "martingale"\n[schedule]\nbeta = 0.2\n[martingale]\nmoment_r = [3]\n')
    assert any("1/(2α)" in e for e in errors)
    with pytest.raises(ValueError):
        seqpm.run("kind = \"decay\"\n[decay]\np = 5\n")


def test_run_decay():
    text = 'kind = "decay"\n[grid]\ncells = 1024\ngrading = 8\n[decay]\nn_max = 400\nfit_hi = 400\n'
    r = seqpm.run(text)
    assert r["kind"] == "decay"
    assert r["passed"] is True
    assert "decay" in r["curves"]
    assert r["curves"]["decay"]["columns"] == ["n", "Lp_norm"]
    assert math.isfinite(r["results"]["fitted_slope"])
