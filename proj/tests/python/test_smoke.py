import json

import numpy as np
import pytest

import coin


def two_experts(dims=(3, 5, 2), seed=0):
    spec = coin.NetworkSpec(list(dims), coin.Activation.Tanh)
    return spec, [coin.init_params(spec, seed + i) for i in range(2)]


def test_param_count_and_forward_shapes():
    spec = coin.NetworkSpec([8, 16, 10])
    assert spec.param_count == 8 * 16 + 16 + 16 * 10 + 10
    p = coin.init_params(spec, 3)
    assert len(p) == spec.param_count
    assert coin.forward(p, np.zeros(8)).shape == (10,)
    assert coin.forward_batch(p, np.ones((5, 8))).shape == (5, 10)
    assert coin.jacobian(p, np.ones(8)).shape == (10, spec.param_count)


def test_init_is_deterministic():
    spec = coin.NetworkSpec([4, 3])
    assert coin.init_params(spec, 9) == coin.init_params(spec, 9)
    assert not (coin.init_params(spec, 9) == coin.init_params(spec, 10))


def test_jacobian_matches_finite_differences():
    spec, (p, _) = two_experts()
    x = np.array([0.3, -0.2, 0.9])
    jac = coin.jacobian(p, x)
    v = p.values
    h = 1e-6
    for k in range(0, len(v), 5):
        up, dn = v.copy(), v.copy()
        up[k] += h
        dn[k] -= h
        fd = (coin.forward(coin.ParamVec(spec, up), x) - coin.forward(coin.ParamVec(spec, dn), x)) / (2 * h)
        assert np.allclose(jac[:, k], fd, atol=1e-7)


def test_diag_fisher_is_full_fisher_diagonal():
    _, (p, _) = two_experts()
    probe = np.random.default_rng(0).normal(size=(12, 3))
    diag = coin.estimate_diag_fisher(p, probe)
    full = coin.full_empirical_fisher(p, probe)
    assert diag.probe_size == 12
    assert np.allclose(diag.values, np.diag(full), rtol=1e-12, atol=1e-15)


def test_coin_merge_closed_form():
    rng = np.random.default_rng(1)
    thetas = [rng.normal(size=6) for _ in range(2)]
    fishers = [rng.uniform(0.1, 2.0, size=6) for _ in range(2)]
    w = coin.CodingWeights([0.5, 0.5])
    lam = 0.1
    num = sum((f + lam) * t for f, t in zip(fishers, thetas))
    den = sum(f + lam for f in fishers)
    assert np.allclose(coin.coin_merge(thetas, fishers, w, lam), num / den, rtol=1e-13)


def test_vanilla_average_of_linear_experts_decodes_exactly():
    spec, experts = two_experts(dims=(3, 2))
    w = coin.CodingWeights.uniform(2)
    coded = coin.vanilla_average(experts, w)
    assert coded.method == "vanilla"
    x = np.array([1.0, -2.0, 0.5])
    outs = [coin.forward(e, x) for e in experts]
    fc = coin.forward(coded.params, x)
    assert np.allclose(fc, coin.combine(outs, w), atol=1e-14)
    for i in range(2):
        assert np.allclose(coin.decode(i, fc, outs, w), outs[i], atol=1e-13)
    probe = np.random.default_rng(2).normal(size=(10, 3))
    assert coin.empirical_coding_loss(coded.params, experts, w, probe) < 1e-20


def test_coin_code_and_tuning():
    _, experts = two_experts()
    probe = np.random.default_rng(3).normal(size=(20, 3))
    fishers = [coin.estimate_diag_fisher(e, probe) for e in experts]
    w = coin.CodingWeights.uniform(2)
    coded = coin.coin_code(experts, fishers, w, 1e-3)
    assert coded.method == "coin" and coded.lambda_ == pytest.approx(1e-3)
    lam, model, scores = coin.tune_lambda(experts, fishers, w, probe)
    assert lam in coin.default_lambda_grid()
    assert len(scores) == len(coin.default_lambda_grid())
    assert coin.empirical_coding_loss(model.params, experts, w, probe) == pytest.approx(min(scores))


def test_checkpoint_round_trip(tmp_path):
    _, (p, _) = two_experts()
    path = tmp_path / "p.json"
    coin.save_checkpoint(str(path), p)
    assert coin.load_checkpoint(str(path)) == p
    with pytest.raises(coin.MissingArtifact):
        coin.load_checkpoint(str(tmp_path / "absent.json"))


def test_validation_errors_map_to_value_error():
    with pytest.raises(ValueError):
        coin.NetworkSpec([4])
    with pytest.raises(coin.ValidationError):
        coin.CodingWeights([0.7, 0.7])


def tiny_config(out):
    return {
        "name": "py-smoke",
        "scenario": {"kind": "label-split", "num_classes": 4, "input_dim": 3, "samples_per_class": 30},
        "network": {"hidden": [6], "activation": "tanh"},
        "train": {"learning_rate": 0.01, "epochs": 3, "batch_size": 16},
        "methods": ["coin", "vanilla"],
        "lambda_grid": [1e-3, 1.0],
        "probe_size": 16,
        "seeds": [0],
        "simulator": {"arrival_rates": [0.05, 0.05], "horizon": 2000},
        "output_dir": str(out),
    }


def test_pipeline_end_to_end(tmp_path):
    cfg = tiny_config(tmp_path / "out")
    h = coin.config_hash(cfg)
    other = dict(cfg, seeds=[5], output_dir="elsewhere")
    assert coin.config_hash(other) == h
    with pytest.raises(coin.MissingArtifact):
        coin.evaluate(cfg)
    coin.train_experts(cfg)
    for m in cfg["methods"]:
        coin.code(cfg, m)
    reps = coin.evaluate(json.dumps(cfg))
    assert {r["method"] for r in reps} == {"coin", "vanilla"}
    for r in reps:
        assert len(r["per_network"]) == 2
        assert r["average"] > 0
    sims = coin.simulate(cfg)
    assert {s["policy"] for s in sims} == {"uncoded", "coded-recovery"}
    assert all(s["completed"] > 0 for s in sims)
    coin.report(cfg)
    assert (tmp_path / "out" / "report" / "summary.md").exists()


def test_bad_config_is_rejected(tmp_path):
    cfg = tiny_config(tmp_path)
    cfg["unknown_key"] = 1
    with pytest.raises(coin.ValidationError):
        coin.train_experts(cfg)
    with pytest.raises(coin.ValidationError):
        coin.train_experts("{not json")
