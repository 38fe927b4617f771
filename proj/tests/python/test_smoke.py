import json
import math
from pathlib import Path

import pytest

import tabgrpo

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def test_reference_output_scores_full_reward():
    text = (FIXTURES / "german_output.txt").read_text()
    parsed = tabgrpo.parse_response(text)
    assert parsed.well_formed
    assert parsed.answer == "good"
    reward = tabgrpo.score(text, ["good", "bad"], "good")
    assert (reward.format, reward.validity, reward.correctness, reward.total) == (0.5, 0.5, 1.0, 2.0)


def test_advantages_are_centered():
    adv = tabgrpo.relative_advantages([2.0, 0.5, 1.0, 0.0])
    assert abs(sum(adv)) < 1e-12
    assert abs(math.sqrt(sum(a * a for a in adv) / len(adv)) - 1.0) < 1e-12
    assert tabgrpo.relative_advantages([1.0, 1.0]) == [0.0, 0.0]
    assert tabgrpo.group_stats([1.0, 0.0]) == (0.5, 0.5)


def test_objective_terms():
    assert tabgrpo.clipped_term(1.5, 1.0) == pytest.approx(1.2)
    assert tabgrpo.clipped_term(0.5, -1.0) == pytest.approx(-0.8)
    assert tabgrpo.kl_term(-1.0, -1.0) == 0.0
    assert tabgrpo.kl_term(0.0, -math.log(2.0)) == pytest.approx(1.0 - math.log(2.0))


def test_weighted_f1():
    assert tabgrpo.weighted_f1(["1", "0", "1", "0"], ["1", "1", "0", "0"], ["1", "0"]) == 0.5
    assert tabgrpo.weighted_f1([None, None], ["1", "0"], ["1", "0"]) == 0.0
    with pytest.raises(tabgrpo.TabgrpoError):
        tabgrpo.weighted_f1(["1"], ["1", "0"], ["1", "0"])


def test_policy_init_is_near_uniform():
    arch = tabgrpo.Architecture()
    arch.vocab_size = 12
    theta = tabgrpo.init_params(arch, 3)
    assert len(theta) == arch.param_count()
    lps = tabgrpo.logprobs(arch, theta, [4, 5, 6], [7, 8, 9])
    assert all(abs(lp + math.log(12)) < 0.1 for lp in lps)


def test_cli_train_and_eval(tmp_path):
    config = {
        "seed": 1,
        "out_dir": str(tmp_path / "run"),
        "task.id": "threshold",
        "data.features": ["income", "debt"],
        "data.synthetic.rule": "threshold",
        "data.synthetic.rule_features": ["income"],
        "data.synthetic.decimals": 1,
        "data.synthetic.n": 30,
        "policy.embed_dim": 4,
        "policy.hidden_dim": 8,
        "grpo.group_size": 4,
        "grpo.epochs": 1,
        "grpo.prompts_per_step": 8,
        "sampler.train.max_len": 6,
        "sampler.eval.max_len": 6,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    status, out, err = tabgrpo.run_cli(["train", "--config", str(path)])
    assert status == 0, err
    assert "best epoch 1" in out
    rows = (tmp_path / "run" / "metrics.csv").read_text().splitlines()
    assert len(rows) == 2
    ckpt = tmp_path / "run" / "checkpoints" / "epoch_001.ckpt"
    status, out, err = tabgrpo.run_cli(["eval", "--config", str(path), "--checkpoint", str(ckpt)])
    assert status == 0, err
    assert out.splitlines()[1].startswith("1,test,")
    status, _, _ = tabgrpo.run_cli(["eval", "--config", str(path), "--checkpoint", str(tmp_path / "none")])
    assert status != 0
