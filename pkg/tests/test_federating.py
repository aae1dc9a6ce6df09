"""Tests for partitioning, signing, verification, aggregation and the federation loop."""

import json
from collections import OrderedDict

import numpy as np
import pytest
import torch

from dronerf.src.errors import ConfigurationError, ValidationError
from dronerf.src.federating.clients.client import (
    federation_seed_schedule,
    local_train,
    partition_data,
)
from dronerf.src.federating.config.config import (
    REASON_BAD_SIGNATURE,
    REASON_DIGEST,
    REASON_DUPLICATE,
    REASON_NON_FINITE,
    REASON_NONCE,
    REASON_NORM,
    REASON_ROUND,
    REASON_SHAPE,
    REASON_UNREGISTERED,
)
from dronerf.src.federating.pipeline.orchestrator import FederationConfig, run_federation
from dronerf.src.federating.security.signing import (
    KeyRegistry,
    compute_digest,
    generate_keypair,
    sign_update,
)
from dronerf.src.federating.security.verifier import VerificationPolicy, update_norm, verify_update
from dronerf.src.federating.server.aggregator import (
    aggregate,
    get_parameters,
    weighted_average,
)
from dronerf.src.federating.server.coordinator import FederationServer, select_clients
from dronerf.src.modeling.training.centralized_trainer import train_centralized
from dronerf.src.modeling.training.sgd_trainer import TrainingConfig


CLASSES = ["DJI", "FutabaT7"]
NONCE = "00" * 16


def _params(*values):
    return OrderedDict((f"w{i}", np.full((2, 3), v, dtype=np.float32)) for i, v in enumerate(values))


def _signed(params, client_id=0, round_index=0, nonce=NONCE, count=10, seed=0):
    return sign_update(params, client_id, round_index, nonce, count, generate_keypair(seed, client_id))


def _registry(*client_ids, seed=0):
    registry = KeyRegistry()
    for cid in client_ids:
        registry.register(cid, generate_keypair(seed, cid))
    return registry


def _verify(update, registry, global_params, round_index=0, nonce=NONCE, **kwargs):
    return verify_update(update, registry, round_index, nonce, global_params, **kwargs)


# ----------------------------------------------------------------------------
# partitioning and selection
# ----------------------------------------------------------------------------

def test_partition_is_disjoint_and_balanced(make_toy_dataset):
    dataset = make_toy_dataset(CLASSES + ["FutabaT14"], per_class=20, seed=2)
    shards = partition_data(dataset, 5, seed=1)
    assert [len(s) for s in shards] == [12] * 5
    assert all(s.counts() == {"DJI": 4, "FutabaT7": 4, "FutabaT14": 4} for s in shards)

    seeds = [item.seed for shard in shards for item in shard.items]
    assert sorted(seeds) == sorted(item.seed for item in dataset.items)
    assert len(set(seeds)) == len(seeds)

    again = partition_data(dataset, 5, seed=1)
    assert [[i.seed for i in s.items] for s in shards] == [[i.seed for i in s.items] for s in again]


def test_single_client_gets_everything_in_order(toy_two_class):
    (shard,) = partition_data(toy_two_class, 1)
    assert [i.seed for i in shard.items] == [i.seed for i in toy_two_class.items]


def test_partition_floor(toy_two_class):
    with pytest.raises(ValidationError):
        partition_data(toy_two_class, 5, min_per_class=3)


def test_select_clients():
    assert select_clients(5, 5, 3, seed=0) == [0, 1, 2, 3, 4]
    assert len(select_clients(5, 1, 3, seed=0)) == 1
    assert select_clients(25, 7, 4, seed=9) == select_clients(25, 7, 4, seed=9)
    picks = {tuple(select_clients(25, 3, t, seed=9)) for t in range(10)}
    assert len(picks) > 1
    with pytest.raises(ValidationError):
        select_clients(5, 6, 0, seed=0)


# ----------------------------------------------------------------------------
# signing and verification
# ----------------------------------------------------------------------------

def test_sign_then_verify_accepts():
    params = _params(1.0, 2.0)
    verdict = _verify(_signed(params), _registry(0), _params(0.0, 0.0))
    assert verdict["accepted"] and verdict["reason"] is None
    assert verdict["norm"] == pytest.approx(np.sqrt(6 * 1.0 + 6 * 4.0))


def test_round_is_bound_into_digest():
    params = _params(1.0)
    assert compute_digest(params, 0, 1, NONCE, 5) != compute_digest(params, 0, 2, NONCE, 5)
    assert compute_digest(params, 0, 1, NONCE, 5) != compute_digest(params, 0, 1, NONCE, 6)


def test_unregistered_and_foreign_keys_rejected():
    update = _signed(_params(1.0), client_id=3)
    assert _verify(update, _registry(0), _params(0.0))["reason"] == REASON_UNREGISTERED
    foreign = _signed(_params(1.0), client_id=0, seed=99)
    assert _verify(foreign, _registry(0), _params(0.0))["reason"] == REASON_BAD_SIGNATURE


def test_tamper_classes_are_always_rejected():
    registry = _registry(0)
    global_params = _params(0.0, 0.0)
    rng = np.random.default_rng(0)
    for trial in range(50):
        params = _params(*rng.normal(size=2))

        flipped = OrderedDict((k, v.copy()) for k, v in params.items())
        raw = flipped["w1"].reshape(-1).view(np.uint8)
        raw[int(rng.integers(raw.size))] ^= 1 << int(rng.integers(8))
        update = _signed(params).with_parameters(flipped)
        assert _verify(update, registry, global_params)["reason"] == REASON_DIGEST

        poisoned = OrderedDict((k, v.copy()) for k, v in params.items())
        poisoned["w0"][0, int(rng.integers(3))] = np.nan if trial % 2 else np.inf
        assert _verify(_signed(poisoned), registry, global_params)["reason"] == REASON_NON_FINITE

        stale = _signed(params, round_index=trial)
        assert _verify(stale, registry, global_params, round_index=trial + 1)["reason"] == REASON_ROUND

        foreign = _signed(params, seed=1000 + trial)
        assert _verify(foreign, registry, global_params)["reason"] == REASON_BAD_SIGNATURE


def test_nonce_duplicate_shape_and_norm_checks():
    registry = _registry(0)
    global_params = _params(0.0, 0.0)
    update = _signed(_params(1.0, 1.0))

    assert _verify(update, registry, global_params, nonce="ff" * 16)["reason"] == REASON_NONCE
    assert _verify(update, registry, global_params, seen_clients={0})["reason"] == REASON_DUPLICATE
    assert _verify(update, registry, _params(0.0))["reason"] == REASON_SHAPE
    assert _verify(update, registry, global_params, norm_bound=1.0)["reason"] == REASON_NORM
    assert _verify(update, registry, global_params, norm_bound=10.0)["accepted"]


def test_norm_policy_uses_previous_median():
    policy = VerificationPolicy(norm_factor=10.0)
    assert policy.bound_for([]) is None
    assert policy.bound_for([1.0, 2.0, 30.0]) == pytest.approx(20.0)
    assert VerificationPolicy(norm_bound=3.0).bound_for([1.0]) == 3.0
    with pytest.raises(ConfigurationError):
        VerificationPolicy(norm_factor=0.0).validate()


def test_registry_round_trip(tmp_path):
    registry = _registry(0, 1, 2)
    restored = KeyRegistry.load(registry.save(tmp_path / "keys.yaml"))
    assert restored.to_records() == registry.to_records()
    update = _signed(_params(1.0), client_id=2)
    assert _verify(update, restored, _params(0.0))["accepted"]


# ----------------------------------------------------------------------------
# aggregation
# ----------------------------------------------------------------------------

def test_aggregate_reference_values():
    two = [_signed(_params(1.0), client_id=0), _signed(_params(3.0), client_id=1)]
    assert np.all(aggregate(two)["w0"] == 2.0)

    single = _signed(_params(1.234567), client_id=0)
    assert np.array_equal(aggregate([single])["w0"], single.parameters["w0"])

    weighted = [
        _signed(_params(0.0), client_id=0, count=1),
        _signed(_params(3.0), client_id=1, count=2),
        _signed(_params(6.0), client_id=2, count=1),
    ]
    assert np.allclose(aggregate(weighted)["w0"], 3.0)

    with pytest.raises(ValidationError):
        aggregate([])


def test_weighted_average_matches_oracle():
    rng = np.random.default_rng(3)
    sets = [OrderedDict(a=rng.normal(size=(4, 5)), b=rng.normal(size=7)) for _ in range(4)]
    weights = rng.integers(1, 50, size=4)
    result = weighted_average(sets, weights)
    for name in ("a", "b"):
        oracle = sum(w * s[name] for w, s in zip(weights, sets)) / weights.sum()
        np.testing.assert_allclose(result[name], oracle, rtol=0, atol=1e-12)

    equal = weighted_average(sets, [5, 5, 5, 5])
    np.testing.assert_allclose(equal["a"], np.mean([s["a"] for s in sets], axis=0), atol=1e-12)


def test_integer_entries_stay_integer():
    sets = [OrderedDict(n=np.array(3, dtype=np.int64)), OrderedDict(n=np.array(4, dtype=np.int64))]
    result = weighted_average(sets, [1, 3])
    assert result["n"].dtype == np.int64 and int(result["n"]) == 4


def test_rejected_sentinel_never_reaches_aggregate():
    registry = _registry(0, 1, 2)
    with_sentinel = FederationServer(registry, _params(0.0), seed=0)
    nonce = with_sentinel.open_round(0)
    honest = [_signed(_params(v), client_id=i, nonce=nonce) for i, v in enumerate((1.0, 2.0))]
    sentinel = _signed(_params(1e6), client_id=2, nonce=nonce).with_parameters(_params(1e6 + 1))
    for update in honest + [sentinel]:
        with_sentinel.receive(update)
    assert with_sentinel.verdicts[2]["reason"] == REASON_DIGEST
    first, _, _ = with_sentinel.close_round()

    without = FederationServer(registry, _params(0.0), seed=0)
    without.open_round(0)
    for update in honest:
        without.receive(update)
    second, _, _ = without.close_round()
    assert all(np.array_equal(first[k], second[k]) for k in first)


def test_all_rejected_round_carries_model_forward():
    server = FederationServer(_registry(0), _params(5.0), seed=0)
    server.open_round(0)
    server.receive(_signed(_params(1.0), client_id=0, nonce="bad"))
    params, norm, carried = server.close_round()
    assert carried and norm == 0.0
    assert np.all(params["w0"] == 5.0)


# ----------------------------------------------------------------------------
# local training and the federation loop
# ----------------------------------------------------------------------------

def test_local_train_zero_epochs_and_determinism(tiny_model, toy_two_class):
    global_params = get_parameters(tiny_model)
    config = TrainingConfig(lr=0.05, batch_size=8)
    unchanged, count = local_train(global_params, toy_two_class, CLASSES, config, [], tiny_model)
    assert count == len(toy_two_class)
    assert all(np.array_equal(unchanged[k], global_params[k]) for k in global_params)

    first, _ = local_train(global_params, toy_two_class, CLASSES, config, [1, 2], tiny_model)
    second, _ = local_train(global_params, toy_two_class, CLASSES, config, [1, 2], tiny_model)
    assert all(np.array_equal(first[k], second[k]) for k in first)
    assert any(not np.array_equal(first[k], global_params[k]) for k in first)


def test_update_norm_covers_learned_weights_only(tiny_model, toy_two_class):
    global_params = get_parameters(tiny_model)
    config = TrainingConfig(lr=0.05, batch_size=4)
    honest, _ = local_train(global_params, toy_two_class, CLASSES, config, [1, 2], tiny_model)

    counters = [k for k in honest if k.endswith("num_batches_tracked")]
    assert counters and all(honest[k] != global_params[k] for k in counters)

    weights = dict(tiny_model.named_parameters())
    expected = np.sqrt(sum(
        np.sum((honest[k].astype(np.float64) - global_params[k].astype(np.float64)) ** 2)
        for k in weights
    ))
    assert update_norm(honest, global_params) == pytest.approx(expected)

    counters_only = get_parameters(tiny_model)
    for k in counters:
        counters_only[k] = honest[k]
    assert update_norm(counters_only, global_params) == 0.0


def test_scaled_weight_update_rejected_by_median_bound(tiny_model, toy_two_class):
    global_params = get_parameters(tiny_model)
    config = TrainingConfig(lr=0.05, batch_size=4)
    honest, _ = local_train(global_params, toy_two_class, CLASSES, config, [1, 2], tiny_model)
    honest_norm = update_norm(honest, global_params)

    weights = set(dict(tiny_model.named_parameters()))
    poisoned = OrderedDict(
        (k, (global_params[k] + 20.0 * (v - global_params[k])).astype(v.dtype) if k in weights else v)
        for k, v in honest.items()
    )
    bound = VerificationPolicy(norm_factor=10.0).bound_for([honest_norm])
    registry = _registry(0, 1)

    accepted = _verify(_signed(honest, client_id=0), registry, global_params, norm_bound=bound)
    rejected = _verify(_signed(poisoned, client_id=1), registry, global_params, norm_bound=bound)
    assert accepted["accepted"]
    assert rejected["reason"] == REASON_NORM
    assert rejected["norm"] == pytest.approx(20.0 * honest_norm, rel=1e-3)


def _fed_config(**overrides):
    base = dict(n_clients=1, clients_per_round=1, rounds=3, local_epochs=1, lr=0.05,
                batch_size=8, eval_every=1, norm_factor=None)
    base.update(overrides)
    return base


def test_single_client_federation_equals_centralized_sgd(tiny_config, toy_two_class):
    seed = 17
    fed_model, history, _ = run_federation(
        toy_two_class, CLASSES, tiny_config, _fed_config(), seed,
        show_progress=False, verbose=False,
    )
    schedule = [s for round_seeds in federation_seed_schedule(seed, 3, 1, 0) for s in round_seeds]
    central, _ = train_centralized(
        toy_two_class, CLASSES, tiny_config, {"epochs": 3, "lr": 0.05, "batch_size": 8},
        seed=seed, epoch_seeds=schedule, show_progress=False, verbose=False,
    )
    assert len(history) == 3
    for (name, a), (_, b) in zip(fed_model.state_dict().items(), central.state_dict().items()):
        assert torch.equal(a, b), name


def test_zero_rounds_returns_initialization(tiny_config, toy_two_class):
    model, history, _ = run_federation(toy_two_class, CLASSES, tiny_config, _fed_config(rounds=0), 5,
                                       show_progress=False, verbose=False)
    fresh, _ = train_centralized(toy_two_class, CLASSES, tiny_config, {"epochs": 0}, seed=5,
                                 show_progress=False, verbose=False)
    assert history == []
    for (name, a), (_, b) in zip(model.state_dict().items(), fresh.state_dict().items()):
        assert torch.equal(a, b), name


def test_malicious_client_rejected_every_round(tmp_path, tiny_config, make_toy_dataset):
    dataset = make_toy_dataset(CLASSES, per_class=20, seed=3)
    config = _fed_config(n_clients=4, clients_per_round=4, rounds=3, behaviours={2: "tamper"})
    evaluations = []
    _, history, stats = run_federation(
        dataset, CLASSES, tiny_config, config, 8,
        evaluate=lambda model, t: evaluations.append(t) or {"accuracy": 0.5},
        history_path=tmp_path / "rounds.jsonl", checkpoint_dir=tmp_path / "ckpt",
        run_id="malicious", show_progress=False, verbose=False,
    )
    assert len(history) == 3
    for record in history:
        assert sorted(record.verdicts) == record.selected == [0, 1, 2, 3]
        rejected = [cid for cid, v in record.verdicts.items() if not v["accepted"]]
        assert rejected == [2]
        assert record.verdicts[2]["reason"] == REASON_DIGEST
    assert stats.rejections[REASON_DIGEST] == 3
    assert evaluations == [0, 1, 2]
    assert len(list((tmp_path / "ckpt").glob("*.ckpt"))) == 3

    lines = (tmp_path / "rounds.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert first["round"] == 0 and first["run_id"] == "malicious"
    assert [v["reason"] for v in first["verdicts"]] == [None, None, REASON_DIGEST, None]


@pytest.mark.parametrize("behaviour, reason, rounds_rejected", [
    ("nan", REASON_NON_FINITE, 2),
    ("foreign-key", REASON_BAD_SIGNATURE, 2),
    ("replay", REASON_ROUND, 1),
])
def test_adversarial_behaviours(tiny_config, make_toy_dataset, behaviour, reason, rounds_rejected):
    dataset = make_toy_dataset(CLASSES, per_class=12, seed=4)
    config = _fed_config(n_clients=3, clients_per_round=3, rounds=2, behaviours={1: behaviour})
    _, history, stats = run_federation(dataset, CLASSES, tiny_config, config, 2,
                                       show_progress=False, verbose=False)
    assert stats.rejections[reason] == rounds_rejected
    assert all(record.verdicts[0]["accepted"] and record.verdicts[2]["accepted"] for record in history)


def test_history_is_reproducible(tiny_config, make_toy_dataset):
    dataset = make_toy_dataset(CLASSES, per_class=12, seed=5)
    config = _fed_config(n_clients=3, clients_per_round=2, rounds=2)
    runs = [run_federation(dataset, CLASSES, tiny_config, config, 11, show_progress=False, verbose=False)
            for _ in range(2)]
    assert [r.to_dict() for r in runs[0][1]] == [r.to_dict() for r in runs[1][1]]
    for (name, a), (_, b) in zip(runs[0][0].state_dict().items(), runs[1][0].state_dict().items()):
        assert torch.equal(a, b), name


def test_threaded_clients_match_sequential(tiny_config, make_toy_dataset):
    dataset = make_toy_dataset(CLASSES, per_class=12, seed=6)
    results = []
    for workers in (1, 3):
        config = _fed_config(n_clients=3, clients_per_round=3, rounds=1, workers=workers)
        model, _, _ = run_federation(dataset, CLASSES, tiny_config, config, 4,
                                     show_progress=False, verbose=False)
        results.append(model.state_dict())
    for name in results[0]:
        assert torch.equal(results[0][name], results[1][name]), name


def test_federation_config_validation():
    with pytest.raises(ConfigurationError):
        FederationConfig(n_clients=2, clients_per_round=3).validate()
    with pytest.raises(ConfigurationError):
        FederationConfig(behaviours={0: "sneaky"}).validate()
    assert FederationConfig.from_dict({"behaviours": {"1": "tamper"}}).behaviours == {1: "tamper"}
