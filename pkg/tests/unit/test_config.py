"""
Unit tests for run configuration loading, validation and resolution.
"""
import pytest

from src.core.config import (
    AttackConfig,
    DataConfig,
    MineConfig,
    RunConfig,
    dump_run_config,
    load_run_config,
    parse_run_config,
    write_resolved_config,
)
from src.utils.errors import ConfigurationError


def test_defaults_are_valid():
    cfg = RunConfig()
    assert cfg.attack.method == "minmax"
    assert cfg.attack.mine.k == 500 and cfg.attack.mine.d_prime == 128
    assert cfg.augmentation.retrain_epoch_ratio == 1.5


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigurationError) as exc:
        parse_run_config({"attack": {"alpah": 0.1}})
    assert any("alpah" in e.loc for e in exc.value.errors)


@pytest.mark.parametrize(
    "section,values",
    [
        ("attack", {"epsilon": 0.0}),
        ("attack", {"epsilon": 1.5}),
        ("attack", {"alpha": -0.1}),
        ("attack", {"similarity": "psnr"}),
        ("train", {"batch_size": 0}),
        ("augmentation", {"method": "mixup"}),
        ("calibration", {"rho": 1.0}),
    ],
)
def test_out_of_range_values_are_rejected(section, values):
    with pytest.raises(ConfigurationError):
        parse_run_config({section: values})


def test_data_sources_must_be_complete():
    with pytest.raises(ValueError):
        DataConfig(kind="idx", train_images="train.idx")
    with pytest.raises(ValueError):
        DataConfig(kind="csv")


def test_mine_hidden_widths():
    assert MineConfig(hidden=[]).hidden == []
    with pytest.raises(ValueError):
        MineConfig(hidden=[8, 0])


def test_assignment_is_validated():
    cfg = AttackConfig()
    with pytest.raises(ValueError):
        cfg.iterations = -1


def test_resolved_fills_derived_defaults():
    unsup = RunConfig(attack=AttackConfig(mine=MineConfig(inner_steps=4))).resolved()
    assert unsup.attack.direction == "minimize"
    assert unsup.attack.mine.warmup_steps == 4
    assert unsup.run_id.startswith("dense-ae-")

    sup = parse_run_config({"model": {"kind": "classifier"}, "run_id": "mine"}).resolved()
    assert sup.attack.direction == "maximize"
    assert sup.run_id == "mine"


def test_resolved_keeps_explicit_values():
    cfg = parse_run_config({"attack": {"direction": "maximize", "mine": {"warmup_steps": 0}}}).resolved()
    assert cfg.attack.direction == "maximize"
    assert cfg.attack.mine.warmup_steps == 0


def test_fingerprint_is_stable_and_content_sensitive():
    assert RunConfig().fingerprint() == RunConfig().fingerprint()
    assert RunConfig(run_id="x").fingerprint() == RunConfig().fingerprint()
    assert parse_run_config({"seeds": {"root": 1}}).fingerprint() != RunConfig().fingerprint()


def test_load_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_run_config(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[attack\nalpha = ", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_run_config(broken)


def test_resolved_config_reloads_identically(write_config, tmp_path):
    cfg = load_run_config(write_config())
    path = write_resolved_config(cfg, tmp_path / "resolved-config.toml")
    reloaded = load_run_config(path)
    assert reloaded == cfg.resolved()
    assert dump_run_config(reloaded) == dump_run_config(cfg.resolved())
