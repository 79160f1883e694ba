import json
import os

import pytest

from pinnwave.exceptions import ConfigurationError, StageError
from pinnwave.experiments import (PRESETS, SWEEP_HEADER, export_points, load_config, run, sweep, theory_report,
                                  bound_from_checkpoint)
from pinnwave.quadrature import uniform_total
from pinnwave.utils import read_csv, read_json


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv('PINNWAVE_OUT', raising=False)
    monkeypatch.delenv('PINNWAVE_WORKERS', raising=False)


def tiny_config(folder, **extra):
    overrides = {'output_dir': str(folder), 'architecture': {'hidden_widths': [4]}, 'train': {'max_iterations': 0},
                 'collocation': {'n': 2}, 'sweep': [{'n': 2}], 'field_nodes': 5, 'seeds': [0],
                 'bound': {'mode': 'empirical', 'norm_grid': 5}}
    overrides.update(extra)
    return load_config(preset='smoke', overrides=overrides)


def test_presets_load():
    for name in PRESETS:
        cfg = load_config(preset=name)
        assert len(cfg.seeds) >= 1
    assert load_config(preset='sweep-small').train['max_iterations'] == 2000


def test_benchmark_preset_names():
    small = load_config(preset='fig5-small')
    assert small.seeds == [0, 1, 2]
    assert small.train['max_iterations'] <= 2000
    assert max(uniform_total(2, blk['n']) for blk in small.sweep) <= 2000
    full = load_config(preset='fig5-full')
    assert full.seeds == list(range(10))
    assert max(uniform_total(2, blk['n']) for blk in full.sweep) == 18750
    assert full.sweep == load_config(preset='sweep-full').sweep


def test_unknown_keys_and_presets(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(overrides={'learning_rate': 1e-3})
    with pytest.raises(ConfigurationError):
        load_config(preset='fig6')
    with pytest.raises(ConfigurationError):
        load_config(overrides={'train': {'momentum': 0.9}})
    with pytest.raises(ConfigurationError):
        load_config(overrides={'bound': {'mode': 'exact'}})


def test_precedence(tmp_path, monkeypatch):
    fname = str(tmp_path/'cfg.json')
    with open(fname, 'w') as f:
        json.dump({'output_dir': 'from_file', 'seeds': [4, 5], 'train': {'max_iterations': 7}}, f)
    cfg = load_config(fname, preset='smoke')
    assert cfg.seeds == [4, 5]
    assert cfg.train['max_iterations'] == 7
    assert cfg.collocation == {'n': 4}
    monkeypatch.setenv('PINNWAVE_OUT', 'from_env')
    assert load_config(fname).output_dir == 'from_env'
    assert load_config(fname, overrides={'output_dir': 'from_cli'}).output_dir == 'from_cli'


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path/'missing.json'))


def test_run_smoke(tmp_path):
    cfg = tiny_config(tmp_path/'a')
    out = run(cfg, progress=False)
    assert out['counts']['M_total'] == uniform_total(2, 2)
    assert out['seeds'] == [0]
    assert os.path.isfile(str(tmp_path/'a'/'run_report.json'))
    assert os.path.isfile(str(tmp_path/'a'/'seed_0_checkpoint.json'))
    assert os.path.isfile(str(tmp_path/'a'/'fields_seed_0'/'field_abs_error_t2.csv'))
    header, rows = read_csv(str(tmp_path/'a'/'run_summary.csv'))
    assert header == SWEEP_HEADER and len(rows) == 1
    agg = out['aggregate']
    assert agg['E_T']['min'] == agg['E_T']['mean'] == agg['E_T']['max']
    assert 'bound_empirical' in agg and 'bound_lemma' not in agg


def test_run_deterministic_and_resumable(tmp_path):
    first = run(tiny_config(tmp_path/'a'), progress=False)
    second = run(tiny_config(tmp_path/'b'), progress=False)
    assert first['aggregate']['E_T'] == second['aggregate']['E_T']
    stored = read_json(str(tmp_path/'a'/'seed_0.json'))
    again = run(tiny_config(tmp_path/'a'), progress=False)
    assert again['per_seed'][0]['train_seconds'] == stored['timing']['train_seconds']


def test_sweep_single_setting(tmp_path):
    cfg = tiny_config(tmp_path)
    reports = sweep(cfg, progress=False)
    assert len(reports) == 1
    header, rows = read_csv(str(tmp_path/'sweep.csv'))
    assert header == SWEEP_HEADER
    assert len(rows) == 1
    assert int(rows[0][0]) == uniform_total(2, 2)
    assert os.path.isdir(str(tmp_path/'M{:d}'.format(uniform_total(2, 2))))


def test_bound_from_checkpoint(tmp_path):
    cfg = tiny_config(tmp_path)
    run(cfg, progress=False)
    out = bound_from_checkpoint(cfg, str(tmp_path/'seed_0_checkpoint.json'))
    assert 'empirical' in out['bounds']
    assert os.path.isfile(str(tmp_path/'bound_report.json'))
    with pytest.raises(StageError) as err:
        bound_from_checkpoint(cfg, str(tmp_path/'missing.json'))
    assert err.value.stage == 'init'


def test_bound_uses_checkpoint_sets(tmp_path, caplog):
    run(tiny_config(tmp_path), progress=False)
    saved = read_json(str(tmp_path/'seed_0_checkpoint.json'))
    assert saved['collocation'] == {'interior': [2, 2, 2], 'boundary': [2, 2, 2], 'initial': [2, 2]}
    other = tiny_config(tmp_path, collocation={'n': 3}, sweep=[{'n': 3}])
    with caplog.at_level('WARNING', logger='pinnwave.experiments'):
        out = bound_from_checkpoint(other, str(tmp_path/'seed_0_checkpoint.json'))
    assert out['counts']['M_total'] == uniform_total(2, 2)
    assert 'using the checkpoint' in caplog.text


def test_theory_report(tmp_path):
    cfg = load_config(overrides={'output_dir': str(tmp_path), 'theory': {'N_range': [6, 10]}})
    out = theory_report(cfg)
    assert out['widths'] == [338, 19440]
    header, rows = read_csv(str(tmp_path/'rate_table.csv'))
    assert len(rows) == 5
    assert os.path.isfile(str(tmp_path/'theory_report.json'))


def test_theory_report_hypothesis(tmp_path):
    cfg = load_config(overrides={'output_dir': str(tmp_path), 'theory': {'k': 3}})
    with pytest.raises(StageError):
        theory_report(cfg)


def test_export_points(tmp_path):
    fname = export_points(tiny_config(tmp_path))
    assert os.path.basename(fname) == 'points_M{:d}.csv'.format(uniform_total(2, 2))
    header, rows = read_csv(fname)
    assert header == ['stratum', 'x1', 'x2', 't', 'weight']
    assert len(rows) == uniform_total(2, 2)
