import pytest

from fpgw.config import BUILTIN_DEFAULTS, DEFAULTS_PATH, load_defaults, thread_cap
from fpgw.errors import ConfigError
from fpgw.model import FusedConfig
from fpgw.run_logger import HEADER, RunLogger


def test_shipped_defaults_cover_every_section():
    defaults = load_defaults(DEFAULTS_PATH)
    assert set(BUILTIN_DEFAULTS) <= set(defaults)
    assert defaults['problem']['epsilon'] == pytest.approx(0.02)
    assert defaults['problem']['q_exponent'] == BUILTIN_DEFAULTS['problem']['q_exponent'] \
        == FusedConfig().q_exponent == 1.0
    assert defaults['oracle'] == BUILTIN_DEFAULTS['oracle']


def test_missing_file_falls_back_to_builtins(tmp_path):
    defaults = load_defaults(str(tmp_path / 'absent.yml'))
    assert defaults == BUILTIN_DEFAULTS
    defaults['problem']['omega2'] = 0.1
    assert BUILTIN_DEFAULTS['problem']['omega2'] == 0.5


def test_override_merges_per_key(tmp_path):
    path = tmp_path / 'override.yml'
    path.write_text("frank_wolfe:\n  max_iter: 25\n")
    defaults = load_defaults(str(path))
    assert defaults['frank_wolfe'] == {'max_iter': 25, 'tol': 1e-9}
    assert defaults['sinkhorn'] == BUILTIN_DEFAULTS['sinkhorn']


@pytest.mark.parametrize('text', ["problem: [1, 2\n", "- just\n- a list\n"])
def test_malformed_config(tmp_path, text):
    path = tmp_path / 'bad.yml'
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_defaults(str(path))


def test_thread_cap(monkeypatch):
    monkeypatch.setenv('FPGW_THREADS', '3')
    assert thread_cap() == 3
    monkeypatch.delenv('FPGW_THREADS')
    assert thread_cap() >= 1
    for bad in ('0', 'many'):
        monkeypatch.setenv('FPGW_THREADS', bad)
        with pytest.raises(ConfigError):
            thread_cap()


def test_run_logger_appends_rows(tmp_path):
    log = RunLogger(str(tmp_path / 'logs'))
    log.log_event('RUN_START', 'match', '--source a.json')
    RunLogger(str(tmp_path / 'logs')).log_event('RUN_DONE', 'match')
    lines = open(log.log_path).read().splitlines()
    assert lines[0] == ','.join(HEADER)
    assert [line.split(',')[1] for line in lines[1:]] == ['RUN_START', 'RUN_DONE']
