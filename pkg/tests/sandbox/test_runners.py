import pytest
import sys
from repair_agent.errors import SandboxUnavailable, SpawnFailure
from repair_agent.sandbox import runners
from repair_agent.sandbox.confinement import available_confinement, bwrap_command
from repair_agent.sandbox.runners import ContainerRunner, SubprocessRunner, create_runner, execute, run_reproduction
from tests.config import config

PYTHON = [sys.executable]

confined = pytest.mark.skipif(available_confinement() is None, reason='neither bwrap nor Landlock works on this host')



def test_reproduction_fails_on_seeded_bug(seeded_workspace, runner):
    script = 'from calculator.stats import mean\nassert mean([1, 2, 3]) == 2, mean([1, 2, 3])\n'
    result = run_reproduction(seeded_workspace, script, PYTHON, timeout=60, runner=runner)
    assert not result.succeeded
    assert result.exit_code == 1
    assert 'AssertionError' in result.stderr
    assert not result.timed_out


def test_command_output(seeded_workspace, runner):
    result = execute(seeded_workspace, [*PYTHON, '-c', 'import sys; print("out"); print("err", file=sys.stderr)'], 60, runner)
    assert (result.exit_code, result.stdout, result.stderr) == (0, 'out\n', 'err\n')
    assert result.succeeded
    assert result.summary().startswith('[exit code 0, ')


def test_writes_outside_are_denied(seeded_workspace, runner, tmp_path):
    outside = tmp_path / 'outside.txt'
    script = f'open({str(outside)!r}, "w").write("x")\n'
    result = run_reproduction(seeded_workspace, script, PYTHON, timeout=60, runner=runner)
    assert result.exit_code != 0
    assert 'Sandbox' in result.stderr
    assert not outside.exists()


@confined
@pytest.mark.parametrize('name', ['shell', 'system', 'subprocess'])
def test_child_processes_cannot_write_outside(seeded_workspace, tmp_path, name):
    outside = tmp_path / f'escaped_{name}.txt'
    runner = SubprocessRunner(confinement='auto')
    if name == 'shell':
        result = execute(seeded_workspace, ['sh', '-c', f'echo x > {outside}'], 60, runner)
    elif name == 'system':
        script = f'import os\nraise SystemExit(1 if os.system("echo x > {outside}") else 0)\n'
        result = run_reproduction(seeded_workspace, script, PYTHON, timeout=60, runner=runner)
    else:
        script = f'import subprocess, sys\nsubprocess.run([sys.executable, "-S", "-c", "open({str(outside)!r}, \'w\').write(\'x\')"], check=True)\n'
        result = run_reproduction(seeded_workspace, script, PYTHON, timeout=60, runner=runner)
    assert result.exit_code != 0
    assert not outside.exists()


@confined
def test_child_processes_can_write_inside(seeded_workspace):
    result = execute(seeded_workspace, ['sh', '-c', 'echo x > made_by_shell.txt'], 60, SubprocessRunner(confinement='auto'))
    assert result.succeeded, result.stderr
    assert seeded_workspace.read('made_by_shell.txt') == 'x\n'


def test_auto_confinement_requires_a_mechanism(seeded_workspace, monkeypatch):
    monkeypatch.setattr(runners, 'available_confinement', lambda: None)
    with pytest.raises(SandboxUnavailable):
        execute(seeded_workspace, ['true'], 10, SubprocessRunner(confinement='auto'))


def test_unknown_confinement():
    with pytest.raises(ValueError):
        SubprocessRunner(confinement='chroot')


def test_bwrap_command(tmp_path, monkeypatch):
    monkeypatch.setattr('repair_agent.sandbox.confinement.bwrap_executable', lambda: '/usr/bin/bwrap')
    argv = bwrap_command(['sh', '-c', 'true'], [tmp_path], tmp_path, network=False)
    assert argv[0] == '/usr/bin/bwrap'
    assert argv[argv.index('--ro-bind') + 1:argv.index('--ro-bind') + 3] == ['/', '/']
    assert argv[argv.index('--bind') + 1:argv.index('--bind') + 3] == [str(tmp_path), str(tmp_path)]
    assert argv.index('--tmpfs') < argv.index('--bind')
    assert '--unshare-net' in argv
    assert argv[-4:] == ['--', 'sh', '-c', 'true']
    assert '--unshare-net' not in bwrap_command(['true'], [tmp_path], tmp_path, network=True)


def test_writes_inside_are_allowed(seeded_workspace, runner):
    result = run_reproduction(seeded_workspace, 'open("made.txt", "w").write("x")\n', PYTHON, timeout=60, runner=runner)
    assert result.succeeded, result.stderr
    assert seeded_workspace.read('made.txt') == 'x'


@pytest.mark.parametrize('network, blocked', [(False, True), (True, False)])
def test_network_switch(seeded_workspace, network, blocked):
    script = 'import socket\nsocket.socket().close()\n'
    runner = SubprocessRunner(network=network, confinement=config.confinement)
    result = run_reproduction(seeded_workspace, script, PYTHON, timeout=60, runner=runner)
    assert (result.exit_code != 0) == blocked


def test_environment_is_whitelisted(seeded_workspace, runner, monkeypatch):
    monkeypatch.setenv('SECRET_TOKEN', 'hunter2')
    result = execute(seeded_workspace, [*PYTHON, '-c', 'import os; print(os.environ.get("SECRET_TOKEN"))'], 60, runner)
    assert result.stdout == 'None\n'


def test_timeout_kills(seeded_workspace, runner):
    result = execute(seeded_workspace, [*PYTHON, '-c', 'import time; time.sleep(60)'], 1.0, runner)
    assert result.timed_out
    assert result.exit_code == -9
    assert not result.succeeded
    assert result.duration < 30


def test_output_is_capped(seeded_workspace):
    runner = SubprocessRunner(output_cap=100, confinement=config.confinement)
    result = execute(seeded_workspace, [*PYTHON, '-c', 'print("x" * 5000)'], 60, runner)
    assert result.stdout == 'x' * 100
    assert result.stdout_truncated
    assert not result.stderr_truncated


@pytest.mark.parametrize('command', [[], ['no-such-program-xyz']])
def test_spawn_failure(seeded_workspace, command):
    with pytest.raises(SpawnFailure):
        execute(seeded_workspace, command, runner=SubprocessRunner(confinement='none'))


def test_empty_script(seeded_workspace):
    with pytest.raises(ValueError):
        run_reproduction(seeded_workspace, '  \n', PYTHON)


def test_container_runner(seeded_workspace, run_config):
    runner = ContainerRunner(runtime='no-such-runtime-xyz', image='python:3.11-slim', memory_limit=2 ** 30)
    argv = runner.command_line(seeded_workspace.root, ['python', '-V'], 'name')
    assert argv[:3] == ['no-such-runtime-xyz', 'run', '--rm']
    assert argv[argv.index('--network') + 1] == 'none'
    assert argv[-3:] == ['python:3.11-slim', 'python', '-V']
    with pytest.raises(SandboxUnavailable):
        runner.run(seeded_workspace.root, ['python', '-V'], 10)
    runner = create_runner(run_config)
    assert isinstance(runner, SubprocessRunner)
    assert runner.confinement == config.confinement
