import hashlib
import jinja2
import logging
import math
import os
import shutil
import signal
import subprocess
import tempfile
import threading
import time
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple
from repair_agent.config import DEFAULTS, RunConfig
from repair_agent.errors import SandboxUnavailable, SpawnFailure
from repair_agent.sandbox.confinement import CONFINEMENTS, LandlockRuleset, available_confinement, bwrap_command, bwrap_executable, landlock_abi
from repair_agent.sandbox.workspace import REPRODUCTION_SCRIPT, Workspace
try:
    import resource
except ImportError:
    resource = None
log = logging.getLogger(__name__)


TEMPLATE_PATH = Path(__file__).parent / 'templates'

ENV_WHITELIST = ['PATH', 'LANG', 'LC_ALL', 'LC_CTYPE', 'SYSTEMROOT', 'TZ']

CONTAINER_KILL_EXIT = 137



@dataclass(frozen=True)
class ExecutionResult:
    """
    Outcome of one sandboxed command.

    Attributes:
        exit_code (int):
            Process exit status.  A timed-out command reports the runner's kill convention:  -9
            for the subprocess runner, 137 for the container runner.

        stdout, stderr (str):
            Captured output, decoded as UTF-8 with replacement, cut at the runner's byte cap.

        duration (float):
            Wall-clock seconds.

        timed_out (bool):
            The command was killed at its timeout.

        stdout_truncated, stderr_truncated (bool):
            The stream exceeded the byte cap.
    """
    exit_code: int
    stdout: str
    stderr: str
    duration: float
    timed_out: bool = False
    stdout_truncated: bool = False
    stderr_truncated: bool = False

    @property
    def succeeded(self) -> bool:
        return self.exit_code == 0 and not self.timed_out

    @property
    def output(self) -> str:
        return self.stdout + self.stderr

    def digest(self) -> str:
        return hashlib.sha256(f'{self.exit_code}\0{self.stdout}\0{self.stderr}'.encode('utf-8')).hexdigest()[:16]

    def to_record(self) -> Dict:
        return asdict(self)

    def summary(self, limit: int = 4000) -> str:
        """Exit status and the tail of the output, as shown to agents."""
        status = 'timed out' if self.timed_out else f'exit code {self.exit_code}'
        text = self.output
        if len(text) > limit:
            text = '...\n' + text[-limit:]
        return f'[{status}, {self.duration:0.1f}s]\n{text}'



def _drain(stream: BinaryIO, cap: int, sink: List):
    """Reads a stream to its end, keeping the first `cap` bytes."""
    kept, total = [], 0
    try:
        for chunk in iter(lambda: stream.read(65536), b''):
            if total < cap:
                kept.append(chunk[:cap - total])
            total += len(chunk)
    except (OSError, ValueError):
        pass
    sink.append((b''.join(kept), total > cap))


class CommandRunner:
    """
    Runs argument vectors inside a workspace.

    Attributes:
        output_cap (int):
            Bytes kept per stream.

        memory_limit (int):
            Optional address-space limit in bytes.

        network (bool):
            Allow network access.  Off by default.
    """

    def __init__(self, **args):
        self.output_cap: int = args.get('output_cap', DEFAULTS['output_cap'])
        self.memory_limit: Optional[int] = args.get('memory_limit', DEFAULTS['memory_limit'])
        self.network: bool = args.get('network', DEFAULTS['network'])

    def run(self, root: Path, command: Sequence[str], timeout: float) -> ExecutionResult:
        raise NotImplementedError

    def _communicate(self, process: subprocess.Popen, timeout: float, kill) -> Tuple[Dict, bool]:
        sinks = {'stdout': [], 'stderr': []}
        threads = [
            threading.Thread(target=_drain, args=(getattr(process, name), self.output_cap, sink), daemon=True)
            for name, sink in sinks.items()
        ]
        for thread in threads:
            thread.start()
        timed_out = False
        try:
            process.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            log.warning(f'Command timed out after {timeout:0.1f}s, killing it.')
            kill(process)
            process.wait()
        for thread in threads:
            thread.join(timeout=5)
        streams = {name: sink[0] if sink else (b'', False) for name, sink in sinks.items()}
        return streams, timed_out

    @staticmethod
    def _result(streams: Dict, exit_code: int, duration: float, timed_out: bool) -> ExecutionResult:
        (stdout, stdout_truncated), (stderr, stderr_truncated) = streams['stdout'], streams['stderr']
        return ExecutionResult(
            exit_code=exit_code,
            stdout=stdout.decode('utf-8', errors='replace'),
            stderr=stderr.decode('utf-8', errors='replace'),
            duration=duration,
            timed_out=timed_out,
            stdout_truncated=stdout_truncated,
            stderr_truncated=stderr_truncated,
        )



class SubprocessRunner(CommandRunner):
    """
    A restricted local subprocess.

    The child gets a whitelisted environment, a private home and temp directory, its own process
    group, CPU and optional memory limits, and a `sitecustomize` guard that turns Python file
    writes outside the workspace into a readable `PermissionError`.  On timeout the whole process
    group is killed with SIGKILL.

    Writes are confined at the OS level by `bwrap` or Landlock (see `confinement`), so processes the
    command starts are held to the workspace too.

    Attributes:
        confinement (str):
            `auto` picks the first working mechanism and raises `SandboxUnavailable` if there is
            none.  `bwrap` and `landlock` insist on one.  `none` keeps only the Python guard, which
            child processes and non-Python commands bypass.

    Note:
        Reads are not confined.  Use the container runner to hide the host file system.
    """

    def __init__(self, **args):
        super().__init__(**args)
        self.confinement: str = args.get('confinement', DEFAULTS['sandbox_confinement'])
        if self.confinement not in CONFINEMENTS:
            raise ValueError(f'Unknown confinement:  {self.confinement}.')
        if self.confinement == 'none':
            log.warning('Sandbox confinement is off:  child processes can write outside the workspace.')
        self.jinja_environment = jinja2.Environment(
            loader=jinja2.FileSystemLoader(TEMPLATE_PATH), trim_blocks=True, lstrip_blocks=True, keep_trailing_newline=True,
        )
        log.info(f'Constructed new SubprocessRunner!  output_cap = {self.output_cap:,}, network = {self.network}, confinement = {self.confinement}')

    def resolve_confinement(self) -> str:
        """The mechanism this runner uses on this host."""
        if self.confinement == 'none':
            return 'none'
        available = available_confinement()
        if self.confinement == 'auto':
            if available is None:
                raise SandboxUnavailable('No OS-level confinement available:  bwrap does not run here and the kernel lacks Landlock.')
            return available
        usable = bwrap_executable() is not None if self.confinement == 'bwrap' else landlock_abi() >= 1
        if not usable:
            raise SandboxUnavailable(f'Confinement {self.confinement} is not available on this host.')
        return self.confinement

    def _prepare(self, root: Path, private: Path) -> Dict[str, str]:
        home, temp, site = private / 'home', private / 'tmp', private / 'site'
        for directory in (home, temp, site):
            directory.mkdir()
        guard = self.jinja_environment.get_template('sitecustomize.py.j2').render(
            writable_roots=[str(root.resolve()), str(private.resolve())], allow_network=self.network,
        )
        (site / 'sitecustomize.py').write_text(guard, encoding='utf-8')
        env = {k: os.environ[k] for k in ENV_WHITELIST if k in os.environ}
        env.update({
            'HOME': str(home),
            'TMPDIR': str(temp),
            'TMP': str(temp),
            'TEMP': str(temp),
            'PYTHONDONTWRITEBYTECODE': '1',
            'PYTHONPATH': os.pathsep.join([str(site), str(root)]),
        })
        return env

    def _limits(self, timeout: float, ruleset: Optional[LandlockRuleset] = None):
        if resource is None and ruleset is None:
            return None
        cpu = int(math.ceil(timeout)) + 1
        memory = self.memory_limit

        def apply():
            if resource is not None:
                resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu))
                if memory:
                    resource.setrlimit(resource.RLIMIT_AS, (memory, memory))
            if ruleset is not None:
                ruleset.restrict_self()
        return apply

    @staticmethod
    def _kill(process: subprocess.Popen):
        try:
            os.killpg(process.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError, AttributeError):
            process.kill()

    def run(self, root: Path, command: Sequence[str], timeout: float) -> ExecutionResult:
        root = Path(root)
        if not root.is_dir():
            raise SandboxUnavailable(f'Workspace root does not exist:  {root}.')
        mode = self.resolve_confinement()
        with tempfile.TemporaryDirectory(prefix='repair_agent_run_') as private:
            env = self._prepare(root, Path(private))
            writable = [root.resolve(), Path(private).resolve()]
            argv, ruleset = list(command), None
            if mode == 'bwrap':
                argv = bwrap_command(command, writable, root.resolve(), self.network)
            elif mode == 'landlock':
                try:
                    ruleset = LandlockRuleset(writable, self.network)
                except OSError as e:
                    raise SandboxUnavailable(f'Cannot build the Landlock ruleset:  {e}.') from e
            log.debug(f'Executing:  {list(command)} in {root}, timeout = {timeout}s, confinement = {mode}')
            start = time.monotonic()
            try:
                process = subprocess.Popen(
                    argv, cwd=root, env=env, stdin=subprocess.DEVNULL, stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE, start_new_session=True, preexec_fn=self._limits(timeout, ruleset),
                )
            except (OSError, ValueError, subprocess.SubprocessError) as e:
                raise SpawnFailure(f'Cannot start {list(command)}:  {e}.') from e
            finally:
                if ruleset is not None:
                    ruleset.close()
            streams, timed_out = self._communicate(process, timeout, self._kill)
            duration = time.monotonic() - start
        result = self._result(streams, process.returncode, duration, timed_out)
        log.debug(f'Done with:  {list(command)}, exit_code = {result.exit_code}, duration = {duration:0.2f}s')
        return result



class ContainerRunner(CommandRunner):
    """
    Runs commands in a throwaway container with the workspace mounted at `/workspace`.

    Attributes:
        image (str):
            Container image, e.g. `python:3.11-slim`.

        runtime (str):
            Container CLI, e.g. `docker` or `podman`.

    Note:
        The network is `none` unless `network` is set.  On timeout the container is killed and the
        result reports exit code 137.
    """

    def __init__(self, **args):
        super().__init__(**args)
        self.image: str = args.get('image', DEFAULTS['container_image'])
        self.runtime: str = args.get('runtime', DEFAULTS['container_runtime'])
        log.info(f'Constructed new ContainerRunner!  runtime = {self.runtime}, image = {self.image}')

    def command_line(self, root: Path, command: Sequence[str], name: str) -> List[str]:
        argv = [self.runtime, 'run', '--rm', '--name', name, '-v', f'{Path(root).resolve()}:/workspace', '-w', '/workspace']
        argv += ['-e', 'PYTHONDONTWRITEBYTECODE=1']
        if not self.network:
            argv += ['--network', 'none']
        if self.memory_limit:
            argv += ['--memory', str(self.memory_limit)]
        return argv + [self.image] + list(command)

    def run(self, root: Path, command: Sequence[str], timeout: float) -> ExecutionResult:
        executable = shutil.which(self.runtime)
        if executable is None:
            raise SandboxUnavailable(f'Container runtime not found:  {self.runtime}.')
        name = f'repair-agent-{uuid.uuid4().hex[:12]}'
        argv = self.command_line(root, command, name)
        log.debug(f'Executing in container:  {argv}')

        def kill(process: subprocess.Popen):
            subprocess.run([executable, 'kill', name], stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL, check=False)
            process.kill()

        start = time.monotonic()
        try:
            process = subprocess.Popen(argv, stdin=subprocess.DEVNULL, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        except OSError as e:
            raise SpawnFailure(f'Cannot start container:  {e}.') from e
        streams, timed_out = self._communicate(process, timeout, kill)
        duration = time.monotonic() - start
        exit_code = CONTAINER_KILL_EXIT if timed_out else process.returncode
        if exit_code == 125:
            raise SandboxUnavailable(f'Container runtime failed:  {streams["stderr"][0].decode("utf-8", errors="replace").strip()}')
        return self._result(streams, exit_code, duration, timed_out)


def create_runner(config: RunConfig) -> CommandRunner:
    common = {'output_cap': config.output_cap, 'memory_limit': config.memory_limit, 'network': config.network}
    if config.sandbox_runner == 'container':
        return ContainerRunner(image=config.container_image, runtime=config.container_runtime, **common)
    return SubprocessRunner(confinement=config.sandbox_confinement, **common)


def execute(ws: Workspace, command: Sequence[str], timeout: float = DEFAULTS['command_timeout'], runner: CommandRunner = None) -> ExecutionResult:
    """
    Runs `command` with the workspace's working copy as working directory.

    Raises:
        SandboxUnavailable:  The runner cannot run anything here, e.g. no container runtime.
        SpawnFailure:  The command could not be started.
    """
    if not command:
        raise SpawnFailure('Empty command.')
    return (runner or SubprocessRunner()).run(ws.root, command, timeout)


def run_reproduction(
    ws: Workspace, script: str, interpreter: Sequence[str] = tuple(DEFAULTS['interpreter']),
    timeout: float = DEFAULTS['command_timeout'], runner: CommandRunner = None,
) -> ExecutionResult:
    """
    Writes a reproduction script to the reserved path `.repro/reproduce.py` and runs it.

    The reserved path is excluded from resets and solution diffs.
    """
    if not script or not script.strip():
        raise ValueError('A reproduction script must not be empty.')
    ws.write_reproduction(script)
    return execute(ws, [*interpreter, REPRODUCTION_SCRIPT], timeout, runner)
