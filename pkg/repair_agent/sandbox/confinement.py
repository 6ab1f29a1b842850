"""
OS-level write confinement for sandboxed commands.

Two mechanisms are supported, both unprivileged and both inherited by every process a command
starts:

    bwrap     bubblewrap mount namespace:  the host root is mounted read-only, `/tmp` is a private
              tmpfs, and only the writable roots are bound read-write.  `--unshare-net` when the
              network is off.
    landlock  Linux Landlock ruleset applied to the child before exec:  file creation, writes,
              removal and renames are denied outside the writable roots.  TCP bind and connect are
              denied too when the network is off and the kernel supports it (ABI >= 4).

References:
    https://github.com/containers/bubblewrap
    https://docs.kernel.org/userspace-api/landlock.html
"""
import ctypes
import functools
import logging
import os
import platform
import shutil
import subprocess
from pathlib import Path
from typing import List, Optional, Sequence
log = logging.getLogger(__name__)


CONFINEMENTS = ('auto', 'bwrap', 'landlock', 'none')

SYS_LANDLOCK_CREATE_RULESET = 444
SYS_LANDLOCK_ADD_RULE = 445
SYS_LANDLOCK_RESTRICT_SELF = 446
LANDLOCK_CREATE_RULESET_VERSION = 1
LANDLOCK_RULE_PATH_BENEATH = 1
PR_SET_NO_NEW_PRIVS = 38

ACCESS_FS_WRITE_FILE = 1 << 1
ACCESS_FS_MODIFY = ACCESS_FS_WRITE_FILE | sum(1 << x for x in range(4, 13))
ACCESS_FS_REFER = 1 << 13
ACCESS_FS_TRUNCATE = 1 << 14
ACCESS_NET_BIND_TCP = 1 << 0
ACCESS_NET_CONNECT_TCP = 1 << 1



class _RulesetAttr(ctypes.Structure):
    _fields_ = [('handled_access_fs', ctypes.c_uint64), ('handled_access_net', ctypes.c_uint64)]


class _PathBeneathAttr(ctypes.Structure):
    _pack_ = 1
    _fields_ = [('allowed_access', ctypes.c_uint64), ('parent_fd', ctypes.c_int32)]


@functools.lru_cache(maxsize=None)
def _libc() -> Optional[ctypes.CDLL]:
    if platform.system() != 'Linux':
        return None
    try:
        return ctypes.CDLL(None, use_errno=True)
    except OSError:
        return None


def _syscall(number: int, *args) -> int:
    result = _libc().syscall(ctypes.c_long(number), *args)
    if result < 0:
        errno = ctypes.get_errno()
        raise OSError(errno, os.strerror(errno))
    return result


@functools.lru_cache(maxsize=None)
def landlock_abi() -> int:
    """Landlock ABI version of the running kernel, or 0 if Landlock is unavailable."""
    if _libc() is None:
        return 0
    try:
        return _syscall(SYS_LANDLOCK_CREATE_RULESET, None, ctypes.c_size_t(0), ctypes.c_uint32(LANDLOCK_CREATE_RULESET_VERSION))
    except (OSError, AttributeError):
        return 0


@functools.lru_cache(maxsize=None)
def bwrap_executable() -> Optional[str]:
    """Path of a working `bwrap`, or None.  User namespaces are often disabled in containers."""
    executable = shutil.which('bwrap')
    if executable is None:
        return None
    argv = [executable, '--ro-bind', '/', '/', '--dev', '/dev', '--unshare-pid', '--proc', '/proc', '--', 'true']
    try:
        completed = subprocess.run(argv, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL, timeout=10, check=False)
    except (OSError, subprocess.SubprocessError):
        return None
    return executable if completed.returncode == 0 else None


def available_confinement() -> Optional[str]:
    """The first working mechanism, `bwrap` before `landlock`, or None."""
    if bwrap_executable() is not None:
        return 'bwrap'
    if landlock_abi() >= 1:
        return 'landlock'
    return None


def bwrap_command(command: Sequence[str], writable: Sequence[Path], cwd: Path, network: bool) -> List[str]:
    argv = [
        bwrap_executable(), '--die-with-parent', '--unshare-pid', '--unshare-ipc',
        '--ro-bind', '/', '/', '--dev', '/dev', '--proc', '/proc', '--tmpfs', '/tmp',
    ]
    if not network:
        argv.append('--unshare-net')
    for root in writable:
        argv += ['--bind', str(root), str(root)]
    return argv + ['--chdir', str(cwd), '--'] + list(command)



class LandlockRuleset:
    """
    A Landlock ruleset allowing writes only beneath `writable`, plus writes to existing devices.

    The ruleset is built in the parent.  `restrict_self` runs in the child between fork and exec,
    so it is the only part that must be async-signal tolerant.

    Attributes:
        fd (int):
            Ruleset file descriptor, close-on-exec.
    """

    def __init__(self, writable: Sequence[Path], network: bool):
        abi = landlock_abi()
        if abi < 1:
            raise OSError('Landlock is not supported by this kernel.')
        handled = ACCESS_FS_MODIFY | (ACCESS_FS_REFER if abi >= 2 else 0) | (ACCESS_FS_TRUNCATE if abi >= 3 else 0)
        handled_net = ACCESS_NET_BIND_TCP | ACCESS_NET_CONNECT_TCP if abi >= 4 and not network else 0
        attr = _RulesetAttr(handled, handled_net)
        size = ctypes.sizeof(_RulesetAttr) if abi >= 4 else ctypes.sizeof(ctypes.c_uint64)
        self.fd: int = _syscall(SYS_LANDLOCK_CREATE_RULESET, ctypes.byref(attr), ctypes.c_size_t(size), ctypes.c_uint32(0))
        try:
            for root in writable:
                self._allow(root, handled)
            self._allow(Path('/dev'), ACCESS_FS_WRITE_FILE | (ACCESS_FS_TRUNCATE if abi >= 3 else 0))
        except OSError:
            self.close()
            raise
        log.debug(f'Constructed new LandlockRuleset!  abi = {abi}, writable = {[str(x) for x in writable]}, network = {network}')

    def _allow(self, path: Path, access: int):
        fd = os.open(path, os.O_PATH | os.O_CLOEXEC)
        try:
            rule = _PathBeneathAttr(access, fd)
            _syscall(SYS_LANDLOCK_ADD_RULE, ctypes.c_int(self.fd), ctypes.c_int(LANDLOCK_RULE_PATH_BENEATH), ctypes.byref(rule), ctypes.c_uint32(0))
        finally:
            os.close(fd)

    def restrict_self(self):
        if _libc().prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0:
            raise OSError(ctypes.get_errno(), 'prctl(PR_SET_NO_NEW_PRIVS) failed')
        _syscall(SYS_LANDLOCK_RESTRICT_SELF, ctypes.c_int(self.fd), ctypes.c_uint32(0))

    def close(self):
        if self.fd >= 0:
            os.close(self.fd)
            self.fd = -1
