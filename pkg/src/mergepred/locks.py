"""Advisory file locks (``flock``) used for writer and worktree exclusivity."""

from __future__ import annotations

import fcntl
import os
from pathlib import Path

from .errors import LockError


class FileLock:
    """Exclusive lock on ``path``. Non-blocking by default.

    Locks are tied to the open file description, so two ``FileLock`` objects
    on the same path conflict even inside one process.
    """

    def __init__(self, path: str | os.PathLike, blocking: bool = False):
        self.path = Path(path)
        self.blocking = blocking
        self._fd: int | None = None

    def acquire(self) -> "FileLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd = os.open(self.path, os.O_RDWR | os.O_CREAT, 0o644)
        flags = fcntl.LOCK_EX if self.blocking else fcntl.LOCK_EX | fcntl.LOCK_NB
        try:
            fcntl.flock(fd, flags)
        except BlockingIOError:
            os.close(fd)
            raise LockError(f"{self.path} is held by another writer") from None
        self._fd = fd
        return self

    def release(self) -> None:
        if self._fd is not None:
            fcntl.flock(self._fd, fcntl.LOCK_UN)
            os.close(self._fd)
            self._fd = None

    @property
    def held(self) -> bool:
        return self._fd is not None

    def __enter__(self) -> "FileLock":
        return self.acquire()

    def __exit__(self, *exc) -> None:
        self.release()
