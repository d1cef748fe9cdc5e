# pygeofuse/training/prefetch.py

import queue
import threading
from typing import Generic, Iterable, Iterator, TypeVar

T = TypeVar("T")

_DONE = object()


class _Failure:
    def __init__(self, error: BaseException):
        self.error = error


class Prefetcher(Generic[T]):
    """
    Iterate `source` on a worker thread, at most `capacity` items ahead.

    Items arrive in source order; an exception raised by the source is
    re-raised in the consuming thread.
    """

    def __init__(self, source: Iterable[T], capacity: int = 2):
        if capacity < 1:
            raise ValueError(f"capacity is {capacity} but must be >= 1")
        self._queue: "queue.Queue" = queue.Queue(maxsize=capacity)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._fill, args=(iter(source),), daemon=True)
        self._thread.start()

    def _put(self, item) -> bool:
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _fill(self, source: Iterator[T]) -> None:
        try:
            for item in source:
                if not self._put(item):
                    return
        except BaseException as exc:
            self._put(_Failure(exc))
            return
        self._put(_DONE)

    def __iter__(self) -> Iterator[T]:
        try:
            while True:
                item = self._queue.get()
                if item is _DONE:
                    return
                if isinstance(item, _Failure):
                    raise item.error
                yield item
        finally:
            self.close()

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5.0)


def prefetch(source: Iterable[T], capacity: int = 2, enabled: bool = True) -> Iterable[T]:
    return Prefetcher(source, capacity) if enabled else source
