"""Background batch loader.

A daemon thread pulls batches from an iterator and hands them to the training
loop through a bounded FIFO queue, so batch assembly overlaps the optimizer
step. Order is preserved; an exception in the producer is re-raised in the
consumer.
"""

import logging
import queue
import threading

log = logging.getLogger("hf.tasks")

_DONE = object()


class _Failure:
    def __init__(self, exc):
        self.exc = exc


class BatchPrefetcher:
    """Iterate ``source`` on a background thread, at most ``depth`` items ahead.

    ``depth`` 0 iterates inline without a thread.
    """

    def __init__(self, source, depth=4, name="batch-prefetch"):
        self._source = source
        self._depth = int(depth)
        self._name = name
        self._queue = None
        self._stop = threading.Event()
        self._thread = None

    def __iter__(self):
        if self._depth <= 0:
            yield from self._source
            return

        self._queue = queue.Queue(maxsize=self._depth)
        self._thread = threading.Thread(target=self._produce, name=self._name, daemon=True)
        self._thread.start()
        try:
            while True:
                item = self._queue.get()
                if item is _DONE:
                    return
                if isinstance(item, _Failure):
                    raise item.exc
                yield item
        finally:
            self.close()

    def _put(self, item):
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _produce(self):
        try:
            for item in self._source:
                if not self._put(item):
                    return
        except Exception as exc:
            log.error("Prefetch thread failed: %s", exc)
            self._put(_Failure(exc))
            return
        self._put(_DONE)

    def close(self):
        """Stop the producer thread (pending batches are dropped)."""
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
