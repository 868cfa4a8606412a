"""Process pool for independent refits (bootstrap replicates, sensitivity grid points).

Workers pull ``Message`` objects off a shared input queue and answer with ``Response``
objects carrying the same correlation id, so results can be put back in submission
order however the processes interleave. With one process everything runs inline.
"""

import signal
import traceback
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from multiprocessing import Process, Queue
from queue import Empty

from extreme_attribution.logger import logging

logger = logging.getLogger(__name__)

POLL_SECONDS = 1.0


@dataclass
class Message[I]:
    """
    Message wrapper with correlation ID.
    """

    id: int
    payload: I


@dataclass
class Response[O]:
    """
    Response wrapper with correlation ID.
    """

    id: int
    payload: O


@dataclass
class ExitMessage:
    pass


@dataclass
class WorkerFailure:
    """An exception raised inside a worker, flattened so it always pickles."""

    error_type: str
    message: str
    traceback: str


class WorkerError(RuntimeError):
    pass


class BaseWorker[I, O](ABC):
    """
    Base class for worker logic.
    """

    def initialize(self) -> None:  # noqa: B027
        """Per-process setup, run once before the first message."""
        pass

    @abstractmethod
    def process_message(self, message: I) -> O:
        """Process a single input message and return result"""
        pass

    def run_loop(self, input_queue: Queue, output_queue: Queue) -> None:
        """Main processing loop of a worker process"""
        signal.signal(signal.SIGTERM, signal.SIG_DFL)
        self.initialize()
        while True:
            msg = input_queue.get()
            if isinstance(msg, ExitMessage):
                break
            try:
                payload = self.process_message(msg.payload)
            except Exception as e:
                logger.exception("Error in worker process")
                payload = WorkerFailure(type(e).__name__, str(e), traceback.format_exc())
            output_queue.put(Response(id=msg.id, payload=payload))


class WorkerPool[I, O]:
    """Runs one worker's ``process_message`` over many messages."""

    def __init__(self, worker: BaseWorker[I, O], processes: int = 1):
        if processes < 1:
            raise ValueError(f"need at least one process, got {processes}")
        self._worker = worker
        self._processes = processes

    def map(self, messages: Sequence[I]) -> list[O]:
        if self._processes == 1 or len(messages) <= 1:
            self._worker.initialize()
            return [self._worker.process_message(m) for m in messages]
        return self._map_processes(messages)

    def _map_processes(self, messages: Sequence[I]) -> list[O]:
        n_processes = min(self._processes, len(messages))
        input_queue: Queue = Queue()
        output_queue: Queue = Queue()
        for i, message in enumerate(messages):
            input_queue.put(Message(id=i, payload=message))
        for _ in range(n_processes):
            input_queue.put(ExitMessage())

        processes = [
            Process(target=self._worker.run_loop, args=(input_queue, output_queue), daemon=True)
            for _ in range(n_processes)
        ]
        for process in processes:
            process.start()
        logger.debug("Started %d worker processes for %d messages", n_processes, len(messages))

        results: dict[int, O] = {}
        try:
            while len(results) < len(messages):
                try:
                    response = output_queue.get(timeout=POLL_SECONDS)
                except Empty:
                    if not any(p.is_alive() for p in processes):
                        try:
                            response = output_queue.get(timeout=POLL_SECONDS)
                        except Empty:
                            raise WorkerError(
                                f"workers exited with {len(messages) - len(results)} messages unanswered"
                            ) from None
                    else:
                        continue
                if isinstance(response.payload, WorkerFailure):
                    failure = response.payload
                    raise WorkerError(
                        f"message {response.id} failed with {failure.error_type}: {failure.message}\n"
                        f"{failure.traceback}"
                    )
                results[response.id] = response.payload
        finally:
            for process in processes:
                process.join(timeout=5.0)
                if process.is_alive():
                    process.terminate()
        return [results[i] for i in range(len(messages))]
