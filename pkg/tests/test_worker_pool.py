import queue

import pytest

from extreme_attribution.worker_pool import (
    BaseWorker,
    ExitMessage,
    Message,
    WorkerError,
    WorkerFailure,
    WorkerPool,
)


class SquareWorker(BaseWorker[int, int]):
    def __init__(self, offset: int = 0):
        super().__init__()
        self.offset = offset
        self.initialized = False

    def initialize(self) -> None:
        self.initialized = True

    def process_message(self, message: int) -> int:
        if message < 0:
            raise ValueError(f"negative input {message}")
        return message * message + self.offset


def test_inline_map_keeps_order():
    worker = SquareWorker(offset=1)
    assert WorkerPool(worker, 1).map([3, 1, 2]) == [10, 2, 5]
    assert worker.initialized


def test_processes_return_results_in_submission_order():
    messages = list(range(25))
    assert WorkerPool(SquareWorker(), 3).map(messages) == [m * m for m in messages]


def test_empty_input():
    assert WorkerPool(SquareWorker(), 4).map([]) == []


def test_inline_errors_propagate():
    with pytest.raises(ValueError, match="negative"):
        WorkerPool(SquareWorker(), 1).map([1, -1])


def test_process_errors_are_reported():
    with pytest.raises(WorkerError, match="ValueError"):
        WorkerPool(SquareWorker(), 2).map([1, 2, -3, 4])


def test_needs_a_process():
    with pytest.raises(ValueError):
        WorkerPool(SquareWorker(), 0)


def test_run_loop_answers_until_told_to_exit():
    inbox: queue.Queue = queue.Queue()
    outbox: queue.Queue = queue.Queue()
    for item in (Message(7, 3), Message(8, -2), ExitMessage(), Message(9, 4)):
        inbox.put(item)
    worker = SquareWorker()
    worker.run_loop(inbox, outbox)

    assert worker.initialized
    first, second = outbox.get_nowait(), outbox.get_nowait()
    assert (first.id, first.payload) == (7, 9)
    assert second.id == 8
    assert isinstance(second.payload, WorkerFailure)
    assert second.payload.error_type == "ValueError"
    assert outbox.empty()
    assert inbox.get_nowait().id == 9
