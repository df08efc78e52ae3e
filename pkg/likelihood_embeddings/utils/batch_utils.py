"""Batch processing utilities for parallel Monte-Carlo work"""

import concurrent.futures
import logging
import threading
import time
from typing import Any, Callable, List, Optional, Tuple

from ..config import get_settings

logger = logging.getLogger(__name__)


class BatchRunResult:
    """Container for batch results, ordered by task index"""

    def __init__(self, count: int):
        self.values: List[Any] = [None] * count
        self.failed_indices: List[int] = []
        self.error_messages: List[str] = []
        self.errors: List[BaseException] = []
        self.total_time: float = 0.0
        self.successful_count: int = 0
        self.failed_count: int = 0

    def add_success(self, index: int, value: Any):
        """Store a successful task result at its index"""
        self.values[index] = value
        self.successful_count += 1

    def add_failure(self, index: int, error: BaseException):
        """Record a failed task"""
        self.failed_indices.append(index)
        self.error_messages.append(str(error))
        self.errors.append(error)
        self.failed_count += 1

    def get_summary(self) -> str:
        """Get a summary of the batch results"""
        total = self.successful_count + self.failed_count
        return f"succeeded: {self.successful_count}/{total}, time: {self.total_time:.1f}s"

    def raise_for_failures(self):
        """Re-raise the failure with the lowest task index, if any"""
        if self.failed_indices:
            first = min(range(len(self.failed_indices)), key=lambda i: self.failed_indices[i])
            raise self.errors[first]


class BatchProcessor:
    """Runs indexed tasks sequentially or on a thread pool, merging results by index"""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or get_settings().threads
        self._progress_callback: Optional[Callable[[float, str], None]] = None
        self._cancel_flag = threading.Event()
        self._lock = threading.Lock()

    def set_progress_callback(self, callback: Callable[[float, str], None]):
        """Set callback for progress updates"""
        self._progress_callback = callback

    def cancel(self):
        """Cancel the current batch operation"""
        self._cancel_flag.set()

    def _update_progress(self, progress: float, description: str):
        """Update progress if callback is set"""
        if self._progress_callback:
            self._progress_callback(progress, description)

    def _run_one(self, task: Callable[[int], Any], index: int) -> Tuple[int, Any, Optional[BaseException]]:
        if self._cancel_flag.is_set():
            return index, None, RuntimeError("cancelled")
        try:
            return index, task(index), None
        except Exception as e:  # collected and re-raised by the caller
            return index, None, e

    def run_batch_sync(self, count: int, task: Callable[[int], Any]) -> BatchRunResult:
        """
        Run tasks 0..count-1 one after another

        Args:
            count: Number of tasks
            task: Function of the task index

        Returns:
            BatchRunResult with values ordered by index
        """
        result = BatchRunResult(count)
        start_time = time.time()
        self._cancel_flag.clear()

        for i in range(count):
            index, value, error = self._run_one(task, i)
            if error is not None:
                result.add_failure(index, error)
            else:
                result.add_success(index, value)
            self._update_progress((i + 1) / count, f"task {i + 1}/{count}")

        result.total_time = time.time() - start_time
        return result

    def run_batch_parallel(self, count: int, task: Callable[[int], Any]) -> BatchRunResult:
        """
        Run tasks 0..count-1 on a thread pool

        Completion order is arbitrary; results are stored by index so the
        merged output is identical to the sequential run.
        """
        result = BatchRunResult(count)
        start_time = time.time()
        self._cancel_flag.clear()
        done = 0

        with concurrent.futures.ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = [executor.submit(self._run_one, task, i) for i in range(count)]
            for future in concurrent.futures.as_completed(futures):
                index, value, error = future.result()
                with self._lock:
                    if error is not None:
                        result.add_failure(index, error)
                    else:
                        result.add_success(index, value)
                    done += 1
                    self._update_progress(done / count, f"task {done}/{count}")

        result.total_time = time.time() - start_time
        return result

    def run_batch(self, count: int, task: Callable[[int], Any], use_parallel: Optional[bool] = None) -> BatchRunResult:
        """
        Run a batch with automatic parallel/sequential selection

        Args:
            count: Number of tasks
            task: Function of the task index
            use_parallel: Force parallel (True) or sequential (False). Auto-detect if None.

        Returns:
            BatchRunResult with values ordered by index
        """
        if count < 0:
            raise ValueError("count must be non-negative")
        if use_parallel is None:
            use_parallel = self.max_workers > 1 and count > 1

        if use_parallel:
            result = self.run_batch_parallel(count, task)
        else:
            result = self.run_batch_sync(count, task)
        logger.debug("Batch finished: %s", result.get_summary())
        return result

    def map(self, count: int, task: Callable[[int], Any]) -> List[Any]:
        """Run a batch and return its values, raising the first failure"""
        result = self.run_batch(count, task)
        result.raise_for_failures()
        return result.values
