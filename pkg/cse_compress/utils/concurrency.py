"""并发控制工具 - 在进程池/线程池中并发执行 CPU 密集型任务。"""
from __future__ import annotations

import asyncio
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from functools import partial
from typing import Any, Callable, Optional

from .logger import get_logger

logger = get_logger(__name__)


class ConcurrencyLimiter:
    """并发限制器"""

    def __init__(self, max_concurrency: int):
        if max_concurrency < 1:
            raise ValueError(f"并发数必须 ≥ 1，当前为 {max_concurrency}")
        self.semaphore = asyncio.Semaphore(max_concurrency)
        self.max_concurrency = max_concurrency
        self.active_tasks = 0

    async def __aenter__(self):
        await self.semaphore.acquire()
        self.active_tasks += 1
        logger.debug(f"获取并发许可，当前活跃任务: {self.active_tasks}/{self.max_concurrency}")
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        self.active_tasks -= 1
        self.semaphore.release()
        logger.debug(f"释放并发许可，当前活跃任务: {self.active_tasks}/{self.max_concurrency}")


def make_executor(jobs: int) -> Executor:
    """jobs > 1 时使用进程池，否则使用单线程池（结果与串行执行一致）"""
    if jobs > 1:
        return ProcessPoolExecutor(max_workers=jobs)
    return ThreadPoolExecutor(max_workers=1)


async def run_tasks_with_limit(
    func: Callable[..., Any],
    arguments: list[tuple],
    max_concurrency: int,
    progress_callback: Optional[Callable[[int, int], None]] = None,
    executor: Optional[Executor] = None,
) -> list[tuple[Any, Optional[Exception]]]:
    """在执行器中并发运行 func(*args)，限制最大并发数

    Args:
        func: 可被 pickle 的模块级函数（进程池要求）
        arguments: 每个任务的位置参数
        max_concurrency: 最大并发数
        progress_callback: 进度回调函数 (completed, total)
        executor: 外部提供的执行器；为 None 时按并发数创建并在结束后关闭

    Returns:
        与 arguments 顺序一致的结果列表，每个元素为 (result, error)
    """
    limiter = ConcurrencyLimiter(max_concurrency)
    loop = asyncio.get_running_loop()
    own_executor = executor is None
    if own_executor:
        executor = make_executor(max_concurrency)

    total = len(arguments)
    completed = 0

    async def run_single_task(index: int, args: tuple):
        nonlocal completed
        async with limiter:
            try:
                result = await loop.run_in_executor(executor, partial(func, *args))
                error = None
            except Exception as e:
                logger.error(f"任务 {index} 执行失败: {e}")
                result, error = None, e
            completed += 1
            if progress_callback:
                progress_callback(completed, total)
            return index, result, error

    try:
        task_results = await asyncio.gather(
            *(run_single_task(i, args) for i, args in enumerate(arguments))
        )
    finally:
        if own_executor:
            executor.shutdown(wait=True)

    indexed_results: list[tuple[Any, Optional[Exception]]] = [(None, None)] * total
    for index, result, error in task_results:
        indexed_results[index] = (result, error)
    return indexed_results
