# target: fetch_all
import asyncio
import functools


def retry(times):
    def wrap(fn):
        @functools.wraps(fn)
        async def inner(*args, **kwargs):
            for attempt in range(times):
                try:
                    return await fn(*args, **kwargs)
                except OSError:
                    await asyncio.sleep(0)
        return inner
    return wrap


@retry(3)
async def fetch_all(urls, session=None):
    async with session as s:
        pages = [await s.get(u) async for u in urls if u]
    return {u: p for u, p in zip(urls, pages)}
