# target: safe_apply
import math


def safe_apply(items, fn=lambda x, scale=2: x * scale, **options):
    results = []
    for index, (key, value) in enumerate(items):
        try:
            results += [fn(value)]
        except (TypeError, ValueError) as exc:
            results.append(math.nan)
        finally:
            options["seen"] = index
    *head, last = results or [None]
    return head, last
