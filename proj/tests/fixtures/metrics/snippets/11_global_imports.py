# target: configure
from __future__ import annotations

import json
import yaml
from os import path as osp
from .local import helper
from ..pkg.sub import thing as other

CACHE: dict[str, int] | None = None


def configure(raw: str | bytes, *paths: str, strict: bool = False) -> dict[str, list[int]]:
    global CACHE
    cfg = yaml.safe_load(raw) if strict else json.loads(raw)
    for p in paths:
        cfg.setdefault("paths", []).append(osp.basename(p))
    CACHE = {k: len(v) for k, v in cfg.items() if isinstance(v, list)}
    return cfg
