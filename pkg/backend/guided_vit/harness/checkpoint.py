"""Checkpoint directories.

Layout::

    <dir>/config.json        full RunConfig (aliases, sorted keys)
    <dir>/manifest.txt       name<TAB>file<TAB>dims, one line per parameter
    <dir>/params/<name>.ptnsr
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import ValidationError

from ..errors import FormatError
from ..model import VideoTransformer
from ..settings import RunConfig
from ..tensor import read_ptnsr, write_ptnsr

CONFIG_FILE = "config.json"
MANIFEST_FILE = "manifest.txt"
PARAM_DIR = "params"


def save_checkpoint(directory: str | Path, model: VideoTransformer, cfg: RunConfig) -> Path:
    target = Path(directory)
    (target / PARAM_DIR).mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    for name, param in model.named_parameters().items():
        rel = f"{PARAM_DIR}/{name}.ptnsr"
        write_ptnsr(target / rel, param.data)
        dims = "x".join(str(d) for d in param.shape)
        lines.append(f"{name}\t{rel}\t{dims}")
    (target / MANIFEST_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
    (target / CONFIG_FILE).write_text(
        json.dumps(cfg.dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return target


def read_checkpoint_manifest(directory: str | Path) -> list[tuple[str, str, tuple[int, ...]]]:
    path = Path(directory) / MANIFEST_FILE
    if not path.exists():
        msg = f"No checkpoint manifest at {path}"
        raise FormatError(msg)
    entries: list[tuple[str, str, tuple[int, ...]]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            msg = f"{path}:{lineno}: expected name, file, dims"
            raise FormatError(msg)
        name, rel, dims = fields
        try:
            shape = tuple(int(d) for d in dims.split("x")) if dims else ()
        except ValueError as exc:
            msg = f"{path}:{lineno}: bad dims {dims!r}"
            raise FormatError(msg) from exc
        entries.append((name, rel, shape))
    return entries


def load_checkpoint(directory: str | Path) -> tuple[VideoTransformer, RunConfig]:
    """Rebuild the model described by ``config.json`` and load its weights."""
    base = Path(directory)
    config_path = base / CONFIG_FILE
    if not config_path.exists():
        msg = f"No checkpoint config at {config_path}"
        raise FormatError(msg)
    try:
        cfg = RunConfig(**json.loads(config_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as exc:
        msg = f"{config_path}: {exc}"
        raise FormatError(msg) from exc

    state = {}
    for name, rel, shape in read_checkpoint_manifest(base):
        array = read_ptnsr(base / rel)
        if array.shape != shape:
            msg = f"{rel}: stored dims {list(array.shape)}, manifest says {list(shape)}"
            raise FormatError(msg)
        state[name] = array
    model = VideoTransformer.from_config(cfg)
    model.load_state_dict(state)
    return model, cfg
