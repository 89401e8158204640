import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np


class Writer:
    def add_scalars(self, tag_scalar_dic, global_step):
        raise NotImplementedError()

    def add_scalars_with_prefix(self, tag_scalar_dic, global_step, prefix):
        tag_scalar_dic = {prefix + k: v for k, v in tag_scalar_dic.items()}
        self.add_scalars(tag_scalar_dic, global_step)

    def close(self):
        pass


class TBWriter(Writer):
    def __init__(self, dir_path):
        from tensorboardX import SummaryWriter

        self.writer = SummaryWriter(str(dir_path), flush_secs=30)

    def add_scalars(self, tag_scalar_dic, global_step):
        for tag, scalar in tag_scalar_dic.items():
            if scalar is None or not math.isfinite(scalar):
                continue
            self.writer.add_scalar(tag, scalar, global_step)

    def close(self):
        self.writer.close()


class DummyWriter(Writer):
    def __init__(self, dir_path=None):
        pass

    def add_scalars(self, tag_scalar_dic, global_step):
        pass


def get_writer(dir_path, tensorboard=False):
    """
    Args:
        dir_path: tb dir
        tensorboard: write sweep scalars with tensorboardX; otherwise a no-op writer
    """
    if tensorboard:
        return TBWriter(dir_path)
    return DummyWriter(dir_path)


def json_handler(v):
    if isinstance(v, (Path, range)):
        return str(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if dataclasses.is_dataclass(v):
        return dataclasses.asdict(v)
    raise TypeError(f"`{type(v)}` is not JSON Serializable")


def _clean(obj):
    """Non-finite floats become strings so the output stays strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def dumps(obj):
    obj = json.loads(json.dumps(obj, default=json_handler))
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)


FORMATS = ("csv", "json")


def _wanted(path, formats):
    return formats is None or Path(path).suffix.lstrip(".") in formats


def write_json(path, obj, formats=None):
    """``formats`` names the enabled output formats; a disabled one writes nothing."""
    if not _wanted(path, formats):
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(obj) + "\n")


def format_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows, formats=None):
    """Comma-separated, '.' decimal, floats at round-trip precision."""
    if not _wanted(path, formats):
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            assert len(row) == len(header), f"row width {len(row)} != header width {len(header)}"
            w.writerow([format_cell(v) for v in row])
