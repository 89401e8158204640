"""
Things that don't belong anywhere else
"""

import hashlib
import json
import os
import shutil
from datetime import datetime


def spec_hash(doc):
    """
    Derive a short stable id from a JSON-able document (spec or config).
    Key order does not matter; floats are hashed through their repr.
    """
    doc_str = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.md5(doc_str.encode("utf-8")).hexdigest()[:12]


def timestamp(fmt="%y%m%d_%H-%M-%S"):
    return datetime.now().strftime(fmt)


def rm(path):
    """remove dir recursively"""
    if os.path.isdir(path):
        shutil.rmtree(path, ignore_errors=True)
    elif os.path.exists(path):
        os.remove(path)


def resolve_threads(flag_value=None, env_var="SUBGAUSS_LAB_THREADS"):
    """--threads flag, else the environment fallback, else 1."""
    if flag_value is not None:
        threads = int(flag_value)
    else:
        threads = int(os.environ.get(env_var, "1") or 1)
    assert threads >= 1, f"threads must be >= 1, got {threads}"
    return threads
