"""Column-style selection over report records (dicts or dataclasses)."""
import numpy as np


def _field(record, key):
    return record[key] if isinstance(record, dict) else getattr(record, key)


def make_selector_fn(selector):
    """Callable selectors pass through; strings select fields.

        "T_inf"        record.T_inf (or record["T_inf"])
        "extras.slope" nested lookup
        "n,T_inf"      tuple of fields
    """
    if callable(selector):
        return selector
    if not isinstance(selector, str):
        raise TypeError(f"Unsupported selector: {selector!r}")
    if "," in selector:
        parts = [make_selector_fn(s) for s in selector.split(",")]
        return lambda rec: tuple(sel(rec) for sel in parts)
    path = [s.strip() for s in selector.split(".")]

    def select(rec):
        for key in path:
            rec = _field(rec, key)
        return rec

    return select


class Q:
    """Read-only list of records with column selection."""

    def __init__(self, records):
        self._records = list(records)

    def __len__(self):
        return len(self._records)

    def __getitem__(self, i):
        return self._records[i]

    def __eq__(self, other):
        return self._records == (other._records if isinstance(other, Q) else other)

    def __repr__(self):
        return f"Q({self._records!r})"

    def select(self, selector):
        fn = make_selector_fn(selector)
        return Q(fn(r) for r in self._records)

    def array(self):
        return np.asarray(self._records, dtype=float)
