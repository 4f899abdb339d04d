"""Per-step norm records of a run."""

import csv

import numpy as np

CSV_COLUMNS = ("t", "mass_u", "mass_v", "l2_u", "l2_v", "l4_u", "linf_u", "linf_v",
               "l2_grad_u", "l2_grad_v", "mass_residual", "energy_residual")
EXTRA_COLUMNS = ("min_u", "min_v", "dt")


class DiagnosticSeries:
    """Time series of the quantities monitored along a run.

    Besides the CSV columns, ``min_u``/``min_v`` hold the pointwise minima seen
    *before* negativity clipping, and ``dt`` the step that produced each record
    (0 for the initial record).
    """

    def __init__(self):
        self.records = []

    def append(self, record):
        if self.records and not record["t"] > self.records[-1]["t"]:
            raise ValueError("diagnostic times must be strictly increasing")
        self.records.append(dict(record))

    def __len__(self):
        return len(self.records)

    def __getitem__(self, key):
        return np.array([r[key] for r in self.records])

    @property
    def times(self):
        return self["t"]

    def to_csv(self, path_or_file):
        own = isinstance(path_or_file, str) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([repr(float(r[c])) for c in CSV_COLUMNS])
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path):
        out = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                out.records.append({k: float(v) for k, v in row.items()})
        return out
