"""Emit standalone matplotlib scripts for CSV outputs.

Nothing here imports matplotlib; the generated script does.
"""
from __future__ import annotations

import csv
from pathlib import Path

from .errors import ParameterError

__all__ = ["emit_plot_script"]

_TEMPLATE = '''\
"""Plot {name} (generated script)."""
import csv

import matplotlib.pyplot as plt

with open({path!r}, newline="") as fh:
    rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
header, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
cols = list(zip(*data))
fig, ax = plt.subplots()
for j in range(1, len(header)):
    ax.plot(cols[0], cols[j], label=header[j]){logx}
ax.set_xlabel(header[0])
ax.legend()
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
'''


def emit_plot_script(csv_path, script_path):
    """Write a script that plots every column of ``csv_path`` against the first."""
    csv_path = Path(csv_path)
    try:
        with open(csv_path, newline="") as fh:
            header = next(r for r in csv.reader(fh) if r and not r[0].startswith("#"))
    except (OSError, StopIteration) as exc:
        raise ParameterError(f"cannot read a header from {csv_path}: {exc}") from None
    if len(header) < 2:
        raise ParameterError(f"{csv_path} needs at least two columns to plot")
    # power sweeps span decades, so put S on a log axis
    logx = "\nax.set_xscale('log')" if header[0] == "S" else ""
    text = _TEMPLATE.format(name=csv_path.name, path=str(csv_path.resolve()),
                            png=str(csv_path.with_suffix(".png").resolve()), logx=logx)
    Path(script_path).write_text(text)
    return text
