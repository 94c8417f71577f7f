"""CSV writers/readers and plot-script generation.

Trajectory CSV columns::

    k, t, V, V1, V2, V_up, residual, verdict, u1, q_1..q_m, f_out_1..f_out_m

``residual``, ``verdict`` and ``u1`` describe the step from ``k`` to
``k + 1`` and are empty on the final row. Floats are written with
``%.17g`` so re-reading reproduces them bit for bit.
"""
from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def _f(x) -> str:
    return FLOAT_FMT % float(x)


def trajectory_header(m: int):
    return (
        ["k", "t", "V", "V1", "V2", "V_up", "residual", "verdict", "u1"]
        + [f"q_{e}" for e in range(1, m + 1)]
        + [f"f_out_{e}" for e in range(1, m + 1)]
    )


def trajectory_rows(traj, stride: int = 1):
    """Rows every ``stride`` steps; the last time level is always included."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    K = len(traj.V)
    ks = list(range(0, K, stride))
    if ks[-1] != K - 1:
        ks.append(K - 1)
    passed = traj.passed
    for k in ks:
        row = [str(k), _f(traj.t[k]), _f(traj.V[k]), _f(traj.V1[k]), _f(traj.V2[k]), _f(traj.V_up[k])]
        if k < K - 1:
            row += [_f(traj.residual[k]), "pass" if passed[k] else "fail", _f(traj.u[k])]
        else:
            row += ["", "", ""]
        row += [_f(x) for x in traj.queues[k]] + [_f(x) for x in traj.outflow[k]]
        yield row


def format_trajectory(traj, stride: int = 1) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trajectory_header(traj.config.m))
    w.writerows(trajectory_rows(traj, stride))
    return buf.getvalue()


def write_trajectory(path, traj, stride: int = 1) -> Path:
    path = Path(path)
    path.write_text(format_trajectory(traj, stride), encoding="utf-8")
    return path


def read_csv(path) -> dict:
    """Columns of a CSV as float arrays (strings for non-numeric columns).

    Empty cells become NaN in numeric columns.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for i, name in enumerate(header):
        raw = [r[i] for r in body]
        try:
            cols[name] = np.array([float(x) if x != "" else np.nan for x in raw])
        except ValueError:
            cols[name] = np.array(raw, dtype=object)
    return cols


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return _f(x)
    return str(x)


def format_study(result) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_study(path, result) -> Path:
    path = Path(path)
    path.write_text(format_study(result), encoding="utf-8")
    return path


_PLOT_TEMPLATE = '''"""Plot Lyapunov traces written by prodstab. Requires matplotlib."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
FILES = {files!r}
TITLE = {title!r}


def load(name):
    with open(HERE / name, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ([float(r["t"]) for r in rows], [float(r["V"]) for r in rows],
            [float(r["V_up"]) for r in rows])


def main():
    fig, axes = plt.subplots(1, len(FILES), figsize=(5 * len(FILES), 4), squeeze=False)
    for ax, (label, name) in zip(axes[0], FILES.items()):
        t, V, V_up = load(name)
        ax.semilogy(t, V, label="V")
        ax.semilogy(t, V_up, "--", label="V_up")
        ax.set_xlabel("t")
        ax.set_title(label)
        ax.legend()
    fig.suptitle(TITLE)
    fig.tight_layout()
    out = HERE / (Path(__file__).stem + ".png")
    fig.savefig(out, dpi=150)
    if "--show" in sys.argv:
        plt.show()


if __name__ == "__main__":
    main()
'''


def plot_script(files: dict, title: str) -> str:
    """Stand-alone matplotlib script; ``files`` maps panel label to CSV name."""
    return _PLOT_TEMPLATE.format(files=dict(files), title=title)


def write_plot_script(path, files: dict, title: str) -> Path:
    path = Path(path)
    path.write_text(plot_script(files, title), encoding="utf-8")
    return path
