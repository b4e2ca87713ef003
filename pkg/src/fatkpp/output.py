"""CSV, manifest, and SVG writers.

Data files are deterministic: floats print with 17 significant digits
(so they re-parse to the exact same float64), rows keep grid order, and
no timestamps appear anywhere except run.json.  SVG output is plain
text assembled from the same formatting rules, so a repeated run
produces byte-identical files.
"""

import json
import math
import os
import time

import numpy as np

from .errors import IoError

FLOAT_FMT = "%.17g"

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf")


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % float(v)


def write_csv(path, header, columns):
    """Write equal-length columns under a comma-separated header."""
    columns = [np.asarray(c) for c in columns]
    n = len(columns[0]) if columns else 0
    for c in columns:
        if len(c) != n:
            raise IoError("column lengths disagree: %d vs %d"
                          % (len(c), n))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(n):
                fh.write(",".join(_cell(c[i]) for c in columns) + "\n")
    except OSError as exc:
        raise IoError("cannot write %s: %s" % (path, exc))
    return path


def write_field_csv(path, field, value_name="value", stride=1):
    """One sampled field as (x, value) rows."""
    return write_csv(path, ("x", value_name),
                     (field.grid.x[::stride], field.values[::stride]))


def write_snapshots(outdir, run, stride=1):
    """snapshot_t<time>.csv per stored snapshot; returns the paths."""
    paths = []
    for t, fld in run.snapshots:
        path = os.path.join(outdir, "snapshot_t%g.csv" % t)
        paths.append(write_field_csv(path, fld, value_name="n",
                                     stride=stride))
    return paths


def write_monitors(outdir, run):
    m = run.monitors
    names = ("t", "n_min", "n_max", "boundary_density", "clamp_total")
    return write_csv(os.path.join(outdir, "monitors.csv"), names,
                     tuple(m[k] for k in names))


def write_front_csv(outdir, tracks, kernel):
    """All level tracks in one table against the front law columns."""
    cols = {k: [] for k in ("t", "level", "x_level", "f_inv_t",
                            "ratio_f_over_t", "garnier_lo", "garnier_hi")}
    for tr in tracks:
        for i, t in enumerate(tr.times):
            x = tr.positions[i]
            cols["t"].append(t)
            cols["level"].append(tr.level)
            cols["x_level"].append(x)
            cols["f_inv_t"].append(tr.predicted[i])
            if math.isfinite(x) and t > 0.0:
                cols["ratio_f_over_t"].append(kernel.f(x) / t)
            else:
                cols["ratio_f_over_t"].append(float("nan"))
            cols["garnier_lo"].append(tr.garnier_lo[i])
            cols["garnier_hi"].append(tr.garnier_hi[i])
    return write_csv(os.path.join(outdir, "front.csv"), tuple(cols),
                     tuple(cols.values()))


def write_envelope_csv(outdir, rows):
    """rows: (t, theta_hat, lo_violation, hi_violation) per snapshot."""
    names = ("t", "theta_hat", "sandwich_lo_violation",
             "sandwich_hi_violation")
    cols = list(zip(*rows)) if rows else [[], [], [], []]
    return write_csv(os.path.join(outdir, "envelope.csv"), names, cols)


def write_hopfcole_csv(outdir, hc):
    """One rescaled field: rows are the (t, x) product in grid order."""
    nt, nx = hc.u.shape
    tt = np.repeat(hc.times, nx)
    xx = np.tile(hc.xs, nt)
    err = np.abs(hc.u - hc.limit)
    path = os.path.join(outdir, "hopfcole_eps%g.csv" % hc.eps)
    return write_csv(path, ("t", "x", "u_eps", "u_limit", "abs_err"),
                     (tt, xx, hc.u.ravel(), hc.limit.ravel(),
                      err.ravel()))


def write_mutation_csv(outdir, mrun, stride=1):
    """Density and potential per snapshot of one small-eps run."""
    g = mrun.run.grid
    xs = g.x[::stride]
    cols = {k: [] for k in ("t", "x", "n_eps", "u_eps", "floored_flag")}
    for (t, fld), (_, u, floored) in zip(mrun.run.snapshots,
                                         mrun.potentials):
        cols["t"].append(np.full(xs.size, t))
        cols["x"].append(xs)
        cols["n_eps"].append(fld.values[::stride])
        cols["u_eps"].append(u[::stride])
        cols["floored_flag"].append(floored[::stride].astype(int))
    path = os.path.join(outdir, "mutation_eps%g.csv" % mrun.eps)
    return write_csv(path, tuple(cols),
                     tuple(np.concatenate(v) for v in cols.values()))


def write_limits_csv(outdir, grid, labelled, stride=1):
    """labelled: (t, regions) pairs, regions a length-N character array."""
    xs = grid.x[::stride]
    ts, xcol, rcol = [], [], []
    for t, regions in labelled:
        ts.append(np.full(xs.size, t))
        xcol.append(xs)
        rcol.append(np.asarray(regions)[::stride])
    return write_csv(os.path.join(outdir, "limits.csv"),
                     ("t", "x", "region"),
                     (np.concatenate(ts), np.concatenate(xcol),
                      np.concatenate(rcol)))


def write_hj_solution_csv(outdir, sol, stride=1):
    xs = sol.grid.x[::stride]
    ts, xcol, ucol = [], [], []
    for t, fld in sol.snapshots:
        ts.append(np.full(xs.size, t))
        xcol.append(xs)
        ucol.append(fld.values[::stride])
    return write_csv(os.path.join(outdir, "hj_solution.csv"),
                     ("t", "x", "u"),
                     (np.concatenate(ts), np.concatenate(xcol),
                      np.concatenate(ucol)))


def write_hamiltonian_csv(outdir, ps, Hs, lower, upper):
    return write_csv(os.path.join(outdir, "hamiltonian.csv"),
                     ("p", "H", "H_lower_env", "H_upper_env"),
                     (ps, Hs, lower, upper))


def write_zeroset_csv(outdir, rows):
    """rows: (t, left, right, example_lo, example_hi) per snapshot."""
    names = ("t", "x_boundary_left", "x_boundary_right", "example_lo",
             "example_hi")
    cols = list(zip(*rows)) if rows else [[]] * 5
    return write_csv(os.path.join(outdir, "zeroset.csv"), names, cols)


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    raise TypeError("not JSON serializable: %r" % type(v))


def write_run_json(outdir, config_raw, manifest, aborted=False,
                   abort_reason=None, extra=None):
    """The run manifest; the only file that carries a timestamp."""
    doc = {
        "config": config_raw,
        "manifest": manifest,
        "aborted": bool(aborted),
        "abort_reason": abort_reason,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if extra:
        doc.update(extra)
    path = os.path.join(outdir, "run.json")
    try:
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True,
                      default=_json_default)
            fh.write("\n")
    except OSError as exc:
        raise IoError("cannot write %s: %s" % (path, exc))
    return path


# ----------------------------------------------------------------------
# SVG plots
# ----------------------------------------------------------------------

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 64, 16, 28, 44


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _scale(v, lo, hi, a, b):
    if hi <= lo:
        return 0.5 * (a + b)
    return a + (v - lo) * (b - a) / (hi - lo)


def emit_svg_plot(path, series, title="", xlabel="", ylabel="",
                  logy=False):
    """Line plot of (label, x, y) triples as a standalone SVG.

    Non-finite points are dropped per series (with logy, so are y <= 0).
    A series left with a single point draws a circle marker instead of a
    line.  If nothing at all survives, IoError is raised and no file is
    created.  Output depends only on the inputs, never on the clock.
    """
    clean = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if logy:
            keep &= ys > 0.0
        if np.any(keep):
            yy = np.log10(ys[keep]) if logy else ys[keep]
            clean.append((str(label), xs[keep], yy))
    if not clean:
        raise IoError("nothing to plot: every series is empty")

    xlo = min(float(np.min(xs)) for _, xs, _ in clean)
    xhi = max(float(np.max(xs)) for _, xs, _ in clean)
    ylo = min(float(np.min(ys)) for _, _, ys in clean)
    yhi = max(float(np.max(ys)) for _, _, ys in clean)
    if xhi <= xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi <= ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.04 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT

    def px(v):
        return _scale(v, xlo, xhi, x0, x1)

    def py(v):
        return _scale(v, ylo, yhi, y0, y1)

    out = []
    out.append('<svg xmlns="http://www.w3.org/2000/svg" width="%d" '
               'height="%d" viewBox="0 0 %d %d">' % (_W, _H, _W, _H))
    out.append('<rect width="%d" height="%d" fill="white"/>' % (_W, _H))
    out.append('<g font-family="sans-serif" font-size="12" fill="black">')
    if title:
        out.append('<text x="%d" y="18" text-anchor="middle" '
                   'font-size="14">%s</text>' % ((_ML + _W - _MR) // 2,
                                                 _esc(title)))
    # axes
    out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="black"/>'
               % (x0, y0, x1, y0))
    out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="black"/>'
               % (x0, y0, x0, y1))
    for tv in _ticks(xlo, xhi):
        xpix = px(tv)
        out.append('<line x1="%.2f" y1="%d" x2="%.2f" y2="%d" '
                   'stroke="black"/>' % (xpix, y0, xpix, y0 + 5))
        out.append('<text x="%.2f" y="%d" text-anchor="middle">%s</text>'
                   % (xpix, y0 + 18, "%.4g" % tv))
    for tv in _ticks(ylo, yhi):
        ypix = py(tv)
        out.append('<line x1="%d" y1="%.2f" x2="%d" y2="%.2f" '
                   'stroke="black"/>' % (x0 - 5, ypix, x0, ypix))
        lab = "%.3g" % (10.0 ** tv) if logy else "%.4g" % tv
        out.append('<text x="%d" y="%.2f" text-anchor="end" '
                   'dominant-baseline="middle">%s</text>'
                   % (x0 - 8, ypix, lab))
    if xlabel:
        out.append('<text x="%d" y="%d" text-anchor="middle">%s</text>'
                   % ((x0 + x1) // 2, _H - 8, _esc(xlabel)))
    if ylabel:
        out.append('<text x="14" y="%d" text-anchor="middle" '
                   'transform="rotate(-90 14 %d)">%s</text>'
                   % ((y0 + y1) // 2, (y0 + y1) // 2, _esc(ylabel)))

    for k, (label, xs, ys) in enumerate(clean):
        color = _PALETTE[k % len(_PALETTE)]
        if xs.size == 1:
            out.append('<circle cx="%.2f" cy="%.2f" r="3" fill="%s"/>'
                       % (px(xs[0]), py(ys[0]), color))
        else:
            pts = " ".join("%.2f,%.2f" % (px(a), py(b))
                           for a, b in zip(xs, ys))
            out.append('<polyline fill="none" stroke="%s" '
                       'stroke-width="1.5" points="%s"/>' % (color, pts))
        ly = _MT + 14 + 16 * k
        out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="%s" '
                   'stroke-width="1.5"/>' % (x1 - 150, ly - 4, x1 - 130,
                                             ly - 4, color))
        out.append('<text x="%d" y="%d">%s</text>'
                   % (x1 - 124, ly, _esc(label)))
    out.append('</g>')
    out.append('</svg>')

    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise IoError("cannot write %s: %s" % (path, exc))
    return path


def _esc(s):
    return (s.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))
