"""Run configuration: JSON parsing, defaults, and full validation.

A run is described by one JSON object with an ``experiment`` name and up
to five blocks (kernel, grid, solver, analysis, output).  Parsing is
split in two: `parse_config` turns the file into a dict (syntax problems
raise ParseError with line/column context), and `validate_config` turns
the dict into a `RunConfig`, collecting every violated constraint before
raising a single ValidationError, so a bad config is fixed in one pass.
"""

import json
import math

from .cauchy import DT_MAX, SolverConfig
from .errors import InvalidParams, IoError, ParseError, ValidationError
from .gridops import Grid1D
from .kernels import KernelSpec, build_kernel
from .mutation import default_A

EXPERIMENTS = ("KernelValidate", "Simulate", "Front", "HopfCole",
               "Mutation", "HJ", "Hamiltonian", "CrossValidate")

# Blocks each experiment actually reads, beyond the always-required
# kernel block.  Listed analysis keys are required; the rest default.
_NEEDS_GRID = {"Simulate", "Front", "HopfCole", "Mutation", "HJ",
               "CrossValidate"}
_NEEDS_EPS = {"HopfCole", "Mutation", "CrossValidate"}
_NEEDS_COMPACT = {"HopfCole": 4, "CrossValidate": 2}
_NEEDS_ELIGIBLE = {"Mutation", "HJ", "Hamiltonian", "CrossValidate"}

_KERNEL_KEYS = {"family", "alpha", "beta", "b", "sigma"}
_GRID_KEYS = {"L", "N"}
_SOLVER_KEYS = {"dt", "t_end", "snapshots", "snapshot_count", "method",
                "C", "boundary_guard"}
_ANALYSIS_KEYS = {"levels", "eps", "A", "theta1_alpha", "compact"}
_OUTPUT_KEYS = {"directory", "plot", "stride"}
_TOP_KEYS = {"experiment", "kernel", "grid", "solver", "analysis",
             "output"}


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class RunConfig:
    """Validated configuration with every default already filled in.

    kernel is the built (normalized) Kernel; grid and solver are None
    for experiments that do not integrate anything.  raw echoes the
    parsed JSON for the manifest.
    """

    def __init__(self, experiment, spec, kernel, grid, solver, C,
                 levels, eps_list, A, theta1_alpha, compact, out_dir,
                 plot, stride, raw):
        self.experiment = experiment
        self.spec = spec
        self.kernel = kernel
        self.grid = grid
        self.solver = solver
        self.C = C
        self.levels = levels
        self.eps_list = eps_list
        self.A = A
        self.theta1_alpha = theta1_alpha
        self.compact = compact
        self.out_dir = out_dir
        self.plot = plot
        self.stride = stride
        self.raw = raw


def parse_config(path):
    """Read and validate a JSON run configuration.

    An unreadable path raises IoError; syntax errors raise ParseError
    carrying the line and column; a syntactically valid config that
    breaks any constraint raises ValidationError whose .issues lists
    all of them.
    """
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError("cannot read config %s: %s" % (path, exc))
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("invalid JSON at line %d column %d: %s"
                         % (exc.lineno, exc.colno, exc.msg))
    if not isinstance(raw, dict):
        raise ParseError("top level must be a JSON object, got %s"
                         % type(raw).__name__)
    return validate_config(raw)


def _block(raw, name, allowed, issues):
    v = raw.get(name)
    if v is None:
        return {}
    if not isinstance(v, dict):
        issues.append("%s: must be an object" % name)
        return {}
    for key in sorted(set(v) - allowed):
        issues.append("%s.%s: unknown key" % (name, key))
    return v


def validate_config(raw):
    """Check a parsed config dict and return the filled-in RunConfig."""
    issues = []
    for key in sorted(set(raw) - _TOP_KEYS):
        issues.append("%s: unknown top-level key" % key)

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        issues.append("experiment: must be one of %s, got %r"
                      % (", ".join(EXPERIMENTS), experiment))
        experiment = None

    # ---- kernel (required for every experiment) ----
    kernel = None
    spec = None
    kb = raw.get("kernel")
    if not isinstance(kb, dict):
        issues.append("kernel: block is required and must be an object")
    else:
        for key in sorted(set(kb) - _KERNEL_KEYS):
            issues.append("kernel.%s: unknown key" % key)
        family = kb.get("family")
        if not isinstance(family, str):
            issues.append("kernel.family: must be a string")
        else:
            kwargs = {}
            ok = True
            for key in ("alpha", "beta", "b", "sigma"):
                if key in kb:
                    if not _is_num(kb[key]):
                        issues.append("kernel.%s: must be a number" % key)
                        ok = False
                    else:
                        kwargs[key] = float(kb[key])
            if ok:
                try:
                    spec = KernelSpec(family=family, **kwargs)
                    kernel = build_kernel(spec)
                except InvalidParams as exc:
                    issues.append("kernel: %s" % exc)

    # ---- grid ----
    grid = None
    needs_grid = experiment in _NEEDS_GRID
    gb = _block(raw, "grid", _GRID_KEYS, issues)
    if needs_grid and not gb:
        issues.append("grid: block is required for %s" % experiment)
    if gb:
        L = gb.get("L")
        N = gb.get("N")
        if not _is_num(L):
            issues.append("grid.L: must be a number")
        elif not (isinstance(N, int) and not isinstance(N, bool)):
            issues.append("grid.N: must be an integer")
        else:
            try:
                grid = Grid1D(float(L), N)
            except InvalidParams as exc:
                issues.append("grid: %s" % exc)

    # ---- analysis (validated before solver so eps can gate dt) ----
    ab = _block(raw, "analysis", _ANALYSIS_KEYS, issues)

    levels = (0.5,)
    if "levels" in ab:
        v = ab["levels"]
        if (not isinstance(v, list) or not v
                or not all(_is_num(c) and 0.0 < c < 1.0 for c in v)):
            issues.append("analysis.levels: must be a nonempty list of "
                          "numbers in (0, 1)")
        else:
            levels = tuple(float(c) for c in v)

    eps_list = ()
    if "eps" in ab:
        v = ab["eps"]
        if (not isinstance(v, list) or not v
                or not all(_is_num(c) and 0.0 < c <= 1.0 for c in v)):
            issues.append("analysis.eps: must be a nonempty list of "
                          "numbers in (0, 1]")
        else:
            eps_list = tuple(float(c) for c in v)
    elif experiment in _NEEDS_EPS:
        issues.append("analysis.eps: required for %s" % experiment)

    theta1_alpha = 0.5
    if "theta1_alpha" in ab:
        v = ab["theta1_alpha"]
        if not (_is_num(v) and 0.0 < v < 1.0):
            issues.append("analysis.theta1_alpha: must lie in (0, 1)")
        else:
            theta1_alpha = float(v)

    compact = None
    want = _NEEDS_COMPACT.get(experiment)
    if "compact" in ab:
        v = ab["compact"]
        if (not isinstance(v, list) or len(v) not in (2, 4)
                or not all(_is_num(c) for c in v)
                or not all(v[i] < v[i + 1] for i in range(0, len(v), 2))):
            issues.append("analysis.compact: must be [x_lo, x_hi] or "
                          "[x_lo, x_hi, t_lo, t_hi] with lo < hi")
        elif want is not None and len(v) != want:
            issues.append("analysis.compact: %s needs %d entries, got %d"
                          % (experiment, want, len(v)))
        else:
            compact = tuple(float(c) for c in v)
    elif want is not None:
        issues.append("analysis.compact: required for %s" % experiment)

    A = None
    if "A" in ab:
        v = ab["A"]
        if not (_is_num(v) and v > 0.0):
            issues.append("analysis.A: must be a positive number")
        else:
            A = float(v)

    # ---- eligibility and A range (need the built kernel) ----
    if kernel is not None:
        if experiment in _NEEDS_ELIGIBLE and not kernel.mutation_eligible:
            issues.append(
                "kernel: NotMutationEligible for %s; %s has f'(0) = %g "
                "and mu = %g (needs fat tail, f'(0) > 0, mu > 1)"
                % (experiment, kernel.family, kernel.fprime0, kernel.mu))
        elif experiment in _NEEDS_ELIGIBLE:
            hi = 1.0 - 1.0 / kernel.mu if math.isfinite(kernel.mu) else 1.0
            if A is None:
                A = default_A(kernel)
            elif not (0.0 < A < hi):
                issues.append("analysis.A: must lie in (0, %g) for this "
                              "kernel, got %g" % (hi, A))

    # ---- solver ----
    solver = None
    C = 1.0
    sb = _block(raw, "solver", _SOLVER_KEYS, issues)
    if needs_grid and not sb:
        issues.append("solver: block is required for %s" % experiment)
    if sb:
        bad = False
        dt = sb.get("dt", 0.05)
        t_end = sb.get("t_end")
        method = sb.get("method", "RK4")
        guard = sb.get("boundary_guard", 1e-4)
        if not (_is_num(dt) and 0.0 < dt <= DT_MAX + 1e-12):
            issues.append("solver.dt: must lie in (0, %g]" % DT_MAX)
            bad = True
        if not (_is_num(t_end) and t_end >= 0.0):
            issues.append("solver.t_end: must be a nonnegative number")
            t_end = None
        if method not in ("Euler", "RK4"):
            issues.append("solver.method: must be Euler or RK4")
            bad = True
        if "C" in sb:
            if not (_is_num(sb["C"]) and sb["C"] > 0.0):
                issues.append("solver.C: must be a positive number")
            else:
                C = float(sb["C"])
        if not (_is_num(guard) and guard > 0.0):
            issues.append("solver.boundary_guard: must be positive")
            bad = True

        times = None
        if "snapshots" in sb and "snapshot_count" in sb:
            issues.append("solver: give snapshots or snapshot_count, "
                          "not both")
        elif "snapshots" in sb:
            v = sb["snapshots"]
            if (not isinstance(v, list) or not v
                    or not all(_is_num(c) for c in v)):
                issues.append("solver.snapshots: must be a nonempty list "
                              "of numbers")
            else:
                times = tuple(float(c) for c in v)
        elif "snapshot_count" in sb:
            v = sb["snapshot_count"]
            if not (isinstance(v, int) and not isinstance(v, bool)
                    and v >= 1):
                issues.append("solver.snapshot_count: must be a positive "
                              "integer")
            elif t_end is not None:
                times = tuple(t_end * i / v for i in range(1, v + 1))

        if t_end is not None:
            if times is not None and any(
                    not (0.0 <= s <= t_end + 1e-12) for s in times):
                issues.append("solver.snapshots: every time must lie in "
                              "[0, t_end]")
                times = None
            if not bad:
                try:
                    solver = SolverConfig(dt=float(dt), t_end=float(t_end),
                                          snapshot_times=times,
                                          method=str(method),
                                          boundary_guard=float(guard))
                except InvalidParams as exc:
                    issues.append("solver: %s" % exc)

        if (eps_list and _is_num(dt)
                and experiment in ("Mutation", "CrossValidate")
                and dt > min(eps_list) * DT_MAX + 1e-12):
            issues.append("solver.dt: mutation runs need dt <= %g * "
                          "min(eps) = %g, got %g"
                          % (DT_MAX, min(eps_list) * DT_MAX, dt))

    # ---- output ----
    out_dir = "."
    plot = True
    stride = 1
    ob = _block(raw, "output", _OUTPUT_KEYS, issues)
    if "directory" in ob:
        if not isinstance(ob["directory"], str) or not ob["directory"]:
            issues.append("output.directory: must be a nonempty string")
        else:
            out_dir = ob["directory"]
    if "plot" in ob:
        if not isinstance(ob["plot"], bool):
            issues.append("output.plot: must be true or false")
        else:
            plot = ob["plot"]
    if "stride" in ob:
        v = ob["stride"]
        if not (isinstance(v, int) and not isinstance(v, bool) and v >= 1):
            issues.append("output.stride: must be a positive integer")
        else:
            stride = v

    if issues:
        raise ValidationError(issues)
    return RunConfig(experiment, spec, kernel, grid, solver, C, levels,
                     eps_list, A, theta1_alpha, compact, out_dir, plot,
                     stride, raw)
