"""Small-jump rescaling: contracted kernels, rescaled runs, limit sets.

The jump map m_eps(h) = sign(h) f_inv(eps f(|h|)) shrinks every jump so
that f(m_eps(h)) = eps f(h) exactly; pushing the base density through it
gives the rescaled kernel J_eps whose f-second moment scales like eps^2.
The rescaled equation eps dn/dt = J_eps*n - n + n(1-n) is integrated by
the ordinary stepper with a 1/eps rate factor, and the potential
u = -eps ln n is the quantity the Hamilton-Jacobi limit speaks about.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_erosion

from .cauchy import DT_MAX, run as cauchy_run
from .errors import (GridTooCoarse, InvalidParams, NonIntegrableTail,
                     NotMutationEligible)
from .gridops import DiscreteKernel, Field, adaptive_integrate, invert_monotone

_JUMP_MAPS = ("contraction", "linearized")


def _require_eligible(kernel):
    if not kernel.mutation_eligible:
        raise NotMutationEligible(
            "%r has f'(0) = %g; the small-jump rescaling needs a finite "
            "positive origin slope" % (kernel, kernel.fprime0))


def contraction(kernel, eps, h):
    """m_eps(h) = sign(h) f_inv(eps f(|h|)); odd, and m_1 = identity."""
    _require_eligible(kernel)
    if not (0.0 < eps <= 1.0):
        raise InvalidParams("contraction needs eps in (0, 1]")
    h = np.asarray(h, dtype=float)
    if eps == 1.0:
        out = h.copy()
    else:
        out = np.sign(h) * kernel.f_inv(eps * kernel.f(np.abs(h)))
    return out if out.ndim else float(out)


def rescaled_density(kernel, eps, h):
    """Normalized density of the contracted jumps (pushforward of Jhat).

    (1/(Z eps)) * (f'(|h|) / f'(Psi_eps(|h|))) * e^{-f(|h|)/eps}, where
    Psi_eps is the dilation inverse of the contraction; the h=0 limit is
    1/(Z eps).
    """
    _require_eligible(kernel)
    if not (0.0 < eps <= 1.0):
        raise InvalidParams("rescaled_density needs eps in (0, 1]")
    h = np.asarray(h, dtype=float)
    a = np.abs(h)
    out = np.empty_like(a)
    zero = a == 0.0
    out[zero] = 1.0 / (kernel.Z * eps)
    pos = ~zero
    if pos.any():
        ap = a[pos]
        psi = kernel.f_inv(kernel.f(ap) / eps)
        out[pos] = (kernel.f_prime(ap) / kernel.f_prime(psi)
                    * np.exp(-kernel.f(ap) / eps)) / (kernel.Z * eps)
    return out if out.ndim else float(out)


def _linearized_jump(kernel, eps, h):
    """Control-map jumps sign(h) * eps f(|h|)/f'(0) (no contraction back
    through f_inv); its generator reproduces the limit Hamiltonian at any
    eps, which makes it the scheme-resolution control."""
    h = np.asarray(h, dtype=float)
    out = np.sign(h) * (eps / kernel.fprime0) * kernel.f(np.abs(h))
    return out if out.ndim else float(out)


def _linearized_density(kernel, eps, h):
    h = np.asarray(h, dtype=float)
    a = np.abs(h)
    out = np.empty_like(a)
    zero = a == 0.0
    out[zero] = 1.0 / (kernel.Z * eps)      # f'(g(0)) = f'(0) cancels
    pos = ~zero
    if pos.any():
        g = kernel.f_inv(kernel.fprime0 * a[pos] / eps)
        out[pos] = (kernel.fprime0 / (kernel.Z * eps)
                    * np.exp(-kernel.fprime0 * a[pos] / eps)
                    / kernel.f_prime(g))
    return out if out.ndim else float(out)


@dataclass
class MutationKernel:
    """Continuum rescaled kernel: jump map m, density, tail bound."""

    base: object
    eps: float
    jump_map: str = "contraction"

    def __post_init__(self):
        _require_eligible(self.base)
        if not (0.0 < self.eps <= 1.0):
            raise InvalidParams("eps must lie in (0, 1]")
        if self.jump_map not in _JUMP_MAPS:
            raise InvalidParams("jump_map must be one of %s" % (_JUMP_MAPS,))

    def m(self, h):
        if self.jump_map == "contraction":
            return contraction(self.base, self.eps, h)
        return _linearized_jump(self.base, self.eps, h)

    def density(self, h):
        if self.jump_map == "contraction":
            return rescaled_density(self.base, self.eps, h)
        return _linearized_density(self.base, self.eps, h)

    def tail_bound(self, R):
        """Mass beyond |h| > R equals the base mass beyond m^{-1}(R)."""
        k, eps = self.base, self.eps
        if self.jump_map == "contraction":
            back = k.f_inv(k.f(R) / eps)
        else:
            back = k.f_inv(k.fprime0 * R / eps)
        return k.tail_bound(back)

    def half_support(self, tail_tol):
        base_R = self.base.half_support(tail_tol)
        return float(self.m(base_R))

    def mass(self):
        val = adaptive_integrate(lambda h: self.density(h), 0.0, np.inf,
                                 tail=self.tail_bound)
        return 2.0 * val

    def f_second_moment(self):
        """int f(|h|)^2 dJ_eps by direct quadrature on this density."""
        f = self.base.f
        val = adaptive_integrate(
            lambda h: f(h) ** 2 * self.density(h), 0.0, np.inf,
            epsabs=1e-12)
        return 2.0 * val


def build_mutation_kernel(kernel, eps, jump_map="contraction"):
    return MutationKernel(kernel, float(eps), jump_map)


def interquartile(kernel):
    """h0 with int_0^{h0} Jhat = 1/4 (half the mass of the right side)."""
    return invert_monotone(
        lambda h: adaptive_integrate(kernel.J_hat, 0.0, h) if h > 0 else 0.0,
        0.25, lo=0.0)


def discretize_mutation_kernel(mk, grid, tail_tol=1e-6):
    """Sample J_eps on grid offsets, refusing unresolvable spikes.

    The density concentrates on a scale m_eps(h0) (h0 the base kernel's
    interquartile point); at least 4 cells must fit under it or the
    sampled kernel would misrepresent the jump distribution entirely.
    """
    h0 = interquartile(mk.base)
    scale = abs(mk.m(h0))
    if grid.dx > scale / 4.0:
        raise GridTooCoarse(
            "dx = %g cannot resolve the rescaled kernel: need dx <= "
            "m_eps(h0)/4 = %g (h0 = %g)" % (grid.dx, scale / 4.0, h0))
    R = min(mk.half_support(tail_tol), 2.0 * grid.L)
    K = max(1, int(np.ceil(R / grid.dx)))
    off = grid.dx * np.arange(-K, K + 1)
    w = mk.density(off) * grid.dx
    lost = 1.0 - float(w.sum())
    return DiscreteKernel(grid, w, half_support=K * grid.dx, lost_mass=lost)


# ----------------------------------------------------------------------
# initial data


def default_A(kernel):
    """Midpoint of the admissible interval (0, 1 - 1/mu)."""
    _require_eligible(kernel)
    if not np.isfinite(kernel.mu):
        return 0.5
    return 0.5 * (1.0 - 1.0 / kernel.mu)


def growth_bound(kernel, A):
    """r_hat = int e^{A f} dJhat = (1/Z) int e^{-(1-A) f} dh (finite for
    A below 1 - 1/mu; this is the sub-solution decay rate of u)."""
    _require_eligible(kernel)
    if not (0.0 < A < 1.0 - 1.0 / kernel.mu):
        raise NonIntegrableTail(
            "A = %g outside (0, 1 - 1/mu) = (0, %g): e^{A f} Jhat has a "
            "divergent tail" % (A, 1.0 - 1.0 / kernel.mu))
    lam = 1.0 - A

    def tail(R):
        c = lam * R * kernel.f_prime(R)
        if c <= 1.0 + 1e-12:
            return np.inf
        return np.exp(-lam * kernel.f(R)) * R / (c - 1.0)

    val = adaptive_integrate(lambda h: np.exp(-lam * kernel.f(h)),
                             0.0, np.inf, tail=tail)
    return 2.0 * val / kernel.Z


def fd_condition(kernel, u0, A, grid=None, pairs=10_000, seed=0):
    """Worst violation of u(x+h) - u(x) >= -A f(|h|) over random pairs.

    Returns the max over sampled pairs of -A f(|x_j - x_i|) - (u_j - u_i);
    nonpositive (up to roundoff) means the condition holds.
    """
    if isinstance(u0, Field):
        grid = u0.grid
        u = u0.values
    else:
        u = np.asarray(u0, dtype=float)
        if grid is None:
            raise InvalidParams("fd_condition needs a grid for raw arrays")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, grid.N, size=pairs)
    j = rng.integers(0, grid.N, size=pairs)
    keep = i != j
    i, j = i[keep], j[keep]
    gap = u[j] - u[i]
    bound = -A * kernel.f(np.abs(grid.x[j] - grid.x[i]))
    return float(np.max(bound - gap))


@dataclass
class InitialDataMut:
    """Nonnegative Lipschitz potential u0 with its decay parameter A."""

    u0: Field
    A: float

    def n0(self, eps):
        return Field(self.u0.grid, np.exp(-self.u0.values / eps))


def mutation_initial_data(kernel, grid, A=None, u0_values=None,
                          fd_tol=1e-8):
    """Build and validate initial data; the default profile is u0 = A f.

    Validation: A in (0, 1 - 1/mu), u0 nonnegative, and the sampled
    finite-difference condition u0(x+h) - u0(x) >= -A f(|h|) within
    fd_tol.
    """
    _require_eligible(kernel)
    if A is None:
        A = default_A(kernel)
    hi = 1.0 - 1.0 / kernel.mu if np.isfinite(kernel.mu) else 1.0
    if not (0.0 < A < hi):
        raise InvalidParams("A = %g outside the admissible (0, %g)"
                            % (A, hi))
    if u0_values is None:
        u0_values = A * kernel.f(np.abs(grid.x))
    u0 = Field(grid, u0_values)
    if u0.values.min() < 0.0:
        raise InvalidParams("u0 must be nonnegative")
    worst = fd_condition(kernel, u0, A)
    if worst > fd_tol:
        raise InvalidParams(
            "u0 violates the finite-difference decay condition by %.3e"
            % worst)
    return InitialDataMut(u0, float(A))


# ----------------------------------------------------------------------
# rescaled runs


@dataclass
class MutationRun:
    """A rescaled run with its potential snapshots u = -eps ln n."""

    eps: float
    A: float
    run: object                     # SimulationRun in slow time
    potentials: list                # [(t, u values, floored mask), ...]
    jump_map: str

    def potential_at(self, t, tol=1e-9):
        for s, u, m in self.potentials:
            if abs(s - t) <= tol:
                return u, m
        raise KeyError("no potential snapshot at t=%g" % t)


def potential_of(field_values, eps):
    """u = -eps ln n with the documented 1e-300 floor and its mask."""
    floored = field_values < 1e-300
    u = -eps * np.log(np.maximum(field_values, 1e-300))
    return u, floored


def discrete_lipschitz(u, grid, margin=0):
    """max |u(x+dx) - u(x)|/dx over nodes at least margin cells from the
    edges.  The zero-padded convolution depresses n (inflates u) inside
    the outermost kernel-radius band, so gradient invariants are only
    meaningful past that band; pass margin = dk.K to skip it."""
    u = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    d = np.abs(np.diff(u)) / grid.dx
    if margin > 0:
        d = d[margin:len(d) - margin]
    if d.size == 0:
        raise InvalidParams("margin leaves no interior differences")
    return float(d.max())


def mutation_run(kernel, grid, eps, config, init, jump_map="contraction",
                 tail_tol=1e-6):
    """Integrate eps dn/dt = J_eps*n - n + n(1-n) from n0 = e^{-u0/eps}.

    config.dt is slow time; the effective fast step dt/eps must respect
    the usual stability ceiling, enforced here as dt <= eps*dt_max.
    """
    _require_eligible(kernel)
    if not (0.0 < eps <= 1.0):
        raise InvalidParams("eps must lie in (0, 1]")
    if config.dt > eps * DT_MAX + 1e-15:
        raise InvalidParams(
            "dt = %g too large for eps = %g: need dt <= eps*%g"
            % (config.dt, eps, DT_MAX))
    mk = build_mutation_kernel(kernel, eps, jump_map)
    dk = discretize_mutation_kernel(mk, grid, tail_tol)
    n0 = init.n0(eps)
    sim = cauchy_run(kernel, grid, config, n0, dk=dk, rate_scale=1.0 / eps)
    pots = []
    for t, fld in sim.snapshots:
        u, mask = potential_of(fld.values, eps)
        pots.append((t, u, mask))
    sim.manifest["eps"] = eps
    sim.manifest["A"] = init.A
    sim.manifest["jump_map"] = jump_map
    sim.manifest["kernel_cells"] = dk.K
    return MutationRun(eps, init.A, sim, pots, jump_map)


# ----------------------------------------------------------------------
# limit sets


def classify_limit_sets(u, tol):
    """Partition nodes into 'A' (u > tol), 'B' (u < tol, eroded 2 cells),
    and 'U' for the remainder."""
    u = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if tol <= 0.0:
        raise InvalidParams("tol must be positive")
    a_pos = u > tol
    b_null = binary_erosion(u < tol, iterations=2)
    out = np.full(u.shape, "U", dtype="<U1")
    out[a_pos] = "A"
    out[b_null & ~a_pos] = "B"
    return out
