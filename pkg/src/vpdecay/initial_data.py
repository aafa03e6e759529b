"""Construction of moment-cancelling neutral initial data.

The decay rate of the charge density of a dispersing two-species cloud is
set by how many spatial moments of the *net* initial density vanish: if
moments of order < m vanish and the order-m moment does not, free
transport makes the density sup-norm fall like t^-(m+3) and the field
like t^-(m+2), instead of the generic neutral rates t^-3 / t^-2.

The order-m spatial profile used here is a Gegenbauer-weighted window on
the first axis times normalized bumps on the others:

    mu_m(x) = Phi_m(x1) Psi(x2) Psi(x3),
    Phi_m(u) = (1 - u^2)^(p - 1/2) C_m^p(u) / (normalization),

normalized so the moment of x1^m is exactly 1.  Orthogonality of C_m^p
against lower-degree polynomials under that weight kills every moment of
order below m, giving the Kronecker moment pattern

    integral x^beta mu_m dx = delta(beta, (m, 0, 0))   for |beta| <= m.

mu_m is signed, so it cannot be a density by itself.  Each species instead
receives a nonnegative profile: a dominating bump B is added to the signed
part carried by the positive species, and B alone goes to the negative
species, so the difference is exactly mu_m while both summands stay
pointwise nonnegative.

The order-0 variant places the cancellation in velocity space: a common
spatial bump phi0 times the nonnegative split of a zero-mean velocity
profile eta, so the cloud is neutral but its limiting density profile is
eta itself (nontrivial).

Gaussian dipoles realize the same mechanism with off-the-shelf shapes:
two normalized Gaussians sharing one nonnegative velocity profile.  Equal
normalization cancels the order-0 net moment always; equal means cancel
order 1; equal widths cancel every moment and the solution is static zero.

The bumps here are deliberately off-center (``offset``) on the secondary
axes.  Centered bumps make the first *non*-vanishing correction term drop
by parity as well, which would push the profile-error decay from 1/t to
1/t^2 and is atypical of the generic construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import erf

from .core import ParticleEnsemble, Species
from .profiles import GaussBump1D, PolyBump1D, SeparableProfile3D
from .quadrature import gauss_legendre, tensor_rule

_DOMINATION_MARGIN = 1.05     # dominating bump exceeds the signed part by 5%
_GUARD_LATTICE = 101          # per-axis nodes for nonnegativity guards
_WEIGHT_DROP = 1e-16          # sampled nodes below this times max are dropped

PRESETS = ("gegenbauer", "gaussian_dipole", "exact_overlap", "single_species")


def gegenbauer(k: int, p: float) -> Polynomial:
    """Ultraspherical polynomial C_k^p by the three-term recurrence.

    Coefficients ascend in degree.  C_0 = 1, C_1 = 2 p u, and
    k C_k = 2 u (k + p - 1) C_{k-1} - (k + 2 p - 2) C_{k-2}.
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    c_prev = Polynomial([1.0])
    if k == 0:
        return c_prev
    c_cur = Polynomial([0.0, 2.0 * p])
    for j in range(2, k + 1):
        c_prev, c_cur = c_cur, (
            Polynomial([0.0, 2.0 * (j + p - 1.0) / j]) * c_cur
            - ((j + 2.0 * p - 2.0) / j) * c_prev)
    return c_cur


def weighted_phi(m: int, p: float | None = None, *,
                 halfwidth: float = 1.0) -> PolyBump1D:
    """Order-m window Phi_m: (1-z^2)^(p-1/2) C_m^p(z) with unit m-th moment.

    Lower moments vanish by orthogonality.  Requires p > m + 2 so the
    window keeps m+1 continuous derivatives; defaults to p = m + 3.
    """
    if m < 0:
        raise ValueError("order must be nonnegative")
    if p is None:
        p = float(m + 3)
    if not p > m + 2:
        raise ValueError(f"need weight exponent p > m + 2, got p={p} for m={m}")
    raw = PolyBump1D(s=p - 0.5, poly=gegenbauer(m, p), halfwidth=halfwidth)
    norm = raw.moment(m)
    if abs(norm) < 1e-14:
        raise ValueError(f"degenerate normalizing integral {norm:.3e} for m={m}, p={p}")
    return raw.scaled(1.0 / norm)


def bump(k: int, *, center: float = 0.0, halfwidth: float = 1.0) -> PolyBump1D:
    """C^k bump c (1 - z^2)^(k+1) with unit integral."""
    if k < 0:
        raise ValueError("smoothness must be nonnegative")
    raw = PolyBump1D(s=float(k + 1), poly=Polynomial([1.0]),
                     center=center, halfwidth=halfwidth)
    return raw.scaled(1.0 / raw.moment(0))


def mu_m(m: int, p: float | None = None, *, support_scale: float = 1.0,
         offset: float = 0.25) -> SeparableProfile3D:
    """Net spatial profile Phi_m x Psi x Psi with the Kronecker moment pattern."""
    if m < 1:
        raise ValueError("the tensor construction starts at order 1; "
                         "order 0 carries its cancellation in velocity space")
    L = support_scale
    phi = weighted_phi(m, p, halfwidth=L)
    psi = bump(m + 1, center=offset * L, halfwidth=L)
    return SeparableProfile3D.product(phi, psi, psi)


def _dominating_amplitude(signed: PolyBump1D, dom: PolyBump1D) -> float:
    """Smallest safe c with c*dom >= |signed| pointwise, times a 5% margin.

    Requires the dominating bump to vanish no faster than the signed part
    at the shared support edge, so the ratio stays bounded.
    """
    if dom.s > signed.s:
        raise ValueError("dominating bump would vanish faster at the edge "
                         f"(exponents {dom.s} > {signed.s})")
    a, b = signed.support
    u = np.linspace(a, b, 4001)[1:-1]
    ratio = np.abs(signed(u)) / dom(u)
    return _DOMINATION_MARGIN * float(ratio.max())


def neutral_pair(charge: float = 1.0, mass: float = 1.0) -> tuple[Species, Species]:
    return (Species(charge=charge, mass=mass, label="plus"),
            Species(charge=-charge, mass=mass, label="minus"))


@dataclass(frozen=True)
class AnalyticSpecies:
    """One species' initial phase density f0(x, v) = x_profile(x) v_profile(v)."""

    species: Species
    x_profile: SeparableProfile3D
    v_profile: SeparableProfile3D

    def phase_integral(self) -> float:
        return self.x_profile.integral() * self.v_profile.integral()


def _guard_nonnegative(profile: SeparableProfile3D, what: str) -> None:
    worst = profile.min_on_lattice(_GUARD_LATTICE)
    scale = profile.sup_on_lattice(_GUARD_LATTICE)
    if worst < -1e-12 * max(scale, 1.0):
        raise ValueError(f"{what} dips to {worst:.3e} on the guard lattice; "
                         "the dominating bump fails to cover the signed part")


def species_profiles(m: int, p: float | None = None, *,
                     support_scale: float = 1.0, offset: float = 0.25,
                     charge: float = 1.0, mass: float = 1.0,
                     ) -> tuple[AnalyticSpecies, AnalyticSpecies]:
    """Neutral two-species data whose net density realizes the order-m pattern.

    For m >= 1 the spatial profiles differ: the positive species carries
    mu_m plus a dominating bump, the negative species the bump alone, and
    both share one velocity profile with nonvanishing m-th axis derivative.
    For m = 0 the roles swap: a common normalized spatial bump multiplies
    the nonnegative split of a zero-mean velocity profile.
    """
    if m < 0:
        raise ValueError("order must be nonnegative")
    sp_plus, sp_minus = neutral_pair(charge, mass)
    L = support_scale

    if m == 0:
        psi_x = bump(1, center=offset * L, halfwidth=L)
        phi0 = SeparableProfile3D.product(psi_x, psi_x, psi_x)
        # zero-mean velocity shape: order-1 window is orthogonal to constants
        eta1 = weighted_phi(1, p if p is not None else 4.0)
        dom1 = PolyBump1D(s=3.0, poly=Polynomial([1.0]))
        c = _dominating_amplitude(eta1, dom1)
        psi_v = bump(1, center=offset)
        plus_v = (SeparableProfile3D.product(eta1, psi_v, psi_v)
                  + SeparableProfile3D.product(dom1.scaled(c), psi_v, psi_v))
        minus_v = SeparableProfile3D.product(dom1.scaled(c), psi_v, psi_v)
        _guard_nonnegative(plus_v, "positive-species velocity profile")
        return (AnalyticSpecies(sp_plus, phi0, plus_v),
                AnalyticSpecies(sp_minus, phi0, minus_v))

    phi = weighted_phi(m, p, halfwidth=L)
    psi = bump(m + 1, center=offset * L, halfwidth=L)
    dom = PolyBump1D(s=float(m + 2), poly=Polynomial([1.0]), halfwidth=L)
    c = _dominating_amplitude(phi, dom)
    plus_x = (SeparableProfile3D.product(phi, psi, psi)
              + SeparableProfile3D.product(dom.scaled(c), psi, psi))
    minus_x = SeparableProfile3D.product(dom.scaled(c), psi, psi)
    _guard_nonnegative(plus_x, "positive-species spatial profile")

    b_v = bump(m + 1)
    shared_v = SeparableProfile3D.product(b_v, b_v, b_v)
    return (AnalyticSpecies(sp_plus, plus_x, shared_v),
            AnalyticSpecies(sp_minus, minus_x, shared_v))


def default_dipole_velocity_profile() -> SeparableProfile3D:
    """Zero-integral smooth velocity shape used by the Gaussian presets."""
    odd = PolyBump1D(s=4.0, poly=Polynomial([0.0, 1.0]))
    even = PolyBump1D(s=4.0, poly=Polynomial([1.0]))
    return SeparableProfile3D.product(odd, even, even)


def gaussian_dipole(mean_plus, sigma_plus: float, mean_minus, sigma_minus: float,
                    vel_profile: SeparableProfile3D | None = None, *,
                    cutoff: float = 6.0, charge: float = 1.0, mass: float = 1.0,
                    ) -> tuple[AnalyticSpecies, AnalyticSpecies]:
    """Two opposite unit-charge Gaussians sharing one velocity profile.

    ``vel_profile`` must be a nontrivial zero-integral shape; it is repaired
    into a shared nonnegative profile by adding a dominating bump, so both
    species carry identical velocity marginals.  Net spatial moments then
    follow the Gaussian parameters alone: order 0 cancels by normalization,
    order 1 iff the means agree, order 2 survives iff the widths differ,
    and identical parameters give pointwise-identical species.

    Each truncated Gaussian is renormalized to unit mass on its cutoff box
    so the species totals cancel exactly.
    """
    if not (sigma_plus > 0 and sigma_minus > 0):
        raise ValueError("widths must be positive")
    mean_plus = np.broadcast_to(np.asarray(mean_plus, dtype=float), (3,))
    mean_minus = np.broadcast_to(np.asarray(mean_minus, dtype=float), (3,))

    if vel_profile is None:
        vel_profile = default_dipole_velocity_profile()
    scale = vel_profile.sup_on_lattice(_GUARD_LATTICE)
    if scale == 0.0:
        raise ValueError("velocity profile vanishes identically")
    if abs(vel_profile.integral()) > 1e-12 * max(scale, 1.0):
        raise ValueError(f"velocity profile must have zero integral, "
                         f"got {vel_profile.integral():.3e}")
    lo, hi = vel_profile.support_box
    doms = [PolyBump1D(s=3.0, poly=Polynomial([1.0]),
                       center=0.5 * (lo[i] + hi[i]),
                       halfwidth=0.5 * (hi[i] - lo[i])) for i in range(3)]
    dom = SeparableProfile3D.product(*doms)
    axes = [np.linspace(lo[i], hi[i], _GUARD_LATTICE)[1:-1] for i in range(3)]
    ratio = np.abs(vel_profile.tensor_values(*axes)) / dom.tensor_values(*axes)
    shared_v = vel_profile + dom.scaled(_DOMINATION_MARGIN * float(ratio.max()))
    _guard_nonnegative(shared_v, "shared velocity profile")

    def iso_gaussian(mean: np.ndarray, sigma: float) -> SeparableProfile3D:
        mass_1d = float(erf(cutoff / np.sqrt(2.0)))
        amp = 1.0 / (np.sqrt(2.0 * np.pi) * sigma * mass_1d)
        fs = tuple(GaussBump1D(mean=float(mean[i]), sigma=sigma,
                               cutoff=cutoff, amp=amp) for i in range(3))
        return SeparableProfile3D.product(*fs)

    sp_plus, sp_minus = neutral_pair(charge, mass)
    return (AnalyticSpecies(sp_plus, iso_gaussian(mean_plus, sigma_plus), shared_v),
            AnalyticSpecies(sp_minus, iso_gaussian(mean_minus, sigma_minus), shared_v))


def single_species(*, support_scale: float = 1.0, offset: float = 0.25,
                   charge: float = 1.0, mass: float = 1.0) -> tuple[AnalyticSpecies]:
    """One positive cloud: generic dispersion, limit profile = its v-marginal."""
    L = support_scale
    psi_x = bump(1, center=offset * L, halfwidth=L)
    phi0 = SeparableProfile3D.product(psi_x, psi_x, psi_x)
    b_v = PolyBump1D(s=2.0, poly=Polynomial([1.0]))
    psi_v = SeparableProfile3D.product(b_v, b_v, b_v)
    return (AnalyticSpecies(Species(charge, mass, "single"), phi0, psi_v),)


@dataclass(frozen=True)
class InitialDataSpec:
    """Declarative description of one initial-data construction."""

    preset: str = "gegenbauer"
    m: int = 1
    p_geg: float | None = None          # defaults to m + 3
    support_scale: float = 1.0
    offset: float = 0.25
    nx: int = 8                         # spatial quadrature nodes per axis
    nv: int = 8                         # velocity quadrature nodes per axis
    mean_plus: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mean_minus: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sigma_plus: float = 0.7
    sigma_minus: float = 1.1
    cutoff: float = 6.0
    charge: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; options: {PRESETS}")
        if self.m < 0 or self.m > 8:
            raise ValueError(f"order m must lie in 0..8, got {self.m}")
        if self.nx < 8 or self.nv < 8:
            raise ValueError("resolution must be at least 8 nodes per axis "
                             "(sample() accepts lower values directly)")


def build_initial_data(spec: InitialDataSpec) -> tuple[AnalyticSpecies, ...]:
    if spec.preset == "gegenbauer":
        return species_profiles(spec.m, spec.p_geg,
                                support_scale=spec.support_scale,
                                offset=spec.offset, charge=spec.charge,
                                mass=spec.mass)
    if spec.preset == "gaussian_dipole":
        return gaussian_dipole(spec.mean_plus, spec.sigma_plus,
                               spec.mean_minus, spec.sigma_minus,
                               cutoff=spec.cutoff, charge=spec.charge,
                               mass=spec.mass)
    if spec.preset == "exact_overlap":
        if (spec.mean_plus != spec.mean_minus
                or spec.sigma_plus != spec.sigma_minus):
            raise ValueError("exact_overlap requires identical means and widths")
        return gaussian_dipole(spec.mean_plus, spec.sigma_plus,
                               spec.mean_minus, spec.sigma_minus,
                               cutoff=spec.cutoff, charge=spec.charge,
                               mass=spec.mass)
    if spec.preset == "single_species":
        return single_species(support_scale=spec.support_scale,
                              offset=spec.offset, charge=spec.charge,
                              mass=spec.mass)
    raise ValueError(f"unknown preset {spec.preset!r}")


def sample(data, nx: int, nv: int) -> ParticleEnsemble:
    """Tensor Gauss-Legendre phase-space sampling of analytic initial data.

    Each species gets nx^3 spatial times nv^3 velocity nodes on its own
    support box; a node's weight is f0 there times the product quadrature
    weight.  Nodes below 1e-16 of the species' peak weight are dropped.
    When the analytic data is neutral, the species totals are rescaled to
    agree exactly, so the sampled net charge vanishes to rounding.
    """
    if nx < 2 or nv < 2:
        raise ValueError("need at least 2 nodes per axis")
    species, positions, velocities, weights = [], [], [], []
    for a in data:
        xlo, xhi = a.x_profile.support_box
        vlo, vhi = a.v_profile.support_box
        x_rules = [gauss_legendre(nx, xlo[i], xhi[i]) for i in range(3)]
        v_rules = [gauss_legendre(nv, vlo[i], vhi[i]) for i in range(3)]
        wx = a.x_profile.tensor_values(*(r[0] for r in x_rules))
        wx *= np.einsum("i,j,k->ijk", *(r[1] for r in x_rules))
        wv = a.v_profile.tensor_values(*(r[0] for r in v_rules))
        wv *= np.einsum("i,j,k->ijk", *(r[1] for r in v_rules))
        xpts, _ = tensor_rule(x_rules)
        vpts, _ = tensor_rule(v_rules)
        w6 = np.multiply.outer(wx.reshape(-1), wv.reshape(-1))
        peak = float(np.abs(w6).max())
        if peak == 0.0:
            raise ValueError(f"species {a.species.label!r} sampled to zero")
        if float(w6.min()) < -_WEIGHT_DROP * peak * 1e3:
            raise ValueError(f"species {a.species.label!r} has a negative "
                             "phase density at a quadrature node")
        keep = w6 > _WEIGHT_DROP * peak
        idx_x, idx_v = np.nonzero(keep)
        species.append(a.species)
        positions.append(xpts[idx_x])
        velocities.append(vpts[idx_v])
        weights.append(w6[keep])

    analytic_net = sum(a.species.charge * a.phase_integral() for a in data)
    scale = sum(abs(a.species.charge) * abs(a.phase_integral()) for a in data)
    if len(data) > 1 and abs(analytic_net) <= 1e-10 * scale:
        totals = [float(np.sum(w)) for w in weights]
        q = [a.species.charge for a in data]
        net = sum(qa * s for qa, s in zip(q, totals))
        denom = sum(qa * qa * s for qa, s in zip(q, totals))
        weights = [w * (1.0 - net * qa / denom) for w, qa in zip(weights, q)]

    return ParticleEnsemble(species=tuple(species), positions=tuple(positions),
                            velocities=tuple(velocities), weights=tuple(weights))
