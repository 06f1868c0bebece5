"""Frenkel exciton dimer in the four-level space {g, e1, e2, f}.

Operators are 4x4 complex arrays over the ordered basis ``(g, 1, 2, f)``.
In the site basis ``1`` and ``2`` are the local excitations (identified with
the two-qubit states |10> and |01>); in the exciton basis they are the lower
and upper exciton, ``E1 <= E2``.  Propagation happens in the exciton basis,
where the field-free Hamiltonian is diagonal.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .units import angular_to_cm1, cm1_to_angular, thermal_beta

G, E1, E2, F = 0, 1, 2, 3


@dataclass(frozen=True)
class DimerParams:
    """Site energies and coupling in cm^-1, site dipoles, temperature in K.

    ``f_dipoles`` selects the e->f transition dipoles.  ``"harmonic"`` makes
    <f|mu|e1> = mu2 and <f|mu|e2> = mu1, i.e. the second photon excites the
    other site.  ``"none"`` switches the doubly excited state off.
    """

    eps1: float
    eps2: float
    coupling: float
    mu1: float
    mu2: float
    temperature: float
    f_dipoles: str = "harmonic"

    def __post_init__(self):
        if self.eps1 == self.eps2 and self.coupling == 0:
            raise ValueError("fully degenerate dimer (eps1 == eps2 and J == 0) has no exciton splitting")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature!r}")
        if self.f_dipoles not in ("harmonic", "none"):
            raise ValueError(f"unknown f_dipoles convention {self.f_dipoles!r}")


@dataclass(frozen=True)
class ExcitonBasis:
    """Exciton energies (cm^-1), mixing angle and the site->exciton rotation.

    ``U[:, a]`` holds exciton ``a`` in the site basis, lower exciton first.
    ``coupling_sign`` is the sign relating ``U.T @ sigma_z @ U`` to the
    coupling block ``cos(2 theta) sigma_z + sin(2 theta) sigma_x``; the overall
    sign of the coupling operator drops out of every observable.
    """

    E1: float
    E2: float
    theta: float
    U: np.ndarray
    coupling_sign: float = 1.0

    @property
    def delta(self):
        return self.E2 - self.E1


def mixing_angle(eps1, eps2, coupling):
    """theta in (-pi/4, pi/4] with tan(2 theta) = 2J / (eps1 - eps2)."""
    if eps1 == eps2:
        return math.pi / 4
    return 0.5 * math.atan(2.0 * coupling / (eps1 - eps2))


def build_site_hamiltonian(p):
    """Field-free Hamiltonian in the site basis, rad/fs."""
    h = np.zeros((4, 4), dtype=complex)
    h[E1, E1] = p.eps1
    h[E2, E2] = p.eps2
    h[F, F] = p.eps1 + p.eps2
    h[E1, E2] = h[E2, E1] = p.coupling
    return cm1_to_angular(h)


def diagonalize_dimer(p):
    """Closed-form diagonalization of the single-exciton block.

    With ``tan(2 theta) = 2J / (eps1 - eps2)`` the block reads
    ``mean + r (cos 2theta sz + sin 2theta sx)``, so ``(cos theta, sin theta)``
    and ``(-sin theta, cos theta)`` span its eigenvectors; ``sign(r)`` decides
    which one is the lower exciton.  Building U from theta keeps U and the
    coupling operator consistent even at exact site degeneracy.
    """
    theta = mixing_angle(p.eps1, p.eps2, p.coupling)
    c, s = math.cos(theta), math.sin(theta)
    r = p.coupling if p.eps1 == p.eps2 else 0.5 * (p.eps1 - p.eps2) / math.cos(2 * theta)
    if r > 0:
        vecs, sign = np.array([[-s, c], [c, s]]), -1.0
    else:
        # upper column sign chosen so that U^T sz U matches the coupling block
        vecs, sign = np.array([[c, s], [s, -c]]), 1.0
    mean = 0.5 * (p.eps1 + p.eps2)
    half = 0.5 * math.hypot(p.eps1 - p.eps2, 2 * p.coupling)
    return ExcitonBasis(E1=mean - half, E2=mean + half, theta=theta, U=vecs, coupling_sign=sign)


def site_to_exciton(basis):
    """4x4 orthogonal W with O_exciton = W^T O_site W."""
    w = np.eye(4, dtype=complex)
    w[1:3, 1:3] = basis.U
    return w


def build_coupling_operator(basis):
    """System-bath coupling A0 in the exciton basis, zero outside the single-exciton block."""
    c, s = math.cos(2 * basis.theta), math.sin(2 * basis.theta)
    a0 = np.zeros((4, 4), dtype=complex)
    a0[1:3, 1:3] = [[c, s], [s, -c]]
    return a0


def build_dipole_operators(p, basis):
    """Return ``(mu, mu_plus, mu_minus)`` in the exciton basis."""
    mp = np.zeros((4, 4), dtype=complex)
    mp[E1, G] = p.mu1
    mp[E2, G] = p.mu2
    if p.f_dipoles == "harmonic":
        mp[F, E1] = p.mu2
        mp[F, E2] = p.mu1
    w = site_to_exciton(basis)
    mp = w.T @ mp @ w
    mm = mp.conj().T
    return mp + mm, mp, mm


def thermal_state(p, h):
    """exp(-beta H) / Z for a Hamiltonian ``h`` in rad/fs."""
    beta = thermal_beta(p.temperature)
    evals, evecs = np.linalg.eigh(h)
    w = np.exp(-beta * (evals - evals.min()))
    rho = (evecs * (w / w.sum())) @ evecs.conj().T
    return 0.5 * (rho + rho.conj().T)


@dataclass(frozen=True)
class DimerModel:
    """Everything the dynamics needs, expressed in the exciton basis.

    ``h_rot`` is the diagonal of the rotating-frame Hamiltonian: the carrier
    ``omega0 = (E1 + E2) / 2`` is removed once from each single exciton and
    twice from ``f``.
    """

    params: DimerParams
    basis: ExcitonBasis
    omega0: float
    h_rot: np.ndarray
    a0: np.ndarray
    mu: np.ndarray
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    rho0: np.ndarray
    w: np.ndarray = field(repr=False)

    @property
    def energies_cm1(self):
        return self.basis.E1, self.basis.E2

    @property
    def carrier_cm1(self):
        return float(angular_to_cm1(self.omega0))

    def to_site(self, rho):
        """Rotate exciton-basis operators (last two axes) to the site basis."""
        return self.w @ rho @ self.w.T

    def to_exciton(self, op):
        return self.w.T @ op @ self.w


def build_model(p):
    basis = diagonalize_dimer(p)
    e1, e2 = cm1_to_angular(basis.E1), cm1_to_angular(basis.E2)
    omega0 = 0.5 * (e1 + e2)
    h_exc = np.array([0.0, e1, e2, e1 + e2])
    h_rot = h_exc - omega0 * np.array([0, 1, 1, 2])
    mu, mp, mm = build_dipole_operators(p, basis)
    rho0 = thermal_state(p, np.diag(h_exc).astype(complex))
    return DimerModel(
        params=p,
        basis=basis,
        omega0=float(omega0),
        h_rot=h_rot,
        a0=build_coupling_operator(basis),
        mu=mu,
        mu_plus=mp,
        mu_minus=mm,
        rho0=rho0,
        w=site_to_exciton(basis),
    )
