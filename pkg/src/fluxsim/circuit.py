"""Circuit model of a flux-tunable artificial atom coupled to a readout resonator.

The atom is a SQUID shunted by a large linear inductance L and a capacitance C.
It shares a small inductance L_s with an LC readout resonator (L_r, C_r), which
mediates a flux-flux coupling.  Working in units of GHz for energies (E/h),
nH and fF for circuit elements and Phi_0 for fluxes, the circuit Hamiltonian is

    H = (1/2) phi^T Linv phi + q_r^2/(2 C_r) + q_a^2/(2 C) - E_J(phi_a)

with the inverse inductance matrix (node order: resonator, atom)

    Linv = (1/D) [[L + L_s, -L_s], [-L_s, L_r + L_s]],
    D = L_r L + L_r L_s + L L_s.

L and L_r here exclude the shared branch, so the resonator loop inductance is
L_r + L_s and the atom loop inductance is L + L_s.  The SQUID is reduced to a
single cosine with a flux-dependent amplitude, sign and phase offset.

Two Fock bases are supported for diagonalization:

* ``bare``:   one oscillator per circuit node, coupling kept as an explicit
  flux-flux term between the two modes.
* ``normal``: exact 2x2 normal-mode rotation of the quadratic part, with the
  junction cosine spread over both modes through displacement operators.

Both bases must produce the same dressed spectrum within truncation error;
the test suite checks this explicitly.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants as const
from scipy.optimize import linear_sum_assignment
from scipy.linalg import eigh
from scipy.special import eval_genlaguerre, gammaln

from .errors import MissingLabel, TruncationTooLarge

PHI0 = const.h / (2.0 * const.e)

#: default ratio of main-loop area to SQUID-loop area for the shared coil.
#: With this geometry the two transition-frequency minima inside the default
#: sweep window (29, 31) land on opposite sides of the e-f/resonator
#: crossing, so their dispersive shifts have opposite signs and MHz scale.
DEFAULT_AREA_RATIO = 72.0

#: hard cap on the Hilbert-space dimension of a single diagonalization
MAX_DIMENSION = 10_000

ATOM_LETTERS = "gef"


def atom_index(i):
    """Translate an atom level given as 'g'/'e'/'f' (or an int) to an int."""
    if isinstance(i, str):
        if i in ATOM_LETTERS:
            return ATOM_LETTERS.index(i)
        raise KeyError(f"unknown atom level letter {i!r}")
    return int(i)


def atom_letter(i):
    """Inverse of :func:`atom_index` for the first few levels."""
    return ATOM_LETTERS[i] if 0 <= i < len(ATOM_LETTERS) else str(i)


def _reduce_flux(x):
    """Reduce a flux (in Phi_0) to the canonical window [-1, 1)."""
    return (x + 1.0) % 2.0 - 1.0


# -------------------------------------------------------------------------
# parameters and flux bias
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class CircuitParams:
    """Lumped-element values of the coupled circuit.

    :param L: atom shunt inductance (nH), excluding the shared branch
    :param C: atom shunt capacitance (fF)
    :param L_r: resonator inductance (nH), excluding the shared branch
    :param C_r: resonator capacitance (fF)
    :param L_s: shared coupling inductance (nH)
    :param E_J_prime: Josephson energy of the first SQUID junction (GHz)
    :param E_J_dprime: Josephson energy of the second SQUID junction (GHz)

    The junction energies are normalized at construction so that
    ``E_J_prime >= E_J_dprime`` always holds (swapping the two junctions
    only relabels them).
    """

    L: float = 231.0
    C: float = 6.9
    L_r: float = 22.5
    C_r: float = 21.5
    L_s: float = 0.57
    E_J_prime: float = 12.355
    E_J_dprime: float = 11.645

    def __post_init__(self):
        for name in ("L", "C", "L_r", "C_r", "L_s", "E_J_prime", "E_J_dprime"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.L_s >= min(self.L, self.L_r):
            raise ValueError("L_s must be smaller than both L and L_r")
        if self.E_J_dprime > self.E_J_prime:
            a, b = self.E_J_prime, self.E_J_dprime
            object.__setattr__(self, "E_J_prime", b)
            object.__setattr__(self, "E_J_dprime", a)

    @property
    def f_r0(self):
        """Uncoupled resonator frequency 1/(2 pi sqrt(L_r C_r)) in GHz."""
        return 1e3 / (2.0 * math.pi * math.sqrt(self.L_r * self.C_r))

    @property
    def E_C(self):
        """Atom charging energy e^2/(2 C h) in GHz."""
        return const.e**2 / (2.0 * self.C * 1e-15 * const.h) / 1e9

    @property
    def E_L(self):
        """Atom inductive energy (Phi_0/2pi)^2/(L h) in GHz."""
        return (PHI0 / (2.0 * math.pi)) ** 2 / (self.L * 1e-9 * const.h) / 1e9

    @property
    def loop_inductance_D(self):
        """Determinant-like combination L_r L + L_r L_s + L L_s (nH^2)."""
        return self.L_r * self.L + self.L_r * self.L_s + self.L * self.L_s


@dataclass(frozen=True)
class FluxBias:
    """External fluxes threading the two loops, in units of Phi_0.

    :param phi_s: flux through the SQUID loop
    :param phi_l: flux through the main (shunt) loop

    Values are stored exactly as given (the dial setting); the physics
    only ever sees phi_s modulo 2 and the total ``phi_ext = phi_l +
    phi_s/2`` modulo 1, so large dial values are fine.  ``reduced`` gives
    the canonical representative when two biases must be compared.
    """

    phi_s: float = 0.0
    phi_l: float = 0.0

    @property
    def phi_ext(self):
        return self.phi_l + 0.5 * self.phi_s

    def reduced(self):
        """The same bias folded into the canonical window [-1, 1)."""
        return FluxBias(phi_s=_reduce_flux(self.phi_s),
                        phi_l=_reduce_flux(self.phi_l))

    @classmethod
    def from_external(cls, phi_ext, area_ratio=DEFAULT_AREA_RATIO):
        """Flux bias produced by a single coil threading both loops.

        The coil couples to the SQUID loop and the main loop in proportion
        to their areas; ``area_ratio`` is (main loop area)/(SQUID area), so

            phi_s = 2 phi_ext / (2 area_ratio + 1).

        :param phi_ext: total external flux phi_l + phi_s/2 (Phi_0)
        :param area_ratio: loop area ratio of the device
        """
        phi_s = 2.0 * phi_ext / (2.0 * area_ratio + 1.0)
        return cls(phi_s=phi_s, phi_l=phi_ext - 0.5 * phi_s)


@dataclass(frozen=True)
class EffectiveJunction:
    """Single-cosine reduction of the SQUID at a given flux bias.

    The two-junction potential collapses to

        E_J(phi) = sign * amplitude * cos(2 pi (phi - phi_ext) - phase_offset)

    with phases in radians and phi in Phi_0.
    """

    amplitude: float
    phase_offset: float
    sign: int

    @property
    def signed_amplitude(self):
        return self.sign * self.amplitude


def effective_josephson(params, flux):
    """Reduce the SQUID to one cosine at the given flux bias.

    :param params: :class:`CircuitParams`
    :param flux: :class:`FluxBias`
    :return: :class:`EffectiveJunction` with amplitude >= 0, sign in {-1, +1}
        and phase offset in (-pi/2, pi/2]
    """
    ej_sum = params.E_J_prime + params.E_J_dprime
    ej_diff = params.E_J_prime - params.E_J_dprime
    ej_p = ej_sum * math.cos(math.pi * flux.phi_s)
    ej_m = ej_diff * math.sin(math.pi * flux.phi_s)
    amplitude = math.hypot(ej_p, ej_m)
    if ej_p != 0.0:
        sign = 1 if ej_p > 0.0 else -1
        phase_offset = math.atan(ej_m / ej_p)
    else:
        # frustration point: the cosine comes entirely from the asymmetry
        sign = 1 if ej_m >= 0.0 else -1
        phase_offset = 0.5 * math.pi
    return EffectiveJunction(amplitude=amplitude, phase_offset=phase_offset,
                             sign=sign)


# -------------------------------------------------------------------------
# oscillator building blocks
# -------------------------------------------------------------------------

def displacement_elements(n_levels, lam):
    """Fock-basis matrix of the displacement operator exp(i lam (a + a^dag)).

    Uses the closed form in terms of generalized Laguerre polynomials,

        <m|D|n> = e^(-lam^2/2) sqrt(n!/m!) (i lam)^(m-n) L_n^(m-n)(lam^2)

    for m >= n, with the prefactor evaluated in log space so that large
    truncations stay finite.  The result is complex symmetric.

    :param n_levels: matrix dimension
    :param lam: displacement parameter (real, >= 0)
    :return: complex (n_levels, n_levels) array
    """
    if lam < 0.0:
        raise ValueError("lam must be non-negative")
    if lam == 0.0:
        return np.eye(n_levels, dtype=complex)
    m, n = np.meshgrid(np.arange(n_levels), np.arange(n_levels), indexing="ij")
    lower = np.minimum(m, n)
    k = np.abs(m - n)
    log_pref = (-0.5 * lam**2
                + 0.5 * (gammaln(lower + 1.0) - gammaln(lower + k + 1.0))
                + k * math.log(lam))
    poly = eval_genlaguerre(lower, k, lam**2)
    return np.exp(log_pref) * poly * 1j**k


def cosine_sine_matrices(n_levels, lam):
    """Fock-basis matrices of cos(lam (a + a^dag)) and sin(lam (a + a^dag)).

    These are the real and imaginary parts of :func:`displacement_elements`;
    both are real symmetric.
    """
    d = displacement_elements(n_levels, lam)
    return np.ascontiguousarray(d.real), np.ascontiguousarray(d.imag)


def ladder_x(n_levels):
    """Matrix of (a + a^dag)."""
    off = np.sqrt(np.arange(1, n_levels))
    return np.diag(off, 1) + np.diag(off, -1)


def ladder_p(n_levels):
    """Matrix of (a^dag - a).  The physical momentum is i times this."""
    off = np.sqrt(np.arange(1, n_levels))
    return np.diag(off, -1) - np.diag(off, 1)


def _mode_frequency_ghz(l_nh, c_ff):
    """LC frequency 1/(2 pi sqrt(LC)) in GHz for L in nH and C in fF."""
    return 1e3 / (2.0 * math.pi * math.sqrt(l_nh * c_ff))


def _flux_zpf_phi0(l_nh, c_ff):
    """Zero-point flux sqrt(hbar Z / 2) in units of Phi_0, Z = sqrt(L/C)."""
    z = math.sqrt(l_nh * 1e-9 / (c_ff * 1e-15))
    return math.sqrt(0.5 * const.hbar * z) / PHI0


# -------------------------------------------------------------------------
# Hamiltonians
# -------------------------------------------------------------------------

def build_fluxonium_hamiltonian(params, flux, n_levels):
    """Hamiltonian of the isolated atom (no resonator) in its LC Fock basis.

    :param params: :class:`CircuitParams`; only L, C and the junction
        energies enter
    :param flux: :class:`FluxBias`
    :param n_levels: Fock-space truncation
    :return: real symmetric (n_levels, n_levels) array in GHz
    """
    junction = effective_josephson(params, flux)
    f_lc = _mode_frequency_ghz(params.L, params.C)
    lam = 2.0 * math.pi * _flux_zpf_phi0(params.L, params.C)
    alpha = 2.0 * math.pi * flux.phi_ext + junction.phase_offset
    cos_m, sin_m = cosine_sine_matrices(n_levels, lam)
    h = np.diag(f_lc * (np.arange(n_levels) + 0.5)).astype(float)
    h -= junction.signed_amplitude * (math.cos(alpha) * cos_m
                                      + math.sin(alpha) * sin_m)
    return h


@dataclass(frozen=True)
class HilbertTruncation:
    """Fock-space truncation for the coupled problem.

    :param n_res: levels kept in the resonator-like mode
    :param n_atom: levels kept in the atom-like mode
    :param basis: 'bare' (one oscillator per node) or 'normal' (normal modes)
    :param max_dim: guard on n_res * n_atom
    """

    n_res: int = 220
    n_atom: int = 20
    basis: str = "bare"
    max_dim: int = MAX_DIMENSION

    def __post_init__(self):
        if self.basis not in ("bare", "normal"):
            raise ValueError("basis must be 'bare' or 'normal'")
        if self.n_res < 2 or self.n_atom < 2:
            raise ValueError("need at least two levels per mode")
        if self.dim > self.max_dim:
            raise TruncationTooLarge(
                f"dimension {self.dim} exceeds the cap {self.max_dim}")

    @property
    def dim(self):
        return self.n_res * self.n_atom

    @classmethod
    def default_bare(cls):
        return cls(n_res=220, n_atom=20, basis="bare")

    @classmethod
    def default_normal(cls):
        return cls(n_res=150, n_atom=15, basis="normal")

    def scaled(self, factor):
        """Truncation with both mode dimensions scaled up by ``factor``."""
        return replace(self, n_res=math.ceil(self.n_res * factor),
                       n_atom=math.ceil(self.n_atom * factor))


@dataclass
class CoupledModel:
    """Coupled Hamiltonian plus the bookkeeping needed to interpret it.

    Produced by :func:`build_coupled_hamiltonian`.  ``f_modes`` holds the
    harmonic frequencies of the (resonator-like, atom-like) modes in GHz,
    ``lambdas`` the cosine displacement parameter of each mode and
    ``smatrix`` the normal-mode rotation (identity in the bare basis).
    ``f_nodes`` are the basis-independent node frequencies sqrt(K_ii)/2pi
    used as zero-point references for operator matrix elements.
    """

    params: CircuitParams
    flux: FluxBias
    trunc: HilbertTruncation
    junction: EffectiveJunction
    f_modes: tuple
    f_nodes: tuple
    lambdas: tuple
    smatrix: np.ndarray = field(repr=False)
    hamiltonian: np.ndarray = field(repr=False)
    atom_ref: np.ndarray = field(repr=False)
    coupling_g: float = 0.0

    def _mode_factors(self, which):
        """Per-mode coefficients of the requested node operator.

        Returns (coeffs, kind) where kind is 'x' for flux-like and 'p' for
        charge-like operators.  The operator in the model basis is
        sum_k coeffs[k] * M_k with M the (a+a^dag) or (a^dag-a) matrix of
        mode k; charge-like operators carry an implicit factor i.
        """
        s = self.smatrix
        f_res_ref, f_atom_ref = self.f_nodes
        f1, f2 = self.f_modes
        if which == "res_charge":
            return (s[0, 0] * math.sqrt(f1 / f_res_ref),
                    s[0, 1] * math.sqrt(f2 / f_res_ref)), "p"
        if which == "atom_charge":
            return (s[1, 0] * math.sqrt(f1 / f_atom_ref),
                    s[1, 1] * math.sqrt(f2 / f_atom_ref)), "p"
        if which == "atom_flux":
            return (s[1, 0] * math.sqrt(f_atom_ref / f1),
                    s[1, 1] * math.sqrt(f_atom_ref / f2)), "x"
        raise KeyError(f"unknown operator {which!r}")

    def apply_node_operator(self, which, vec):
        """Apply a dimensionless node operator to a state vector.

        ``which`` is one of 'res_charge', 'atom_flux', 'atom_charge'.  The
        operator is expressed in zero-point units of the corresponding node;
        for charge-like operators the overall factor i is dropped (matrix
        element magnitudes are unaffected).
        """
        (c1, c2), kind = self._mode_factors(which)
        n1, n2 = self.trunc.n_res, self.trunc.n_atom
        mat = ladder_x if kind == "x" else ladder_p
        v = vec.reshape(n1, n2)
        out = np.zeros_like(v)
        if c1 != 0.0:
            out += c1 * (mat(n1) @ v)
        if c2 != 0.0:
            m2 = mat(n2)
            out += c2 * (v @ (m2.T if kind == "p" else m2))
        return out.reshape(-1)


def _normal_mode_transform(k_matrix):
    """Exact eigendecomposition of the 2x2 stiffness matrix.

    Returns (omega_sq, s) with s orthogonal, columns ordered so that the
    first column is the resonator-like mode (largest weight on node 0) and
    signed so the dominant weight of each column is positive.
    """
    a, b, d = k_matrix[0, 0], k_matrix[0, 1], k_matrix[1, 1]
    if b == 0.0:
        omega_sq = np.array([a, d])
        s = np.eye(2)
    else:
        half_tr = 0.5 * (a + d)
        disc = math.hypot(0.5 * (a - d), b)
        omega_sq = np.array([half_tr + disc, half_tr - disc])
        cols = []
        for w in omega_sq:
            v = np.array([b, w - a])
            cols.append(v / math.hypot(*v))
        s = np.column_stack(cols)
    if abs(s[0, 1]) > abs(s[0, 0]):
        s = s[:, ::-1]
        omega_sq = omega_sq[::-1]
    for k in range(2):
        if s[k, k] < 0.0:
            s[:, k] = -s[:, k]
    return omega_sq, s


def build_coupled_hamiltonian(params, flux, trunc):
    """Coupled atom-resonator Hamiltonian in the requested basis.

    :param params: :class:`CircuitParams`
    :param flux: :class:`FluxBias`
    :param trunc: :class:`HilbertTruncation`
    :return: :class:`CoupledModel` (energies in GHz)
    """
    if trunc.dim > trunc.max_dim:
        raise TruncationTooLarge(
            f"dimension {trunc.dim} exceeds the cap {trunc.max_dim}")
    junction = effective_josephson(params, flux)
    alpha = 2.0 * math.pi * flux.phi_ext + junction.phase_offset
    big_d = params.loop_inductance_D

    # inverse inductance matrix in 1/nH, node order (resonator, atom)
    linv = np.array([[params.L + params.L_s, -params.L_s],
                     [-params.L_s, params.L_r + params.L_s]]) / big_d
    caps = np.array([params.C_r, params.C])
    # stiffness K_ij = linv_ij / sqrt(C_i C_j), scaled to (rad GHz)^2
    k_matrix = linv / np.sqrt(np.outer(caps, caps)) * 1e6
    f_nodes = tuple(math.sqrt(k_matrix[i, i]) / (2.0 * math.pi)
                    for i in range(2))

    n1, n2 = trunc.n_res, trunc.n_atom
    num1 = np.arange(n1) + 0.5
    num2 = np.arange(n2) + 0.5

    if trunc.basis == "bare":
        l_eff_res = big_d / (params.L + params.L_s)
        l_eff_atom = big_d / (params.L_r + params.L_s)
        f_res = _mode_frequency_ghz(l_eff_res, params.C_r)
        f_atom = _mode_frequency_ghz(l_eff_atom, params.C)
        lam_atom = 2.0 * math.pi * _flux_zpf_phi0(l_eff_atom, params.C)

        cos_m, sin_m = cosine_sine_matrices(n2, lam_atom)
        h_atom = np.diag(f_atom * num2) - junction.signed_amplitude * (
            math.cos(alpha) * cos_m + math.sin(alpha) * sin_m)

        # flux-flux coupling g X_r X_a from the off-diagonal inverse inductance
        zpf_r = _flux_zpf_phi0(l_eff_res, params.C_r) * PHI0
        zpf_a = _flux_zpf_phi0(l_eff_atom, params.C) * PHI0
        g = -params.L_s / big_d / 1e-9 * zpf_r * zpf_a / const.h / 1e9

        h = np.kron(np.diag(f_res * num1), np.eye(n2))
        h += np.kron(np.eye(n1), h_atom)
        h += g * np.kron(ladder_x(n1), ladder_x(n2))

        w_ref = eigh(h_atom, driver="evd")[1]
        return CoupledModel(params=params, flux=flux, trunc=trunc,
                            junction=junction, f_modes=(f_res, f_atom),
                            f_nodes=f_nodes, lambdas=(0.0, lam_atom),
                            smatrix=np.eye(2), hamiltonian=h,
                            atom_ref=w_ref, coupling_g=g)

    omega_sq, s = _normal_mode_transform(k_matrix)
    f_modes = np.sqrt(omega_sq) / (2.0 * math.pi)
    # atom node flux spread over the modes: phi_a = sum_k s[1,k] y_k / sqrt(C)
    # with y_k the unit-mass normal coordinate, so the cosine displacement of
    # mode k is 2 pi s[1,k] sqrt(hbar / (2 omega_k C)) / Phi_0
    lams = tuple(
        2.0 * math.pi * abs(s[1, k]) * math.sqrt(
            const.hbar / (2.0 * math.sqrt(omega_sq[k]) * 1e9
                          * params.C * 1e-15)) / PHI0
        for k in range(2))
    # keep the sign information in the displacement phase: a negative mode
    # weight flips the sign of lambda, equivalent to conjugating that factor
    signs = tuple(1.0 if s[1, k] >= 0.0 else -1.0 for k in range(2))

    d1 = displacement_elements(n1, lams[0])
    if signs[0] < 0.0:
        d1 = d1.conj()
    d2 = displacement_elements(n2, lams[1])
    if signs[1] < 0.0:
        d2 = d2.conj()
    cos_total = (np.exp(-1j * alpha) * np.kron(d1, d2)).real

    h = np.kron(np.diag(f_modes[0] * num1), np.eye(n2))
    h += np.kron(np.eye(n1), np.diag(f_modes[1] * num2))
    h -= junction.signed_amplitude * cos_total

    cos2, sin2 = d2.real, d2.imag
    h_atom_ref = np.diag(f_modes[1] * num2) - junction.signed_amplitude * (
        math.cos(alpha) * cos2 + math.sin(alpha) * sin2)
    w_ref = eigh(h_atom_ref, driver="evd")[1]
    return CoupledModel(params=params, flux=flux, trunc=trunc,
                        junction=junction, f_modes=tuple(f_modes),
                        f_nodes=f_nodes, lambdas=lams, smatrix=s,
                        hamiltonian=h, atom_ref=w_ref)


# -------------------------------------------------------------------------
# diagonalization and labeling
# -------------------------------------------------------------------------

@dataclass
class DressedSpectrum:
    """Labeled eigenpairs of a coupled model.

    Labels are (n, i) tuples with n the photon-like index and i the
    atom-like index (0 = g, 1 = e, 2 = f, ...).  ``overlaps`` holds the
    squared product-state overlap that won the assignment and ``ambiguous``
    the labels whose winning overlap fell below 1/2.
    """

    flux: FluxBias
    basis: str
    n_res: int
    n_atom: int
    energies: np.ndarray = field(repr=False)
    labels: dict = field(repr=False)
    overlaps: dict = field(repr=False)
    ambiguous: frozenset = field(repr=False)
    vectors: np.ndarray = field(default=None, repr=False)

    def has(self, n, i="g"):
        return (n, atom_index(i)) in self.labels

    def energy(self, n, i="g"):
        """Absolute dressed energy of |n, i> in GHz."""
        key = (n, atom_index(i))
        try:
            return self.energies[self.labels[key]]
        except KeyError:
            raise MissingLabel(f"label {key} not in the retained set") from None

    def is_ambiguous(self, n, i="g"):
        return (n, atom_index(i)) in self.ambiguous

    def vector(self, n, i="g"):
        if self.vectors is None:
            raise MissingLabel("eigenvectors were not retained")
        key = (n, atom_index(i))
        if key not in self.labels:
            raise MissingLabel(f"label {key} not in the retained set")
        return self.vectors[:, self.labels[key]]

    def transition(self, lo, hi):
        """Transition frequency E(hi) - E(lo) in GHz for label tuples."""
        return self.energy(*hi) - self.energy(*lo)

    def sorted_labels(self):
        return sorted(self.labels, key=lambda k: self.labels[k])


def _assign_labels(overlap_sq):
    """Map retained eigenvectors to product labels by squared overlap.

    ``overlap_sq`` has shape (n_labels, n_retained).  Greedy argmax first;
    any label claimed more than once sends the whole conflicting subset to a
    rectangular assignment problem that maximizes the total overlap.
    Returns an int array: label index per eigenvector.
    """
    n_labels, n_kept = overlap_sq.shape
    claim = overlap_sq.argmax(axis=0)
    counts = np.bincount(claim, minlength=n_labels)
    contested = np.flatnonzero(counts[claim] > 1)
    if contested.size == 0:
        return claim
    taken = set(claim[np.flatnonzero(counts[claim] == 1)].tolist())
    free = np.array(sorted(set(range(n_labels)) - taken))
    sub = overlap_sq[np.ix_(free, contested)]
    row, col = linear_sum_assignment(sub, maximize=True)
    out = claim.copy()
    out[contested[col]] = free[row]
    return out


def diagonalize_and_label(model, retain=None, want_vectors=False,
                          previous=None):
    """Diagonalize a coupled model and label eigenpairs by product overlap.

    Product states are |n> (Fock state of the photon-like mode) times the
    atom reference eigenvectors carried by the model.  Assignment is greedy
    on the squared overlap with conflicts resolved globally; a winning
    overlap below 1/2 is flagged as ambiguous rather than rejected.

    :param model: :class:`CoupledModel`
    :param retain: how many of the lowest eigenpairs to keep.  ``None``
        keeps half the dimension, a float in (0, 1] keeps that fraction,
        an int keeps that count.
    :param want_vectors: keep the retained eigenvectors on the result
    :param previous: optional :class:`DressedSpectrum` of a nearby flux
        point; ambiguous labels are swapped pairwise when that improves
        energy continuity
    :return: :class:`DressedSpectrum`
    """
    h = model.hamiltonian
    scale = np.abs(h).max()
    if np.abs(h - h.T).max() > 1e-10 * scale:
        raise ValueError("Hamiltonian is not symmetric to tolerance")
    dim = h.shape[0]
    if retain is None:
        n_keep = dim // 2
    elif isinstance(retain, float):
        n_keep = max(1, min(dim, round(retain * dim)))
    else:
        n_keep = max(1, min(dim, int(retain)))

    vals, vecs = eigh(h, driver="evd")
    vals = vals[:n_keep]
    vecs = vecs[:, :n_keep]

    n1, n2 = model.trunc.n_res, model.trunc.n_atom
    # overlap with |n> x |i>_atom without forming the big product basis:
    # contract the atom axis of each eigenvector with the reference states
    v3 = vecs.reshape(n1, n2, n_keep)
    m = np.einsum("ai,naj->nij", model.atom_ref, v3, optimize=True)
    overlap_sq = (m**2).reshape(dim, n_keep)

    assigned = _assign_labels(overlap_sq)
    won = overlap_sq[assigned, np.arange(n_keep)]

    labels = {}
    overlaps = {}
    ambiguous = set()
    for j in range(n_keep):
        key = (int(assigned[j]) // n2, int(assigned[j]) % n2)
        labels[key] = j
        overlaps[key] = float(won[j])
        if won[j] < 0.5:
            ambiguous.add(key)

    if previous is not None and ambiguous:
        _continuity_swaps(vals, labels, overlaps, ambiguous, previous)

    return DressedSpectrum(flux=model.flux, basis=model.trunc.basis,
                           n_res=n1, n_atom=n2, energies=vals, labels=labels,
                           overlaps=overlaps, ambiguous=frozenset(ambiguous),
                           vectors=vecs if want_vectors else None)


def _continuity_swaps(vals, labels, overlaps, ambiguous, previous):
    """Swap pairs of ambiguous labels when the previous flux point says so.

    Only labels flagged ambiguous participate; a swap is accepted when it
    lowers the summed distance to the previous energies.
    """
    amb = sorted(ambiguous, key=lambda k: labels[k])
    for a in range(len(amb)):
        for b in range(a + 1, len(amb)):
            ka, kb = amb[a], amb[b]
            if not (previous.has(*ka) and previous.has(*kb)):
                continue
            ea, eb = vals[labels[ka]], vals[labels[kb]]
            pa, pb = previous.energy(*ka), previous.energy(*kb)
            if (abs(ea - pb) + abs(eb - pa)) < (abs(ea - pa) + abs(eb - pb)):
                labels[ka], labels[kb] = labels[kb], labels[ka]
                overlaps[ka], overlaps[kb] = overlaps[kb], overlaps[ka]
