"""Weak-Kerr expansion of the analyzer and closed-form task metrics.

Scaled variables: the analyzer mean is ⟨s₂⟩ = Λ^α s̄ + Λ^β s⁽¹⁾ + …, the drive is
η′ = η√Λ and the second cumulants are C̄ + Λ^q C⁽¹⁾ + …. At fixed η′ the zeroth
order (s̄, C̄) does not depend on Λ; class differences in C̄ first reach the
mean through s⁽¹⁾, giving Δμ ∝ √(Λ𝒯).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
from scipy import optimize

from chain.cumulants import N_ENTRIES, S2, S2D, drift
from chain.errors import InstabilityError, PerturbativeError
from chain.linear import C_INDEX, U, build_linear_system, lyapunov_covariance, max_real_eig
from chain.metrics import fisher
from chain.params import PHASE, ChainParams, Encoding, check_label

ALPHA = -0.5
BETA = 0.5
P_EXP = 0
Q_EXP = 1

RAMP_STEPS = 32
ROOT_TOL = 1e-12

CTriple = tuple[complex, complex, complex]


def scaled_drive(p: ChainParams) -> float:
    return p.eta_d2 * math.sqrt(p.lam)


def _mean_equation(p: ChainParams, eta_scaled: float):
    kappa = p.kappa2 + p.gamma
    lin = 1j * p.delta2 - kappa / 2
    pump = -1j * p.g2 * np.exp(1j * p.phi2)
    force = math.sqrt(p.kappa2) * eta_scaled * np.exp(1j * p.phi_d2)

    def f(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = x[0] + 1j * x[1]
        val = lin * s + pump * np.conj(s) - force + 1j * abs(s) ** 2 * s
        a = lin + 2j * abs(s) ** 2
        b = pump + 1j * s * s
        jac = np.array([[(a + b).real, (1j * (a - b)).real], [(a + b).imag, (1j * (a - b)).imag]])
        return np.array([val.real, val.imag]), jac

    return f


def dressed_jacobian(p: ChainParams, s2_bar: complex) -> np.ndarray:
    """Analyzer 2×2 drift linearised around the scaled mean s̄."""
    kappa = p.kappa2 + p.gamma
    a = 1j * p.delta2 - kappa / 2 + 2j * abs(s2_bar) ** 2
    b = -1j * p.g2 * np.exp(1j * p.phi2) + 1j * s2_bar ** 2
    return np.array([[a, b], [np.conj(b), np.conj(a)]])


def _root(p: ChainParams, eta_scaled: float, start: complex) -> tuple[complex, bool]:
    sol = optimize.root(
        _mean_equation(p, eta_scaled), [start.real, start.imag],
        jac=True, method="hybr", options={"xtol": 1e-15},
    )
    s = complex(sol.x[0], sol.x[1])
    val, _ = _mean_equation(p, eta_scaled)(sol.x)
    return s, bool(np.all(np.isfinite(sol.x)) and np.max(np.abs(val)) < ROOT_TOL * (1 + abs(s)))


def solve_zeroth_mean(p: ChainParams) -> complex:
    """Scaled analyzer mean s̄, followed by continuation from zero drive."""
    target = scaled_drive(p)
    s = 0j
    if target == 0:
        return s
    for k in range(1, RAMP_STEPS + 1):
        s, ok = _root(p, target * k / RAMP_STEPS, s)
        if not ok:
            raise PerturbativeError(f"mean equation did not converge at ramp step {k}/{RAMP_STEPS}")
    return s


def stable_roots(p: ChainParams, *, reference: complex = 0j) -> list[complex]:
    """Distinct stable fixed points of the scaled mean equation found from a seed grid."""
    target = scaled_drive(p)
    scale = max(1.0, abs(reference), abs(target) ** (1 / 3))
    seeds = [reference] + [
        r * scale * np.exp(2j * math.pi * k / 8) for r in (0.25, 1.0, 2.0, 4.0) for k in range(8)
    ]
    roots: list[complex] = []
    for seed in seeds:
        s, ok = _root(p, target, complex(seed))
        if not ok or max_real_eig(dressed_jacobian(p, s)) >= 0:
            continue
        if all(abs(s - r) > 1e-8 * (1 + abs(r)) for r in roots):
            roots.append(s)
    return roots


def _dressed_system(p: ChainParams, s2_bar: complex, class_label: int, encoding: Encoding):
    check_label(class_label)
    sys = build_linear_system(encoding.apply(p, class_label))
    J, D = sys.J.copy(), sys.D.copy()
    J[2:, 2:] = dressed_jacobian(p, s2_bar)
    D[2, 2] += 1j * s2_bar ** 2
    D[3, 3] -= 1j * np.conj(s2_bar) ** 2
    return replace(sys, J=J, D=D)


def _dressed_covariance(p: ChainParams, s2_bar: complex, class_label: int, encoding: Encoding):
    sys = _dressed_system(p, s2_bar, class_label, encoding)
    try:
        return sys, lyapunov_covariance(sys)
    except InstabilityError as exc:
        raise PerturbativeError(f"dressed system is unstable for class {class_label}: {exc}") from exc


def zeroth_cumulants(
    p: ChainParams, s2_bar: complex, class_label: int, encoding: Encoding = PHASE
) -> CTriple:
    """(C̄_{s₂s₂}, C̄_{s₂†s₂}, C̄_{s₂†s₂†}) of the dressed linear system for one class."""
    _, C = _dressed_covariance(p, s2_bar, class_label, encoding)
    return complex(C[2, 2]), complex(C[2, 3]), complex(C[3, 3])


@dataclass(frozen=True)
class PerturbativeSolution:
    s2_bar: complex
    cbar1: CTriple
    cbar2: CTriple
    J_bar: np.ndarray
    lam: float
    params: ChainParams
    encoding: Encoding = PHASE
    multistable: bool = False

    exponents = (ALPHA, BETA, P_EXP, Q_EXP)

    def cbar(self, class_label: int) -> CTriple:
        check_label(class_label)
        return self.cbar1 if class_label == 1 else self.cbar2


def solve_perturbative(
    p: ChainParams,
    encoding: Encoding = PHASE,
    *,
    s2_bar: complex | None = None,
    multistable: bool | None = None,
) -> PerturbativeSolution:
    """Zeroth-order solution for both classes.

    Passing ``s2_bar`` (and ``multistable``) skips the mean solve; the mean does
    not depend on the squeezer, so a readout map solves it once.
    """
    s_bar = solve_zeroth_mean(p) if s2_bar is None else complex(s2_bar)
    if multistable is None:
        multistable = len(stable_roots(p, reference=s_bar)) > 1
    return PerturbativeSolution(
        s2_bar=s_bar,
        cbar1=zeroth_cumulants(p, s_bar, 1, encoding),
        cbar2=zeroth_cumulants(p, s_bar, 2, encoding),
        J_bar=dressed_jacobian(p, s_bar),
        lam=p.lam,
        params=p,
        encoding=encoding,
        multistable=multistable,
    )


def _source(c: CTriple) -> np.ndarray:
    css, cd, cdd = c
    return np.array([[2 * cd, css], [-cdd, -2 * cd]])


def _solve_jbar(sol: PerturbativeSolution, rhs: np.ndarray) -> np.ndarray:
    try:
        return la.solve(sol.J_bar, rhs)
    except la.LinAlgError as exc:
        raise PerturbativeError("dressed Jacobian is singular") from exc


def first_order_mean(sol: PerturbativeSolution, class_label: int) -> np.ndarray:
    """(s⁽¹⁾, s⁽¹⁾*) for one class."""
    s = sol.s2_bar
    return -1j * _solve_jbar(sol, _source(sol.cbar(class_label)) @ np.array([s, np.conj(s)]))


def first_order_cumulants(sol: PerturbativeSolution, class_label: int) -> np.ndarray:
    """C⁽¹⁾ (4×4) such that C ≈ C̄ + Λ·C⁽¹⁾, from the exact drift at the zeroth-order point."""
    if sol.lam <= 0:
        raise PerturbativeError("first-order cumulants need Λ > 0")
    p = sol.params
    pc = sol.encoding.apply(p, class_label)
    sys, C = _dressed_covariance(p, sol.s2_bar, class_label, sol.encoding)
    s1 = first_order_mean(sol, class_label)

    y = np.zeros(N_ENTRIES, dtype=complex)
    root = math.sqrt(sol.lam)
    y[S2] = sol.s2_bar / root + root * s1[0]
    y[S2D] = np.conj(sol.s2_bar) / root + root * s1[1]
    for entry, (i, j) in C_INDEX.items():
        y[entry] = C[i, j]
    r = drift(y, pc) / sol.lam

    R = np.zeros((4, 4), dtype=complex)
    for entry, (i, j) in C_INDEX.items():
        R[i, j] = R[j, i] = r[entry]
    C1 = la.solve_sylvester(sys.J, sys.J.T, -R)
    return (C1 + C1.T) / 2


def perturbative_delta_mu(sol: PerturbativeSolution, T: float) -> np.ndarray:
    """Δμ = i√(Λ𝒯)·U·J̄⁻¹·B(ΔC̄)·(s̄, s̄*) with ΔC̄ = C̄⁽²⁾ − C̄⁽¹⁾."""
    delta = tuple(b - a for a, b in zip(sol.cbar1, sol.cbar2))
    s = sol.s2_bar
    x = _solve_jbar(sol, _source(delta) @ np.array([s, np.conj(s)]))
    dmu = 1j * math.sqrt(sol.lam * T) * (U @ x)
    if np.max(np.abs(dmu.imag)) > 1e-10 * (1 + np.max(np.abs(dmu.real))):
        raise PerturbativeError(f"Δμ has an imaginary residue {np.max(np.abs(dmu.imag)):.3g}")
    return dmu.real


def _combined(sol: PerturbativeSolution) -> np.ndarray:
    total = sum(np.array([[css, cd], [cd, cdd]]) for css, cd, cdd in (sol.cbar1, sol.cbar2))
    return U @ total @ U.T


def _real_symmetric(V: np.ndarray) -> np.ndarray:
    if np.max(np.abs(V.imag)) > 1e-10 * (1 + np.max(np.abs(V.real))):
        raise PerturbativeError("V has a non-negligible imaginary part")
    V = V.real
    return (V + V.T) / 2


def perturbative_V(sol: PerturbativeSolution) -> np.ndarray:
    """Combined variance from zeroth-order cumulants: ¼U[ΣC̄]Uᵀ.

    Normal ordered, so it vanishes at vacuum and need not be positive definite.
    """
    return _real_symmetric(0.25 * _combined(sol))


def symmetric_variance(sol: PerturbativeSolution) -> np.ndarray:
    """Average of the two classes' intracavity proxies UC̄Uᵀ + ½𝕀, equal to 2V + ½𝕀."""
    return _real_symmetric(0.5 * _combined(sol) + 0.5 * np.eye(2))


def perturbative_fisher(sol: PerturbativeSolution, T: float) -> float:
    """D_F from the closed forms; zero when the classes coincide."""
    dmu = perturbative_delta_mu(sol, T)
    if not np.any(dmu):
        return 0.0
    V = perturbative_V(sol)
    if np.min(np.linalg.eigvalsh(V)) <= 0:
        raise PerturbativeError("combined variance is not positive definite")
    return fisher(dmu, V)
