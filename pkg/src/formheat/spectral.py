"""Spectral diagnostics and integrability-exponent bookkeeping.

Two kinds of tools live here.  Matrix-level ones act on an assembled
pencil: generalized eigenpairs of ``T u = lambda Mt u``, numerical-range
sampling (sectoriality witness), fractional powers ``(I + Mt^-1 T)^theta``
by spectral calculus, and refinement probes for sup-norm embeddings and
trace-norm boundedness.  Symbolic ones compute the critical
integrability exponents of the trace and embedding catalogue in exact
rational arithmetic for general dimension.

Eigen-decompositions run single-threaded per pencil; refinement levels
in the probes are independent and merged by level index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .assembly import (CoefficientSet, assemble_bulk_mass,
                       assemble_bulk_stiffness, assemble_surface_mass,
                       build_dofmap, _surface_selection)
from .errors import (EigenSolveError, OutsideTheoryError, SizeLimitError,
                     UnsupportedScenarioError)
from .geometry.surface import INTERFACE, SurfaceMesh

INF = math.inf


def _as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def _ratio(num, den):
    """num/den as a Fraction, +inf when the denominator is <= 0."""
    if den <= 0:
        return INF
    return Fraction(num, 1) / den


@dataclass
class EmbeddingReport:
    """Critical exponents of the integrability catalogue.

    The four catalogue values are always computed from the formulas
    (``+inf`` where a positive-part denominator vanishes); exactly one
    trace mechanism is active for the given scenario and feeds ``r0``
    together with the bulk exponent.  ``effective(name)`` returns the
    constraint a mechanism imposes in this scenario (``+inf`` when it
    does not apply).
    """

    d: int
    gamma: Fraction
    case: str
    surface_uniformly_positive: bool
    surface_positive_near_s: bool
    r_omega: object
    r_tr: object
    r_tr_gamma: object
    r_tr_star: object
    active_trace: str
    r0: object

    def is_active(self, name):
        return name == "r_omega" or name == self.active_trace

    def effective(self, name):
        return getattr(self, name) if self.is_active(name) else INF

    def theta_threshold(self, p):
        """Sup-norm embedding threshold r0 / ((r0 - 2) p) for the
        fractional power exponent; the limit 1/p when r0 = +inf."""
        p = _as_fraction(p)
        if p <= 2:
            raise ValueError("the embedding scale needs p > 2")
        if self.r0 is INF or (isinstance(self.r0, float) and math.isinf(self.r0)):
            return 1 / p
        return self.r0 / ((self.r0 - 2) * p)

    @property
    def theta_condition(self):
        return self.theta_threshold

    def csv_row(self):
        gamma = float(self.gamma)
        gamma_txt = str(int(gamma)) if gamma == int(gamma) else repr(gamma)
        cells = [str(self.d), gamma_txt, self.case]
        for name in ("r_omega", "r_tr", "r_tr_gamma", "r_tr_star"):
            cells.append(_fmt_exponent(self.effective(name)))
        cells.append(_fmt_exponent(self.r0))
        return ",".join(cells)


def _fmt_exponent(value):
    if value is INF or (isinstance(value, float) and math.isinf(value)):
        return "+inf"
    frac = Fraction(value)
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{float(frac):.4f}"


def embedding_exponents(d, gamma, *, case="nondegenerate",
                        surface_uniformly_positive=False,
                        surface_positive_near_s=False, weight=None):
    """Exact integrability exponents for a degeneracy scenario.

    Parameters
    ----------
    d : int
        Ambient dimension, at least 2.
    gamma : number
        Distance exponent of the bulk weight (0 means nondegenerate).
    case : str
        ``nondegenerate`` (gamma = 0), ``A`` (degeneracy away from the
        dynamic surfaces), or ``B`` (degeneracy touching them).
    surface_uniformly_positive : bool
        Surface diffusion bounded below everywhere.
    surface_positive_near_s : bool
        Surface diffusion bounded below near the contact set (case B).
    weight : WeightSpec, optional
        When given, gamma must match and stay below the codimension of
        the degeneracy set.

    Returns
    -------
    EmbeddingReport

    Raises
    ------
    OutsideTheoryError
        Case B with gamma >= 1, or an exponent at/above the codimension.
    UnsupportedScenarioError
        Flag combinations outside the catalogue.
    """
    d = int(d)
    if d < 2:
        raise ValueError("dimension must be at least 2")
    gamma = _as_fraction(gamma)
    if weight is not None:
        if _as_fraction(weight.gamma) != gamma:
            raise ValueError("gamma does not match the supplied weight")
        if weight.outside_theory:
            raise OutsideTheoryError(
                f"exponent {weight.gamma} is not below the codimension "
                f"{weight.codimension} of the degeneracy set")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if case not in ("nondegenerate", "A", "B"):
        raise UnsupportedScenarioError(f"unknown case '{case}'")
    if case == "nondegenerate" and gamma != 0:
        raise UnsupportedScenarioError(
            "positive gamma with a nondegenerate scenario")
    if case != "nondegenerate" and gamma == 0:
        raise UnsupportedScenarioError(
            "gamma = 0 is the nondegenerate scenario")
    if case == "B" and gamma >= 1:
        raise OutsideTheoryError(
            f"degeneracy at the dynamic surfaces needs gamma < 1, got {gamma}")
    if surface_positive_near_s and case != "B":
        raise UnsupportedScenarioError(
            "near-contact surface diffusion only distinguishes case B")

    r_omega = _ratio(2 * d, d + gamma - 2)
    r_tr = _ratio(2 * (d - 1), d - 2)
    r_tr_gamma = _ratio(2 * (d - 1), d + gamma - 2)
    r_tr_star = _ratio(2 * (d - 1), d - 3)

    if surface_uniformly_positive:
        active = "r_tr_star"
    elif case == "B" and surface_positive_near_s:
        active = "r_tr"
    elif case == "B":
        active = "r_tr_gamma"
    else:
        active = "r_tr"

    trace_bound = {"r_tr": r_tr, "r_tr_gamma": r_tr_gamma,
                   "r_tr_star": r_tr_star}[active]
    r0 = min(r_omega, trace_bound)

    return EmbeddingReport(d=d, gamma=gamma, case=case,
                           surface_uniformly_positive=surface_uniformly_positive,
                           surface_positive_near_s=surface_positive_near_s,
                           r_omega=r_omega, r_tr=r_tr,
                           r_tr_gamma=r_tr_gamma, r_tr_star=r_tr_star,
                           active_trace=active, r0=r0)


# -- matrix spectra ------------------------------------------------------------------

def generalized_eigs(pencil, count, *, tol=1e-8, dense_limit=2000):
    """Smallest eigenpairs of ``T v = lambda Mt v`` for symmetric pencils.

    Returns ``(values, vectors)`` with ascending real eigenvalues and
    Mt-orthonormal columns.  Residuals ``||T v - lambda Mt v|| / ||v||``
    are verified against ``tol``.
    """
    if not pencil.is_symmetric():
        raise EigenSolveError("pencil is not symmetric; "
                              "use numerical_range_check instead")
    n = pencil.n_free
    if count > n:
        raise ValueError("requested more eigenpairs than dofs")
    mt = pencil.mtilde()
    if n <= dense_limit:
        sym_t = 0.5 * (pencil.T + pencil.T.T)
        vals, vecs = scipy.linalg.eigh(sym_t.toarray(), mt.toarray(),
                                       subset_by_index=[0, count - 1])
    else:
        vals, vecs = spla.eigsh(pencil.T.tocsc(), k=count, M=mt.tocsc(),
                                sigma=-0.01, which="LM")
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    worst = 0.0
    for k in range(count):
        v = vecs[:, k]
        res = np.linalg.norm(pencil.T @ v - vals[k] * (mt @ v))
        worst = max(worst, res / np.linalg.norm(v))
    if worst > tol:
        raise EigenSolveError("eigen residual above tolerance", residual=worst)
    if vals[0] < -1e-10:
        raise EigenSolveError("negative eigenvalue from a nonnegative form",
                              residual=float(vals[0]))
    return vals, vecs


def count_eigenvalues_below(pencil, bound, dense_limit=2500):
    """Number of pencil eigenvalues strictly below ``bound`` (dense)."""
    n = pencil.n_free
    if n > dense_limit:
        raise SizeLimitError("dense eigenvalue count limited to "
                             f"{dense_limit} dofs")
    sym_t = 0.5 * (pencil.T + pencil.T.T)
    vals = scipy.linalg.eigvalsh(sym_t.toarray(), pencil.mtilde().toarray())
    return int(np.sum(vals < bound))


@dataclass
class NumericalRangeReport:
    """Sampled numerical range of the pencil over complex vectors."""

    min_real: float
    max_tangent: float
    samples: int


def numerical_range_check(pencil, samples=1000, seed=0):
    """Sample Rayleigh quotients of random complex vectors.

    Reports the minimal real part and the maximal ratio ``|Im|/Re``,
    whose finiteness witnesses a numerical-range angle strictly inside
    the right half plane.
    """
    rng = np.random.default_rng(seed)
    n = pencil.n_free
    mt = pencil.mtilde()
    min_re = np.inf
    max_tan = 0.0
    for _ in range(samples):
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        num = np.vdot(z, pencil.T @ z)
        den = float(np.real(np.vdot(z, mt @ z)))
        re = float(np.real(num)) / den
        im = abs(float(np.imag(num))) / den
        min_re = min(min_re, re)
        if re > 1e-14:
            max_tan = max(max_tan, im / re)
        elif im > 1e-14:
            max_tan = np.inf
    return NumericalRangeReport(min_real=float(min_re),
                                max_tangent=float(max_tan), samples=samples)


def _pencil_eigendecomposition(pencil, dense_limit):
    if pencil._eig_cache is None:
        n = pencil.n_free
        if n > dense_limit:
            raise SizeLimitError(
                f"dense spectral calculus limited to {dense_limit} dofs "
                f"(pencil has {n})")
        if not pencil.is_symmetric():
            raise EigenSolveError("spectral calculus needs a symmetric pencil")
        vals, vecs = scipy.linalg.eigh(pencil.T.toarray(),
                                       pencil.mtilde().toarray())
        pencil._eig_cache = (vals, vecs)
    return pencil._eig_cache


def fractional_power_apply(pencil, theta, u, *, dense_limit=2000):
    """Apply ``(I + Mt^-1 T)^theta`` through the pencil eigenbasis."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("fractional exponent must lie in (0, 1]")
    vals, vecs = _pencil_eigendecomposition(pencil, dense_limit)
    coeff = vecs.T @ (pencil.mtilde() @ np.asarray(u, dtype=float))
    scaled = (1.0 + np.clip(vals, 0.0, None)) ** theta * coeff
    return vecs @ scaled


@dataclass
class ProbeRow:
    level: int
    h: float
    ratio: float


def fractional_embedding_probe(pencils, theta, p_proxy, *, n_samples=64,
                               seed=0, dense_limit=2000):
    """Worst sup-norm-to-smoothed-norm ratios across refinement levels.

    For each pencil, samples random bulk vectors ``u`` and reports the
    worst observed ``||u||_inf / ||(I + Mt^-1 T)^theta u||_{lp}`` (lumped
    block measure).  For ``p = 2`` the exact supremum over all ``u`` is
    computed as well and included.  Bounded ratios across levels witness
    an embedding; growing ones witness its failure.  The trend is
    qualitative, never a certified constant.
    """
    if p_proxy not in (2, 4, 8):
        raise ValueError("p_proxy must be one of 2, 4, 8")
    if len(pencils) < 3:
        raise ValueError("probe needs at least 3 refinement levels")
    rows = []
    for level, pencil in enumerate(pencils):
        rng = np.random.default_rng(seed + level)
        vals, vecs = _pencil_eigendecomposition(pencil, dense_limit)
        mt = pencil.mtilde()
        scale = (1.0 + np.clip(vals, 0.0, None)) ** theta
        worst = 0.0
        for _ in range(n_samples):
            u = rng.standard_normal(pencil.n_free)
            coeff = vecs.T @ (mt @ u)
            bu = vecs @ (scale * coeff)
            denom = pencil.block_lp_norm(bu, p_proxy)
            worst = max(worst, pencil.block_lp_norm(u, np.inf) / denom)
        if p_proxy == 2:
            # exact supremum over all u: with B = (I + Mt^-1 T)^theta and
            # Wt the diagonal lumped-measure Gram, the worst ratio is the
            # largest diagonal entry of (B^T Wt B)^-1, i.e. the largest
            # column norm of Wt^-1/2 Mt V D^-1 V^T.
            wt = sp_diag_apply(pencil)
            a_mat = (mt.toarray() @ (vecs / scale[None, :])) @ vecs.T
            a_mat /= np.sqrt(wt)[:, None]
            sup = float(np.sqrt((a_mat ** 2).sum(axis=0).max()))
            worst = max(worst, sup)
        rows.append(ProbeRow(level=level, h=pencil.mesh.h_max(), ratio=worst))
    return rows


def sp_diag_apply(pencil):
    """Lumped block measure pulled back to bulk dofs (diagonal of
    J^T diag(w) J as a vector)."""
    w = pencil.lumped_block_weights()
    return np.asarray(pencil.J.T @ w).ravel()


def probe_trend(rows, growth_factor=1.5):
    """Qualitative verdict on a probe table: ``bounded`` when the last
    ratio stays within ``growth_factor`` of the first, else ``growing``.
    Never a certified constant."""
    if rows[-1].ratio <= growth_factor * rows[0].ratio:
        return "bounded"
    return "growing"


@dataclass
class TraceProbeResult:
    """Discrete trace-inequality constants on one mesh."""

    sup_ratio: float
    max_sampled_ratio: float
    n_dofs: int


def trace_norm_probe(mesh, coeff, *, n_samples=200, seed=0, dense_limit=2500):
    """Discrete norm of the interface trace against the weighted bulk norm.

    Computes the exact supremum of
    ``||u_h|_Sigma||_{L2(Sigma)} / ||u_h||_{W^{1,2}(Omega, mu*)}``
    over the P1 space (a generalized eigenvalue problem) along with the
    maximum over random samples.  Bounded suprema under refinement
    witness trace-norm boundedness; for exponents outside the admissible
    range the numbers are reported without any claim.
    """
    smesh_sigma = SurfaceMesh.from_mesh(mesh, INTERFACE)
    dofmap = build_dofmap(mesh, None, smesh_sigma)
    if dofmap.n_free > dense_limit:
        raise SizeLimitError("trace probe limited to dense scale")
    numer_sigma = assemble_surface_mass(smesh_sigma, CoefficientSet(),
                                        INTERFACE, weighted=False)
    p_mat, r_mat = _surface_selection(smesh_sigma, dofmap, INTERFACE)
    numer = (r_mat.T @ (p_mat @ numer_sigma @ p_mat.T) @ r_mat).toarray()
    denom = (assemble_bulk_mass(mesh, coeff, dofmap=dofmap, weighted=False)
             + assemble_bulk_stiffness(mesh, coeff, dofmap=dofmap,
                                       use_envelope=True)).toarray()
    n = dofmap.n_free
    lam = scipy.linalg.eigh(numer, denom, eigvals_only=True,
                            subset_by_index=[n - 1, n - 1])
    sup_ratio = float(np.sqrt(max(lam[0], 0.0)))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        u = rng.standard_normal(n)
        worst = max(worst, np.sqrt((u @ numer @ u) / (u @ denom @ u)))
    return TraceProbeResult(sup_ratio=sup_ratio, max_sampled_ratio=float(worst),
                            n_dofs=n)
