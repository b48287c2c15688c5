"""Deformation-energy densities and their assembly over a mesh.

Densities act on the deformation gradient F.  Gradients and Hessians are
closed-form, written in terms of F, its inverse, and the rotation factor
of the polar decomposition; no singular-value derivatives are taken, so
repeated singular values are harmless.  Vectorized-F quantities use
row-major ordering: vec(F)[i*d + j] = F[i, j].

Supported kinds
---------------
iso        symmetric Dirichlet  |F|^2 + |F^-1|^2          (barrier)
mips       conformal ratio      |F|^2 / det F, 2D only    (barrier)
nh         neo-Hookean with log barrier                   (barrier)
arap       as-rigid-as-possible |F - R(F)|^2
dirichlet  plain Dirichlet      |F|^2 / 2   (quadratic test energy whose
           exact Hessian is the scalar Laplacian applied per coordinate)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDeterminant
from .mesh import Mesh, current_edges

KINDS = ("iso", "mips", "nh", "arap", "dirichlet")
BARRIER_KINDS = frozenset({"iso", "mips", "nh"})


@dataclass(frozen=True)
class EnergyModel:
    """A deformation-energy density selected by kind plus material constants."""

    kind: str
    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown energy kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "nh":
            if self.mu <= 0.0:
                raise ValueError("neo-Hookean requires mu > 0")
            if self.lam < 0.0:
                raise ValueError("neo-Hookean requires lam >= 0")

    @property
    def has_barrier(self) -> bool:
        return self.kind in BARRIER_KINDS

    def check_dim(self, d: int) -> None:
        if self.kind == "mips" and d != 2:
            raise ValueError("mips is defined for 2D problems only")


@dataclass
class EnergyEval:
    """Total energy with its free-DOF gradient and optional element Hessians."""

    value: float
    gradient: np.ndarray
    element_hessians: np.ndarray | None = field(default=None, repr=False)


def _det2(F):
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def _dets(F):
    return _det2(F) if F.shape[-1] == 2 else np.linalg.det(F)


def _invs(F, det=None):
    if F.shape[-1] == 2:
        det = _det2(F) if det is None else det
        inv = np.empty_like(F)
        inv[..., 0, 0] = F[..., 1, 1]
        inv[..., 0, 1] = -F[..., 0, 1]
        inv[..., 1, 0] = -F[..., 1, 0]
        inv[..., 1, 1] = F[..., 0, 0]
        return inv / det[..., None, None]
    return np.linalg.inv(F)


def _polar(F):
    """Rotation and symmetric factors of F = R S with det R = +1."""
    U, s, Vt = np.linalg.svd(F)
    # Flip the weakest direction when the raw product would be a reflection.
    det_uv = _dets(U @ Vt)
    flip = det_uv < 0.0
    U = U.copy()
    U[flip, :, -1] *= -1.0
    s = s.copy()
    s[flip, -1] *= -1.0
    R = U @ Vt
    V = np.swapaxes(Vt, -1, -2)
    S = (V * s[..., None, :]) @ Vt
    return R, S


def _frob2(F):
    return np.einsum("...ij,...ij->...", F, F)


def _transpose(F):
    return np.swapaxes(F, -1, -2)


def _require_positive(det):
    """Raise when a barrier density sees a non-positive determinant.

    Element attribution happens in the assembly layer; lone evaluations
    report no element index.
    """
    bad = det <= 0.0
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NonPositiveDeterminant(element=None, det=float(det[idx]))


def _density_batch(model: EnergyModel, F: np.ndarray) -> np.ndarray:
    kind = model.kind
    if kind == "dirichlet":
        return 0.5 * _frob2(F)
    if kind == "arap":
        R, _ = _polar(F)
        return _frob2(F - R)
    det = _dets(F)
    _require_positive(det)
    if kind == "iso":
        return _frob2(F) + _frob2(_invs(F, det))
    if kind == "mips":
        return _frob2(F) / det
    # neo-Hookean
    d = F.shape[-1]
    logj = np.log(det)
    return 0.5 * model.mu * (_frob2(F) - d) - model.mu * logj + 0.5 * model.lam * logj**2


def _gradient_batch(model: EnergyModel, F: np.ndarray) -> np.ndarray:
    kind = model.kind
    if kind == "dirichlet":
        return F.copy()
    if kind == "arap":
        R, _ = _polar(F)
        return 2.0 * (F - R)
    det = _dets(F)
    _require_positive(det)
    A = _invs(F, det)
    At = _transpose(A)
    if kind == "iso":
        return 2.0 * F - 2.0 * At @ A @ At
    if kind == "mips":
        i1 = _frob2(F)
        return 2.0 * F / det[..., None, None] - (i1 / det)[..., None, None] * At
    logj = np.log(det)
    return model.mu * F + (model.lam * logj - model.mu)[..., None, None] * At


def _rotation_derivative_data(F):
    """Per-element data reused by every directional rotation derivative."""
    R, S = _polar(F)
    d = F.shape[-1]
    if d == 2:
        tr = S[..., 0, 0] + S[..., 1, 1]
        return R, {"trace": tr}
    tr = np.trace(S, axis1=-2, axis2=-1)
    M = tr[..., None, None] * np.eye(3) - S
    return R, {"Minv": np.linalg.inv(M)}


_J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rotation_directional(R, data, dF):
    """dR for a fixed direction dF (broadcast over the batch)."""
    if R.shape[-1] == 2:
        RJ = R @ _J2
        kappa = np.einsum("...ij,ij->...", RJ, dF)
        return (kappa / data["trace"])[..., None, None] * RJ
    M = _transpose(R) @ dF
    W = M - _transpose(M)
    k = np.stack([W[..., 2, 1], W[..., 0, 2], W[..., 1, 0]], axis=-1)
    w = np.einsum("...ij,...j->...i", data["Minv"], k)
    omega = np.zeros(R.shape)
    omega[..., 0, 1] = -w[..., 2]
    omega[..., 0, 2] = w[..., 1]
    omega[..., 1, 0] = w[..., 2]
    omega[..., 1, 2] = -w[..., 0]
    omega[..., 2, 0] = -w[..., 1]
    omega[..., 2, 1] = w[..., 0]
    return R @ omega


def _hessian_batch(model: EnergyModel, F: np.ndarray) -> np.ndarray:
    """(m, d^2, d^2) density Hessians, symmetric to machine precision."""
    kind = model.kind
    m, d = F.shape[0], F.shape[-1]
    dd = d * d
    H = np.empty((m, dd, dd))
    eye = np.eye(d)

    if kind == "dirichlet":
        return np.broadcast_to(np.eye(dd), (m, dd, dd)).copy()

    if kind == "arap":
        R, data = _rotation_derivative_data(F)
        for q in range(dd):
            dF = np.zeros((d, d))
            dF[q // d, q % d] = 1.0
            dR = _rotation_directional(R, data, dF)
            H[:, :, q] = 2.0 * (dF - dR).reshape(m, dd)
        return 0.5 * (H + _transpose(H))

    det = _dets(F)
    _require_positive(det)
    A = _invs(F, det)
    At = _transpose(A)

    if kind == "iso":
        AtA = At @ A
        AAt = A @ At
        B = AtA @ At
        for q in range(dd):
            dF = np.zeros((d, d))
            dF[q // d, q % d] = 1.0
            dFt = dF.T
            dg = (2.0 * dF
                  + 2.0 * (At @ dFt @ B + AtA @ dF @ AAt + B @ dFt @ At))
            H[:, :, q] = dg.reshape(m, dd)
    elif kind == "mips":
        i1 = _frob2(F)
        for q in range(dd):
            dF = np.zeros((d, d))
            dF[q // d, q % d] = 1.0
            trAdF = np.einsum("eij,ji->e", A, dF)
            di1 = 2.0 * F[:, q // d, q % d]
            dg = (2.0 * dF / det[:, None, None]
                  - (2.0 * trAdF / det)[:, None, None] * F
                  - ((di1 - i1 * trAdF) / det)[:, None, None] * At
                  + (i1 / det)[:, None, None] * (At @ dF.T @ At))
            H[:, :, q] = dg.reshape(m, dd)
    else:  # neo-Hookean
        logj = np.log(det)
        coef = model.lam * logj - model.mu
        for q in range(dd):
            dF = np.zeros((d, d))
            dF[q // d, q % d] = 1.0
            trAdF = np.einsum("eij,ji->e", A, dF)
            dg = (model.mu * dF
                  + (model.lam * trAdF)[:, None, None] * At
                  - coef[:, None, None] * (At @ dF.T @ At))
            H[:, :, q] = dg.reshape(m, dd)
    return 0.5 * (H + _transpose(H))


def density(model: EnergyModel, F: np.ndarray) -> float:
    """Energy density W(F) for a single deformation gradient."""
    F = np.asarray(F, dtype=np.float64)
    model.check_dim(F.shape[-1])
    return float(_density_batch(model, F[None])[0])


def density_gradient(model: EnergyModel, F: np.ndarray) -> np.ndarray:
    """dW/dF for a single deformation gradient."""
    F = np.asarray(F, dtype=np.float64)
    model.check_dim(F.shape[-1])
    return _gradient_batch(model, F[None])[0]


def density_hessian(model: EnergyModel, F: np.ndarray) -> np.ndarray:
    """d^2 W / dF^2 in row-major vec ordering, for a single F."""
    F = np.asarray(F, dtype=np.float64)
    model.check_dim(F.shape[-1])
    return _hessian_batch(model, F[None])[0]


def _checked_deformation_gradients(mesh: Mesh, model: EnergyModel, x: np.ndarray):
    F = current_edges(mesh, x) @ mesh.inv_rest_edges
    if model.has_barrier:
        det = _dets(F)
        bad = det <= 0.0
        if np.any(bad):
            t = int(np.argmax(bad))
            raise NonPositiveDeterminant(element=t, det=float(det[t]))
    return F


def total_energy(mesh: Mesh, model: EnergyModel, x: np.ndarray) -> float:
    """E(x) = sum_t a_t W(F_t(x))."""
    model.check_dim(mesh.dim)
    F = _checked_deformation_gradients(mesh, model, x)
    return float(np.dot(mesh.rest_measure, _density_batch(model, F)))


def total_gradient(mesh: Mesh, model: EnergyModel, x: np.ndarray) -> np.ndarray:
    """Gradient of the total energy restricted to the free DOFs."""
    return evaluate(mesh, model, x).gradient


def evaluate(mesh: Mesh, model: EnergyModel, x: np.ndarray,
             with_hessian_blocks: bool = False) -> EnergyEval:
    """Total energy, free-DOF gradient, and optionally per-element Hessian blocks.

    The Hessian blocks are d(d+1) x d(d+1) position-space matrices
    a_t * G_t^T (d^2 W) G_t including the rest-measure weight; Dirichlet
    reduction is not applied to blocks (assembly handles it).
    """
    model.check_dim(mesh.dim)
    F = _checked_deformation_gradients(mesh, model, x)
    a = mesh.rest_measure
    value = float(np.dot(a, _density_batch(model, F)))

    P = _gradient_batch(model, F) * a[:, None, None]
    local = np.einsum("eqi,eq->ei", mesh.grad_op, P.reshape(len(a), -1))
    full = np.bincount(
        mesh.element_dofs.ravel(), weights=local.ravel(), minlength=mesh.num_dofs
    )
    gradient = full[mesh.free_dofs]

    blocks = None
    if with_hessian_blocks:
        HW = _hessian_batch(model, F)
        blocks = np.einsum("eqi,eqr,erj->eij", mesh.grad_op, HW, mesh.grad_op)
        blocks *= a[:, None, None]
    return EnergyEval(value=value, gradient=gradient, element_hessians=blocks)


def characteristic_energy_scale(model: EnergyModel, d: int) -> float:
    """2-norm of the density Hessian at the rest deformation gradient."""
    model.check_dim(d)
    H = density_hessian(model, np.eye(d))
    return float(np.max(np.abs(np.linalg.eigvalsh(H))))
