"""Embedded manifolds: the unit sphere in R^3 and the rotation group SO(3) in R^{3x3}.

Every operation is batched: arrays may carry arbitrary leading axes in front of
the manifold's ``point_shape`` and standard numpy broadcasting applies.

Distance on SO(3) uses the Frobenius metric of the embedding, i.e.
``d(p, q) = sqrt(2) * (rotation angle of p^T q)``.  This is ``n``-consistent
with the sphere: geodesic and projection-based constructions then share one
ambient inner product.  The factor sqrt(2) relative to the bare rotation angle
is deliberate and used consistently (injectivity radius pi*sqrt(2)).
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
import numpy as np


class OutsideProjectionDomain(ValueError):
    """Ambient point outside the closest-point projection domain."""


class CutLocusError(ValueError):
    """Logarithm requested at or beyond the cut locus."""


class MeanNotConverged(RuntimeError):
    """Weighted Fréchet-mean iteration failed to converge."""


@dataclass
class TangentVector:
    """Ambient vector attached to a base point of the manifold."""
    base: np.ndarray
    vector: np.ndarray


class EmbeddedManifold(abc.ABC):
    """Closest-point projection calculus for a manifold embedded in R^n."""

    name: str
    point_shape: tuple[int, ...]
    ambient_dim: int
    intrinsic_dim: int
    injectivity_radius: float
    spread_guard: float  # admissible per-element geodesic diameter of coefficients

    @abc.abstractmethod
    def project(self, q: np.ndarray) -> np.ndarray:
        """Closest manifold point to the ambient point ``q``."""

    @abc.abstractmethod
    def project_differential(self, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Differential of :meth:`project` at ``y`` applied to ``xi``."""

    @abc.abstractmethod
    def project_tangent(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of the ambient vector ``v`` onto T_p M."""

    @abc.abstractmethod
    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Geodesic distance."""

    @abc.abstractmethod
    def exp(self, p: np.ndarray, v) -> np.ndarray:
        """Exponential map; ``v`` is an ambient tangent array or TangentVector."""

    @abc.abstractmethod
    def log(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`exp`; returns the ambient tangent array."""

    @abc.abstractmethod
    def membership_residual(self, p: np.ndarray) -> np.ndarray:
        """Scalar residual measuring how far ``p`` is from satisfying the
        manifold membership invariants (0 on the manifold)."""

    @abc.abstractmethod
    def tangent_residual(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Residual of ``v`` lying in T_p M."""

    @abc.abstractmethod
    def tangent_basis(self, p: np.ndarray) -> np.ndarray:
        """Orthonormal basis of T_p M, shape (..., intrinsic_dim, *point_shape)."""

    def tangent_projector(self, p: np.ndarray) -> np.ndarray:
        """The projection onto T_p M as an (n x n) matrix on flattened ambient
        vectors; symmetric and idempotent."""
        p = np.asarray(p, dtype=float)
        n = self.ambient_dim
        cols = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            cols[:, k] = self.project_tangent(p, e.reshape(self.point_shape)).ravel()
        return cols

    def check_point(self, p: np.ndarray, tol: float) -> None:
        res = np.max(self.membership_residual(np.asarray(p, dtype=float)))
        if res > tol:
            raise ValueError(f"point off {self.name} by {res:.3e} (tolerance {tol:.1e})")

    @staticmethod
    def _vector_of(v) -> np.ndarray:
        return v.vector if isinstance(v, TangentVector) else np.asarray(v, dtype=float)


# ---------------------------------------------------------------------------
# S^2
# ---------------------------------------------------------------------------

class Sphere(EmbeddedManifold):
    """Unit sphere in R^3 with radial closest-point projection."""

    name = "sphere"
    point_shape = (3,)
    ambient_dim = 3
    intrinsic_dim = 2
    injectivity_radius = np.pi
    spread_guard = np.pi / 2
    projection_norm_floor = 1e-8

    def project(self, q):
        q = np.asarray(q, dtype=float)
        n = np.linalg.norm(q, axis=-1)
        if np.any(n < self.projection_norm_floor):
            raise OutsideProjectionDomain("ambient point too close to the origin")
        return q / n[..., None]

    def project_differential(self, y, xi):
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi, dtype=float)
        n = np.linalg.norm(y, axis=-1)
        if np.any(n < self.projection_norm_floor):
            raise OutsideProjectionDomain("ambient point too close to the origin")
        yhat = y / n[..., None]
        tang = xi - yhat * np.sum(yhat * xi, axis=-1, keepdims=True)
        return tang / n[..., None]

    def project_tangent(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        return v - p * np.sum(p * v, axis=-1, keepdims=True)

    def distance(self, p, q):
        c = np.clip(np.sum(np.asarray(p) * np.asarray(q), axis=-1), -1.0, 1.0)
        return np.arccos(c)

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = self._vector_of(v)
        theta = np.linalg.norm(v, axis=-1)
        return np.cos(theta)[..., None] * p + np.sinc(theta / np.pi)[..., None] * v

    def log(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        c = np.clip(np.sum(p * q, axis=-1), -1.0, 1.0)
        theta = np.arccos(c)
        if np.any(theta >= np.pi - 1e-6):
            raise CutLocusError("antipodal points have no unique logarithm")
        w = q - c[..., None] * p
        s = np.linalg.norm(w, axis=-1)
        scale = np.where(s > 1e-300, theta / np.where(s > 1e-300, s, 1.0), 1.0)
        return scale[..., None] * w

    def membership_residual(self, p):
        return np.abs(np.linalg.norm(np.asarray(p, dtype=float), axis=-1) - 1.0)

    def tangent_residual(self, p, v):
        return np.abs(np.sum(np.asarray(p) * np.asarray(v), axis=-1))

    def tangent_basis(self, p):
        p = np.asarray(p, dtype=float)
        # seed with the coordinate axis least aligned with p, then Gram-Schmidt
        seed = np.zeros_like(p)
        idx = np.argmin(np.abs(p), axis=-1)
        np.put_along_axis(seed, idx[..., None], 1.0, axis=-1)
        b1 = seed - p * np.sum(p * seed, axis=-1, keepdims=True)
        b1 = b1 / np.linalg.norm(b1, axis=-1, keepdims=True)
        b2 = np.cross(p, b1)
        return np.stack([b1, b2], axis=-2)


# ---------------------------------------------------------------------------
# SO(3)
# ---------------------------------------------------------------------------

def _det3(A):
    return (A[..., 0, 0] * (A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1])
            - A[..., 0, 1] * (A[..., 1, 0] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 0])
            + A[..., 0, 2] * (A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]))


def _inv3(A):
    """Closed-form inverse of stacked 3x3 matrices (adjugate over determinant)."""
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1]
    out[..., 0, 1] = A[..., 0, 2] * A[..., 2, 1] - A[..., 0, 1] * A[..., 2, 2]
    out[..., 0, 2] = A[..., 0, 1] * A[..., 1, 2] - A[..., 0, 2] * A[..., 1, 1]
    out[..., 1, 0] = A[..., 1, 2] * A[..., 2, 0] - A[..., 1, 0] * A[..., 2, 2]
    out[..., 1, 1] = A[..., 0, 0] * A[..., 2, 2] - A[..., 0, 2] * A[..., 2, 0]
    out[..., 1, 2] = A[..., 0, 2] * A[..., 1, 0] - A[..., 0, 0] * A[..., 1, 2]
    out[..., 2, 0] = A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]
    out[..., 2, 1] = A[..., 0, 1] * A[..., 2, 0] - A[..., 0, 0] * A[..., 2, 1]
    out[..., 2, 2] = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    det = (A[..., 0, 0] * out[..., 0, 0] + A[..., 0, 1] * out[..., 1, 0]
           + A[..., 0, 2] * out[..., 2, 0])
    return out / det[..., None, None]


def _transpose(A):
    return np.swapaxes(A, -1, -2)


def _skew(A):
    return 0.5 * (A - _transpose(A))


def _frob(A, axis=(-2, -1)):
    return np.sqrt(np.sum(np.asarray(A) ** 2, axis=axis))


class RotationGroup(EmbeddedManifold):
    """SO(3) embedded in R^{3x3}; closest-point projection is the orthogonal
    polar factor, computed with the quadratically convergent iteration
    Q <- (Q + Q^{-T}) / 2."""

    name = "so3"
    point_shape = (3, 3)
    ambient_dim = 9
    intrinsic_dim = 3
    injectivity_radius = np.pi * np.sqrt(2.0)
    spread_guard = np.pi / np.sqrt(2.0)
    iteration_tol = 1e-14
    max_iterations = 100

    def project(self, q):
        q = np.asarray(q, dtype=float)
        if np.any(_det3(q) <= 0.0):
            raise OutsideProjectionDomain("matrix with non-positive determinant")
        Q = q.copy()
        with np.errstate(all="ignore"):
            for _ in range(self.max_iterations):
                Qn = 0.5 * (Q + _transpose(_inv3(Q)))
                delta = np.max(_frob(Qn - Q))
                Q = Qn
                if delta <= self.iteration_tol:
                    return Q
        raise OutsideProjectionDomain("polar iteration did not converge")

    def _differential_apply(self, y, xis):
        """Differential of the polar iteration at base points ``y`` (..., 3, 3),
        applied to a stack ``xis`` (..., m, 3, 3) of directions at once."""
        y = np.asarray(y, dtype=float)
        if np.any(_det3(y) <= 0.0):
            raise OutsideProjectionDomain("matrix with non-positive determinant")
        Q = y.copy()
        E = np.asarray(xis, dtype=float).copy()
        with np.errstate(all="ignore"):
            for _ in range(self.max_iterations):
                QiT = _transpose(_inv3(Q))
                B = QiT[..., None, :, :]
                E = 0.5 * (E - B @ _transpose(E) @ B)
                Qn = 0.5 * (Q + QiT)
                delta = np.max(_frob(Qn - Q))
                Q = Qn
                if delta <= self.iteration_tol:
                    return E
        raise OutsideProjectionDomain("polar iteration did not converge")

    def project_differential(self, y, xi):
        xi = np.asarray(xi, dtype=float)
        return self._differential_apply(y, xi[..., None, :, :])[..., 0, :, :]

    def project_tangent(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        return p @ _skew(_transpose(p) @ v)

    def distance(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        tr = np.einsum("...ij,...ij->...", p, q)
        c = np.clip(0.5 * (tr - 1.0), -1.0, 1.0)
        return np.sqrt(2.0) * np.arccos(c)

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = self._vector_of(v)
        S = _transpose(p) @ v                      # skew for tangent v
        theta = _frob(S) / np.sqrt(2.0)
        t2 = theta * theta
        small = theta < 1e-6
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(small, 1.0 - t2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
            b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(theta)) / np.where(small, 1.0, t2))
        R = (np.eye(3) + a[..., None, None] * S + b[..., None, None] * (S @ S))
        return p @ R

    def log(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        R = _transpose(p) @ q
        tr = np.einsum("...ii->...", R)
        c = np.clip(0.5 * (tr - 1.0), -1.0, 1.0)
        theta = np.arccos(c)
        if np.any(theta >= np.pi - 1e-6):
            raise CutLocusError("rotation by pi has no unique logarithm")
        small = theta < 1e-6
        with np.errstate(invalid="ignore", divide="ignore"):
            factor = np.where(small, 0.5 + theta * theta / 12.0,
                              theta / np.where(small, 1.0, 2.0 * np.sin(theta)))
        S = factor[..., None, None] * (R - _transpose(R))
        return p @ S

    def membership_residual(self, p):
        p = np.asarray(p, dtype=float)
        ortho = _frob(_transpose(p) @ p - np.eye(3))
        return np.where(_det3(p) > 0.0, ortho, np.inf)

    def tangent_residual(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        S = _transpose(p) @ v
        return _frob(0.5 * (S + _transpose(S)))

    def tangent_basis(self, p):
        p = np.asarray(p, dtype=float)
        gens = np.zeros((3, 3, 3))
        gens[0, 1, 2], gens[0, 2, 1] = -1.0, 1.0   # rotation about x
        gens[1, 0, 2], gens[1, 2, 0] = 1.0, -1.0   # rotation about y
        gens[2, 0, 1], gens[2, 1, 0] = -1.0, 1.0   # rotation about z
        gens = gens / np.sqrt(2.0)                 # unit Frobenius norm
        return p[..., None, :, :] @ gens


SPHERE = Sphere()
SO3 = RotationGroup()

MANIFOLDS = {SPHERE.name: SPHERE, SO3.name: SO3}


def rotation_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
