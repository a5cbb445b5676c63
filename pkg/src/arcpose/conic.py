"""Ellipse fitting and the elliptical-cone geometry behind circle pose.

A circular luminaire projects to an ellipse on the image plane,

    a*x^2 + b*x*y + c*y^2 + d*x + e*y + 1 = 0      (x, y in cm, ICS),

with the constant term normalized to 1. Together with the camera origin the
ellipse spans an elliptical cone; diagonalizing the cone's symmetric matrix
gives an auxiliary coordinate system (ACS) in which the cone is
lambda1*x^2 + lambda2*y^2 + lambda3*z^2 = 0 with lambda3 < 0 < lambda2 <=
lambda1. Cutting the cone with the two circle-section plane slopes
k = +-sqrt((l1-l2)/(l2-l3)) yields the two candidate orientations of the
luminaire; the known physical radius then fixes the plane offset and lets any
image point be lifted onto the luminaire plane.

All directions here live in the camera frame (CCS) or the auxiliary frame
(ACS); lengths on the image plane are cm, lifted points are meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateConicError,
    LineParallelToPlaneError,
    NotAConeError,
    ParallelLineError,
    TooFewPointsError,
)
from .frames import CameraIntrinsics, _freeze, embed_on_image_plane, pixel_to_image

# Slack on the strict ellipse discriminant test b^2 - 4ac < 0.
DISCRIMINANT_SLACK = 1e-12


@dataclass(frozen=True)
class EllipseCoeffs:
    """General-conic coefficients with the constant term normalized to 1."""

    a: float
    b: float
    c: float
    d: float
    e: float

    def __post_init__(self):
        coeffs = (self.a, self.b, self.c, self.d, self.e)
        if not all(np.isfinite(coeffs)):
            raise DegenerateConicError("non-finite conic coefficients")
        if self.discriminant >= DISCRIMINANT_SLACK:
            raise DegenerateConicError(
                f"discriminant b^2-4ac = {self.discriminant:g} is not negative"
            )

    @property
    def discriminant(self) -> float:
        return self.b * self.b - 4.0 * self.a * self.c

    def evaluate(self, points) -> np.ndarray:
        """Algebraic residual a*x^2 + b*x*y + c*y^2 + d*x + e*y + 1."""
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return (
            self.a * x * x + self.b * x * y + self.c * y * y
            + self.d * x + self.e * y + 1.0
        )


@dataclass(frozen=True)
class ConeDecomposition:
    """Eigendecomposition q = r_a_c @ diag(lambdas) @ r_a_c.T of a cone matrix.

    lambdas are ordered lambda3 < 0 < lambda2 <= lambda1 and the third column
    of r_a_c (the cone axis) points toward positive z in the camera frame.
    """

    q: np.ndarray
    lambdas: np.ndarray
    r_a_c: np.ndarray

    def __post_init__(self):
        _freeze(self, q=self.q, lambdas=self.lambdas, r_a_c=self.r_a_c)


@dataclass(frozen=True)
class CandidateNormal:
    """One of the two possible luminaire orientations: section slope + normal."""

    k: float
    normal_ccs: np.ndarray

    def __post_init__(self):
        n = np.array(self.normal_ccs, dtype=float)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            n = n / norm
        _freeze(self, normal_ccs=n)


@dataclass(frozen=True)
class PlaneACS:
    """Luminaire plane z = k*x + b_led in the auxiliary frame, b_led in meters."""

    k: float
    b_led: float

    def __post_init__(self):
        if not self.b_led > 0:
            raise ValueError(f"plane intercept must be positive, got {self.b_led}")


def fit_ellipse(points) -> EllipseCoeffs:
    """Least-squares conic through image-plane points, constant term = 1.

    Minimizes the algebraic residual of the conic equation. Points are
    centered and scaled before solving to keep the normal equations well
    conditioned; the coefficients are mapped back afterwards.

    Raises TooFewPointsError for fewer than 5 points and DegenerateConicError
    when the minimizer is not an ellipse (collinear or too-noisy input, or an
    ellipse through the ICS origin, which the F=1 form cannot represent).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 5:
        raise TooFewPointsError(f"need at least 5 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateConicError("non-finite contour points")

    mean = pts.mean(axis=0)
    centered = pts - mean
    scale = np.sqrt((centered ** 2).sum(axis=1).mean())
    if scale <= 0:
        raise DegenerateConicError("all points coincide")
    xs, ys = centered[:, 0] / scale, centered[:, 1] / scale

    design = np.column_stack([xs * xs, xs * ys, ys * ys, xs, ys])
    rhs = -np.ones(pts.shape[0])
    sol, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
    if rank < 5:
        raise DegenerateConicError("contour points do not determine a conic")
    ap, bp, cp, dp, ep = sol

    # Undo x' = (x - mx)/s, y' = (y - my)/s and re-normalize the constant to 1.
    mx, my = mean
    s2 = scale * scale
    a, b, c = ap / s2, bp / s2, cp / s2
    d = -(2 * ap * mx + bp * my) / s2 + dp / scale
    e = -(bp * mx + 2 * cp * my) / s2 + ep / scale
    const = (
        (ap * mx * mx + bp * mx * my + cp * my * my) / s2
        - (dp * mx + ep * my) / scale + 1.0
    )
    if abs(const) < 1e-12 * max(abs(a), abs(c), 1.0):
        raise DegenerateConicError("conic passes through the ICS origin")
    return EllipseCoeffs(a / const, b / const, c / const, d / const, e / const)


def ellipse_center(e: EllipseCoeffs) -> np.ndarray:
    """Center of the ellipse in ICS (cm)."""
    den = 4.0 * e.a * e.c - e.b * e.b
    if abs(den) < 1e-14 * max(e.a * e.a, e.c * e.c, 1.0):
        raise DegenerateConicError("4ac - b^2 ~ 0: conic has no finite center")
    return np.array(
        [(e.b * e.e - 2.0 * e.c * e.d) / den, (e.b * e.d - 2.0 * e.a * e.e) / den]
    )


def cone_from_ellipse(e: EllipseCoeffs, f: float) -> np.ndarray:
    """Symmetric matrix of the viewing cone through the ellipse.

    A camera point lies on the cone iff v.T @ Q @ v = 0. The matrix is
    sign-normalized so its eigenvalue signature is (+, +, -).
    """
    q = np.array(
        [
            [e.a * f * f, e.b * f * f / 2.0, e.d * f / 2.0],
            [e.b * f * f / 2.0, e.c * f * f, e.e * f / 2.0],
            [e.d * f / 2.0, e.e * f / 2.0, 1.0],
        ]
    )
    if np.sum(np.linalg.eigvalsh(q) < 0) == 2:
        q = -q
    return q


def decompose_cone(q: np.ndarray) -> ConeDecomposition:
    """Diagonalize a cone matrix into the auxiliary coordinate system.

    Orders eigenpairs so lambda3 < 0 < lambda2 <= lambda1 with the negative
    pair in the third column, fixes the axis sign toward the scene
    (positive z in CCS), and returns a right-handed rotation.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (3, 3) or np.abs(q - q.T).max() > 1e-9 * max(1.0, np.abs(q).max()):
        raise ValueError("cone matrix must be symmetric 3x3")
    eigvals, eigvecs = np.linalg.eigh(q)

    tol = 1e-10 * np.abs(eigvals).sum()
    if np.any(np.abs(eigvals) <= tol):
        raise NotAConeError("eigenvalue is numerically zero")
    if np.sum(eigvals < 0) != 1:
        raise NotAConeError(
            f"eigenvalue signature {np.sign(eigvals).astype(int).tolist()} "
            "is not (+, +, -)"
        )

    order = np.argsort(eigvals)[::-1]  # descending: l1 >= l2 > 0 > l3
    lambdas = eigvals[order]
    e1, _, e3 = eigvecs[:, order].T

    if e3[2] < 0:
        e3 = -e3
    # Canonical sign for the transverse axis so repeated runs agree bit-for-bit.
    if e1[np.argmax(np.abs(e1))] < 0:
        e1 = -e1
    e2 = np.cross(e3, e1)
    r_a_c = np.column_stack([e1, e2, e3])
    return ConeDecomposition(q=q, lambdas=lambdas, r_a_c=r_a_c)


def candidate_normals(d: ConeDecomposition) -> tuple[CandidateNormal, CandidateNormal]:
    """The two possible luminaire normals, unit vectors in the camera frame.

    The slopes are k = +-sqrt((l1-l2)/(l2-l3)); each normal is
    r_a_c @ (k, 0, -1)/sqrt(k^2+1), flipped if needed so its z-component is
    negative (a ceiling luminaire faces down toward the camera). A head-on
    view has l1 = l2 and both candidates collapse onto the cone axis.
    """
    l1, l2, l3 = d.lambdas
    k = float(np.sqrt(max(0.0, (l1 - l2) / (l2 - l3))))
    out = []
    for ki in (k, -k):
        n = d.r_a_c @ np.array([ki, 0.0, -1.0]) / np.sqrt(ki * ki + 1.0)
        if n[2] > 0:
            n = -n
        out.append(CandidateNormal(k=ki, normal_ccs=n))
    return out[0], out[1]


def luminaire_plane(
    d: ConeDecomposition, k: float, r_lum: float, probe_b: float = 1.0
) -> PlaneACS:
    """Locate the luminaire plane z = k*x + b_led in ACS from the known radius.

    Cuts the cone's x-z silhouette lines z = +-sqrt(-l1/l3)*x with the probe
    plane z = k*x + probe_b; the probe chord scales to the true diameter 2R,
    so b_led = 2*R*probe_b/|chord|. The result is independent of probe_b.
    """
    if not r_lum > 0:
        raise ValueError(f"luminaire radius must be positive, got {r_lum}")
    if not probe_b > 0:
        raise ValueError(f"probe intercept must be positive, got {probe_b}")
    l1, _, l3 = d.lambdas
    m = float(np.sqrt(-l1 / l3))
    if abs(m - abs(k)) <= 1e-9 * m:
        raise ParallelLineError("section plane is parallel to a cone generator")
    p1 = np.array([probe_b / (m - k), 0.0, m * probe_b / (m - k)])
    p2 = np.array([-probe_b / (m + k), 0.0, m * probe_b / (m + k)])
    chord = np.linalg.norm(p1 - p2)
    return PlaneACS(k=k, b_led=2.0 * r_lum * probe_b / chord)


def backproject_to_plane(
    q_pixel, plane: PlaneACS, d: ConeDecomposition, k: CameraIntrinsics
) -> np.ndarray:
    """Intersect the viewing ray of a pixel with the luminaire plane.

    Returns the intersection in the camera frame, in meters. Raises
    LineParallelToPlaneError when the ray runs along the plane and
    BehindCameraError when the intersection has z <= 0.
    """
    ray_a = d.r_a_c.T @ embed_on_image_plane(pixel_to_image(q_pixel, k), k)
    denom = ray_a[2] - plane.k * ray_a[0]
    if abs(denom) <= 1e-12 * np.linalg.norm(ray_a):
        raise LineParallelToPlaneError("viewing ray is parallel to the plane")
    point_a = (plane.b_led / denom) * ray_a
    point_c = d.r_a_c @ point_a
    if point_c[2] <= 0:
        raise BehindCameraError("plane intersection is behind the camera")
    return point_c
