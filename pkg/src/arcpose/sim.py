"""Synthetic scenes and captures for the positioning simulation study.

A scene is a rectangular room with circular luminaires on (or hanging below)
the ceiling. A sample draws a random camera pose, projects each luminaire's
margin circle through the pinhole model, perturbs the pixels with Gaussian
noise, optionally truncates the contour to a partial arc (occlusion), and
averages a burst of images into one observation per luminaire.

Determinism: every function that draws randomness takes a numpy Generator.
Noise is always drawn as standard normals and scaled by sigma afterwards, so
experiments that differ only in noise level consume identical random streams
and stay pairwise comparable. Visibility is always classified on the clean
(noise-free) projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .conic import fit_ellipse
from .errors import (
    ArcTooShortError,
    InvalidConfigError,
    MismatchedCapturesError,
    NotVisibleError,
    SamplingExhaustedError,
)
from .frames import (
    CameraIntrinsics,
    EulerAngles,
    Pose,
    _freeze,
    _wrap_angle,
    euler_to_rotation,
    pixel_to_image,
)
from .solver import LuminaireInfo, Observation

SCENE_SCHEMA_VERSION = 1

ARC_MODES = ("complete", "semicircle", "superior_arc", "image_bounds")


@dataclass(frozen=True)
class Scene:
    """Room dimensions (m) and the luminaires mounted in it."""

    room: tuple[float, float, float]
    luminaires: tuple[LuminaireInfo, ...]

    def __post_init__(self):
        length, width, height = self.room
        if not (length > 0 and width > 0 and height > 0):
            raise ValueError(f"room dimensions must be positive, got {self.room}")
        object.__setattr__(self, "luminaires", tuple(self.luminaires))
        for lum in self.luminaires:
            x, y, z = lum.center_w
            if not (0 <= x <= length and 0 <= y <= width and 0 < z <= height):
                raise ValueError(f"luminaire {lum.id!r} lies outside the room")

    def luminaire_map(self) -> dict[str, LuminaireInfo]:
        return {lum.id: lum for lum in self.luminaires}


@dataclass(frozen=True)
class NoiseModel:
    """Pixel noise: i.i.d. zero-mean Gaussian with std sigma on u and v."""

    sigma: float
    seed: int | None = None

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class CaptureConfig:
    """How contours are sampled, how many images are averaged, and how arcs
    get truncated."""

    contour_samples: int = 360
    images_per_location: int = 20
    arc_mode: str = "complete"
    arc_fraction: float = 0.6

    def __post_init__(self):
        if self.contour_samples < 8:
            raise ValueError("contour_samples must be >= 8")
        if self.images_per_location < 1:
            raise ValueError("images_per_location must be >= 1")
        if self.arc_mode not in ARC_MODES:
            raise ValueError(f"arc_mode must be one of {ARC_MODES}")
        if not 0 < self.arc_fraction <= 1:
            raise ValueError("arc_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    """The sampled true camera pose."""

    pose: Pose


@dataclass(frozen=True)
class VisibilityConstraint:
    """Acceptance rule for rejection-sampled poses.

    A luminaire counts as visible when at least `min_fraction` of its contour
    samples project in front of the camera and inside the image; it counts as
    complete when the whole contour plus the center and mark projections do.
    """

    intrinsics: CameraIntrinsics
    min_visible: int = 2
    min_fraction: float = 0.5
    require_complete: int = 0
    height_range: tuple[float, float] = (0.5, 2.0)
    max_tilt: float = math.radians(45.0)
    contour_samples: int = 360
    max_attempts: int = 100_000


@dataclass(frozen=True)
class Capture:
    """One image of one luminaire: noisy pixels plus their clean reference.

    `angles` holds the circle parameter of each contour sample so that
    corresponding points across a burst of images (and their world positions)
    stay identifiable after truncation.
    """

    luminaire_id: str
    angles: np.ndarray
    pixels: np.ndarray
    clean_pixels: np.ndarray
    center: np.ndarray | None = None
    mark: np.ndarray | None = None
    clean_center: np.ndarray | None = None
    clean_mark: np.ndarray | None = None
    mode: str = "complete"

    def __post_init__(self):
        arrays = {
            name: getattr(self, name)
            for name in (
                "angles", "pixels", "clean_pixels",
                "center", "mark", "clean_center", "clean_mark",
            )
            if getattr(self, name) is not None
        }
        _freeze(self, **arrays)


def default_intrinsics() -> CameraIntrinsics:
    """The simulated camera: 640x480, 1.25e-3 cm pixels, f = 0.4 cm.

    The pixel pitch is read as cm/pixel; with this focal length the horizontal
    field of view is ~90 degrees, wide enough to see two luminaires from most
    of the room.
    """
    return CameraIntrinsics(
        f=0.4, dx=1.25e-3, dy=1.25e-3, u0=320.0, v0=240.0, width=640, height=480
    )


def default_scene(radius: float = 0.15) -> Scene:
    """The 8 x 6 x 3 m room with four ceiling luminaires."""
    centers = [(2.0, 2.0, 3.0), (6.0, 2.0, 3.0), (2.0, 4.0, 3.0), (6.0, 4.0, 3.0)]
    lums = tuple(
        LuminaireInfo(id=f"L{i + 1}", center_w=np.array(c), radius=radius)
        for i, c in enumerate(centers)
    )
    return Scene(room=(8.0, 6.0, 3.0), luminaires=lums)


def contour_angles(n: int) -> np.ndarray:
    """Evenly spaced circle parameters; the mark point sits at pi/2."""
    return 2.0 * math.pi * np.arange(n) / n


def _project_points_pixel(points_w, pose: Pose, k: CameraIntrinsics) -> np.ndarray:
    """World points -> pixel coordinates; NaN where the point is not in front."""
    cam = (np.asarray(points_w, dtype=float) - pose.translation) @ pose.rotation
    z = cam[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(z > 0, (k.f * cam[..., 0] / z) / k.dx + k.u0, np.nan)
        v = np.where(z > 0, (k.f * cam[..., 1] / z) / k.dy + k.v0, np.nan)
    return np.stack([u, v], axis=-1)


def _in_bounds(pixels: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    u, v = pixels[..., 0], pixels[..., 1]
    with np.errstate(invalid="ignore"):
        return (u >= 0) & (u <= k.width) & (v >= 0) & (v <= k.height)


@dataclass(frozen=True)
class Visibility:
    """How much of a luminaire the camera sees, on the clean projection."""

    fraction: float     # share of contour samples inside the image
    complete: bool      # full contour plus center and mark readable
    contour_px: float   # pixel length of the visible part of the contour


def luminaire_visibility(
    lum: LuminaireInfo, pose: Pose, k: CameraIntrinsics, contour_samples: int = 360
) -> Visibility:
    """Classify visibility and measure the extractable contour length."""
    pts = lum.circle_points(contour_angles(contour_samples))
    pixels = _project_points_pixel(pts, pose, k)
    inside = _in_bounds(pixels, k)
    frac = float(inside.mean())
    gm = _project_points_pixel(np.stack([lum.center_w, lum.mark_w]), pose, k)
    complete = frac == 1.0 and bool(_in_bounds(gm, k).all())
    seg = np.linalg.norm(np.diff(pixels, axis=0, append=pixels[:1]), axis=1)
    contour_px = float(seg[inside & np.roll(inside, -1)].sum())
    return Visibility(fraction=frac, complete=complete, contour_px=contour_px)


def sample_pose(
    scene: Scene, rng: np.random.Generator, constraint: VisibilityConstraint
) -> GroundTruth:
    """Rejection-sample a camera pose satisfying the visibility constraint.

    Position is uniform over the room footprint with height in
    `height_range`; roll and pitch are uniform within +-max_tilt and the
    heading is uniform. Raises SamplingExhaustedError after max_attempts.
    """
    k = constraint.intrinsics
    length, width, _ = scene.room
    if len(scene.luminaires) < max(constraint.min_visible, 1):
        raise SamplingExhaustedError(
            f"scene has {len(scene.luminaires)} luminaires, "
            f"constraint needs {constraint.min_visible}"
        )

    angles = contour_angles(constraint.contour_samples)
    rings = np.stack([lum.circle_points(angles) for lum in scene.luminaires])
    marks = np.stack(
        [np.stack([lum.center_w, lum.mark_w]) for lum in scene.luminaires]
    )

    for _ in range(constraint.max_attempts):
        draw = rng.uniform(size=6)
        position = np.array(
            [
                draw[0] * length,
                draw[1] * width,
                constraint.height_range[0]
                + draw[2] * (constraint.height_range[1] - constraint.height_range[0]),
            ]
        )
        e = EulerAngles(
            phi=(2 * draw[3] - 1) * constraint.max_tilt,
            theta=(2 * draw[4] - 1) * constraint.max_tilt,
            psi=_wrap_angle((2 * draw[5] - 1) * math.pi),
        )
        pose = Pose(rotation=euler_to_rotation(e), translation=position)

        in_img = _in_bounds(_project_points_pixel(rings, pose, k), k)
        fractions = in_img.mean(axis=1)
        n_visible = int((fractions >= constraint.min_fraction).sum())
        if n_visible < constraint.min_visible:
            continue
        if constraint.require_complete > 0:
            gm_ok = _in_bounds(_project_points_pixel(marks, pose, k), k).all(axis=1)
            n_complete = int(((fractions == 1.0) & gm_ok).sum())
            if n_complete < constraint.require_complete:
                continue
        return GroundTruth(pose=pose)
    raise SamplingExhaustedError(
        f"no pose satisfied the constraint in {constraint.max_attempts} attempts"
    )


def project_luminaire_burst(
    lum: LuminaireInfo,
    truth: GroundTruth,
    k: CameraIntrinsics,
    noise: NoiseModel,
    cap: CaptureConfig,
    rng: np.random.Generator,
) -> list[Capture]:
    """Project one luminaire into `images_per_location` noisy images.

    The clean projection is computed once; each image gets independent
    Gaussian pixel noise on the contour samples. Standard normals are drawn
    regardless of sigma so random streams align across noise levels. The
    center and mark projections are reported noise-free: they stand in for
    the space-time-coded landmark points, which the receiver decodes from
    structured LED patterns spanning the whole luminaire face rather than
    measuring as single contour pixels. Raises NotVisibleError when no
    contour point lands inside the image.
    """
    angles = contour_angles(cap.contour_samples)
    clean = _project_points_pixel(lum.circle_points(angles), truth.pose, k)
    if not _in_bounds(clean, k).any():
        raise NotVisibleError(f"luminaire {lum.id!r} does not project into the image")
    clean_gm = _project_points_pixel(
        np.stack([lum.center_w, lum.mark_w]), truth.pose, k
    )

    n_img = cap.images_per_location
    contour_noise = rng.standard_normal((n_img,) + clean.shape) * noise.sigma

    captures = []
    for i in range(n_img):
        captures.append(
            Capture(
                luminaire_id=lum.id,
                angles=angles,
                pixels=clean + contour_noise[i],
                clean_pixels=clean,
                center=clean_gm[0],
                mark=clean_gm[1],
                clean_center=clean_gm[0],
                clean_mark=clean_gm[1],
            )
        )
    return captures


def project_luminaire(
    lum: LuminaireInfo,
    truth: GroundTruth,
    k: CameraIntrinsics,
    noise: NoiseModel,
    cap: CaptureConfig,
    rng: np.random.Generator | None = None,
) -> Capture:
    """Single noisy image of one luminaire (see project_luminaire_burst)."""
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    single = replace(cap, images_per_location=1)
    return project_luminaire_burst(lum, truth, k, noise, single, rng)[0]


def truncate_arc(
    capture: Capture,
    mode: str,
    rng: np.random.Generator | None = None,
    *,
    start_index: int | None = None,
    arc_fraction: float = 0.6,
    intrinsics: CameraIntrinsics | None = None,
) -> Capture:
    """Reduce a capture to the part of the contour that survives occlusion.

    semicircle keeps a random contiguous 50% span, superior_arc keeps
    `arc_fraction`, image_bounds keeps the points whose clean projection lies
    inside the image. Partial captures lose the center and mark projections
    (the coded points cannot be read from a partial image). Pass the same
    `start_index` to every image of a burst so they stay aligned.
    """
    if mode not in ARC_MODES:
        raise ValueError(f"mode must be one of {ARC_MODES}")
    if mode == "complete":
        return capture

    n = len(capture.angles)
    if mode == "image_bounds":
        if intrinsics is None:
            raise ValueError("image_bounds truncation needs the camera intrinsics")
        keep = np.flatnonzero(_in_bounds(capture.clean_pixels, intrinsics))
    else:
        span = n // 2 if mode == "semicircle" else int(round(n * arc_fraction))
        if start_index is None:
            if rng is None:
                raise ValueError("semicircle/superior_arc truncation needs rng "
                                 "or an explicit start_index")
            start_index = int(rng.integers(n))
        keep = np.arange(start_index, start_index + span) % n

    if len(keep) < 5:
        raise ArcTooShortError(f"only {len(keep)} contour points survive truncation")
    return Capture(
        luminaire_id=capture.luminaire_id,
        angles=capture.angles[keep],
        pixels=capture.pixels[keep],
        clean_pixels=capture.clean_pixels[keep],
        center=None,
        mark=None,
        clean_center=None,
        clean_mark=None,
        mode=mode,
    )


def average_observations(captures, k: CameraIntrinsics) -> Observation:
    """Average a burst of captures into one observation and fit its ellipse.

    Corresponding pixels (same contour parameter index) are averaged across
    images before fitting, which shrinks the effective pixel noise by
    sqrt(n_images). All captures must share luminaire, angles, and truncation.
    """
    captures = list(captures)
    if not captures:
        raise MismatchedCapturesError("no captures to average")
    first = captures[0]
    for c in captures[1:]:
        if (
            c.luminaire_id != first.luminaire_id
            or c.mode != first.mode
            or c.angles.shape != first.angles.shape
            or not np.array_equal(c.angles, first.angles)
        ):
            raise MismatchedCapturesError(
                "captures differ in luminaire, truncation, or sampling angles"
            )

    mean_pixels = np.mean([c.pixels for c in captures], axis=0)
    ellipse = fit_ellipse(pixel_to_image(mean_pixels, k))
    complete = first.mode == "complete" and first.center is not None
    center = np.mean([c.center for c in captures], axis=0) if complete else None
    mark = np.mean([c.mark for c in captures], axis=0) if complete else None
    return Observation(
        luminaire_id=first.luminaire_id,
        ellipse=ellipse,
        complete=complete,
        center_proj=center,
        mark_proj=mark,
        contour_pixels=mean_pixels,
        contour_angles=first.angles,
    )


# --- scene (de)serialization ----------------------------------------------------

def scene_to_dict(scene: Scene) -> dict:
    return {
        "schema_version": SCENE_SCHEMA_VERSION,
        "room": list(scene.room),
        "luminaires": [
            {
                "id": lum.id,
                "center": lum.center_w.tolist(),
                "radius": lum.radius,
            }
            for lum in scene.luminaires
        ],
    }


def scene_from_dict(data: dict) -> Scene:
    """Parse a scene mapping, rejecting unknown fields (fail fast on typos)."""
    if not isinstance(data, dict):
        raise InvalidConfigError("scene must be a JSON object")
    unknown = set(data) - {"schema_version", "room", "luminaires"}
    if unknown:
        raise InvalidConfigError(f"unknown scene fields: {sorted(unknown)}")
    if data.get("schema_version") != SCENE_SCHEMA_VERSION:
        raise InvalidConfigError(
            f"unsupported scene schema_version {data.get('schema_version')!r}"
        )
    try:
        room = tuple(float(v) for v in data["room"])
        lums = []
        for item in data["luminaires"]:
            extra = set(item) - {"id", "center", "radius"}
            if extra:
                raise InvalidConfigError(f"unknown luminaire fields: {sorted(extra)}")
            lums.append(
                LuminaireInfo(
                    id=str(item["id"]),
                    center_w=np.array([float(v) for v in item["center"]]),
                    radius=float(item["radius"]),
                )
            )
        return Scene(room=room, luminaires=tuple(lums))
    except InvalidConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfigError(f"bad scene file: {exc}") from exc
