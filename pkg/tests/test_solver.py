"""Pose solvers: duality resolution, angle recovery, translation, dispatch,
and the point-correspondence baseline."""

import math

import numpy as np
import pytest

from arcpose.conic import candidate_normals, cone_from_ellipse, decompose_cone, fit_ellipse
from arcpose.errors import (
    AmbiguousDisambiguationError,
    DegenerateDirectionError,
    GimbalLockError,
    InconsistentInputError,
    TooFewLuminairesError,
    UnknownLuminaireError,
)
from arcpose.frames import EulerAngles, euler_to_rotation
from arcpose.conic import CandidateNormal
from arcpose.solver import (
    LuminaireInfo,
    Observation,
    disambiguate_normal,
    euler_from_normal,
    pnp_baseline,
    psi_oavpa,
    psi_vpca,
    solve_oavpa,
    solve_vpa,
    solve_vpca,
    translation_two_points,
)

from conftest import (
    circle_world_points,
    make_pose,
    project_world_pixels,
    random_visible_scene,
)


def make_observation(lum, pose, k, complete=True, arc=None, n=360):
    """Exact zero-noise observation of a luminaire via the frames-level chain."""
    angles = np.linspace(0, 2 * np.pi, n, endpoint=False)
    if arc is not None:
        angles = angles[arc]
    pixels = project_world_pixels(
        circle_world_points(lum.center_w, lum.radius, angles), pose, k
    )
    from arcpose.frames import pixel_to_image

    return Observation(
        luminaire_id=lum.id,
        ellipse=fit_ellipse(pixel_to_image(pixels, k)),
        complete=complete,
        center_proj=project_world_pixels(lum.center_w, pose, k) if complete else None,
        mark_proj=project_world_pixels(lum.mark_w, pose, k) if complete else None,
        contour_pixels=pixels,
        contour_angles=angles,
    )


def two_luminaire_setup(rng, k):
    """A pose plus two distinct fully visible luminaires (forward model only)."""
    while True:
        lum_a, pose, _ = random_visible_scene(rng, k)
        # Second luminaire: offset the first one's center along the ceiling.
        offset = np.array([rng.uniform(0.3, 0.9) * rng.choice([-1, 1]),
                           rng.uniform(0.2, 0.6) * rng.choice([-1, 1]), 0.0])
        lum_b = LuminaireInfo(id="U", center_w=lum_a.center_w + offset, radius=lum_a.radius)
        pix = project_world_pixels(
            circle_world_points(lum_b.center_w, lum_b.radius,
                                np.linspace(0, 2 * np.pi, 90, endpoint=False)),
            pose, k,
        )
        inside = (
            (pix[:, 0] > 2) & (pix[:, 0] < k.width - 2)
            & (pix[:, 1] > 2) & (pix[:, 1] < k.height - 2)
        )
        if inside.all():
            return lum_a, lum_b, pose


# --- LuminaireInfo ------------------------------------------------------------------

def test_luminaire_default_mark():
    lum = LuminaireInfo(id="L", center_w=np.array([2.0, 2.0, 3.0]), radius=0.15)
    assert np.allclose(lum.mark_w, [2.0, 2.15, 3.0])
    assert np.allclose(lum.normal_w, [0, 0, -1])


def test_luminaire_rejects_bad_mark():
    with pytest.raises(ValueError):
        LuminaireInfo(id="L", center_w=np.zeros(3), radius=0.15,
                      mark_w=np.array([0.15, 0.0, 0.0]))


def test_observation_requires_points_when_complete():
    ellipse = fit_ellipse(
        np.stack([0.1 * np.cos(np.linspace(0, 6, 12)),
                  0.1 * np.sin(np.linspace(0, 6, 12))], axis=-1)
    )
    with pytest.raises(ValueError):
        Observation(luminaire_id="L", ellipse=ellipse, complete=True)


# --- disambiguate_normal ------------------------------------------------------------------

def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def cand(k, v):
    return CandidateNormal(k=k, normal_ccs=unit(v))


def test_disambiguation_forced_by_uniqueness():
    n = unit([0.1, 0.2, -1.0])
    m = unit([0.8, 0.0, -0.6])
    p = unit([-0.7, 0.3, -0.65])
    chosen_a, chosen_b, gap = disambiguate_normal(
        (cand(0.5, n), cand(-0.5, m)), (cand(0.4, n), cand(-0.4, p))
    )
    assert np.allclose(chosen_a.normal_ccs, n)
    assert np.allclose(chosen_b.normal_ccs, n)
    assert gap > 0.1


def test_disambiguation_on_synthetic_scene(intrinsics):
    rng = np.random.default_rng(20)
    for _ in range(50):
        lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
        obs_a = make_observation(lum_a, pose, intrinsics)
        obs_b = make_observation(lum_b, pose, intrinsics)
        cands = []
        for obs in (obs_a, obs_b):
            d = decompose_cone(cone_from_ellipse(obs.ellipse, intrinsics.f))
            cands.append(candidate_normals(d))
        chosen_a, chosen_b, _ = disambiguate_normal(*cands)
        n_true = pose.rotation.T @ np.array([0.0, 0.0, -1.0])
        assert np.linalg.norm(chosen_a.normal_ccs - n_true) < 1e-6
        assert np.linalg.norm(chosen_b.normal_ccs - n_true) < 1e-6


def test_disambiguation_degenerate_tie_is_accepted():
    n = unit([0.0, 0.0, -1.0])
    chosen_a, chosen_b, gap = disambiguate_normal(
        (cand(0.0, n), cand(-0.0, n)), (cand(0.0, n), cand(-0.0, n))
    )
    assert gap == pytest.approx(0.0)
    assert np.allclose(chosen_a.normal_ccs, n)


def test_disambiguation_conflicting_tie_raises():
    n1 = unit([0.3, 0.0, -1.0])
    n2 = unit([-0.3, 0.0, -1.0])
    with pytest.raises(AmbiguousDisambiguationError):
        disambiguate_normal((cand(0.3, n1), cand(-0.3, n2)),
                            (cand(0.3, n1), cand(-0.3, n2)))


# --- euler_from_normal ------------------------------------------------------------------

def test_euler_from_normal_upright():
    assert euler_from_normal([0.0, 0.0, -1.0]) == pytest.approx((0.0, 0.0))


def test_euler_from_normal_hand_values():
    phi, theta = euler_from_normal([0.5, 0.0, -math.sqrt(3) / 2])
    assert (phi, theta) == pytest.approx((0.0, math.pi / 6))
    phi, theta = euler_from_normal([0.0, math.sqrt(2) / 2, -math.sqrt(2) / 2])
    assert (phi, theta) == pytest.approx((-math.pi / 4, 0.0))


def test_euler_from_normal_round_trip():
    rng = np.random.default_rng(21)
    for _ in range(10_000):
        phi = rng.uniform(-math.pi / 2 + 0.01, math.pi / 2 - 0.01)
        theta = rng.uniform(-math.pi / 2 + 0.01, math.pi / 2 - 0.01)
        psi = rng.uniform(-math.pi + 1e-9, math.pi)
        r = euler_to_rotation(EulerAngles(phi, theta, psi))
        n = r.T @ np.array([0.0, 0.0, -1.0])
        got_phi, got_theta = euler_from_normal(n)
        assert abs(got_phi - phi) < 1e-9
        assert abs(got_theta - theta) < 1e-9
        rebuilt = np.array([
            math.sin(got_theta),
            -math.cos(got_theta) * math.sin(got_phi),
            -math.cos(got_theta) * math.cos(got_phi),
        ])
        assert np.abs(rebuilt - n).max() < 1e-10


def test_euler_from_normal_gimbal():
    with pytest.raises(GimbalLockError):
        euler_from_normal([1.0, 0.0, 0.0])


# --- heading solvers ------------------------------------------------------------------

def test_psi_vpca_hand_cases():
    assert psi_vpca([1.0, 0.0, 0.0], 0.0, 0.0) == pytest.approx(math.pi / 2)
    assert psi_vpca([0.0, 1.0, 0.0], 0.0, 0.0) == pytest.approx(0.0)


def test_psi_vpca_round_trip():
    rng = np.random.default_rng(22)
    for _ in range(1000):
        phi = rng.uniform(-1.2, 1.2)
        theta = rng.uniform(-1.2, 1.2)
        psi = rng.uniform(-math.pi + 1e-9, math.pi)
        r = euler_to_rotation(EulerAngles(phi, theta, psi))
        s = r.T @ np.array([0.0, 1.0, 0.0])
        assert abs(psi_vpca(s, phi, theta) - psi) < 1e-9


def test_psi_vpca_inconsistent_input():
    with pytest.raises(InconsistentInputError):
        psi_vpca([0.0, 0.0, 1.0], 0.0, 0.0)


def test_psi_vpca_gimbal():
    with pytest.raises(GimbalLockError):
        psi_vpca([0.0, 1.0, 0.0], 0.0, math.pi / 2)


def test_psi_oavpa_hand_cases():
    assert psi_oavpa([1.0, 0.0, 0.0], [0.0, -1.0, 0.0], 0.0, 0.0) == pytest.approx(
        math.pi / 2
    )
    g = unit([0.3, 0.8, 0.0])
    assert psi_oavpa(g, g, 0.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_psi_oavpa_round_trip():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        phi = rng.uniform(-1.2, 1.2)
        theta = rng.uniform(-1.2, 1.2)
        psi = rng.uniform(-math.pi + 1e-9, math.pi)
        g = unit(np.append(rng.uniform(-1, 1, 2), rng.uniform(-0.5, 0.5)))
        r = euler_to_rotation(EulerAngles(phi, theta, psi))
        h = r.T @ g
        assert abs(psi_oavpa(g, h, phi, theta) - psi) < 1e-9


def test_psi_oavpa_degenerate_direction():
    with pytest.raises(DegenerateDirectionError):
        psi_oavpa([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.1, 0.1)


# --- translation ------------------------------------------------------------------

def test_translation_identity_rotation():
    t = translation_two_points([1, 2, 3], [0, 0, 0], [2, 4, 6], [1, 2, 3], np.eye(3))
    assert np.allclose(t, [1, 2, 3])


def test_translation_averages_exactly():
    delta = np.array([0.01, -0.02, 0.005])
    base = np.array([1.0, 2.0, 3.0])
    # Two single-point estimates at t + delta and t - delta.
    t = translation_two_points(base + delta, [0, 0, 0], base - delta, [0, 0, 0], np.eye(3))
    assert np.allclose(t, base)


def test_translation_consistent_pose():
    rng = np.random.default_rng(24)
    pose = make_pose(0.2, -0.3, 0.9, t=(3.0, 2.0, 1.5))
    pw = rng.uniform(-2, 2, size=(2, 3)) + np.array([3, 2, 4.0])
    pc = (pw - pose.translation) @ pose.rotation
    t = translation_two_points(pw[0], pc[0], pw[1], pc[1], pose.rotation)
    assert np.allclose(t, pose.translation, atol=1e-9)


# --- full solvers ------------------------------------------------------------------

def test_vpca_zero_noise_random_scenes(intrinsics):
    rng = np.random.default_rng(25)
    from arcpose.harness import e_loc, e_pos

    worst_loc, worst_pos = 0.0, 0.0
    for _ in range(100):
        lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
        obs_a = make_observation(lum_a, pose, intrinsics)
        obs_b = make_observation(lum_b, pose, intrinsics, complete=False,
                                 arc=slice(10, 150))
        est = solve_vpca(obs_a, obs_b, [lum_a, lum_b], intrinsics)
        worst_loc = max(worst_loc, e_loc(pose.translation, est.pose.translation))
        worst_pos = max(worst_pos, e_pos(pose.rotation, est.pose.rotation))
    assert worst_loc < 1e-6
    assert worst_pos < 1e-8


def test_vpca_head_on_geometry(intrinsics):
    lum = LuminaireInfo(id="A", center_w=np.array([2.0, 2.0, 3.0]), radius=0.15)
    other = LuminaireInfo(id="B", center_w=np.array([2.6, 2.0, 3.0]), radius=0.15)
    pose = make_pose(t=(2.0, 2.0, 1.0))  # upright, 2 m below the center
    obs_a = make_observation(lum, pose, intrinsics)
    obs_b = make_observation(other, pose, intrinsics, complete=False)
    est = solve_vpca(obs_a, obs_b, [lum, other], intrinsics)
    # The exactly-degenerate head-on cone (l1 == l2) turns eigenvalue-gap
    # rounding into k ~ sqrt(eps), so expect ~1e-8 rather than 1e-12 here.
    assert np.allclose(est.pose.translation, [2.0, 2.0, 1.0], atol=1e-7)
    assert np.abs(est.pose.rotation - np.eye(3)).max() < 1e-7
    assert est.algorithm == "VPCA"


def test_vpca_requires_complete_observation(intrinsics):
    rng = np.random.default_rng(26)
    lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
    obs_a = make_observation(lum_a, pose, intrinsics, complete=False)
    obs_b = make_observation(lum_b, pose, intrinsics, complete=False)
    with pytest.raises(ValueError):
        solve_vpca(obs_a, obs_b, [lum_a, lum_b], intrinsics)


def test_vpca_unknown_luminaire(intrinsics):
    rng = np.random.default_rng(27)
    lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
    obs_a = make_observation(lum_a, pose, intrinsics)
    obs_b = make_observation(lum_b, pose, intrinsics, complete=False)
    with pytest.raises(UnknownLuminaireError):
        solve_vpca(obs_a, obs_b, [lum_b], intrinsics)


def test_oavpa_zero_noise_bias_is_small_but_nonzero(intrinsics):
    rng = np.random.default_rng(28)
    from arcpose.harness import e_loc

    errors = []
    for _ in range(50):
        lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
        obs_a = make_observation(lum_a, pose, intrinsics, complete=False,
                                 arc=slice(0, 180))
        obs_b = make_observation(lum_b, pose, intrinsics, complete=False,
                                 arc=slice(90, 270))
        est = solve_oavpa(obs_a, obs_b, [lum_a, lum_b], intrinsics)
        assert est.algorithm == "OAVPA"
        errors.append(e_loc(pose.translation, est.pose.translation))
    mean = float(np.mean(errors))
    assert 0.0 < mean <= 0.02


def test_oavpa_head_on_symmetry_has_no_bias(intrinsics):
    # Upright camera: ceiling discs stay parallel to the image plane, so the
    # fitted ellipse center coincides with the projected center exactly.
    lum_a = LuminaireInfo(id="A", center_w=np.array([3.7, 3.0, 3.0]), radius=0.15)
    lum_b = LuminaireInfo(id="B", center_w=np.array([4.3, 3.0, 3.0]), radius=0.15)
    pose = make_pose(psi=0.4, t=(4.0, 3.0, 1.2))
    obs_a = make_observation(lum_a, pose, intrinsics, complete=False, arc=slice(0, 200))
    obs_b = make_observation(lum_b, pose, intrinsics, complete=False, arc=slice(100, 300))
    est = solve_oavpa(obs_a, obs_b, [lum_a, lum_b], intrinsics)
    assert np.linalg.norm(est.pose.translation - pose.translation) < 1e-6


def test_oavpa_rejects_duplicate_luminaire(intrinsics):
    rng = np.random.default_rng(29)
    lum_a, _, pose = two_luminaire_setup(rng, intrinsics)
    obs = make_observation(lum_a, pose, intrinsics, complete=False)
    with pytest.raises(ValueError):
        solve_oavpa(obs, obs, [lum_a], intrinsics)


def test_vpa_dispatch(intrinsics):
    rng = np.random.default_rng(30)
    lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
    complete = make_observation(lum_a, pose, intrinsics)
    partial_a = make_observation(lum_a, pose, intrinsics, complete=False,
                                 arc=slice(0, 180))
    partial_b = make_observation(lum_b, pose, intrinsics, complete=False,
                                 arc=slice(0, 180))
    assert solve_vpa([complete, partial_b], [lum_a, lum_b], intrinsics).algorithm == "VPCA"
    assert solve_vpa([partial_a, partial_b], [lum_a, lum_b], intrinsics).algorithm == "OAVPA"
    with pytest.raises(TooFewLuminairesError):
        solve_vpa([complete], [lum_a, lum_b], intrinsics)


def test_vpa_dispatch_is_deterministic(intrinsics):
    rng = np.random.default_rng(31)
    lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
    obs = [
        make_observation(lum_a, pose, intrinsics, complete=False, arc=slice(0, 200)),
        make_observation(lum_b, pose, intrinsics, complete=False, arc=slice(0, 200)),
    ]
    first = solve_vpa(obs, [lum_a, lum_b], intrinsics)
    second = solve_vpa(obs, [lum_a, lum_b], intrinsics)
    assert first.algorithm == second.algorithm
    assert np.array_equal(first.pose.translation, second.pose.translation)
    assert np.array_equal(first.pose.rotation, second.pose.rotation)


def test_vpa_parallel_planes_at_different_heights(intrinsics):
    # Luminaires on parallel planes 0.3 m apart; the circle-and-arc branch
    # stays exact and the dispatcher handles the pair.
    lum_a = LuminaireInfo(id="A", center_w=np.array([3.8, 3.0, 3.0]), radius=0.15)
    lum_b = LuminaireInfo(id="B", center_w=np.array([4.35, 3.1, 2.7]), radius=0.15)
    pose = make_pose(phi=0.1, theta=-0.08, psi=0.7, t=(4.0, 3.0, 1.1))
    obs = [
        make_observation(lum_a, pose, intrinsics),
        make_observation(lum_b, pose, intrinsics, complete=False, arc=slice(20, 200)),
    ]
    est = solve_vpa(obs, [lum_a, lum_b], intrinsics)
    assert est.algorithm == "VPCA"
    assert np.linalg.norm(est.pose.translation - pose.translation) < 1e-6

    # The arcs-only solver also copes with the height difference (small bias).
    obs_partial = [
        make_observation(lum_a, pose, intrinsics, complete=False, arc=slice(0, 200)),
        make_observation(lum_b, pose, intrinsics, complete=False, arc=slice(20, 200)),
    ]
    est2 = solve_vpa(obs_partial, [lum_a, lum_b], intrinsics)
    assert est2.algorithm == "OAVPA"
    assert np.linalg.norm(est2.pose.translation - pose.translation) < 0.05


# --- PnP baseline ------------------------------------------------------------------

def pnp_scene(rng, intrinsics):
    lum_a, lum_b, pose = two_luminaire_setup(rng, intrinsics)
    pairs = []
    for lum, phase in ((lum_a, 0.0), (lum_b, np.pi / 4)):
        for ang in (phase + np.pi / 2, phase + 3 * np.pi / 2):
            w = circle_world_points(lum.center_w, lum.radius, [ang])[0]
            pairs.append((w, project_world_pixels(w, pose, intrinsics)))
    return pairs, pose


def test_pnp_zero_noise_exact(intrinsics):
    rng = np.random.default_rng(32)
    for _ in range(30):
        pairs, pose = pnp_scene(rng, intrinsics)
        est = pnp_baseline(pairs, intrinsics)
        assert np.linalg.norm(est.pose.translation - pose.translation) < 1e-6
        assert est.algorithm == "PNP"
        assert est.diagnostics["rms_px"] < 1e-6


def test_pnp_requires_four_points(intrinsics):
    rng = np.random.default_rng(33)
    pairs, _ = pnp_scene(rng, intrinsics)
    with pytest.raises(ValueError):
        pnp_baseline(pairs[:3], intrinsics)


def test_pnp_rejects_collinear_world_points(intrinsics):
    pairs = [
        (np.array([x, 2.0, 3.0]), np.array([300.0 + 10 * x, 240.0]))
        for x in (1.0, 2.0, 3.0, 4.0)
    ]
    with pytest.raises(ValueError):
        pnp_baseline(pairs, intrinsics)


def test_pnp_noisy_residual_is_local_minimum(intrinsics):
    # With perturbed pixels the output must beat the true pose's residual and
    # sit at a local minimum of the reprojection cost.
    from arcpose.solver import _pnp_residuals, _angles_from_rotation

    rng = np.random.default_rng(34)
    pairs, pose = pnp_scene(rng, intrinsics)
    noisy = [(w, p + rng.normal(0, 0.5, size=2)) for w, p in pairs]
    est = pnp_baseline(noisy, intrinsics)

    world = np.array([w for w, _ in noisy])
    pixels = np.array([p for _, p in noisy])
    x_est = np.concatenate([
        _angles_from_rotation(est.pose.rotation), est.pose.translation
    ])
    cost_est = float(_pnp_residuals(x_est, world, pixels, intrinsics) @
                     _pnp_residuals(x_est, world, pixels, intrinsics))
    x_true = np.concatenate([
        _angles_from_rotation(pose.rotation), pose.translation
    ])
    cost_true = float(_pnp_residuals(x_true, world, pixels, intrinsics) @
                      _pnp_residuals(x_true, world, pixels, intrinsics))
    assert cost_est <= cost_true + 1e-9
    # Coordinate-wise probing cannot improve the cost to first order.
    for j in range(6):
        for delta in (-1e-5, 1e-5):
            x_probe = x_est.copy()
            x_probe[j] += delta
            cost_probe = float(_pnp_residuals(x_probe, world, pixels, intrinsics) @
                               _pnp_residuals(x_probe, world, pixels, intrinsics))
            assert cost_probe >= cost_est - 1e-7 * max(cost_est, 1.0)
