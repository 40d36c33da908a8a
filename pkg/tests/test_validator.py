import json

import numpy as np
import pytest
import scipy.linalg
import scipy.ndimage

from polyc.envs import PendulumEnv
from polyc.envs.base import ActionScaledEnv
from polyc.critic import LyapunovCritic
from polyc.nn import GaussianPolicy, MlpNetwork
from polyc.validator import (LABEL_OUTSIDE, LABEL_VIOLATING,
                             CellClassification, CertificationReport,
                             ClosedLoopSystem, EpsNet, NetBudgetError,
                             build_eps_net, certify_band, certify_slice,
                             classify_cells, connected_components,
                             estimate_lipschitz, landscape_map,
                             monte_carlo_validate, wilson_interval)
from systems import (bump_lie_coeff, bump_violation_radius, linear_system,
                     make_bump_system, quadratic_form_system, quadratic_value)

BOX1 = np.array([[-1.0, 1.0]])
BOX2 = np.array([[-1.0, 1.0], [-1.0, 1.0]])

BUMP_K = 0.97
BUMP_A = 0.1
BUMP_CENTER = np.array([0.55, 0.0])
BUMP_R = 0.35


def bump_system():
    return make_bump_system(BUMP_K, BUMP_CENTER, BUMP_R)


def ball_volume():
    r = bump_violation_radius(BUMP_K, BUMP_R, BUMP_A)
    return np.pi * r * r


@pytest.fixture(scope="module")
def bump_certified():
    # epsilon above the analytic violating-ball volume: should certify
    return certify_band(bump_system(), BOX2, a_const=BUMP_A,
                        epsilon_volume=1.5 * ball_volume(),
                        margin=1e-6, max_cells=250_000)


@pytest.fixture(scope="module")
def bump_rejected():
    # identical run with epsilon below the ball volume: must not certify
    return certify_band(bump_system(), BOX2, a_const=BUMP_A,
                        epsilon_volume=0.25 * ball_volume(),
                        margin=1e-6, max_cells=250_000)


# ---------------------------------------------------------------- lipschitz

def test_lipschitz_linear_oracle():
    # lie = (dt-2) x^2 on [-1,1]: true max slope just under 4, doubled by
    # the safety factor, so the estimate must land in [4, 8].
    sys1 = linear_system(-1.0, 1)
    for n in (100, 1000):
        est = estimate_lipschitz(sys1, BOX1, n, np.random.default_rng(7))
        assert 4.0 <= est <= 8.0


def test_lipschitz_monotone_in_budget():
    # pairs are drawn sequentially, so a bigger budget extends the smaller
    # one and the max-slope estimate can only grow
    sys1 = linear_system(-1.0, 1)
    ests = [estimate_lipschitz(sys1, BOX1, n, np.random.default_rng(7))
            for n in (100, 300, 1000)]
    assert ests[0] <= ests[1] <= ests[2]


def test_lipschitz_constant_value_is_zero():
    const = ClosedLoopSystem(lambda x: np.ones(len(np.atleast_2d(x))),
                             lambda x: x, 1e-3, np.zeros(1))
    assert estimate_lipschitz(const, BOX1, 200, np.random.default_rng(0)) == 0.0


def test_lipschitz_requires_enough_samples():
    with pytest.raises(ValueError, match="100"):
        estimate_lipschitz(linear_system(-1.0, 1), BOX1, 99,
                           np.random.default_rng(0))


def test_lipschitz_degenerate_box_raises():
    box = np.array([[0.5, 0.5], [2.0, 2.0]])
    with pytest.raises(ValueError, match="degenerate"):
        estimate_lipschitz(linear_system(-1.0, 2), box, 200,
                           np.random.default_rng(0))


# ------------------------------------------------------------------ eps net

def test_net_cell_sizing_from_margin():
    # diagonal bound L*d/2 <= margin with d = h*sqrt(2) in 2-D:
    # L=4, margin=0.2 -> h ~ 0.0707 -> ceil(2/h) = 29 cells per dim
    net = build_eps_net(BOX2, lipschitz=4.0, margin=0.2, min_cells_per_dim=20)
    assert net.counts.tolist() == [29, 29]
    assert net.diagonal * 4.0 / 2.0 <= 0.2 + 1e-12


def test_net_counts_double_when_margin_halves():
    base = build_eps_net(BOX2, 4.0, 0.2, min_cells_per_dim=1)
    fine = build_eps_net(BOX2, 4.0, 0.1, min_cells_per_dim=1)
    for c0, c1 in zip(base.counts, fine.counts):
        assert 2 * c0 - 1 <= c1 <= 2 * c0 + 1


def test_net_min_cells_floor():
    net = build_eps_net(BOX2, 4.0, margin=10.0, min_cells_per_dim=20)
    assert net.counts.tolist() == [20, 20]


def test_net_spans_box_exactly():
    net = build_eps_net(np.array([[-0.3, 1.7], [2.0, 2.9]]), 5.0, 0.05)
    hi = net.lo + net.counts * net.widths
    np.testing.assert_allclose(hi, net.box[:, 1], rtol=0, atol=1e-15)


def test_net_zero_width_dimension():
    net = build_eps_net(np.array([[-1.0, 1.0], [3.0, 3.0]]), 4.0, 0.2,
                        min_cells_per_dim=1)
    assert net.counts[1] == 1
    assert net.widths[1] == 0.0
    # volume and diagonal ignore the flat dimension
    assert net.cell_volume == pytest.approx(net.widths[0])
    assert net.diagonal == pytest.approx(net.widths[0])
    centers = net.centers(np.arange(net.n_cells))
    assert np.all(centers[:, 1] == 3.0)


def test_net_budget_error_names_feasible_margin():
    with pytest.raises(NetBudgetError) as exc:
        build_eps_net(BOX2, 4.0, 1e-6, max_cells=1000, min_cells_per_dim=1)
    err = exc.value
    assert err.feasible_margin > err.requested_margin
    net = build_eps_net(BOX2, 4.0, err.feasible_margin, max_cells=1000,
                        min_cells_per_dim=1)
    assert net.n_cells <= 1000
    with pytest.raises(NetBudgetError):
        build_eps_net(BOX2, 4.0, 0.99 * err.feasible_margin, max_cells=1000,
                      min_cells_per_dim=1)


def test_net_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_eps_net(np.array([[1.0, 1.0]]), 4.0, 0.1)
    with pytest.raises(ValueError):
        build_eps_net(BOX2, 0.0, 0.1)
    with pytest.raises(ValueError):
        build_eps_net(BOX2, 4.0, -0.1)
    with pytest.raises(ValueError):
        EpsNet(BOX2, [4, 0])


# ----------------------------------------------------------------- classify

def test_classify_stable_has_no_violations():
    net = EpsNet(BOX2, [64, 64])
    cls = classify_cells(linear_system(-1.0, 2), net, 0.05, (0.1, 1.0))
    centers = net.centers(np.arange(net.n_cells))
    v = quadratic_value(centers)
    np.testing.assert_array_equal(cls.in_band, (v >= 0.1) & (v <= 1.0))
    assert cls.violating.sum() == 0
    assert cls.positivity_ok
    assert cls.origin_value == 0.0


def test_classify_expanding_flow_all_violating():
    net = EpsNet(BOX2, [32, 32])
    cls = classify_cells(linear_system(+1.0, 2), net, 0.05, (0.1, 1.0))
    assert cls.in_band.sum() > 100
    np.testing.assert_array_equal(cls.violating, cls.in_band)


def test_classify_bump_matches_analytic_ball():
    # the Euler-sampled lie of the bump system is V*(2u + dt*u^2) exactly,
    # so the violating set must match the closed form at every center
    net = EpsNet(BOX2, [160, 160])
    cls = classify_cells(bump_system(), net, BUMP_A, (0.05, 1.5))
    centers = net.centers(np.arange(net.n_cells))
    coeff = bump_lie_coeff(centers, BUMP_K, BUMP_CENTER, BUMP_R)
    v = quadratic_value(centers)
    expected = (v >= 0.05) & (v <= 1.5) & (coeff >= -BUMP_A)
    clear_of_boundary = np.abs(coeff + BUMP_A) > 1e-9
    assert cls.violating.sum() > 20
    np.testing.assert_array_equal(cls.violating[clear_of_boundary],
                                  expected[clear_of_boundary])


def test_classify_step_failure_marks_violating():
    def broken_stepper(states):
        out = states * (1.0 - 1e-3)
        out[states[:, 0] > 0.5] = np.nan
        return out

    system = ClosedLoopSystem(quadratic_value, broken_stepper, 1e-3,
                              np.zeros(2))
    net = EpsNet(BOX2, [20, 20])
    cls = classify_cells(system, net, 0.05, (0.1, 1.0))
    centers = net.centers(np.arange(net.n_cells))
    broken = cls.in_band & (centers[:, 0] > 0.5)
    assert broken.sum() > 0
    np.testing.assert_array_equal(cls.violating, broken)


def test_classify_negative_values_fail_positivity():
    shifted = ClosedLoopSystem(lambda x: quadratic_value(x) - 0.5,
                               lambda x: x * (1.0 - 1e-3), 1e-3, np.zeros(2))
    cls = classify_cells(shifted, EpsNet(BOX2, [16, 16]), 0.05, (0.1, 1.0))
    assert not cls.positivity_ok


def test_classify_large_origin_value_fails_positivity():
    off = np.array([0.3, 0.0])
    system = ClosedLoopSystem(lambda x: quadratic_value(x - off),
                              lambda x: x * (1.0 - 1e-3), 1e-3, np.zeros(2))
    cls = classify_cells(system, EpsNet(BOX2, [16, 16]), 0.05, (0.1, 1.0))
    assert cls.origin_value == pytest.approx(0.09)
    assert not cls.positivity_ok


def test_classify_validates_band_and_rate():
    net = EpsNet(BOX2, [8, 8])
    with pytest.raises(ValueError):
        classify_cells(linear_system(-1.0, 2), net, 0.05, (1.0, 0.1))
    with pytest.raises(ValueError):
        classify_cells(linear_system(-1.0, 2), net, 0.0, (0.1, 1.0))


# --------------------------------------------------------------- components

def _mask_classification(net, mask):
    labels = np.full(net.n_cells, LABEL_OUTSIDE, dtype=np.int8)
    labels[mask.ravel()] = LABEL_VIOLATING
    return CellClassification(net, np.zeros(net.n_cells),
                              np.zeros(net.n_cells), labels, (0.1, 1.0),
                              0.05, True, 0.0)


def test_components_empty():
    net = EpsNet(BOX2, [8, 8])
    cls = classify_cells(linear_system(-1.0, 2), net, 0.05, (0.1, 1.0))
    assert connected_components(cls) == []


def test_components_face_adjacency_not_corners():
    net = EpsNet(np.array([[0.0, 4.0], [0.0, 4.0]]), [4, 4])
    diag = np.zeros((4, 4), dtype=bool)
    diag[0, 0] = diag[1, 1] = True
    assert len(connected_components(_mask_classification(net, diag))) == 2
    row = np.zeros((4, 4), dtype=bool)
    row[0, 0] = row[0, 1] = True
    comps = connected_components(_mask_classification(net, row))
    assert len(comps) == 1
    assert comps[0].cells == 2


def test_components_match_reference_labeling():
    rng = np.random.default_rng(5)
    net = EpsNet(np.array([[0.0, 5.0], [0.0, 5.0]]), [50, 50])
    mask = rng.random((50, 50)) < 0.4
    comps = connected_components(_mask_classification(net, mask))
    labeled, n_ref = scipy.ndimage.label(mask)  # 4-connectivity default
    ref_sizes = sorted(np.bincount(labeled.ravel())[1:].tolist(), reverse=True)
    assert len(comps) == n_ref
    assert [c.cells for c in comps] == ref_sizes
    total = sum(c.volume for c in comps)
    assert total == pytest.approx(mask.sum() * net.cell_volume, rel=1e-12)


def test_components_single_cell_bounding_box():
    net = EpsNet(np.array([[0.0, 4.0], [0.0, 4.0]]), [4, 4])
    mask = np.zeros((4, 4), dtype=bool)
    mask[2, 1] = True
    comp, = connected_components(_mask_classification(net, mask))
    np.testing.assert_allclose(comp.bounding_box,
                               [[2.0, 3.0], [1.0, 2.0]], atol=1e-12)
    assert comp.volume == pytest.approx(net.cell_volume)


# ------------------------------------------------------------- certify band

def test_certify_stable_linear():
    report = certify_band(linear_system(-1.0, 2), BOX2, a_const=0.05,
                          margin=0.2, max_cells=100_000)
    assert report.certified
    assert report.components == []
    assert report.violation_fraction == 0.0
    assert report.positivity_ok
    assert report.mode == "full-grid"
    assert report.margin_used == report.margin_requested == 0.2
    # lie = (dt-2) V, so the band extrema come from the same cell
    assert report.max_lie_in_band == pytest.approx(
        (1e-3 - 2.0) * report.min_v_in_band, rel=1e-9)
    assert report.band[1] / report.band[0] > 5.0


def test_certify_picks_widest_band_first():
    report = certify_band(linear_system(-1.0, 2), BOX2, a_const=0.05,
                          margin=0.2, max_cells=100_000)
    net = EpsNet(report.net["box"], report.net["counts"])
    v = quadratic_value(net.centers(np.arange(net.n_cells)))
    p5, p95 = np.percentile(v[v > 0], [5, 95])
    assert report.band[0] == pytest.approx(p5, rel=1e-9)
    assert report.band[1] == pytest.approx(p95, rel=1e-9)


def test_certify_expanding_flow_fails():
    report = certify_band(linear_system(+1.0, 2), BOX2, a_const=0.05,
                          margin=0.2, max_cells=100_000)
    assert not report.certified
    assert report.violation_fraction == 1.0
    assert report.max_lie_in_band > 0
    assert len(report.components) >= 1


def test_certify_bump_toggles_on_epsilon_volume(bump_certified, bump_rejected):
    assert bump_certified.certified
    assert not bump_rejected.certified
    # same analytic violating ball shows up in both reports
    for report in (bump_certified, bump_rejected):
        assert len(report.components) == 1
        comp = report.components[0]
        assert comp.volume == pytest.approx(ball_volume(), rel=0.1)
        rstar = bump_violation_radius(BUMP_K, BUMP_R, BUMP_A)
        bbox = np.asarray(comp.bounding_box)
        slack = 3 * max(report.net["widths"])
        for d in range(2):
            assert bbox[d, 0] == pytest.approx(BUMP_CENTER[d] - rstar, abs=slack)
            assert bbox[d, 1] == pytest.approx(BUMP_CENTER[d] + rstar, abs=slack)
    assert bump_rejected.violation_fraction > 0


def test_certify_budget_fallback_records_margins(bump_certified):
    assert bump_certified.margin_requested == 1e-6
    assert bump_certified.margin_used > 1e-6
    assert "budget" in bump_certified.note
    assert bump_certified.net["n_cells"] <= 250_000


def test_certify_epsilon_default_is_ten_cells():
    report = certify_band(linear_system(-1.0, 2), BOX2, a_const=0.05,
                          margin=0.2, max_cells=100_000)
    cell_volume = float(np.prod([w for w in report.net["widths"] if w > 0]))
    assert report.epsilon_volume == pytest.approx(10 * cell_volume, rel=1e-12)


def test_certify_quadratic_form_analytic_rate():
    # V = x'Px from the Lyapunov equation A'P + PA = -I gives
    # Vdot <= -(lmin(Q)/lmax(P)) V; half that rate must certify cleanly
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    P = scipy.linalg.solve_continuous_lyapunov(A.T, -np.eye(2))
    np.testing.assert_allclose(P, [[1.25, 0.25], [0.25, 0.25]], atol=1e-12)
    rate = 0.5 / np.linalg.eigvalsh(P).max()
    report = certify_band(quadratic_form_system(A, P), BOX2, a_const=rate,
                          margin=0.2, max_cells=200_000)
    assert report.certified
    assert report.components == []
    assert report.violation_fraction == 0.0


def test_certify_refinement_keeps_component_volume():
    kwargs = dict(a_const=BUMP_A, epsilon_volume=2 * ball_volume(),
                  margin=1e-6)
    coarse = certify_band(bump_system(), BOX2, max_cells=160_000, **kwargs)
    fine = certify_band(bump_system(), BOX2, max_cells=640_000, **kwargs)
    assert coarse.certified and fine.certified
    v0 = coarse.components[0].volume
    v1 = fine.components[0].volume
    assert v0 == pytest.approx(ball_volume(), rel=0.25)
    assert v1 == pytest.approx(ball_volume(), rel=0.1)
    assert v0 == pytest.approx(v1, rel=0.15)


def test_certify_reports_are_byte_reproducible(bump_certified):
    again = certify_band(bump_system(), BOX2, a_const=BUMP_A,
                         epsilon_volume=1.5 * ball_volume(),
                         margin=1e-6, max_cells=250_000)
    assert json.dumps(again.to_dict()) == json.dumps(bump_certified.to_dict())


def test_certify_report_round_trips(bump_certified):
    d = bump_certified.to_dict()
    restored = CertificationReport.from_dict(json.loads(json.dumps(d)))
    assert restored.to_dict() == json.loads(json.dumps(d))
    # the stored numbers re-check the certificate's own premises
    assert restored.max_lie_in_band < restored.a_const * restored.min_v_in_band
    assert all(c["volume"] <= restored.epsilon_volume
               for c in restored.components)
    assert restored.band[0] < restored.band[1]


def test_certify_refuses_high_dimensional_grid():
    box5 = np.tile([[-1.0, 1.0]], (5, 1))
    with pytest.raises(ValueError, match="slice|monte"):
        certify_band(linear_system(-1.0, 5), box5, a_const=0.05)


def test_certify_without_positive_levels():
    flat = ClosedLoopSystem(lambda x: np.zeros(len(np.atleast_2d(x))),
                            lambda x: x, 1e-3, np.zeros(2))
    report = certify_band(flat, BOX2, a_const=0.05)
    assert not report.certified
    assert "no positive V levels" in report.note


def test_certify_slice_labels_restricted_view():
    box5 = np.tile([[-1.0, 1.0]], (5, 1))
    report = certify_slice(linear_system(-1.0, 5), box5, (0, 2), np.zeros(5),
                           a_const=0.05, margin=0.2)
    assert report.certified
    assert report.mode == "slice"
    assert "NOT a certificate" in report.note
    counts = report.net["counts"]
    assert counts[1] == counts[3] == counts[4] == 1
    assert counts[0] > 1 and counts[2] > 1


def test_certify_slice_validates_inputs():
    box5 = np.tile([[-1.0, 1.0]], (5, 1))
    sys5 = linear_system(-1.0, 5)
    with pytest.raises(ValueError):
        certify_slice(sys5, box5, (1, 1), np.zeros(5))
    with pytest.raises(ValueError):
        certify_slice(sys5, box5, (0, 7), np.zeros(5))
    with pytest.raises(ValueError):
        certify_slice(sys5, box5, (0, 1), np.full(5, 2.0))


# -------------------------------------------------------------- monte carlo

def test_wilson_interval_edges():
    low, high = wilson_interval(0, 100)
    assert low == 0.0 and 0.0 < high < 0.1
    low, high = wilson_interval(100, 100)
    assert high == 1.0 and 0.9 < low < 1.0
    low, high = wilson_interval(50, 100)
    assert low < 0.5 < high
    assert (0.5 - low) == pytest.approx(high - 0.5, abs=1e-12)


def test_monte_carlo_stable_is_clean():
    out = monte_carlo_validate(linear_system(-1.0, 2), BOX2, 0.05, 2000,
                               np.random.default_rng(0))
    assert out["violation_fraction"] == 0.0
    assert out["wilson_low"] == 0.0
    assert out["mode"] == "monte-carlo"
    assert "NOT a certificate" in out["note"]


def test_monte_carlo_expanding_is_saturated():
    out = monte_carlo_validate(linear_system(+1.0, 2), BOX2, 0.05, 2000,
                               np.random.default_rng(0))
    assert out["violation_fraction"] == 1.0
    assert out["wilson_high"] == 1.0


def test_monte_carlo_interval_covers_analytic_fraction():
    rstar = bump_violation_radius(BUMP_K, BUMP_R, BUMP_A)
    true_fraction = np.pi * rstar * rstar / 4.0
    out = monte_carlo_validate(bump_system(), BOX2, BUMP_A, 40_000,
                               np.random.default_rng(0))
    assert out["wilson_low"] <= true_fraction <= out["wilson_high"]


def test_monte_carlo_band_restriction():
    # V in [0.2, 0.4] is an annulus of area pi*(0.4-0.2) fully inside the
    # box and fully containing the violating ball, so the in-band fraction
    # is ball_volume / annulus_area
    out = monte_carlo_validate(bump_system(), BOX2, BUMP_A, 200_000,
                               np.random.default_rng(1), band=(0.2, 0.4))
    true_fraction = ball_volume() / (np.pi * 0.2)
    assert out["wilson_low"] <= true_fraction <= out["wilson_high"]
    assert out["n_samples"] < 200_000
    assert out["band"] == [0.2, 0.4]


def test_monte_carlo_minimum_samples():
    with pytest.raises(ValueError, match="1000"):
        monte_carlo_validate(linear_system(-1.0, 2), BOX2, 0.05, 999,
                             np.random.default_rng(0))


# ---------------------------------------------------------------- landscape

def test_landscape_stable_all_grey():
    doc, svg = landscape_map(linear_system(-1.0, 2), BOX2, 0.05,
                             cells_per_axis=40)
    labels = np.asarray(doc["labels"])
    assert np.all(labels == 0)
    assert len(doc["contours"]) == 10
    assert svg.startswith("<svg") or svg.startswith("<?xml") or "<svg" in svg
    assert "#c8c8c8" in svg and "#d43d3d" not in svg
    json.dumps(doc)


def test_landscape_expanding_all_red():
    doc, svg = landscape_map(linear_system(+1.0, 2), BOX2, 0.05,
                             cells_per_axis=40)
    assert np.all(np.asarray(doc["labels"]) == 1)
    assert "#d43d3d" in svg and "#c8c8c8" not in svg


def test_landscape_bump_band_overlay():
    doc, svg = landscape_map(bump_system(), BOX2, BUMP_A, band=(0.1, 1.4))
    labels = np.asarray(doc["labels"])
    red = (labels == 1).sum()
    assert 10 <= red <= 60  # ~ ball area over cell area at 120 cells/axis
    assert (labels == 2).sum() > 0
    assert len(doc["band_boundary"]) == 2
    assert all(len(entry["lines"]) >= 1 for entry in doc["band_boundary"])
    assert "#1f4fd4" in svg


def test_landscape_validates_plane():
    with pytest.raises(ValueError):
        landscape_map(linear_system(-1.0, 2), BOX2, 0.05, axes=(0, 0))
    with pytest.raises(ValueError):
        landscape_map(linear_system(-1.0, 2), BOX2, 0.05,
                      fixed_point=np.array([5.0, 0.0]))


# ------------------------------------------------------------ policy bridge

def test_from_policy_matches_env_and_critic():
    env = ActionScaledEnv(PendulumEnv())
    rng = np.random.default_rng(3)
    policy = GaussianPolicy(MlpNetwork([2, 16, 1], rng=rng))
    critic = LyapunovCritic(MlpNetwork([2, 16, 1], rng=rng), env.equilibrium)
    system = ClosedLoopSystem.from_policy(env, policy, critic)

    states = rng.uniform(-1.0, 1.0, size=(64, 2))
    np.testing.assert_allclose(system.values(states),
                               critic.value_batch(states), rtol=0, atol=0)
    stepped = env.dynamics_step_batch(states, policy.mean(states), None)
    expected = (critic.value_batch(stepped) - critic.value_batch(states)) / env.dt
    np.testing.assert_allclose(system.lies(states), expected, rtol=0, atol=0)
    np.testing.assert_array_equal(system.origin, env.equilibrium)
    assert system.dt == env.dt


def test_system_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        ClosedLoopSystem(quadratic_value, lambda x: x, 0.0, np.zeros(2))
