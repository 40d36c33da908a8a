"""Sample-based certification of Lyapunov candidates.

The certificate checked here is the sampled Almost Lyapunov condition: on a
sublevel band B = {c1 <= V <= c2}, the Lie derivative of V along the
closed-loop flow may be >= -a*V only inside connected regions of volume at
most epsilon, and its in-band maximum must stay below a * min_B V. The
checks run on an eps-net of cell centers sized from an empirical Lipschitz
estimate of the Lie derivative; everything here is numerical evidence at a
stated resolution, never a formal proof, and the reports say so.
"""

import json
from dataclasses import dataclass, field

import numpy as np

_CHUNK = 65536
LABEL_SATISFYING = 0
LABEL_VIOLATING = 1
LABEL_OUTSIDE = 2


class ClosedLoopSystem:
    """Bundles a Lyapunov candidate with the closed-loop step map.

    value_fn maps (B, n) states to (B,) values; stepper maps (B, n) states
    one dt forward under the deployed deterministic controller.
    """

    def __init__(self, value_fn, stepper, dt, origin):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self._value_fn = value_fn
        self._stepper = stepper
        self.dt = float(dt)
        self.origin = np.asarray(origin, dtype=np.float64)

    @classmethod
    def from_policy(cls, env, policy, critic):
        """Certification view of a trained bundle: mean actions, no noise."""
        def stepper(states):
            return env.dynamics_step_batch(states, policy.mean(states), None)
        return cls(critic.value_batch, stepper, env.dt, env.equilibrium)

    def values(self, states):
        return np.asarray(self._value_fn(np.asarray(states, dtype=np.float64)),
                          dtype=np.float64)

    def lies(self, states):
        """Sampled Lie derivative at each state; non-finite where the step fails."""
        states = np.asarray(states, dtype=np.float64)
        with np.errstate(all="ignore"):
            stepped = np.asarray(self._stepper(states), dtype=np.float64)
            out = (self.values(stepped) - self.values(states)) / self.dt
        return out


def estimate_lipschitz(system, box, samples, rng, pair_distance=1e-3,
                       safety=2.0):
    """Empirical Lipschitz constant of the sampled Lie derivative.

    Max slope over random nearby pairs, times a safety factor. A heuristic:
    it is reported alongside any certificate and never claimed sound.
    Sample pairs are drawn one at a time so a larger budget extends, rather
    than reshuffles, a smaller one (the estimate is monotone in `samples`
    for a fixed seed).
    """
    box = np.asarray(box, dtype=np.float64)
    if samples < 100:
        raise ValueError("need at least 100 sample pairs")
    widths = box[:, 1] - box[:, 0]
    active = widths > 0
    if not active.any():
        raise ValueError("degenerate box: no dimension has positive width")
    base = np.empty((samples, box.shape[0]))
    partner = np.empty_like(base)
    for i in range(samples):
        x = rng.uniform(box[:, 0], box[:, 1])
        direction = rng.standard_normal(box.shape[0])
        direction[~active] = 0.0
        direction /= np.linalg.norm(direction)
        base[i] = x
        partner[i] = x + pair_distance * direction
    lie_base = system.lies(base)
    lie_partner = system.lies(partner)
    gaps = np.linalg.norm(partner - base, axis=1)
    with np.errstate(invalid="ignore"):
        slopes = np.abs(lie_partner - lie_base) / gaps
    slopes = slopes[np.isfinite(slopes)]
    if slopes.size == 0:
        raise FloatingPointError("no finite Lie samples in box")
    return float(safety * np.max(slopes))


class NetBudgetError(ValueError):
    """Requested margin needs more cells than the budget allows."""

    def __init__(self, requested_margin, feasible_margin, max_cells):
        self.requested_margin = requested_margin
        self.feasible_margin = feasible_margin
        self.max_cells = max_cells
        super().__init__(
            f"margin {requested_margin:g} needs more than {max_cells} cells; "
            f"feasible margin at this budget is {feasible_margin:g}")


class EpsNet:
    """Uniform cell grid over a box; zero-width dimensions hold one cell."""

    def __init__(self, box, counts):
        self.box = np.asarray(box, dtype=np.float64)
        self.counts = np.asarray(counts, dtype=np.int64)
        if np.any(self.counts < 1):
            raise ValueError("cell counts must be positive")
        self.lo = self.box[:, 0]
        self.hi = self.box[:, 1]
        self.widths = (self.hi - self.lo) / self.counts
        self.active = self.widths > 0
        self.n_cells = int(np.prod(self.counts))

    @property
    def diagonal(self):
        return float(np.sqrt(np.sum(self.widths[self.active] ** 2)))

    @property
    def cell_volume(self):
        return float(np.prod(self.widths[self.active]))

    def centers(self, flat_indices):
        multi = np.unravel_index(np.asarray(flat_indices, dtype=np.int64),
                                 self.counts)
        coords = np.empty((len(flat_indices), len(self.counts)))
        for d in range(len(self.counts)):
            coords[:, d] = self.lo[d] + (multi[d] + 0.5) * self.widths[d]
        return coords

    def to_dict(self):
        return {
            "box": self.box.tolist(),
            "counts": self.counts.tolist(),
            "widths": self.widths.tolist(),
            "n_cells": self.n_cells,
        }


def _cells_for_margin(box, lipschitz, margin, min_cells_per_dim):
    widths = box[:, 1] - box[:, 0]
    active = widths > 0
    n_eff = int(active.sum())
    # Cell diagonal d with lipschitz * d / 2 <= margin; uniform per-dim width.
    h = 2.0 * margin / (lipschitz * np.sqrt(n_eff))
    counts = np.ones(len(widths), dtype=np.int64)
    counts[active] = np.maximum(np.ceil(widths[active] / h).astype(np.int64),
                                min_cells_per_dim)
    return counts


def build_eps_net(box, lipschitz, margin, max_cells=1_000_000,
                  min_cells_per_dim=1):
    """Grid sized so the Lie estimate varies at most `margin` within a cell."""
    box = np.asarray(box, dtype=np.float64)
    if lipschitz <= 0:
        raise ValueError("lipschitz must be positive")
    if margin <= 0:
        raise ValueError("margin must be positive")
    if not np.any(box[:, 1] - box[:, 0] > 0):
        raise ValueError("degenerate box: no dimension has positive width")
    counts = _cells_for_margin(box, lipschitz, margin, min_cells_per_dim)
    if np.prod(counts.astype(np.float64)) > max_cells:
        lo_m, hi_m = margin, margin
        while np.prod(_cells_for_margin(box, lipschitz, hi_m,
                                        min_cells_per_dim).astype(np.float64)) > max_cells:
            hi_m *= 2.0
            if hi_m > 1e12:
                raise NetBudgetError(margin, np.inf, max_cells)
        for _ in range(60):
            mid = 0.5 * (lo_m + hi_m)
            if np.prod(_cells_for_margin(box, lipschitz, mid,
                                         min_cells_per_dim).astype(np.float64)) > max_cells:
                lo_m = mid
            else:
                hi_m = mid
        raise NetBudgetError(margin, hi_m, max_cells)
    return EpsNet(box, counts)


@dataclass
class CellClassification:
    net: EpsNet
    values: np.ndarray
    lies: np.ndarray
    labels: np.ndarray
    band: tuple
    a_const: float
    positivity_ok: bool
    origin_value: float

    @property
    def in_band(self):
        return self.labels != LABEL_OUTSIDE

    @property
    def violating(self):
        return self.labels == LABEL_VIOLATING


def _evaluate_net(system, net):
    values = np.empty(net.n_cells)
    lies = np.empty(net.n_cells)
    for start in range(0, net.n_cells, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, net.n_cells))
        centers = net.centers(idx)
        values[idx] = system.values(centers)
        lies[idx] = system.lies(centers)
    return values, lies


def _positivity(system, values):
    v_nonneg = bool(np.all(values >= -1e-6))
    origin_value = float(system.values(system.origin.reshape(1, -1))[0])
    origin_small = origin_value <= 1e-3 * float(np.max(values))
    return v_nonneg and origin_small, origin_value


def _label(values, lies, a_const, band):
    c1, c2 = band
    in_band = (values >= c1) & (values <= c2)
    bad = ~np.isfinite(lies) | ~np.isfinite(values)
    violating = in_band & (bad | (lies >= -a_const * values))
    labels = np.full(len(values), LABEL_OUTSIDE, dtype=np.int8)
    labels[in_band] = LABEL_SATISFYING
    labels[violating] = LABEL_VIOLATING
    return labels


def classify_cells(system, net, a_const, band):
    """V and lie at every cell center, labeled against the band.

    A failed step (non-finite lie) marks its cell violating. Also records
    the global nonnegativity check: V >= 0 at all centers and V(origin)
    small relative to the max.
    """
    c1, c2 = band
    if not c1 < c2:
        raise ValueError("band must satisfy c1 < c2")
    if a_const <= 0:
        raise ValueError("a_const must be positive")
    values, lies = _evaluate_net(system, net)
    positivity_ok, origin_value = _positivity(system, values)
    labels = _label(values, lies, a_const, band)
    return CellClassification(net, values, lies, labels, (float(c1), float(c2)),
                              float(a_const), positivity_ok, origin_value)


@dataclass
class Component:
    cells: int
    volume: float
    bounding_box: np.ndarray

    def to_dict(self):
        return {"cells": self.cells, "volume": self.volume,
                "bounding_box": np.asarray(self.bounding_box).tolist()}


def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def _components_from_mask(mask, net):
    flat = np.flatnonzero(mask)
    if flat.size == 0:
        return []
    rank = {int(f): k for k, f in enumerate(flat)}
    parent = list(range(flat.size))
    multi = np.unravel_index(flat, net.counts)
    strides = np.ones(len(net.counts), dtype=np.int64)
    for d in range(len(net.counts) - 2, -1, -1):
        strides[d] = strides[d + 1] * net.counts[d + 1]
    for d in range(len(net.counts)):
        if net.counts[d] == 1:
            continue
        movable = multi[d] < net.counts[d] - 1
        neighbors = flat[movable] + strides[d]
        for src, dst in zip(flat[movable], neighbors):
            j = rank.get(int(dst))
            if j is not None:
                ri, rj = _find(parent, rank[int(src)]), _find(parent, j)
                if ri != rj:
                    parent[ri] = rj
    groups = {}
    for k in range(flat.size):
        groups.setdefault(_find(parent, k), []).append(k)
    cell_vol = net.cell_volume
    comps = []
    for members in groups.values():
        centers = net.centers(flat[members])
        half = 0.5 * net.widths
        bbox = np.stack([centers.min(axis=0) - half,
                         centers.max(axis=0) + half], axis=1)
        comps.append(Component(len(members), len(members) * cell_vol, bbox))
    comps.sort(key=lambda c: -c.cells)
    return comps


def connected_components(classification):
    """Connected regions of violating cells under face adjacency."""
    return _components_from_mask(classification.violating, classification.net)


@dataclass
class CertificationReport:
    certified: bool
    band: tuple
    a_const: float
    epsilon_volume: float
    components: list
    violation_fraction: float
    positivity_ok: bool
    min_v_in_band: float
    max_lie_in_band: float
    mode: str
    lipschitz: float = 0.0
    margin_requested: float = 0.0
    margin_used: float = 0.0
    net: dict = field(default_factory=dict)
    note: str = ""
    bands_tried: int = 0

    def to_dict(self):
        d = dict(self.__dict__)
        d["band"] = list(self.band)
        d["components"] = [c.to_dict() if isinstance(c, Component) else c
                           for c in self.components]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["band"] = tuple(d["band"])
        return cls(**d)


def _band_candidates(values, levels):
    """Nested candidate bands: c1 climbs from the 5th percentile while c2
    descends from the 95th, so every candidate contains the mid-level set
    and the first certified one is the widest."""
    finite = values[np.isfinite(values)]
    positive = finite[finite > 0]
    if positive.size == 0:
        return []
    p5, p95 = np.percentile(positive, [5, 95])
    p5 = max(p5, 1e-9 * p95)
    if not p5 < p95:
        return []
    c1_ladder = np.geomspace(p5, p95, levels)
    c2_ladder = np.geomspace(p95, p5, levels)
    return [(float(c1), float(c2))
            for c1, c2 in zip(c1_ladder, c2_ladder) if c1 < c2 * (1 - 1e-9)]


def certify_band(system, box, a_const=0.01, epsilon_volume=None, margin=None,
                 max_cells=1_000_000, levels=20, lipschitz_samples=1000,
                 min_cells_per_dim=16, seed=0, mode="full-grid"):
    """Band search over nested sublevel bands; widest certified one wins.

    For each candidate band the three premise checks run: (i) every
    violating component's volume <= epsilon_volume, (ii) max in-band lie
    < a_const * min in-band V, (iii) positivity. If no candidate passes,
    the report carries the diagnostics of the closest-failing band.
    If the resolution implied by `margin` exceeds the cell budget, the
    feasible margin is used instead and both are reported.
    """
    box = np.asarray(box, dtype=np.float64)
    active = box[:, 1] - box[:, 0] > 0
    if mode == "full-grid" and active.sum() > 4:
        raise ValueError(
            "full-grid certification refused above 4 active dimensions; "
            "use a plane slice or monte_carlo_validate (both non-certifying)")
    rng = np.random.default_rng(seed)
    lipschitz = estimate_lipschitz(system, box, lipschitz_samples, rng)
    lipschitz = max(lipschitz, 1e-9)
    probe = rng.uniform(box[:, 0], box[:, 1], size=(512, box.shape[0]))
    probe_v = system.values(probe)
    pos_v = probe_v[np.isfinite(probe_v) & (probe_v > 0)]
    v_scale = float(np.percentile(pos_v, 5)) if pos_v.size else 1.0
    margin_requested = margin if margin is not None else 0.05 * a_const * max(v_scale, 1e-9)
    note = ""
    try:
        net = build_eps_net(box, lipschitz, margin_requested, max_cells,
                            min_cells_per_dim)
        margin_used = margin_requested
    except NetBudgetError as err:
        margin_used = err.feasible_margin
        net = build_eps_net(box, lipschitz, margin_used, max_cells,
                            min_cells_per_dim)
        note = (f"requested margin {margin_requested:g} exceeded the "
                f"{max_cells}-cell budget; certified at margin {margin_used:g}")
    if epsilon_volume is None:
        epsilon_volume = 10.0 * net.cell_volume
    if mode != "full-grid":
        note = (note + "; " if note else "") + \
            f"mode={mode}: restricted view, NOT a certificate for the full state space"

    values, lies = _evaluate_net(system, net)
    positivity_ok, origin_value = _positivity(system, values)
    finite_lies = np.isfinite(lies)
    candidates = _band_candidates(values, levels)

    base = dict(a_const=float(a_const), epsilon_volume=float(epsilon_volume),
                positivity_ok=positivity_ok, mode=mode, lipschitz=lipschitz,
                margin_requested=float(margin_requested),
                margin_used=float(margin_used), net=net.to_dict(), note=note,
                bands_tried=len(candidates))
    if not candidates:
        return CertificationReport(
            certified=False, band=(0.0, 0.0), components=[],
            violation_fraction=1.0, min_v_in_band=float("nan"),
            max_lie_in_band=float("nan"),
            **dict(base, note=(note + "; " if note else "") +
                   "no positive V levels to band"))

    best = None  # (failed_checks, violation_fraction, -width, band, stats)
    for c1, c2 in candidates:
        in_band = (values >= c1) & (values <= c2)
        n_in = int(in_band.sum())
        if n_in == 0:
            continue
        min_v = float(values[in_band].min())
        band_finite = in_band & finite_lies
        max_lie = float(lies[band_finite].max()) if band_finite.any() else float("inf")
        viol = in_band & (~finite_lies | (lies >= -a_const * values))
        frac = float(viol.sum()) / n_in
        lie_ok = max_lie < a_const * min_v
        comps = None
        vol_ok = False
        if lie_ok and positivity_ok:
            comps = _components_from_mask(viol, net)
            vol_ok = all(c.volume <= epsilon_volume for c in comps)
            if vol_ok:
                return CertificationReport(
                    certified=True, band=(c1, c2), components=comps,
                    violation_fraction=frac, min_v_in_band=min_v,
                    max_lie_in_band=max_lie, **base)
        failed = (not lie_ok) + (not positivity_ok) + (not vol_ok)
        key = (failed, frac, -(c2 - c1))
        if best is None or key < best[0]:
            best = (key, (c1, c2), comps, frac, min_v, max_lie)
    if best is None:
        return CertificationReport(
            certified=False, band=(0.0, 0.0), components=[],
            violation_fraction=1.0, min_v_in_band=float("nan"),
            max_lie_in_band=float("nan"),
            **dict(base, note=(note + "; " if note else "") + "all bands empty"))
    _, band, comps, frac, min_v, max_lie = best
    if comps is None:
        in_band = (values >= band[0]) & (values <= band[1])
        viol = in_band & (~finite_lies | (lies >= -a_const * values))
        comps = _components_from_mask(viol, net)
    return CertificationReport(
        certified=False, band=band, components=comps, violation_fraction=frac,
        min_v_in_band=min_v, max_lie_in_band=max_lie, **base)


def certify_slice(system, box, axes, fixed_point, **kwargs):
    """Certification machinery on a 2-D plane through `fixed_point`.

    The result is labeled mode="slice": evidence about the plane only,
    never a certificate for the full space.
    """
    box = np.asarray(box, dtype=np.float64)
    fixed = np.asarray(fixed_point, dtype=np.float64)
    if len(axes) != 2 or axes[0] == axes[1]:
        raise ValueError("axes must name two distinct dimensions")
    for ax in axes:
        if not 0 <= ax < box.shape[0]:
            raise ValueError("axis outside state dimensions")
    if np.any(fixed < box[:, 0] - 1e-12) or np.any(fixed > box[:, 1] + 1e-12):
        raise ValueError("fixed point outside the box")
    sliced = np.stack([fixed, fixed], axis=1).astype(np.float64)
    for ax in axes:
        sliced[ax] = box[ax]
    kwargs.setdefault("mode", "slice")
    return certify_band(system, sliced, **kwargs)


def wilson_interval(successes, n, z=1.96):
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return float(low), float(high)


def monte_carlo_validate(system, box, a_const, n_samples, rng, band=None):
    """Fraction of uniform samples violating lie < -a*V, with a Wilson 95%
    interval. With a band, only samples whose V lands inside it count.
    A screening statistic only: mode says monte-carlo and the note says
    non-certifying."""
    box = np.asarray(box, dtype=np.float64)
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    x = rng.uniform(box[:, 0], box[:, 1], size=(int(n_samples), box.shape[0]))
    values = system.values(x)
    lies = system.lies(x)
    keep = np.ones(len(x), dtype=bool)
    if band is not None:
        keep = (values >= band[0]) & (values <= band[1])
        if not keep.any():
            raise ValueError("no samples landed inside the band")
    bad = ~np.isfinite(lies) | ~np.isfinite(values)
    viol = keep & (bad | (lies >= -a_const * values))
    n_kept = int(keep.sum())
    k = int(viol.sum())
    low, high = wilson_interval(k, n_kept)
    return {
        "violation_fraction": k / n_kept,
        "wilson_low": low,
        "wilson_high": high,
        "n_samples": n_kept,
        "band": None if band is None else [float(band[0]), float(band[1])],
        "a_const": float(a_const),
        "mode": "monte-carlo",
        "note": "sampling evidence only, NOT a certificate",
    }


def _contour_lines(grid, levels, x_coords, y_coords):
    from skimage import measure
    out = []
    for level in levels:
        lines = []
        for contour in measure.find_contours(grid, level):
            # contour rows are (i, j) fractional grid indices
            xs = np.interp(contour[:, 0], np.arange(len(x_coords)), x_coords)
            ys = np.interp(contour[:, 1], np.arange(len(y_coords)), y_coords)
            lines.append(np.stack([xs, ys], axis=1).tolist())
        out.append({"level": float(level), "lines": lines})
    return out


def landscape_map(system, box, a_const, axes=(0, 1), fixed_point=None,
                  band=None, cells_per_axis=120):
    """Per-cell (V, lie, label) grid on a 2-D plane plus contour polylines.

    Returns (json_dict, svg_text). Grey cells satisfy the band-relative
    condition, red cells violate it, black polylines trace ten V levels,
    blue ones the certified band boundary when a band is given.
    """
    box = np.asarray(box, dtype=np.float64)
    n = box.shape[0]
    if fixed_point is None:
        fixed_point = np.zeros(n)
    fixed_point = np.asarray(fixed_point, dtype=np.float64)
    if len(axes) != 2 or axes[0] == axes[1]:
        raise ValueError("axes must name two distinct dimensions")
    if np.any(fixed_point < box[:, 0] - 1e-12) or np.any(fixed_point > box[:, 1] + 1e-12):
        raise ValueError("plane point outside the domain box")
    ax0, ax1 = axes
    if box[ax0, 1] <= box[ax0, 0] or box[ax1, 1] <= box[ax1, 0]:
        raise ValueError("plane axes must have positive width")
    k = cells_per_axis
    w0 = (box[ax0, 1] - box[ax0, 0]) / k
    w1 = (box[ax1, 1] - box[ax1, 0]) / k
    x_coords = box[ax0, 0] + (np.arange(k) + 0.5) * w0
    y_coords = box[ax1, 0] + (np.arange(k) + 0.5) * w1
    xx, yy = np.meshgrid(x_coords, y_coords, indexing="ij")
    pts = np.tile(fixed_point, (k * k, 1))
    pts[:, ax0] = xx.ravel()
    pts[:, ax1] = yy.ravel()
    values = system.values(pts).reshape(k, k)
    lies = system.lies(pts).reshape(k, k)
    eff_band = band if band is not None else (-np.inf, np.inf)
    labels = _label(values.ravel(), lies.ravel(), a_const, eff_band).reshape(k, k)

    finite_v = values[np.isfinite(values)]
    vmin, vmax = float(finite_v.min()), float(finite_v.max())
    if vmax > vmin:
        levels = np.linspace(vmin, vmax, 12)[1:-1]
    else:
        levels = []
    contours = _contour_lines(values, levels, x_coords, y_coords)
    band_boundary = []
    if band is not None:
        band_boundary = _contour_lines(values, [band[0], band[1]],
                                       x_coords, y_coords)
    doc = {
        "axes": [int(ax0), int(ax1)],
        "box": box[[ax0, ax1]].tolist(),
        "fixed_point": fixed_point.tolist(),
        "counts": [k, k],
        "a_const": float(a_const),
        "band": None if band is None else [float(band[0]), float(band[1])],
        "values": values.tolist(),
        "lies": np.where(np.isfinite(lies), lies, np.nan).tolist(),
        "labels": labels.tolist(),
        "contours": contours,
        "band_boundary": band_boundary,
    }
    svg = _render_svg(doc, box[[ax0, ax1]], k)
    return doc, svg


def _render_svg(doc, plane_box, k, size=640):
    lo = plane_box[:, 0]
    span = plane_box[:, 1] - plane_box[:, 0]

    def px(x, y):
        return ((x - lo[0]) / span[0] * size,
                size - (y - lo[1]) / span[1] * size)

    cw = size / k
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    labels = doc["labels"]
    for i in range(k):
        col = labels[i]
        j = 0
        while j < k:
            lab = col[j]
            run = j
            while run < k and col[run] == lab:
                run += 1
            if lab != LABEL_OUTSIDE:
                color = "#c8c8c8" if lab == LABEL_SATISFYING else "#d43d3d"
                x0 = i * cw
                y0 = size - run * cw
                parts.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{cw:.2f}" '
                             f'height="{(run - j) * cw:.2f}" fill="{color}"/>')
            j = run
    for group, color, width in ((doc["contours"], "black", 1.0),
                                (doc["band_boundary"], "#1f4fd4", 2.5)):
        for entry in group:
            for line in entry["lines"]:
                pairs = " ".join(f"{px(x, y)[0]:.2f},{px(x, y)[1]:.2f}"
                                 for x, y in line)
                parts.append(f'<polyline points="{pairs}" fill="none" '
                             f'stroke="{color}" stroke-width="{width}"/>')
    parts.append("</svg>")
    return "\n".join(parts)
