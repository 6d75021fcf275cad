"""Discrete integral currents carried by polygonal loops and ruled sweeps.

A Loop is a closed polygonal 1-current (orientation = node order, integer
multiplicity).  Moving a loop over a pseudo-time interval produces a
SweptSurface: a space-time 2-current triangulated from ruled legs.  Each leg
linearly interpolates the loop nodes between two time planes; every edge quad
is split along the diagonal from its earlier-time, lower-index vertex, so
triangulations are deterministic and boundary traces are exact.

Orientation convention: the trace of a surface on its initial time plane is
minus the initial loop, the trace on the final plane is plus the final loop,
and interior edges cancel pairwise.

Variation (swept spatial area) and mass are per-triangle reductions; clipping
to a sub-interval splits triangles at the cut planes by exact linear
interpolation of the vertices in time, so no quadrature error enters.
"""

from dataclasses import dataclass, field

import numpy as np

from .multivec import wedge4


class GeometryError(ValueError):
    pass


class CompositionError(ValueError):
    pass


@dataclass
class Loop:
    """Closed polygonal loop: nodes (n, 3), implicit edge from last to first."""

    nodes: np.ndarray
    multiplicity: int = 1
    burgers_index: int = 0

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3 or self.nodes.shape[0] < 3:
            raise GeometryError("Loop needs at least 3 nodes of dimension 3")
        if not np.all(np.isfinite(self.nodes)):
            raise GeometryError("Loop nodes must be finite")
        rolled = np.roll(self.nodes, -1, axis=0)
        if np.any(np.all(self.nodes == rolled, axis=1)):
            raise GeometryError("consecutive loop nodes must be distinct")
        if int(self.multiplicity) < 1:
            raise GeometryError("multiplicity must be a positive integer")
        self.multiplicity = int(self.multiplicity)
        self.burgers_index = int(self.burgers_index)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def edges(self):
        """Edge vectors node[i+1] - node[i], cyclic."""
        return np.roll(self.nodes, -1, axis=0) - self.nodes

    def reversed(self):
        """Orientation reversal (the -b member of a Burgers pair)."""
        return Loop(self.nodes[::-1].copy(), self.multiplicity, self.burgers_index)


@dataclass
class DislocationSystem:
    """All loops of a configuration; one stored loop set per Burgers
    representative, the -b members being implicit via orientation reversal."""

    loops: list

    def __post_init__(self):
        self.loops = list(self.loops)

    def __iter__(self):
        return iter(self.loops)

    def __len__(self):
        return len(self.loops)


def loop_mass(loop: Loop) -> float:
    """Polyline length times multiplicity."""
    return float(np.linalg.norm(loop.edges(), axis=1).sum()) * loop.multiplicity


def system_mass(system: DislocationSystem) -> float:
    """Joint mass: the half-sum over +-b pairs equals one term per representative."""
    return sum(loop_mass(lp) for lp in system)


@dataclass
class RuledLeg:
    """Linear-in-time interpolation of loop nodes between two time planes."""

    t0: float
    t1: float
    nodes0: np.ndarray
    nodes1: np.ndarray

    def __post_init__(self):
        self.nodes0 = np.asarray(self.nodes0, dtype=float)
        self.nodes1 = np.asarray(self.nodes1, dtype=float)
        if not self.t1 > self.t0:
            raise GeometryError("leg needs t1 > t0")
        if self.nodes0.shape != self.nodes1.shape:
            raise GeometryError("leg endpoint node counts differ")

    def nodes_at(self, t: float) -> np.ndarray:
        s = (t - self.t0) / (self.t1 - self.t0)
        return (1.0 - s) * self.nodes0 + s * self.nodes1

    def velocities(self) -> np.ndarray:
        return (self.nodes1 - self.nodes0) / (self.t1 - self.t0)


def _leg_triangles(leg: RuledLeg) -> np.ndarray:
    """Two oriented triangles per edge quad, diagonal from the earlier-time
    lower-index vertex.  Quad cycle A -> D -> C -> B puts -initial on the
    bottom trace and +final on the top trace."""
    n = leg.nodes0.shape[0]
    a = np.empty((n, 4))
    a[:, 0] = leg.t0
    a[:, 1:] = leg.nodes0
    d = np.empty((n, 4))
    d[:, 0] = leg.t1
    d[:, 1:] = leg.nodes1
    b = np.roll(a, -1, axis=0)
    c = np.roll(d, -1, axis=0)
    tris = np.empty((2 * n, 3, 4))
    tris[0::2, 0] = a
    tris[0::2, 1] = d
    tris[0::2, 2] = c
    tris[1::2, 0] = a
    tris[1::2, 1] = c
    tris[1::2, 2] = b
    return tris


@dataclass
class PiecewiseLinearMap:
    """Strictly increasing piecewise-linear time map given by breakpoints."""

    t_in: np.ndarray
    t_out: np.ndarray

    def __post_init__(self):
        self.t_in = np.asarray(self.t_in, dtype=float)
        self.t_out = np.asarray(self.t_out, dtype=float)
        if self.t_in.shape != self.t_out.shape or self.t_in.ndim != 1 or self.t_in.size < 2:
            raise GeometryError("map needs matching 1-d breakpoint arrays")
        if np.any(np.diff(self.t_in) <= 0) or np.any(np.diff(self.t_out) <= 0):
            raise GeometryError("time map must be strictly increasing")

    def __call__(self, t):
        return np.interp(t, self.t_in, self.t_out)

    def inverse(self):
        return PiecewiseLinearMap(self.t_out.copy(), self.t_in.copy())

    def slope_at(self, t: float) -> float:
        j = int(np.clip(np.searchsorted(self.t_in, t, side="right") - 1,
                        0, self.t_in.size - 2))
        return ((self.t_out[j + 1] - self.t_out[j])
                / (self.t_in[j + 1] - self.t_in[j]))

    @classmethod
    def identity(cls, interval):
        return cls(np.asarray(interval, dtype=float), np.asarray(interval, dtype=float))

    @classmethod
    def affine(cls, src, dst):
        return cls(np.asarray(src, dtype=float), np.asarray(dst, dtype=float))

    @classmethod
    def from_function(cls, f, interval, n=65):
        t = np.linspace(interval[0], interval[1], n)
        return cls(t, np.asarray([f(x) for x in t], dtype=float))


def compose_pl(outer: PiecewiseLinearMap, inner: PiecewiseLinearMap) -> PiecewiseLinearMap:
    """outer after inner, with breakpoints at every kink of either map."""
    lo, hi = inner.t_out[0], inner.t_out[-1]
    if outer.t_in[0] > lo or outer.t_in[-1] < hi:
        raise GeometryError("outer map does not cover the inner map's range")
    mids = outer.t_in[(outer.t_in > lo) & (outer.t_in < hi)]
    pts = np.union1d(inner.t_in, inner.inverse()(mids))
    return PiecewiseLinearMap(pts, outer(inner(pts)))


def _warp_triangles(tris: np.ndarray, warp: PiecewiseLinearMap) -> np.ndarray:
    """Split flat triangles at the warp's time breakpoints and remap vertex
    times piece by piece.  The map is affine on each piece, so every split
    piece stays flat and its spatial shadow is untouched: variation and slice
    masses of the warped surface are exactly those of the original."""
    out = []
    brks = warp.t_in
    for tri in tris:
        tmin = tri[:, 0].min()
        tmax = tri[:, 0].max()
        j0 = int(np.clip(np.searchsorted(brks, tmin, side="right") - 1,
                         0, brks.size - 2))
        j1 = int(np.clip(np.searchsorted(brks, tmax, side="left"),
                         1, brks.size - 1))
        for j in range(j0, j1):
            a, b = brks[j], brks[j + 1]
            poly = [tri[0].copy(), tri[1].copy(), tri[2].copy()]
            if tmin < a:
                poly = _clip_poly_halfspace(poly, +1.0, a)
            if len(poly) >= 3 and tmax > b:
                poly = _clip_poly_halfspace(poly, -1.0, b)
            if len(poly) < 3:
                continue
            for v in poly:
                v[0] = warp(v[0])
            for i in range(1, len(poly) - 1):
                out.append([poly[0], poly[i], poly[i + 1]])
    if not out:
        return np.zeros((0, 3, 4))
    return np.asarray(out)


@dataclass
class SweptSurface:
    """Space-time 2-current swept by one loop; piecewise-ruled in intrinsic
    time, optionally re-parameterized by a piecewise-linear warp.

    The warp relabels time only: triangles are split at its breakpoints and
    remapped exactly, slices pull back through it, and all spatial geometry
    (loops, variation, slice masses) is invariant under it."""

    legs: list
    multiplicity: int = 1
    burgers_index: int = 0
    warp: PiecewiseLinearMap = None
    triangles: np.ndarray = field(init=False)
    base_triangles: np.ndarray = field(init=False)

    def __post_init__(self):
        self.legs = list(self.legs)
        if not self.legs:
            raise GeometryError("surface needs at least one leg")
        for l0, l1 in zip(self.legs, self.legs[1:]):
            if l1.t0 != l0.t1:
                raise GeometryError("legs must abut in time")
        self.multiplicity = int(self.multiplicity)
        base = np.concatenate([_leg_triangles(l) for l in self.legs])
        self.base_triangles = base
        if self.warp is not None:
            span = (self.legs[0].t0, self.legs[-1].t1)
            if self.warp.t_in[0] > span[0] or self.warp.t_in[-1] < span[1]:
                raise GeometryError("warp does not cover the surface interval")
            self.triangles = _warp_triangles(base, self.warp)
        else:
            self.triangles = base

    @property
    def interval(self):
        lo, hi = self.legs[0].t0, self.legs[-1].t1
        if self.warp is not None:
            return (float(self.warp(lo)), float(self.warp(hi)))
        return (lo, hi)

    def initial_loop(self) -> Loop:
        return Loop(self.legs[0].nodes0.copy(), self.multiplicity, self.burgers_index)

    def final_loop(self) -> Loop:
        return Loop(self.legs[-1].nodes1.copy(), self.multiplicity, self.burgers_index)

    def pullback_time(self, t: float) -> float:
        return float(self.warp.inverse()(t)) if self.warp is not None else t

    def warp_slope(self, t_intrinsic: float) -> float:
        return self.warp.slope_at(t_intrinsic) if self.warp is not None else 1.0

    def leg_at(self, t: float) -> RuledLeg:
        """Leg containing the presented time t (after warp pullback)."""
        ti = self.pullback_time(t)
        for leg in self.legs:
            if leg.t0 <= ti <= leg.t1:
                return leg
        raise GeometryError(f"time {t} outside surface interval {self.interval}")


@dataclass
class SlipTrajectory:
    """One SweptSurface per loop of the system it acts on."""

    surfaces: list

    def __post_init__(self):
        self.surfaces = list(self.surfaces)
        if not self.surfaces:
            raise GeometryError("trajectory needs at least one surface")
        iv = self.surfaces[0].interval
        for s in self.surfaces[1:]:
            if s.interval != iv:
                raise GeometryError("trajectory surfaces must share one interval")

    @property
    def interval(self):
        return self.surfaces[0].interval

    def initial_system(self) -> DislocationSystem:
        return DislocationSystem([s.initial_loop() for s in self.surfaces])

    def final_system(self) -> DislocationSystem:
        return DislocationSystem([s.final_loop() for s in self.surfaces])


# ---------------------------------------------------------------------------
# sweeping


def _check_box(points, domain):
    lo, hi = domain
    if np.any(points < lo) or np.any(points > hi):
        raise GeometryError("swept loop leaves the closed domain")


def sweep(loop: Loop, displacement, interval=(0.0, 1.0), domain=None) -> SweptSurface:
    """Ruled sweep of a loop under per-node displacements over an interval.

    The motion is nodewise linear in time, so with a convex domain the
    endpoint check covers every intermediate position.
    """
    displacement = np.asarray(displacement, dtype=float)
    if displacement.shape != loop.nodes.shape:
        raise GeometryError("displacement list must match the node count")
    nodes1 = loop.nodes + displacement
    if domain is not None:
        _check_box(loop.nodes, domain)
        _check_box(nodes1, domain)
    leg = RuledLeg(interval[0], interval[1], loop.nodes.copy(), nodes1)
    return SweptSurface([leg], loop.multiplicity, loop.burgers_index)


def sweep_system(system: DislocationSystem, displacements, interval=(0.0, 1.0),
                 domain=None) -> SlipTrajectory:
    if len(displacements) != len(system.loops):
        raise GeometryError("one displacement field per loop required")
    return SlipTrajectory([sweep(lp, d, interval, domain)
                           for lp, d in zip(system.loops, displacements)])


def neutral(system: DislocationSystem, interval=(0.0, 1.0)) -> SlipTrajectory:
    """Static sweep of every loop: zero variation, identity forward operators."""
    return sweep_system(system, [np.zeros_like(lp.nodes) for lp in system.loops],
                        interval)


# ---------------------------------------------------------------------------
# per-triangle reductions with exact interval clipping


def _tri_bivectors(tris: np.ndarray) -> np.ndarray:
    """Orienting 2-vectors (6 components) of a (ntri, 3, 4) triangle batch."""
    u = tris[:, 1] - tris[:, 0]
    w = tris[:, 2] - tris[:, 0]
    out = np.empty((tris.shape[0], 6))
    out[:, 0] = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    out[:, 1] = u[:, 0] * w[:, 2] - u[:, 2] * w[:, 0]
    out[:, 2] = u[:, 0] * w[:, 3] - u[:, 3] * w[:, 0]
    out[:, 3] = u[:, 2] * w[:, 3] - u[:, 3] * w[:, 2]
    out[:, 4] = u[:, 3] * w[:, 1] - u[:, 1] * w[:, 3]
    out[:, 5] = u[:, 1] * w[:, 2] - u[:, 2] * w[:, 1]
    return out


def _clip_poly_halfspace(poly, sgn, c):
    """Sutherland-Hodgman clip of a planar space-time polygon to sgn*(t-c) >= 0."""
    out = []
    k = len(poly)
    for i in range(k):
        v0 = poly[i]
        v1 = poly[(i + 1) % k]
        f0 = sgn * (v0[0] - c)
        f1 = sgn * (v1[0] - c)
        if f0 >= 0.0:
            out.append(v0)
            if f1 < 0.0:
                s = f0 / (f0 - f1)
                out.append(v0 + s * (v1 - v0))
        elif f1 > 0.0:
            s = f0 / (f0 - f1)
            out.append(v0 + s * (v1 - v0))
    return out


def _poly_bivector(poly):
    """2-vector of a planar convex polygon (norm = twice its area)."""
    acc = np.zeros(6)
    for i in range(1, len(poly) - 1):
        acc += wedge4(poly[i] - poly[0], poly[i + 1] - poly[0])
    return acc


def _poly_centroid(poly):
    """Area-weighted centroid of a planar convex space-time polygon."""
    acc = np.zeros(4)
    wsum = 0.0
    for i in range(1, len(poly) - 1):
        w = np.linalg.norm(wedge4(poly[i] - poly[0], poly[i + 1] - poly[0]))
        acc += w * (poly[0] + poly[i] + poly[i + 1]) / 3.0
        wsum += w
    if wsum == 0.0:
        return np.mean(np.asarray(poly), axis=0)
    return acc / wsum


def clipped_triangle_bivectors(tris: np.ndarray, interval, with_centroids=False):
    """Per-triangle 2-vectors (and optionally centroids) of the pieces inside
    a time interval."""
    a, b = interval
    t = tris[:, :, 0]
    tmin = t.min(axis=1)
    tmax = t.max(axis=1)
    inside = (tmin >= a) & (tmax <= b)
    out = np.zeros((tris.shape[0], 6))
    if np.any(inside):
        out[inside] = _tri_bivectors(tris[inside])
    cents = tris.mean(axis=1) if with_centroids else None
    cross = ~inside & (tmax > a) & (tmin < b)
    for i in np.nonzero(cross)[0]:
        poly = [tris[i, j].copy() for j in range(3)]
        poly = _clip_poly_halfspace(poly, +1.0, a)
        if len(poly) >= 3:
            poly = _clip_poly_halfspace(poly, -1.0, b)
        if len(poly) >= 3:
            out[i] = _poly_bivector(poly)
            if with_centroids:
                cents[i] = _poly_centroid(poly)
    if with_centroids:
        outside = ~inside & ~cross
        if np.any(outside):
            out[outside] = 0.0
        return out, cents
    return out


def variation(surface: SweptSurface, interval=None) -> float:
    """Swept spatial area: integral of |p(orienting 2-vector)| over the surface."""
    if interval is None:
        biv = _tri_bivectors(surface.triangles)
    else:
        biv = clipped_triangle_bivectors(surface.triangles, interval)
    proj = np.linalg.norm(biv[:, 3:6], axis=1)
    return 0.5 * float(proj.sum()) * surface.multiplicity


def surface_mass(surface: SweptSurface, interval=None) -> float:
    """Space-time area (R^{1+3} metric) times multiplicity."""
    if interval is None:
        biv = _tri_bivectors(surface.triangles)
    else:
        biv = clipped_triangle_bivectors(surface.triangles, interval)
    return 0.5 * float(np.linalg.norm(biv, axis=1).sum()) * surface.multiplicity


def trajectory_variation(traj: SlipTrajectory, interval=None) -> float:
    return sum(variation(s, interval) for s in traj.surfaces)


def slice_loop(surface: SweptSurface, t: float) -> Loop:
    """Loop at a generic time: nodewise linear interpolation within the leg,
    pulled back through the time warp when one is present."""
    sigma, tau = surface.interval
    if not (sigma < t < tau):
        raise GeometryError(f"slice time {t} outside open interval ({sigma}, {tau})")
    ti = surface.pullback_time(t)
    leg = surface.leg_at(t)
    return Loop(leg.nodes_at(ti), surface.multiplicity, surface.burgers_index)


def section_mass(surface: SweptSurface, t: float) -> float:
    """Length of the triangle-current section at a generic time (times the
    multiplicity); piecewise linear in t with kinks at triangle vertex times."""
    total = 0.0
    for tri in surface.triangles:
        ts = tri[:, 0]
        if t <= ts.min() or t >= ts.max():
            continue
        pts = []
        for a in range(3):
            b = (a + 1) % 3
            fa, fb = ts[a] - t, ts[b] - t
            if fa == 0.0:
                pts.append(tri[a, 1:4])
            elif fa * fb < 0.0:
                s = fa / (fa - fb)
                pts.append(tri[a, 1:4] + s * (tri[b, 1:4] - tri[a, 1:4]))
        if len(pts) >= 2:
            total += float(np.linalg.norm(pts[1] - pts[0]))
    return total * surface.multiplicity


def slice_mass_integral(surface: SweptSurface, interval=None) -> float:
    """Exact integral of t -> M(section at t): the integrand is piecewise
    linear between triangle vertex times, so midpoint sums per knot interval
    are exact."""
    a, b = interval if interval is not None else surface.interval
    knots = np.unique(np.concatenate([[a, b], surface.triangles[:, :, 0].ravel()]))
    knots = knots[(knots >= a) & (knots <= b)]
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        total += (hi - lo) * section_mass(surface, 0.5 * (lo + hi))
    return float(total)


def linf_norm(traj: SlipTrajectory) -> float:
    """sup_t of the slice mass.  Edge lengths are convex in t on each ruled
    leg, so the supremum is attained at a leg endpoint; this is exact."""
    worst = 0.0
    for s in traj.surfaces:
        for leg in s.legs:
            for nodes in (leg.nodes0, leg.nodes1):
                length = np.linalg.norm(np.roll(nodes, -1, axis=0) - nodes, axis=1).sum()
                worst = max(worst, length * s.multiplicity)
    return worst


# ---------------------------------------------------------------------------
# time reparameterization and concatenation


def _surface_warp(surface: SweptSurface) -> PiecewiseLinearMap:
    span = (surface.legs[0].t0, surface.legs[-1].t1)
    return surface.warp if surface.warp is not None \
        else PiecewiseLinearMap.identity(span)


def _rescale_surface(surface: SweptSurface, amap: PiecewiseLinearMap) -> SweptSurface:
    sigma, tau = surface.interval
    if amap.t_in[0] > sigma or amap.t_in[-1] < tau:
        raise GeometryError("time map does not cover the surface interval")
    warp = compose_pl(amap, _surface_warp(surface))
    return SweptSurface(surface.legs, surface.multiplicity,
                        surface.burgers_index, warp=warp)


def rescale_trajectory(traj: SlipTrajectory, amap: PiecewiseLinearMap) -> SlipTrajectory:
    """Relabel the trajectory's time axis only: triangles are split at the
    map's breakpoints and remapped piecewise-affinely, so variation and slice
    masses are exactly unchanged."""
    return SlipTrajectory([_rescale_surface(s, amap) for s in traj.surfaces])


def _loops_match(final: Loop, start: Loop) -> bool:
    return (final.multiplicity == start.multiplicity
            and final.burgers_index == start.burgers_index
            and final.nodes.shape == start.nodes.shape
            and np.array_equal(final.nodes, start.nodes))


def _shift_intrinsic(surface: SweptSurface, new_start: float):
    """Rebase a surface's intrinsic time to start at new_start (exactly)."""
    old_start = surface.legs[0].t0
    legs = [RuledLeg((leg.t0 - old_start) + new_start,
                     (leg.t1 - old_start) + new_start,
                     leg.nodes0, leg.nodes1) for leg in surface.legs]
    warp = _surface_warp(surface)
    wmap = PiecewiseLinearMap((warp.t_in - old_start) + new_start, warp.t_out)
    return legs, wmap


def concatenate(traj1: SlipTrajectory, traj2: SlipTrajectory) -> SlipTrajectory:
    """Run traj1 on [0, 1/2] and traj2 on [1/2, 1]; requires exact endpoint
    match.  Variation is additive, the sup slice mass is the max of the two."""
    if len(traj1.surfaces) != len(traj2.surfaces):
        raise CompositionError("trajectories act on different loop counts")
    surfaces = []
    for s1, s2 in zip(traj1.surfaces, traj2.surfaces):
        if not _loops_match(s1.final_loop(), s2.initial_loop()):
            raise CompositionError("final loops of the first trajectory do not "
                                   "match initial loops of the second")
        w1 = compose_pl(PiecewiseLinearMap.affine(s1.interval, (0.0, 0.5)),
                        _surface_warp(s1))
        junction = s1.legs[-1].t1
        legs2, w2base = _shift_intrinsic(s2, junction)
        w2 = compose_pl(PiecewiseLinearMap.affine(s2.interval, (0.5, 1.0)), w2base)
        pts = np.union1d(w1.t_in, w2.t_in)
        vals = np.where(pts <= junction, w1(pts), w2(pts))
        warp = PiecewiseLinearMap(pts, vals)
        surfaces.append(SweptSurface(list(s1.legs) + legs2, s1.multiplicity,
                                     s1.burgers_index, warp=warp))
    return SlipTrajectory(surfaces)


def dislocation_forward(traj: SlipTrajectory, system: DislocationSystem) -> DislocationSystem:
    """Final-time loops of a trajectory attached to the given system."""
    if len(traj.surfaces) != len(system.loops):
        raise CompositionError("trajectory and system have different loop counts")
    for s, lp in zip(traj.surfaces, system.loops):
        if not _loops_match(s.initial_loop(), lp):
            raise CompositionError("trajectory initial trace does not match the system")
    return traj.final_system()


def write_loops_csv(path, system: DislocationSystem):
    """Loop snapshot: (burgers_index, multiplicity, node_id, x, y, z) rows."""
    with open(path, "w") as fh:
        fh.write("burgers_index,multiplicity,node_id,x,y,z\n")
        for lp in system.loops:
            for i, node in enumerate(lp.nodes):
                fh.write(f"{lp.burgers_index},{lp.multiplicity},{i},"
                         f"{float(node[0])!r},{float(node[1])!r},{float(node[2])!r}\n")


def read_loops_csv(path) -> DislocationSystem:
    rows = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    # rows are written loop by loop; a node_id reset to 0 starts a new loop
    starts = list(np.nonzero(rows[:, 2] == 0)[0]) + [rows.shape[0]]
    loops = []
    for lo, hi in zip(starts[:-1], starts[1:]):
        grp = rows[lo:hi]
        loops.append(Loop(grp[:, 3:6], int(grp[0, 1]), int(grp[0, 0])))
    return DislocationSystem(loops)
