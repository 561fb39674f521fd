"""Minimal deterministic 2D rigid-body core.

Dynamic bodies are discs; static bodies are triangles. Joints are soft
distance constraints between disc anchors, with an extra soft constraint on
the relative angle so joined bodies keep their orientation to each other.

One step:

1. gather external forces, integrate velocities (semi-implicit Euler)
2. viscous damping, reduced for bodies in joined groups (see ``drag_scale``)
3. soft joint impulses
4. integrate positions
5. detect contacts, apply restitution impulses and positional projection

Everything iterates in ascending body id, so a step is a pure function of
the world state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

GREY = (0.5, 0.5, 0.5)


@dataclass(slots=True)
class Body:
    id: int
    kind: str  # "disc" or "triangle"
    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    angle: float = 0.0
    omega: float = 0.0
    radius: float = 0.0
    vertices: tuple = ()
    colour: tuple = GREY
    mass: float = 0.0
    inertia: float = 0.0
    fx: float = 0.0
    fy: float = 0.0
    torque: float = 0.0
    collide: bool = True
    cell_id: int = -1

    @property
    def is_static(self) -> bool:
        return self.kind == "triangle"

    @property
    def inv_mass(self) -> float:
        return 0.0 if self.mass <= 0.0 else 1.0 / self.mass

    @property
    def inv_inertia(self) -> float:
        return 0.0 if self.inertia <= 0.0 else 1.0 / self.inertia

    def apply_force(self, fx: float, fy: float) -> None:
        self.fx += fx
        self.fy += fy

    def apply_force_at(self, fx: float, fy: float, px: float, py: float) -> None:
        """Force applied at world point (px, py)."""
        self.fx += fx
        self.fy += fy
        self.torque += (px - self.x) * fy - (py - self.y) * fx

    def local_to_world(self, lx: float, ly: float) -> tuple[float, float]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return self.x + c * lx - s * ly, self.y + s * lx + c * ly


@dataclass(slots=True)
class Joint:
    id: int
    body_a: int
    body_b: int
    anchor_a: tuple[float, float]
    anchor_b: tuple[float, float]
    rest_length: float
    reference_angle: float  # body_b.angle - body_a.angle at creation
    link_angle_a: float  # direction a -> b in a's frame at creation
    link_angle_b: float  # direction a -> b in b's frame at creation
    frequency: float
    damping_ratio: float
    angular_frequency: float


@dataclass(slots=True)
class RayHit:
    body_id: int
    distance: float
    surface_colour: tuple


@dataclass(slots=True)
class Contact:
    a: int
    b: int  # other disc, or the triangle body for rock contacts
    nx: float
    ny: float
    depth: float


@dataclass
class PhysicsParams:
    density: float = 1.0
    restitution: float = 0.1
    linear_damping: float = 2.0
    angular_damping: float = 2.0
    group_drag_scale_min: float = 0.35
    position_slop: float = 1e-3
    position_correction: float = 0.8
    max_speed: float = 4.0

    @classmethod
    def from_config(cls, cfg) -> "PhysicsParams":
        return cls(
            density=cfg.density,
            restitution=cfg.restitution,
            linear_damping=cfg.linear_damping,
            angular_damping=cfg.angular_damping,
            group_drag_scale_min=cfg.group_drag_scale_min,
            position_slop=cfg.position_slop,
            position_correction=cfg.position_correction,
            max_speed=cfg.max_speed,
        )


# ---------------------------------------------------------------------------
# geometry helpers


def _wrap(a: float) -> float:
    """Angle folded into [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def closest_point_on_segment(px, py, ax, ay, bx, by) -> tuple[float, float]:
    ex, ey = bx - ax, by - ay
    ee = ex * ex + ey * ey
    if ee == 0.0:
        return ax, ay
    t = ((px - ax) * ex + (py - ay) * ey) / ee
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return ax + t * ex, ay + t * ey


def point_in_triangle(px, py, verts) -> bool:
    (ax, ay), (bx, by), (cx, cy) = verts
    d1 = (px - bx) * (ay - by) - (ax - bx) * (py - by)
    d2 = (px - cx) * (by - cy) - (bx - cx) * (py - cy)
    d3 = (px - ax) * (cy - ay) - (cx - ax) * (py - ay)
    neg = d1 < 0 or d2 < 0 or d3 < 0
    pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (neg and pos)


def closest_point_on_triangle_boundary(px, py, verts) -> tuple[float, float]:
    best = None
    best_d = math.inf
    for i in range(3):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % 3]
        qx, qy = closest_point_on_segment(px, py, ax, ay, bx, by)
        d = (qx - px) ** 2 + (qy - py) ** 2
        if d < best_d:
            best_d = d
            best = (qx, qy)
    return best


def triangle_area(verts) -> float:
    (ax, ay), (bx, by), (cx, cy) = verts
    return 0.5 * ((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))


def disc_triangle_contact(cx, cy, r, verts):
    """Return (nx, ny, depth) pushing the disc out of the triangle, or None."""
    qx, qy = closest_point_on_triangle_boundary(cx, cy, verts)
    dx, dy = cx - qx, cy - qy
    dist = math.hypot(dx, dy)
    if point_in_triangle(cx, cy, verts):
        if dist == 0.0:
            # centre exactly on an edge; push away from the centroid
            gx = sum(v[0] for v in verts) / 3.0
            gy = sum(v[1] for v in verts) / 3.0
            dx, dy = cx - gx, cy - gy
            n = math.hypot(dx, dy) or 1.0
            return dx / n, dy / n, r
        return -dx / dist, -dy / dist, r + dist
    if dist >= r:
        return None
    if dist == 0.0:
        return 1.0, 0.0, r
    return dx / dist, dy / dist, r - dist


def ray_circle(ox, oy, dx, dy, cx, cy, r) -> float | None:
    fx, fy = ox - cx, oy - cy
    b = fx * dx + fy * dy
    c = fx * fx + fy * fy - r * r
    if c <= 0.0:
        return 0.0  # origin inside the disc
    disc = b * b - c
    if disc < 0.0:
        return None
    t = -b - math.sqrt(disc)
    return t if t >= 0.0 else None


def ray_segment(ox, oy, dx, dy, ax, ay, bx, by) -> float | None:
    ex, ey = bx - ax, by - ay
    denom = dx * ey - dy * ex
    if denom == 0.0:
        return None
    wx, wy = ax - ox, ay - oy
    t = (wx * ey - wy * ex) / denom
    u = (wx * dy - wy * dx) / denom
    if t >= 0.0 and 0.0 <= u <= 1.0:
        return t
    return None


# ---------------------------------------------------------------------------
# broadphase


class SpatialHash:
    """Uniform grid of buckets keyed by integer cell coordinates."""

    def __init__(self, cell_size: float) -> None:
        self.cell_size = cell_size
        self.buckets: dict[tuple[int, int], list[int]] = {}

    def _range(self, lo: float, hi: float) -> range:
        s = self.cell_size
        return range(math.floor(lo / s), math.floor(hi / s) + 1)

    def insert_aabb(self, item: int, x0: float, y0: float, x1: float, y1: float) -> None:
        for ix in self._range(x0, x1):
            for iy in self._range(y0, y1):
                self.buckets.setdefault((ix, iy), []).append(item)

    def query_aabb(self, x0: float, y0: float, x1: float, y1: float) -> list[int]:
        found: set[int] = set()
        get = self.buckets.get
        for ix in self._range(x0, x1):
            for iy in self._range(y0, y1):
                bucket = get((ix, iy))
                if bucket:
                    found.update(bucket)
        return sorted(found)


def candidate_pairs(discs: list[Body]) -> list[tuple[int, int]]:
    """Potentially overlapping disc pairs, sorted, each pair once (a < b)."""
    if len(discs) < 2:
        return []
    size = 2.0 * max(b.radius for b in discs)
    inv = 1.0 / size
    grid: dict[tuple[int, int], list[Body]] = {}
    for b in discs:
        grid.setdefault((math.floor(b.x * inv), math.floor(b.y * inv)), []).append(b)
    pairs = set()
    for b in discs:
        ix, iy = math.floor(b.x * inv), math.floor(b.y * inv)
        for jx in (ix - 1, ix, ix + 1):
            for jy in (iy - 1, iy, iy + 1):
                for o in grid.get((jx, jy), ()):
                    if o.id > b.id:
                        dx = o.x - b.x
                        dy = o.y - b.y
                        rr = o.radius + b.radius
                        if dx * dx + dy * dy < rr * rr:
                            pairs.add((b.id, o.id))
    return sorted(pairs)


# ---------------------------------------------------------------------------
# damping


def drag_scale(vx: float, vy: float, x: float, y: float,
               partners: list[tuple[float, float]], scale_min: float) -> float:
    """Drag multiplier for a body moving at (vx, vy) joined to ``partners``.

    Per partner the drag reduction is proportional to ``1 - |cos a|`` where
    ``a`` is the angle between the velocity and the offset to the partner:

        scale_p = scale_min + (1 - scale_min) * (1 + |cos a|) / 2

    and the body's scale is the mean over partners, clamped to
    [scale_min, 1]. Moving along a joined line (|cos a| = 1) keeps full
    drag; moving across it (cos a = 0) lands on the midpoint of the range.
    Solo or motionless bodies get 1.
    """
    if not partners:
        return 1.0
    speed = math.hypot(vx, vy)
    if speed == 0.0:
        return 1.0
    total = 0.0
    n = 0
    for px, py in partners:
        ox, oy = px - x, py - y
        d = math.hypot(ox, oy)
        if d == 0.0:
            continue
        cos = (vx * ox + vy * oy) / (speed * d)
        total += scale_min + (1.0 - scale_min) * 0.5 * (1.0 + abs(cos))
        n += 1
    if n == 0:
        return 1.0
    s = total / n
    return min(1.0, max(scale_min, s))


def apply_damping(body: Body, partners: list[tuple[float, float]],
                  params: PhysicsParams) -> tuple[float, float]:
    """Linear viscous drag force on ``body``: -c_lin * scale * v."""
    s = drag_scale(body.vx, body.vy, body.x, body.y, partners, params.group_drag_scale_min)
    k = params.linear_damping * s
    return -k * body.vx, -k * body.vy


# ---------------------------------------------------------------------------
# world


@dataclass
class PhysicsWorld:
    params: PhysicsParams = field(default_factory=PhysicsParams)
    bodies: dict[int, Body] = field(default_factory=dict)
    joints: dict[int, Joint] = field(default_factory=dict)
    next_body_id: int = 0
    next_joint_id: int = 0
    static_cell: float = 2.0
    _static_hash: SpatialHash | None = field(default=None, repr=False)
    contacts: list[Contact] = field(default_factory=list, repr=False)

    # -- construction -----------------------------------------------------

    def add_disc(self, x: float, y: float, radius: float, *, angle: float = 0.0,
                 vx: float = 0.0, vy: float = 0.0, colour=GREY, cell_id: int = -1) -> Body:
        if radius <= 0:
            raise ValueError("disc radius must be positive")
        b = Body(id=self.next_body_id, kind="disc", x=x, y=y, vx=vx, vy=vy,
                 angle=angle, radius=radius, colour=colour, cell_id=cell_id)
        self.set_radius(b, radius)
        self.bodies[b.id] = b
        self.next_body_id += 1
        return b

    def add_triangle(self, vertices) -> Body:
        verts = tuple((float(x), float(y)) for x, y in vertices)
        if abs(triangle_area(verts)) < 1e-12:
            raise ValueError("triangle vertices are collinear")
        cx = sum(v[0] for v in verts) / 3.0
        cy = sum(v[1] for v in verts) / 3.0
        b = Body(id=self.next_body_id, kind="triangle", x=cx, y=cy, vertices=verts)
        self.bodies[b.id] = b
        self.next_body_id += 1
        self._static_hash = None
        return b

    def set_radius(self, body: Body, radius: float) -> None:
        body.radius = radius
        body.mass = self.params.density * math.pi * radius * radius
        body.inertia = 0.5 * body.mass * radius * radius

    def remove_body(self, body_id: int) -> None:
        body = self.bodies.pop(body_id, None)
        if body is not None and body.is_static:
            self._static_hash = None
        for jid in [j.id for j in self.joints.values() if body_id in (j.body_a, j.body_b)]:
            del self.joints[jid]

    def add_joint(self, body_a: int, body_b: int, anchor_a, anchor_b, *,
                  frequency: float, damping_ratio: float, angular_frequency: float,
                  rest_length: float | None = None) -> Joint:
        a, b = self.bodies[body_a], self.bodies[body_b]
        if a.kind != "disc" or b.kind != "disc":
            raise ValueError("joints connect dynamic discs only")
        if self.joint_between(body_a, body_b) is not None:
            raise ValueError("bodies already joined")
        if rest_length is None:
            pax, pay = a.local_to_world(*anchor_a)
            pbx, pby = b.local_to_world(*anchor_b)
            rest_length = math.hypot(pbx - pax, pby - pay)
        j = Joint(id=self.next_joint_id, body_a=body_a, body_b=body_b,
                  anchor_a=tuple(anchor_a), anchor_b=tuple(anchor_b),
                  rest_length=rest_length, reference_angle=b.angle - a.angle,
                  link_angle_a=_wrap(math.atan2(b.y - a.y, b.x - a.x) - a.angle),
                  link_angle_b=_wrap(math.atan2(b.y - a.y, b.x - a.x) - b.angle),
                  frequency=frequency, damping_ratio=damping_ratio,
                  angular_frequency=angular_frequency)
        self.joints[j.id] = j
        self.next_joint_id += 1
        return j

    def joint_between(self, a: int, b: int) -> Joint | None:
        for j in self.joints.values():
            if (j.body_a == a and j.body_b == b) or (j.body_a == b and j.body_b == a):
                return j
        return None

    def remove_joint(self, joint_id: int) -> None:
        self.joints.pop(joint_id, None)

    # -- queries ------------------------------------------------------------

    def discs(self) -> list[Body]:
        return [self.bodies[i] for i in sorted(self.bodies) if self.bodies[i].kind == "disc"]

    def static_hash(self) -> SpatialHash:
        if self._static_hash is None:
            h = SpatialHash(self.static_cell)
            for bid in sorted(self.bodies):
                b = self.bodies[bid]
                if b.is_static:
                    xs = [v[0] for v in b.vertices]
                    ys = [v[1] for v in b.vertices]
                    h.insert_aabb(bid, min(xs), min(ys), max(xs), max(ys))
            self._static_hash = h
        return self._static_hash

    def partners(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for jid in sorted(self.joints):
            j = self.joints[jid]
            out.setdefault(j.body_a, []).append(j.body_b)
            out.setdefault(j.body_b, []).append(j.body_a)
        return out

    def raycast(self, ox: float, oy: float, dx: float, dy: float, max_range: float,
                exclude: int = -1) -> RayHit | None:
        """Nearest body hit by the ray within ``max_range`` (``exclude`` skipped)."""
        best_t = math.inf
        best: Body | None = None
        ex, ey = ox + dx * max_range, oy + dy * max_range
        x0, x1 = min(ox, ex), max(ox, ex)
        y0, y1 = min(oy, ey), max(oy, ey)
        for bid in sorted(self.bodies):
            b = self.bodies[bid]
            if b.kind != "disc" or bid == exclude or not b.collide:
                continue
            r = b.radius
            if b.x + r < x0 or b.x - r > x1 or b.y + r < y0 or b.y - r > y1:
                continue
            t = ray_circle(ox, oy, dx, dy, b.x, b.y, r)
            if t is not None and t <= max_range and t < best_t:
                best_t, best = t, b
        for tid in self.static_hash().query_aabb(x0, y0, x1, y1):
            tri = self.bodies.get(tid)
            if tri is None or tid == exclude:
                continue
            v = tri.vertices
            for i in range(3):
                t = ray_segment(ox, oy, dx, dy, v[i][0], v[i][1], v[(i + 1) % 3][0], v[(i + 1) % 3][1])
                if t is not None and t <= max_range and t < best_t:
                    best_t, best = t, tri
        if best is None:
            return None
        return RayHit(body_id=best.id, distance=best_t, surface_colour=best.colour)

    # -- stepping -----------------------------------------------------------

    def step(self, dt: float) -> None:
        p = self.params
        discs = self.discs()
        partner_ids = self.partners()
        max_v2 = p.max_speed * p.max_speed

        # velocities from forces, then damping
        for b in discs:
            im = b.inv_mass
            b.vx += dt * b.fx * im
            b.vy += dt * b.fy * im
            b.omega += dt * b.torque * b.inv_inertia
            plist = [(self.bodies[o].x, self.bodies[o].y) for o in partner_ids.get(b.id, ())]
            s = drag_scale(b.vx, b.vy, b.x, b.y, plist, p.group_drag_scale_min)
            # implicit in v, so stiff drag on light bodies stays stable
            f = 1.0 / (1.0 + dt * p.linear_damping * s * im)
            b.vx *= f
            b.vy *= f
            b.omega /= 1.0 + dt * p.angular_damping
            b.fx = b.fy = b.torque = 0.0

        self.solve_joints(dt)

        for b in discs:
            v2 = b.vx * b.vx + b.vy * b.vy
            if v2 > max_v2:
                k = p.max_speed / math.sqrt(v2)
                b.vx *= k
                b.vy *= k
            b.x += dt * b.vx
            b.y += dt * b.vy
            b.angle += dt * b.omega

        self.resolve_contacts([b for b in discs if b.collide])

    def solve_joints(self, dt: float) -> list[float]:
        """One pass of soft distance + angle constraints; returns impulse sizes."""
        impulses: list[float] = []
        for jid in sorted(self.joints):
            j = self.joints[jid]
            a = self.bodies.get(j.body_a)
            b = self.bodies.get(j.body_b)
            if a is None or b is None:
                del self.joints[jid]
                continue
            impulses.append(self._solve_distance(j, a, b, dt))
            self._solve_angle(j, a, b, dt)
        return impulses

    def _solve_distance(self, j: Joint, a: Body, b: Body, dt: float) -> float:
        ca, sa = math.cos(a.angle), math.sin(a.angle)
        cb, sb = math.cos(b.angle), math.sin(b.angle)
        rax = ca * j.anchor_a[0] - sa * j.anchor_a[1]
        ray = sa * j.anchor_a[0] + ca * j.anchor_a[1]
        rbx = cb * j.anchor_b[0] - sb * j.anchor_b[1]
        rby = sb * j.anchor_b[0] + cb * j.anchor_b[1]
        dx = b.x + rbx - a.x - rax
        dy = b.y + rby - a.y - ray
        length = math.hypot(dx, dy)
        if length > 1e-9:
            ux, uy = dx / length, dy / length
        else:
            cx, cy = b.x - a.x, b.y - a.y
            n = math.hypot(cx, cy)
            if n == 0.0:
                return 0.0
            ux, uy = cx / n, cy / n
        cra = rax * uy - ray * ux
        crb = rbx * uy - rby * ux
        k = a.inv_mass + a.inv_inertia * cra * cra + b.inv_mass + b.inv_inertia * crb * crb
        if k == 0.0:
            return 0.0
        m = 1.0 / k
        c = length - j.rest_length
        omega = 2.0 * math.pi * j.frequency
        damp = 2.0 * m * j.damping_ratio * omega
        stiff = m * omega * omega
        gamma = dt * (damp + dt * stiff)
        gamma = 1.0 / gamma if gamma > 0.0 else 0.0
        bias = c * dt * stiff * gamma
        m_soft = 1.0 / (k + gamma)
        # relative velocity of the anchors along u
        vax = a.vx - a.omega * ray
        vay = a.vy + a.omega * rax
        vbx = b.vx - b.omega * rby
        vby = b.vy + b.omega * rbx
        cdot = ux * (vbx - vax) + uy * (vby - vay)
        impulse = -m_soft * (cdot + bias)
        px, py = impulse * ux, impulse * uy
        a.vx -= a.inv_mass * px
        a.vy -= a.inv_mass * py
        a.omega -= a.inv_inertia * (rax * py - ray * px)
        b.vx += b.inv_mass * px
        b.vy += b.inv_mass * py
        b.omega += b.inv_inertia * (rbx * py - rby * px)
        return impulse

    def _solve_angle(self, j: Joint, a: Body, b: Body, dt: float) -> None:
        """Keep the line between the centres at its creation angle in both body frames.

        Holding both frames to the link also holds their relative angle, and
        gives a chain of joined cells soft bending stiffness.
        """
        if j.angular_frequency <= 0.0:
            return
        dx, dy = b.x - a.x, b.y - a.y
        l2 = dx * dx + dy * dy
        if l2 < 1e-18:
            return
        link = math.atan2(dy, dx)
        # d(link)/d(position of b) = perp / L^2
        px, py = -dy / l2, dx / l2
        lin = (a.inv_mass + b.inv_mass) * (px * px + py * py)
        omega = 2.0 * math.pi * j.angular_frequency
        for body, ref in ((a, j.link_angle_a), (b, j.link_angle_b)):
            k = lin + body.inv_inertia
            if k == 0.0:
                continue
            m = 1.0 / k
            c = _wrap(link - body.angle - ref)
            damp = 2.0 * m * j.damping_ratio * omega
            stiff = m * omega * omega
            gamma = 1.0 / (dt * (damp + dt * stiff))
            bias = c * dt * stiff * gamma
            cdot = px * (b.vx - a.vx) + py * (b.vy - a.vy) - body.omega
            impulse = -(cdot + bias) / (k + gamma)
            a.vx -= a.inv_mass * impulse * px
            a.vy -= a.inv_mass * impulse * py
            b.vx += b.inv_mass * impulse * px
            b.vy += b.inv_mass * impulse * py
            body.omega -= body.inv_inertia * impulse

    def resolve_contacts(self, discs: list[Body]) -> list[Contact]:
        p = self.params
        joined = {(min(j.body_a, j.body_b), max(j.body_a, j.body_b)) for j in self.joints.values()}
        contacts: list[Contact] = []
        bodies = self.bodies
        e = p.restitution
        for ia, ib in candidate_pairs(discs):
            if (ia, ib) in joined:
                continue
            a, b = bodies[ia], bodies[ib]
            dx, dy = b.x - a.x, b.y - a.y
            d = math.hypot(dx, dy)
            depth = a.radius + b.radius - d
            if depth <= 0.0:
                continue
            if d == 0.0:
                nx, ny = 1.0, 0.0
            else:
                nx, ny = dx / d, dy / d
            contacts.append(Contact(ia, ib, nx, ny, depth))
            ima, imb = a.inv_mass, b.inv_mass
            vn = (b.vx - a.vx) * nx + (b.vy - a.vy) * ny
            if vn < 0.0:
                jn = -(1.0 + e) * vn / (ima + imb)
                a.vx -= jn * ima * nx
                a.vy -= jn * ima * ny
                b.vx += jn * imb * nx
                b.vy += jn * imb * ny
            corr = max(depth - p.position_slop, 0.0) * p.position_correction / (ima + imb)
            a.x -= corr * ima * nx
            a.y -= corr * ima * ny
            b.x += corr * imb * nx
            b.y += corr * imb * ny

        sh = self.static_hash()
        if sh.buckets:
            for b in discs:
                r = b.radius
                for tid in sh.query_aabb(b.x - r, b.y - r, b.x + r, b.y + r):
                    tri = bodies[tid]
                    hit = disc_triangle_contact(b.x, b.y, r, tri.vertices)
                    if hit is None:
                        continue
                    nx, ny, depth = hit
                    contacts.append(Contact(b.id, tid, nx, ny, depth))
                    vn = b.vx * nx + b.vy * ny
                    if vn < 0.0:
                        b.vx -= (1.0 + e) * vn * nx
                        b.vy -= (1.0 + e) * vn * ny
                    corr = max(depth - p.position_slop, 0.0) * p.position_correction
                    b.x += corr * nx
                    b.y += corr * ny
        self.contacts = contacts
        return contacts

    def kinetic_energy(self) -> float:
        return sum(0.5 * b.mass * (b.vx * b.vx + b.vy * b.vy) + 0.5 * b.inertia * b.omega * b.omega
                   for b in self.discs())
