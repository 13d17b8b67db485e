"""Desk-scale spatial math: frames, rays, boxes, display surfaces.

Everything is measured in millimeters. Rotations are plain 3x3 row-major
tuples checked for orthonormality at construction, so a transform that
typechecks is already rigid; there is no shear or scale to worry about
downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import FrameError, GeometryError, OffPlaneError

ORTHO_TOL = 1e-9
_ZERO_TOL = 1e-12

Mat3 = tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __add__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def __sub__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def __mul__(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, o: "Vec3") -> float:
        return self.x * o.x + self.y * o.y + self.z * o.z

    def cross(self, o: "Vec3") -> "Vec3":
        return Vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def dist(self, o: "Vec3") -> float:
        return (self - o).norm()

    def unit(self) -> "UnitVec3":
        return UnitVec3.normalize(self.x, self.y, self.z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def __getitem__(self, i: int) -> float:
        return (self.x, self.y, self.z)[i]

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y, self.z))


@dataclass(frozen=True)
class UnitVec3(Vec3):
    """A Vec3 constrained to unit length. Build via normalize()."""

    def __post_init__(self) -> None:
        n = self.norm()
        if not math.isfinite(n) or abs(n - 1.0) > 1e-6:
            raise GeometryError(f"not unit length: |v| = {n}")

    @classmethod
    def normalize(cls, x: float, y: float, z: float) -> "UnitVec3":
        n = math.sqrt(x * x + y * y + z * z)
        if not math.isfinite(n) or n < _ZERO_TOL:
            raise GeometryError("cannot normalize a near-zero vector")
        if abs(n - 1.0) < 1e-12:
            # already unit; dividing again would jitter the last bit and
            # break bitwise idempotence
            return cls(x, y, z)
        return cls(x / n, y / n, z / n)


@dataclass(frozen=True)
class Ray:
    origin: Vec3
    direction: UnitVec3

    def at(self, t: float) -> Vec3:
        return self.origin + self.direction * t


def _mat_mul(a: Mat3, b: Mat3) -> Mat3:
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3))
        for i in range(3)
    )  # type: ignore[return-value]


def _mat_vec(m: Mat3, v: Vec3) -> Vec3:
    return Vec3(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )


def _transpose(m: Mat3) -> Mat3:
    return tuple(tuple(m[j][i] for j in range(3)) for i in range(3))  # type: ignore[return-value]


def _det(m: Mat3) -> float:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


_IDENTITY: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class RigidTransform:
    """Rotation-then-translation map between frames."""

    rotation: Mat3 = _IDENTITY
    translation: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))

    def __post_init__(self) -> None:
        r = self.rotation
        rt = _transpose(r)
        prod = _mat_mul(rt, r)
        for i in range(3):
            for j in range(3):
                want = 1.0 if i == j else 0.0
                if abs(prod[i][j] - want) > ORTHO_TOL:
                    raise GeometryError("rotation is not orthonormal")
        if abs(_det(r) - 1.0) > ORTHO_TOL:
            raise GeometryError("rotation determinant must be +1 (no reflections)")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, t: Vec3) -> "RigidTransform":
        return cls(_IDENTITY, t)

    @classmethod
    def from_axis_angle(cls, axis: UnitVec3, angle_rad: float, translation: Optional[Vec3] = None) -> "RigidTransform":
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        x, y, z = axis.x, axis.y, axis.z
        ic = 1.0 - c
        rot: Mat3 = (
            (c + x * x * ic, x * y * ic - z * s, x * z * ic + y * s),
            (y * x * ic + z * s, c + y * y * ic, y * z * ic - x * s),
            (z * x * ic - y * s, z * y * ic + x * s, c + z * z * ic),
        )
        return cls(rot, translation or Vec3(0.0, 0.0, 0.0))

    def apply_point(self, p: Vec3) -> Vec3:
        return _mat_vec(self.rotation, p) + self.translation

    def apply_vector(self, v: Vec3) -> Vec3:
        return _mat_vec(self.rotation, v)

    def apply_direction(self, d: UnitVec3) -> UnitVec3:
        v = _mat_vec(self.rotation, d)
        return UnitVec3.normalize(v.x, v.y, v.z)

    def apply_ray(self, ray: Ray) -> Ray:
        return Ray(self.apply_point(ray.origin), self.apply_direction(ray.direction))

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """self after inner: (self.compose(inner))(x) == self(inner(x))."""
        return RigidTransform(
            _mat_mul(self.rotation, inner.rotation),
            _mat_vec(self.rotation, inner.translation) + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = _transpose(self.rotation)
        return RigidTransform(rt, -_mat_vec(rt, self.translation))


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box, min corner to max corner, in whatever frame it lives in."""

    min: Vec3
    max: Vec3

    def __post_init__(self) -> None:
        if self.min.x > self.max.x or self.min.y > self.max.y or self.min.z > self.max.z:
            raise GeometryError("box min must not exceed max on any axis")

    def contains(self, p: Vec3, tol: float = 0.0) -> bool:
        return (
            self.min.x - tol <= p.x <= self.max.x + tol
            and self.min.y - tol <= p.y <= self.max.y + tol
            and self.min.z - tol <= p.z <= self.max.z + tol
        )

    def center(self) -> Vec3:
        return (self.min + self.max) * 0.5


_AXIS_NORMALS = {
    (0, -1): UnitVec3(-1.0, 0.0, 0.0),
    (0, 1): UnitVec3(1.0, 0.0, 0.0),
    (1, -1): UnitVec3(0.0, -1.0, 0.0),
    (1, 1): UnitVec3(0.0, 1.0, 0.0),
    (2, -1): UnitVec3(0.0, 0.0, -1.0),
    (2, 1): UnitVec3(0.0, 0.0, 1.0),
}


@dataclass(frozen=True)
class Hit:
    """Ray/box intersection. For t > 0, point == origin + t * direction."""

    t: float
    point: Vec3
    normal: UnitVec3
    dist_along_normal: float


def ray_aabb_intersect(ray: Ray, box: Aabb) -> Optional[Hit]:
    """Slab test. An origin inside the box hits at t = 0 with the exit face
    normal, so a pointer buried in a volume still reports which way out is.
    """
    o = ray.origin.as_tuple()
    d = ray.direction.as_tuple()
    lo = box.min.as_tuple()
    hi = box.max.as_tuple()

    t_enter = -math.inf
    t_exit = math.inf
    enter_face: Optional[tuple[int, int]] = None
    exit_face: Optional[tuple[int, int]] = None

    for axis in range(3):
        if abs(d[axis]) < _ZERO_TOL:
            if o[axis] < lo[axis] or o[axis] > hi[axis]:
                return None
            continue
        inv = 1.0 / d[axis]
        ta = (lo[axis] - o[axis]) * inv
        tb = (hi[axis] - o[axis]) * inv
        sign = -1 if d[axis] > 0 else 1  # face whose plane the ray meets first
        if ta > tb:
            ta, tb = tb, ta
        if ta > t_enter:
            t_enter = ta
            enter_face = (axis, sign)
        if tb < t_exit:
            t_exit = tb
            exit_face = (axis, -sign)
        if t_enter > t_exit:
            return None

    if t_exit < 0.0:
        return None  # box entirely behind the origin

    if t_enter < 0.0:
        # origin strictly inside
        face = exit_face
        assert face is not None
        t = 0.0
        point = ray.origin
    else:
        face = enter_face
        assert face is not None
        t = t_enter
        point = ray.at(t)

    axis, sign = face
    plane_c = hi[axis] if sign > 0 else lo[axis]
    return Hit(
        t=t,
        point=point,
        normal=_AXIS_NORMALS[(axis, sign)],
        dist_along_normal=abs(o[axis] - plane_c),
    )


@dataclass(frozen=True)
class DisplaySurface:
    """Physical screen: a rectangle in space plus its pixel grid."""

    origin: Vec3  # top-left corner, root frame
    u: UnitVec3  # along increasing x pixels
    v: UnitVec3  # along increasing y pixels
    width_mm: float
    height_mm: float
    width_px: int
    height_px: int

    def __post_init__(self) -> None:
        if abs(self.u.dot(self.v)) > 1e-6:
            raise GeometryError("display axes must be perpendicular")
        if self.width_mm <= 0 or self.height_mm <= 0:
            raise GeometryError("display extent must be positive")
        if self.width_px <= 0 or self.height_px <= 0:
            raise GeometryError("display resolution must be positive")

    @property
    def normal(self) -> UnitVec3:
        n = self.u.cross(self.v)
        return UnitVec3.normalize(n.x, n.y, n.z)


OFF_PLANE_TOL_MM = 1.0


def project_to_display(surface: DisplaySurface, point: Vec3) -> Optional[tuple[int, int]]:
    """Map a 3D point on the screen plane to integer pixels.

    Points more than OFF_PLANE_TOL_MM off the plane are an error (the
    caller fed a point that is not actually on this screen); points on
    the plane but outside the rectangle are None.
    """
    off = point - surface.origin
    w = off.dot(surface.normal)
    if abs(w) > OFF_PLANE_TOL_MM:
        raise OffPlaneError(f"point is {abs(w):.3f} mm off the display plane")
    s = off.dot(surface.u)
    t = off.dot(surface.v)
    px = math.floor((s / surface.width_mm) * surface.width_px)
    py = math.floor((t / surface.height_mm) * surface.height_px)
    if px < 0 or px >= surface.width_px or py < 0 or py >= surface.height_px:
        return None
    return (px, py)


@dataclass
class _Frame:
    name: str
    parent: Optional[str]
    to_parent: RigidTransform


class FrameGraph:
    """Named coordinate frames in a forest; transforms resolve through
    the closest common ancestor."""

    def __init__(self) -> None:
        self._frames: dict[str, _Frame] = {}

    def add_frame(self, name: str, parent: Optional[str] = None, to_parent: Optional[RigidTransform] = None) -> None:
        if name in self._frames:
            raise FrameError(f"frame {name!r} already exists")
        if parent is not None and parent not in self._frames:
            raise FrameError(f"unknown parent frame {parent!r}")
        self._frames[name] = _Frame(name, parent, to_parent or RigidTransform.identity())

    def has_frame(self, name: str) -> bool:
        return name in self._frames

    def frames(self) -> list[str]:
        return list(self._frames)

    def _ancestry(self, name: str) -> list[str]:
        if name not in self._frames:
            raise FrameError(f"unknown frame {name!r}")
        chain = []
        cur: Optional[str] = name
        while cur is not None:
            chain.append(cur)
            cur = self._frames[cur].parent
        return chain  # [name, ..., root]

    def resolve(self, src: str, dst: str) -> RigidTransform:
        """Transform taking src coordinates to dst coordinates."""
        if src == dst:
            self._ancestry(src)  # existence check
            return RigidTransform.identity()
        up_src = self._ancestry(src)
        up_dst = self._ancestry(dst)
        dst_index = {f: i for i, f in enumerate(up_dst)}
        pivot = next((f for f in up_src if f in dst_index), None)
        if pivot is None:
            raise FrameError(f"frames {src!r} and {dst!r} are not connected")

        src_to_pivot = RigidTransform.identity()
        for f in up_src[: up_src.index(pivot)]:
            src_to_pivot = self._frames[f].to_parent.compose(src_to_pivot)

        dst_to_pivot = RigidTransform.identity()
        for f in up_dst[: dst_index[pivot]]:
            dst_to_pivot = self._frames[f].to_parent.compose(dst_to_pivot)

        return dst_to_pivot.inverse().compose(src_to_pivot)

    def transform_point(self, p: Vec3, src: str, dst: str) -> Vec3:
        return self.resolve(src, dst).apply_point(p)

    def transform_ray(self, ray: Ray, src: str, dst: str) -> Ray:
        return self.resolve(src, dst).apply_ray(ray)


def point_to_ray_distance(point: Vec3, ray: Ray) -> float:
    """Distance from a point to the ray (half-line, clamped at the origin)."""
    rel = point - ray.origin
    t = max(0.0, rel.dot(ray.direction))
    return (rel - ray.direction * t).norm()
