from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from spacebus.errors import FrameError, GeometryError, OffPlaneError
from spacebus.geometry import (
    Aabb,
    DisplaySurface,
    FrameGraph,
    Ray,
    RigidTransform,
    UnitVec3,
    Vec3,
    point_to_ray_distance,
    project_to_display,
    ray_aabb_intersect,
)

finite = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False, allow_infinity=False)


def vec(x, y, z):
    return Vec3(float(x), float(y), float(z))


class TestVectors:
    def test_algebra(self):
        a, b = vec(1, 2, 3), vec(4, 5, 6)
        assert (a + b).as_tuple() == (5, 7, 9)
        assert (b - a).as_tuple() == (3, 3, 3)
        assert (a * 2).as_tuple() == (2, 4, 6)
        assert a.dot(b) == 32
        assert a.cross(b).as_tuple() == (-3, 6, -3)

    def test_unit_enforces_length(self):
        with pytest.raises(GeometryError):
            UnitVec3(1.0, 1.0, 0.0)
        u = UnitVec3.normalize(3, 0, 4)
        assert u.as_tuple() == (0.6, 0.0, 0.8)

    def test_normalize_zero_rejected(self):
        with pytest.raises(GeometryError):
            UnitVec3.normalize(0, 0, 0)


class TestRigidTransform:
    def test_identity(self):
        p = vec(3, -2, 7)
        assert RigidTransform.identity().apply_point(p) == p

    def test_translation(self):
        tf = RigidTransform.from_translation(vec(10, 0, 0))
        assert tf.apply_point(vec(1, 1, 1)).as_tuple() == (11, 1, 1)
        # vectors ignore translation
        assert tf.apply_vector(vec(1, 1, 1)).as_tuple() == (1, 1, 1)

    def test_rotation_quarter_turn(self):
        tf = RigidTransform.from_axis_angle(UnitVec3(0.0, 0.0, 1.0), math.pi / 2)
        p = tf.apply_point(vec(1, 0, 0))
        assert p.dist(vec(0, 1, 0)) < 1e-9

    def test_compose_order(self):
        rot = RigidTransform.from_axis_angle(UnitVec3(0.0, 0.0, 1.0), math.pi / 2)
        shift = RigidTransform.from_translation(vec(5, 0, 0))
        # compose(inner): inner runs first
        p = shift.compose(rot).apply_point(vec(1, 0, 0))
        assert p.dist(vec(5, 1, 0)) < 1e-9
        q = rot.compose(shift).apply_point(vec(1, 0, 0))
        assert q.dist(vec(0, 6, 0)) < 1e-9

    def test_inverse_roundtrip(self):
        tf = RigidTransform.from_axis_angle(
            UnitVec3.normalize(1, 2, 2), 0.7, vec(4, -3, 9)
        )
        p = vec(12, 34, -5)
        back = tf.inverse().apply_point(tf.apply_point(p))
        assert back.dist(p) < 1e-9

    def test_rejects_non_orthonormal(self):
        with pytest.raises(GeometryError):
            RigidTransform(((1.0, 0.0, 0.0), (0.0, 2.0, 0.0), (0.0, 0.0, 1.0)), Vec3(0.0, 0.0, 0.0))

    def test_rejects_reflection(self):
        with pytest.raises(GeometryError):
            RigidTransform(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, -1.0)), Vec3(0.0, 0.0, 0.0))

    @given(finite, finite, finite, st.floats(min_value=-math.pi, max_value=math.pi))
    def test_property_inverse(self, x, y, z, angle):
        tf = RigidTransform.from_axis_angle(UnitVec3.normalize(1, 1, 0), angle, vec(x, y, z))
        p = vec(x * 0.5, y + 1, z - 2)
        assert tf.inverse().apply_point(tf.apply_point(p)).dist(p) < 1e-6

    @given(st.floats(min_value=-math.pi, max_value=math.pi))
    def test_property_direction_stays_unit(self, angle):
        tf = RigidTransform.from_axis_angle(UnitVec3.normalize(2, -1, 3), angle)
        d = tf.apply_direction(UnitVec3.normalize(1, 5, -2))
        assert abs(d.norm() - 1.0) < 1e-9


BOX = Aabb(vec(-100, -100, -100), vec(100, 100, 100))


class TestRayBox:
    def test_straight_hit(self):
        hit = ray_aabb_intersect(Ray(vec(0, 0, 500), UnitVec3(0.0, 0.0, -1.0)), BOX)
        assert hit is not None
        assert hit.t == pytest.approx(400.0)
        assert hit.point.as_tuple() == pytest.approx((0, 0, 100))
        assert hit.normal.as_tuple() == (0, 0, 1)  # entered through the +z face
        assert hit.dist_along_normal == pytest.approx(400.0)

    def test_miss(self):
        assert ray_aabb_intersect(Ray(vec(0, 500, 500), UnitVec3(0.0, 0.0, -1.0)), BOX) is None

    def test_box_behind(self):
        assert ray_aabb_intersect(Ray(vec(0, 0, 500), UnitVec3(0.0, 0.0, 1.0)), BOX) is None

    def test_origin_inside_reports_exit_face(self):
        hit = ray_aabb_intersect(Ray(vec(10, 0, 0), UnitVec3(1.0, 0.0, 0.0)), BOX)
        assert hit is not None
        assert hit.t == 0.0
        assert hit.point.as_tuple() == (10, 0, 0)
        assert hit.normal.as_tuple() == (1, 0, 0)  # heading out the +x face
        assert hit.dist_along_normal == pytest.approx(90.0)

    def test_diagonal_corner_graze(self):
        d = UnitVec3.normalize(1, 1, 0)
        hit = ray_aabb_intersect(Ray(vec(-200, -200, 0), d), BOX)
        assert hit is not None
        assert hit.point.dist(vec(-100, -100, 0)) < 1e-9

    def test_parallel_outside_slab(self):
        assert ray_aabb_intersect(Ray(vec(0, 200, 0), UnitVec3(1.0, 0.0, 0.0)), BOX) is None

    def test_parallel_inside_slab(self):
        hit = ray_aabb_intersect(Ray(vec(-500, 0, 0), UnitVec3(1.0, 0.0, 0.0)), BOX)
        assert hit is not None
        assert hit.point.dist(vec(-100, 0, 0)) < 1e-9

    @given(finite, finite, finite, finite, finite, finite)
    def test_property_hit_point_on_surface(self, ox, oy, oz, dx, dy, dz):
        if abs(dx) + abs(dy) + abs(dz) < 1e-3:
            return
        ray = Ray(vec(ox, oy, oz), UnitVec3.normalize(dx, dy, dz))
        hit = ray_aabb_intersect(ray, BOX)
        if hit is None:
            return
        assert BOX.contains(hit.point, tol=1e-6)
        if hit.t > 0.0:
            on_face = any(
                abs(hit.point[a] - bound) < 1e-6
                for a in range(3)
                for bound in (-100.0, 100.0)
            )
            assert on_face


class TestPointToRay:
    def test_perpendicular(self):
        ray = Ray(vec(0, 0, 0), UnitVec3(1.0, 0.0, 0.0))
        assert point_to_ray_distance(vec(50, 30, 0), ray) == pytest.approx(30.0)

    def test_behind_origin_clamps(self):
        ray = Ray(vec(0, 0, 0), UnitVec3(1.0, 0.0, 0.0))
        assert point_to_ray_distance(vec(-40, 30, 0), ray) == pytest.approx(50.0)

    def test_on_ray(self):
        ray = Ray(vec(0, 0, 0), UnitVec3(0.0, 1.0, 0.0))
        assert point_to_ray_distance(vec(0, 123, 0), ray) == pytest.approx(0.0)


SURFACE = DisplaySurface(
    origin=vec(0, 0, 0),
    u=UnitVec3(1.0, 0.0, 0.0),
    v=UnitVec3(0.0, -1.0, 0.0),
    width_mm=400.0,
    height_mm=300.0,
    width_px=1920,
    height_px=1080,
)


class TestDisplayProjection:
    def test_corners(self):
        assert project_to_display(SURFACE, vec(0, 0, 0)) == (0, 0)
        # one mm inside the far corner
        assert project_to_display(SURFACE, vec(399.9, -299.9, 0)) == (1919, 1079)

    def test_center(self):
        px, py = project_to_display(SURFACE, vec(200, -150, 0))
        assert (px, py) == (960, 540)

    def test_outside_rect_is_none(self):
        assert project_to_display(SURFACE, vec(401, -150, 0)) is None
        assert project_to_display(SURFACE, vec(-1, -150, 0)) is None
        assert project_to_display(SURFACE, vec(200, 1, 0)) is None

    def test_off_plane_raises(self):
        with pytest.raises(OffPlaneError):
            project_to_display(SURFACE, vec(200, -150, 2.0))

    def test_just_on_plane_tolerated(self):
        assert project_to_display(SURFACE, vec(200, -150, 0.5)) == (960, 540)

    def test_axes_must_be_perpendicular(self):
        with pytest.raises(GeometryError):
            DisplaySurface(
                origin=vec(0, 0, 0),
                u=UnitVec3(1.0, 0.0, 0.0),
                v=UnitVec3.normalize(0.5, -1.0, 0.0),
                width_mm=100,
                height_mm=100,
                width_px=10,
                height_px=10,
            )


class TestFrameGraph:
    def build(self):
        g = FrameGraph()
        g.add_frame("root")
        g.add_frame(
            "table",
            "root",
            RigidTransform.from_translation(vec(1000, 0, 0)),
        )
        g.add_frame(
            "screen",
            "root",
            RigidTransform.from_axis_angle(
                UnitVec3(0.0, 0.0, 1.0), math.pi / 2, vec(0, 2000, 0)
            ),
        )
        g.add_frame("cup", "table", RigidTransform.from_translation(vec(0, 50, 0)))
        return g

    def test_to_root(self):
        g = self.build()
        tf = g.resolve("cup", "root")
        assert tf.apply_point(vec(0, 0, 0)).dist(vec(1000, 50, 0)) < 1e-9

    def test_between_siblings(self):
        g = self.build()
        tf = g.resolve("table", "screen")
        # table origin in root is (1000, 0, 0); screen maps root p to
        # rot^-1 (p - t): (1000, -2000) rotated by -90deg -> (-2000, -1000)
        assert tf.apply_point(vec(0, 0, 0)).dist(vec(-2000, -1000, 0)) < 1e-6

    def test_roundtrip(self):
        g = self.build()
        there = g.resolve("cup", "screen")
        back = g.resolve("screen", "cup")
        p = vec(7, 8, 9)
        assert back.apply_point(there.apply_point(p)).dist(p) < 1e-9

    def test_identity_same_frame(self):
        g = self.build()
        assert g.resolve("table", "table").apply_point(vec(1, 2, 3)) == vec(1, 2, 3)

    def test_disconnected_frames_error(self):
        g = self.build()
        g.add_frame("island")
        with pytest.raises(FrameError):
            g.resolve("island", "table")

    def test_unknown_frame(self):
        g = self.build()
        with pytest.raises(FrameError):
            g.resolve("ghost", "root")

    def test_duplicate_frame(self):
        g = self.build()
        with pytest.raises(FrameError):
            g.add_frame("table")

    def test_unknown_parent(self):
        g = FrameGraph()
        with pytest.raises(FrameError):
            g.add_frame("child", "nowhere")
