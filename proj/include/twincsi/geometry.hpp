// SPDX-License-Identifier: Apache-2.0
//
// twincsi - digital twin channel synthesis and CSI compression toolkit
// Copyright (C) 2026 twincsi contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <vector>

#include "twincsi/common.hpp"

namespace twincsi {

using Vec3 = Eigen::Vector3d;

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};

    void expand(const Vec3 &p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void expand(const Aabb &b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool valid() const { return (lo.array() <= hi.array()).all(); }
    Vec3 center() const { return 0.5 * (lo + hi); }
    std::array<Vec3, 8> corners() const {
        std::array<Vec3, 8> c;
        for (int i = 0; i < 8; ++i)
            c[i] = Vec3(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
        return c;
    }
};

struct Triangle {
    Vec3 a, b, c;

    Vec3 raw_normal() const { return (b - a).cross(c - a); }
    double area() const { return 0.5 * raw_normal().norm(); }
    Vec3 unit_normal() const { return raw_normal().normalized(); }
    Vec3 centroid() const { return (a + b + c) / 3.0; }
    Aabb bounds() const {
        Aabb box;
        box.expand(a);
        box.expand(b);
        box.expand(c);
        return box;
    }
};

struct Plane {
    Vec3 normal; // unit
    double d;    // normal . x = d on the plane

    static Plane from_triangle(const Triangle &t) {
        const Vec3 n = t.unit_normal();
        return Plane{n, n.dot(t.a)};
    }
    double signed_distance(const Vec3 &p) const { return normal.dot(p) - d; }
    Vec3 mirror(const Vec3 &p) const { return p - 2.0 * signed_distance(p) * normal; }
};

// Intersection of the segment p0->p1 with a plane; returns the parameter t in
// (0,1) or nothing when the segment does not cross.
inline std::optional<double> segment_plane_t(const Plane &pl, const Vec3 &p0, const Vec3 &p1) {
    const double s0 = pl.signed_distance(p0);
    const double s1 = pl.signed_distance(p1);
    const double denom = s0 - s1;
    if (std::fabs(denom) < 1e-300)
        return std::nullopt;
    const double t = s0 / denom;
    if (t <= 0.0 || t >= 1.0)
        return std::nullopt;
    return t;
}

// Moeller-Trumbore segment/triangle test. Returns the segment parameter of
// the hit, or nothing. Hits outside (t_min, t_max) are ignored; the caller
// trims the ends to avoid self-hits at reflection points.
inline std::optional<double> segment_triangle_hit(const Vec3 &p0, const Vec3 &p1, const Triangle &tri,
                                                  double t_min = 1e-9, double t_max = 1.0 - 1e-9) {
    const Vec3 dir = p1 - p0;
    const Vec3 e1 = tri.b - tri.a;
    const Vec3 e2 = tri.c - tri.a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::fabs(det) < 1e-14)
        return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 tv = p0 - tri.a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0)
        return std::nullopt;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0)
        return std::nullopt;
    const double t = e2.dot(qv) * inv;
    if (t <= t_min || t >= t_max)
        return std::nullopt;
    return t;
}

// Point-in-triangle test for a point already known to lie on the triangle's
// plane. slack > 0 admits points slightly outside the edges.
inline bool point_in_triangle(const Vec3 &p, const Triangle &tri, double slack = 0.0) {
    const Vec3 n = tri.raw_normal();
    const double nn = n.norm();
    if (nn < 1e-300)
        return false;
    const auto inside_edge = [&](const Vec3 &v0, const Vec3 &v1) {
        const Vec3 e = v1 - v0;
        // cross.dot(n) = (distance from edge line) * |e| * |n|
        return e.cross(p - v0).dot(n) >= -slack * e.norm() * nn;
    };
    return inside_edge(tri.a, tri.b) && inside_edge(tri.b, tri.c) && inside_edge(tri.c, tri.a);
}

// Length of the part of segment p0->p1 inside the box (slab clipping).
inline double segment_aabb_overlap(const Vec3 &p0, const Vec3 &p1, const Aabb &box) {
    const Vec3 d = p1 - p0;
    double t0 = 0.0, t1 = 1.0;
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(d[i]) < 1e-300) {
            if (p0[i] < box.lo[i] || p0[i] > box.hi[i])
                return 0.0;
            continue;
        }
        double ta = (box.lo[i] - p0[i]) / d[i];
        double tb = (box.hi[i] - p0[i]) / d[i];
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1)
            return 0.0;
    }
    return (t1 - t0) * d.norm();
}

// ------------------------------------------------------------------------
// Convex polygon clipping (Sutherland-Hodgman against one half-space).
// Keeps the side where signed distance >= -slack.
// ------------------------------------------------------------------------
inline std::vector<Vec3> clip_polygon(const std::vector<Vec3> &poly, const Vec3 &normal, double offset,
                                      double slack = 1e-9) {
    std::vector<Vec3> out;
    const std::size_t n = poly.size();
    if (n == 0)
        return out;
    out.reserve(n + 2);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 &cur = poly[i];
        const Vec3 &nxt = poly[(i + 1) % n];
        const double sc = normal.dot(cur) - offset;
        const double sn = normal.dot(nxt) - offset;
        const bool in_c = sc >= -slack;
        const bool in_n = sn >= -slack;
        if (in_c)
            out.push_back(cur);
        if (in_c != in_n) {
            const double denom = sc - sn;
            if (std::fabs(denom) > 1e-300) {
                const double t = sc / denom;
                out.push_back(cur + t * (nxt - cur));
            }
        }
    }
    return out;
}

inline double polygon_area(const std::vector<Vec3> &poly) {
    if (poly.size() < 3)
        return 0.0;
    Vec3 s = Vec3::Zero();
    for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        s += (poly[i] - poly[0]).cross(poly[i + 1] - poly[0]);
    return 0.5 * s.norm();
}

} // namespace twincsi
