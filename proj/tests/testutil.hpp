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
//
// Shared test helpers and independent oracles. Everything here is test-only
// and deliberately written without reusing the library's computation paths
// it is meant to check.

#pragma once

#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <map>

#include "twincsi/raytracer.hpp"
#include "twincsi/scene.hpp"

namespace twincsi::testutil {

// A scene skeleton with reasonable OFDM defaults and one material.
inline Scene base_scene() {
    Scene s;
    s.materials.push_back({"concrete", 5.24, 0.123});
    s.bs.position = Vec3(0, 0, 10);
    s.bs.num_antennas = 4;
    s.bs.axis = Vec3(1, 0, 0);
    s.bs.boresight = Vec3(0, 1, 0);
    s.bs.fov_deg = 360.0;
    s.ofdm.fc_hz = 3.5e9;
    s.ofdm.num_subcarriers = 64;
    s.ofdm.delta_f_hz = 30e3;
    s.ofdm.max_delay_taps = 16;
    s.bs.element_spacing = 0.5 * s.ofdm.wavelength();
    s.ue_grid.push_back(Vec3(5, 5, 1.5));
    return s;
}

inline void add_facet(Scene &s, const Vec3 &a, const Vec3 &b, const Vec3 &c, int mat = 0) {
    s.facets.push_back({Triangle{a, b, c}, mat});
}

// Axis-aligned box as 12 triangles.
inline void add_box(Scene &s, const Vec3 &lo, const Vec3 &hi, int mat = 0) {
    const Vec3 v[8] = {{lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
                       {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
                       {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()}};
    const int q[6][4] = {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4}, {2, 3, 7, 6}, {1, 2, 6, 5}, {3, 0, 4, 7}};
    for (const auto &f : q) {
        add_facet(s, v[f[0]], v[f[1]], v[f[2]], mat);
        add_facet(s, v[f[0]], v[f[2]], v[f[3]], mat);
    }
}

// ------------------------------------------------------------------------
// Brute-force path enumeration oracle: every facet chain up to max_order,
// validated with the exact back-trace. Exponential; small scenes only.
// ------------------------------------------------------------------------
struct OraclePath {
    std::vector<int> chain;
    double length;
};

inline std::vector<OraclePath> brute_force_paths(const Scene &scene, const Vec3 &ue, int max_order) {
    std::vector<OraclePath> out;
    const int nf = static_cast<int>(scene.facets.size());
    std::vector<int> chain;
    const auto try_chain = [&]() {
        const auto poly = validate_specular_chain(scene, chain, ue);
        if (poly.empty())
            return;
        double len = 0.0;
        for (std::size_t i = 0; i + 1 < poly.size(); ++i)
            len += (poly[i + 1] - poly[i]).norm();
        out.push_back({chain, len});
    };
    const std::function<void(int)> recurse = [&](int depth) {
        try_chain();
        if (depth == max_order)
            return;
        for (int f = 0; f < nf; ++f) {
            if (!chain.empty() && chain.back() == f)
                continue;
            chain.push_back(f);
            recurse(depth + 1);
            chain.pop_back();
        }
    };
    recurse(0);
    return out;
}

// Exact point-to-triangle distance (region decomposition).
inline double point_triangle_dist(const Vec3 &p, const Triangle &t) {
    const Vec3 ab = t.b - t.a, ac = t.c - t.a, ap = p - t.a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0)
        return (p - t.a).norm();
    const Vec3 bp = p - t.b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3)
        return (p - t.b).norm();
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return (p - (t.a + v * ab)).norm();
    }
    const Vec3 cp = p - t.c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6)
        return (p - t.c).norm();
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return (p - (t.a + w * ac)).norm();
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (t.b + w * (t.c - t.b))).norm();
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return (p - (t.a + v * ab + w * ac)).norm();
}

// One-directional Hausdorff estimate: max over sampled points of the exact
// distance to the other mesh's triangles.
inline double hausdorff_oracle(const std::vector<Triangle> &from, const std::vector<Triangle> &to,
                               int samples_per_tri = 6) {
    double worst = 0.0;
    for (const auto &t : from) {
        std::vector<Vec3> pts = {t.a, t.b, t.c, t.centroid()};
        for (int i = 1; i < samples_per_tri; ++i) {
            const double u = static_cast<double>(i) / samples_per_tri;
            pts.push_back(t.a + u * (t.b - t.a) + (1.0 - u) * 0.5 * (t.c - t.a));
        }
        for (const auto &p : pts) {
            double best = std::numeric_limits<double>::max();
            for (const auto &o : to)
                best = std::min(best, point_triangle_dist(p, o));
            worst = std::max(worst, best);
        }
    }
    return worst;
}

// Icosphere: subdivided icosahedron scaled to the given radius.
inline std::vector<Triangle> icosphere(double radius, int subdivisions) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                           {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                           {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto &p : v)
        p.normalize();
    std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::vector<std::array<int, 3>> nf;
        std::map<std::pair<int, int>, int> midpoint;
        const auto mid = [&](int a, int b) {
            const auto k = std::minmax(a, b);
            const auto it = midpoint.find({k.first, k.second});
            if (it != midpoint.end())
                return it->second;
            const int id = static_cast<int>(v.size());
            v.push_back(((v[a] + v[b]) * 0.5).normalized());
            midpoint[{k.first, k.second}] = id;
            return id;
        };
        for (const auto &tri : f) {
            const int m01 = mid(tri[0], tri[1]), m12 = mid(tri[1], tri[2]), m02 = mid(tri[0], tri[2]);
            nf.push_back({tri[0], m01, m02});
            nf.push_back({tri[1], m12, m01});
            nf.push_back({tri[2], m02, m12});
            nf.push_back({m01, m12, m02});
        }
        f = std::move(nf);
    }
    std::vector<Triangle> tris;
    for (const auto &tri : f)
        tris.push_back({radius * v[tri[0]], radius * v[tri[1]], radius * v[tri[2]]});
    return tris;
}

} // namespace twincsi::testutil
