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
// Geometry fidelity pipeline: Poisson-disk surface sampling, point-cloud
// precision/recall/F1 at a distance threshold, occupancy + marching-cubes
// surface reconstruction, and quadric edge-collapse decimation. Also the EM
// material fidelity deltas.
//
// Nearest-neighbor queries are exact (uniform spatial grid with ring
// search); all randomized steps are seeded and reproducible.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>
#include <vector>

#include "twincsi/mc_tables.hpp"
#include "twincsi/scene.hpp"

namespace twincsi {

struct PointCloud {
    std::vector<Vec3> points;
    double density = 0.0; // points per m^2 requested at sampling time
};

inline std::vector<Triangle> facet_triangles(const std::vector<Facet> &facets) {
    std::vector<Triangle> tris;
    tris.reserve(facets.size());
    for (const auto &f : facets)
        tris.push_back(f.tri);
    return tris;
}

inline double total_area(const std::vector<Triangle> &tris) {
    double a = 0.0;
    for (const auto &t : tris)
        a += t.area();
    return a;
}

// ------------------------------------------------------------------------
// PointGrid - uniform hash grid for exact proximity queries.
// ------------------------------------------------------------------------
class PointGrid {
  public:
    PointGrid(const std::vector<Vec3> &points, double cell) : pts_(points), cell_(cell) {
        if (pts_.empty())
            throw validation_error("PointGrid: empty point set");
        if (!(cell_ > 0.0))
            throw validation_error("PointGrid: cell size must be > 0");
        Aabb box;
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            box.expand(pts_[i]);
            cells_[key(coord(pts_[i]))].push_back(static_cast<int>(i));
        }
        max_ring_ = static_cast<int>((box.hi - box.lo).norm() / cell_) + 2;
    }

    // Any stored point strictly within radius r of p?
    bool any_within(const Vec3 &p, double r) const {
        const double r2 = r * r;
        const int span = static_cast<int>(std::ceil(r / cell_));
        const auto c0 = coord(p);
        for (int dx = -span; dx <= span; ++dx)
            for (int dy = -span; dy <= span; ++dy)
                for (int dz = -span; dz <= span; ++dz) {
                    const auto it = cells_.find(key({c0[0] + dx, c0[1] + dy, c0[2] + dz}));
                    if (it == cells_.end())
                        continue;
                    for (int idx : it->second)
                        if ((pts_[idx] - p).squaredNorm() < r2)
                            return true;
                }
        return false;
    }

    // Exact distance to the nearest stored point.
    double nearest_dist(const Vec3 &p) const {
        const auto c0 = coord(p);
        double best2 = std::numeric_limits<double>::max();
        for (int ring = 0;; ++ring) {
            for (int dx = -ring; dx <= ring; ++dx)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dz = -ring; dz <= ring; ++dz) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                            continue; // shell only
                        const auto it = cells_.find(key({c0[0] + dx, c0[1] + dy, c0[2] + dz}));
                        if (it == cells_.end())
                            continue;
                        for (int idx : it->second)
                            best2 = std::min(best2, (pts_[idx] - p).squaredNorm());
                    }
            // Cells in ring m+1 hold points no closer than m * cell.
            const double lower = static_cast<double>(ring) * cell_;
            if (best2 <= lower * lower)
                return std::sqrt(best2);
            if (ring > max_ring_)
                return std::sqrt(best2); // whole grid scanned
        }
    }

  private:
    std::array<long, 3> coord(const Vec3 &p) const {
        return {static_cast<long>(std::floor(p.x() / cell_)), static_cast<long>(std::floor(p.y() / cell_)),
                static_cast<long>(std::floor(p.z() / cell_))};
    }
    static std::uint64_t key(const std::array<long, 3> &c) {
        std::uint64_t h = 1469598103934665603ULL;
        for (long v : c) {
            std::uint64_t u = static_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) {
                h ^= (u >> (8 * b)) & 0xff;
                h *= 1099511628211ULL;
            }
        }
        return h;
    }

    const std::vector<Vec3> &pts_;
    double cell_;
    int max_ring_ = 0;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

// ------------------------------------------------------------------------
// sample_point_cloud - area-weighted uniform candidates thinned by a
// Poisson-disk radius r = sqrt(1 / (pi * density)). Candidates are drawn at
// 3x the target count; sequential thinning then lands the expected yield
// near density * area.
// ------------------------------------------------------------------------
inline PointCloud sample_point_cloud(const std::vector<Triangle> &tris, double density, std::uint64_t seed) {
    if (!(density > 0.0))
        throw validation_error("sample_point_cloud: density must be > 0");
    if (tris.empty())
        throw validation_error("sample_point_cloud: no facets");

    std::vector<double> cum(tris.size());
    double area = 0.0;
    for (std::size_t i = 0; i < tris.size(); ++i) {
        area += tris[i].area();
        cum[i] = area;
    }
    if (area <= 0.0)
        throw validation_error("sample_point_cloud: zero surface area");

    const double r = std::sqrt(1.0 / (kPi * density));
    const std::size_t target = static_cast<std::size_t>(std::ceil(density * area));
    const std::size_t candidates = 3 * target;

    Rng rng(seed);
    PointCloud cloud;
    cloud.density = density;
    cloud.points.reserve(target);

    // Accepted-point hash grid with cell = r; neighbors within one ring.
    std::unordered_map<std::uint64_t, std::vector<int>> grid;
    const auto cell_of = [&](const Vec3 &p) {
        return std::array<long, 3>{static_cast<long>(std::floor(p.x() / r)),
                                   static_cast<long>(std::floor(p.y() / r)),
                                   static_cast<long>(std::floor(p.z() / r))};
    };
    const auto key_of = [](const std::array<long, 3> &c) {
        std::uint64_t h = 1469598103934665603ULL;
        for (long v : c) {
            std::uint64_t u = static_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) {
                h ^= (u >> (8 * b)) & 0xff;
                h *= 1099511628211ULL;
            }
        }
        return h;
    };

    for (std::size_t c = 0; c < candidates; ++c) {
        const double pick = rng.uniform() * area;
        const std::size_t fi = static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), pick) -
                                                        cum.begin());
        const Triangle &t = tris[std::min(fi, tris.size() - 1)];
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3 p = t.a + u * (t.b - t.a) + v * (t.c - t.a);

        const auto cc = cell_of(p);
        bool blocked = false;
        for (int dx = -1; dx <= 1 && !blocked; ++dx)
            for (int dy = -1; dy <= 1 && !blocked; ++dy)
                for (int dz = -1; dz <= 1 && !blocked; ++dz) {
                    const auto it = grid.find(key_of({cc[0] + dx, cc[1] + dy, cc[2] + dz}));
                    if (it == grid.end())
                        continue;
                    for (int idx : it->second)
                        if ((cloud.points[idx] - p).squaredNorm() < r * r) {
                            blocked = true;
                            break;
                        }
                }
        if (!blocked) {
            grid[key_of(cc)].push_back(static_cast<int>(cloud.points.size()));
            cloud.points.push_back(p);
        }
    }
    return cloud;
}

// ------------------------------------------------------------------------
// f1_score - point-cloud precision/recall/F1 at threshold tau.
//   P = 100 |{x in X : d(x, X_hat) < tau}| / |X|   (and R symmetrically)
//   F = 2PR / (P + R), 0 when P + R = 0.
// ------------------------------------------------------------------------
struct F1Result {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline F1Result f1_score(const PointCloud &x, const PointCloud &x_hat, double tau) {
    if (x.points.empty() || x_hat.points.empty())
        throw validation_error("f1_score: empty point cloud");
    if (!(tau > 0.0))
        throw validation_error("f1_score: tau must be > 0");

    const PointGrid grid_hat(x_hat.points, tau);
    std::size_t hits = 0;
    for (const auto &p : x.points)
        if (grid_hat.any_within(p, tau))
            ++hits;
    const double precision = 100.0 * static_cast<double>(hits) / static_cast<double>(x.points.size());

    const PointGrid grid_x(x.points, tau);
    hits = 0;
    for (const auto &p : x_hat.points)
        if (grid_x.any_within(p, tau))
            ++hits;
    const double recall = 100.0 * static_cast<double>(hits) / static_cast<double>(x_hat.points.size());

    F1Result r;
    r.precision = precision;
    r.recall = recall;
    r.f1 = (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return r;
}

// threshold_select - tau as the maximum one-directional nearest-neighbor
// distance between two independent samplings of the same mesh (the 100th
// percentile rule).
inline double threshold_select(const std::vector<Triangle> &tris, double density, std::uint64_t seed_a,
                               std::uint64_t seed_b) {
    const PointCloud a = sample_point_cloud(tris, density, seed_a);
    const PointCloud b = sample_point_cloud(tris, density, seed_b);
    if (a.points.empty() || b.points.empty())
        throw validation_error("threshold_select: sampling produced an empty cloud");
    const double cell = std::sqrt(1.0 / (kPi * density));
    const PointGrid grid_b(b.points, cell);
    double tau = 0.0;
    for (const auto &p : a.points)
        tau = std::max(tau, grid_b.nearest_dist(p));
    return tau;
}

// ------------------------------------------------------------------------
// Indexed meshes
// ------------------------------------------------------------------------
struct IndexedMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
};

inline IndexedMesh weld_triangles(const std::vector<Triangle> &tris, double eps = 1e-6) {
    IndexedMesh mesh;
    std::map<std::array<long, 3>, int> lut;
    const auto vid = [&](const Vec3 &p) {
        const std::array<long, 3> k = {static_cast<long>(std::llround(p.x() / eps)),
                                       static_cast<long>(std::llround(p.y() / eps)),
                                       static_cast<long>(std::llround(p.z() / eps))};
        const auto it = lut.find(k);
        if (it != lut.end())
            return it->second;
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        lut.emplace(k, id);
        return id;
    };
    for (const auto &t : tris) {
        const std::array<int, 3> f = {vid(t.a), vid(t.b), vid(t.c)};
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            continue;
        mesh.faces.push_back(f);
    }
    return mesh;
}

inline std::vector<Triangle> mesh_triangles(const IndexedMesh &mesh) {
    std::vector<Triangle> tris;
    tris.reserve(mesh.faces.size());
    for (const auto &f : mesh.faces)
        tris.push_back({mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]});
    return tris;
}

// Connected components over shared (welded) vertices; returns groups of
// facet indices. Used to reconstruct buildings independently.
inline std::vector<std::vector<int>> split_components(const std::vector<Triangle> &tris, double eps = 1e-6) {
    std::vector<int> parent(tris.size() * 3);
    for (std::size_t i = 0; i < parent.size(); ++i)
        parent[i] = static_cast<int>(i);
    const auto find = [&](int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    const auto unite = [&](int a, int b) { parent[find(a)] = find(b); };

    std::map<std::array<long, 3>, int> first_corner;
    for (std::size_t i = 0; i < tris.size(); ++i) {
        const Vec3 *vs[3] = {&tris[i].a, &tris[i].b, &tris[i].c};
        for (int c = 0; c < 3; ++c) {
            const std::array<long, 3> k = {static_cast<long>(std::llround(vs[c]->x() / eps)),
                                           static_cast<long>(std::llround(vs[c]->y() / eps)),
                                           static_cast<long>(std::llround(vs[c]->z() / eps))};
            const int corner = static_cast<int>(3 * i + c);
            const auto it = first_corner.find(k);
            if (it == first_corner.end())
                first_corner.emplace(k, corner);
            else
                unite(corner, it->second);
        }
        unite(static_cast<int>(3 * i), static_cast<int>(3 * i + 1));
        unite(static_cast<int>(3 * i), static_cast<int>(3 * i + 2));
    }
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 0; i < tris.size(); ++i)
        groups[find(static_cast<int>(3 * i))].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> out;
    out.reserve(groups.size());
    for (auto &kv : groups)
        out.push_back(std::move(kv.second));
    return out;
}

// ------------------------------------------------------------------------
// reconstruct_mesh - voxel occupancy + exterior flood fill + marching cubes.
//
// The cloud is rasterized into a voxel grid; voxels unreachable from the
// outside count as solid, which closes buildings sampled as thin shells.
// Marching cubes runs on the resulting inside/outside field over voxel
// centers. Edge crossings are placed using exact nearest-point distances so
// the surface hugs the sampled geometry instead of the voxel lattice.
// ------------------------------------------------------------------------
inline IndexedMesh reconstruct_mesh(const PointCloud &cloud, double voxel_size = -1.0) {
    if (cloud.points.empty())
        throw validation_error("reconstruct_mesh: empty cloud");

    // Degenerate when no 4 points span a tetrahedron.
    {
        const Vec3 &p0 = cloud.points[0];
        double best = 0.0;
        Vec3 p1 = p0;
        for (const auto &p : cloud.points)
            if ((p - p0).norm() > best) {
                best = (p - p0).norm();
                p1 = p;
            }
        if (best < 1e-9)
            throw validation_error("reconstruct_mesh: degenerate cloud (all points coincide)");
        best = 0.0;
        Vec3 p2 = p0;
        for (const auto &p : cloud.points) {
            const double d = (p - p0).cross(p - p1).norm();
            if (d > best) {
                best = d;
                p2 = p;
            }
        }
        if (best < 1e-9)
            throw validation_error("reconstruct_mesh: degenerate cloud (collinear points)");
        const Vec3 n = (p1 - p0).cross(p2 - p0).normalized();
        best = 0.0;
        for (const auto &p : cloud.points)
            best = std::max(best, std::fabs(n.dot(p - p0)));
        if (best < 1e-9)
            throw validation_error("reconstruct_mesh: degenerate cloud (coplanar points)");
    }

    double voxel = voxel_size;
    if (voxel <= 0.0) {
        const double r = cloud.density > 0.0 ? std::sqrt(1.0 / (kPi * cloud.density)) : 0.0;
        voxel = std::max(0.5, 1.5 * r);
    }

    Aabb box;
    for (const auto &p : cloud.points)
        box.expand(p);
    // Two empty voxel layers around the data so the boundary is outside. The
    // extra half-voxel shift keeps axis-aligned geometry away from voxel
    // boundaries, where rasterization would be decided by rounding noise.
    const Vec3 origin = box.lo - Vec3::Constant(2.5 * voxel);
    const auto dim = [&](double lo, double hi) {
        return static_cast<long>(std::ceil((hi - lo) / voxel)) + 6;
    };
    const long nx = dim(box.lo.x(), box.hi.x());
    const long ny = dim(box.lo.y(), box.hi.y());
    const long nz = dim(box.lo.z(), box.hi.z());
    if (nx * ny * nz > 100'000'000L)
        throw error("reconstruct_mesh: voxel grid too large (" + std::to_string(nx * ny * nz) + " cells)");

    const auto vidx = [&](long i, long j, long k) { return (i * ny + j) * nz + k; };
    std::vector<std::uint8_t> occupied(static_cast<std::size_t>(nx * ny * nz), 0);
    for (const auto &p : cloud.points) {
        const long i = static_cast<long>(std::floor((p.x() - origin.x()) / voxel));
        const long j = static_cast<long>(std::floor((p.y() - origin.y()) / voxel));
        const long k = static_cast<long>(std::floor((p.z() - origin.z()) / voxel));
        occupied[vidx(i, j, k)] = 1;
    }

    // Morphological closing so the flood fill cannot leak through sampling
    // holes in thin shells: dilate (26-neighborhood), flood the exterior,
    // erode the resulting solid back, and re-add the sampled voxels.
    std::vector<std::uint8_t> dilated(occupied.size(), 0);
    for (long i = 0; i < nx; ++i)
        for (long j = 0; j < ny; ++j)
            for (long k = 0; k < nz; ++k) {
                if (!occupied[vidx(i, j, k)])
                    continue;
                for (long di = -1; di <= 1; ++di)
                    for (long dj = -1; dj <= 1; ++dj)
                        for (long dk = -1; dk <= 1; ++dk) {
                            const long a = i + di, b = j + dj, c = k + dk;
                            if (a >= 0 && b >= 0 && c >= 0 && a < nx && b < ny && c < nz)
                                dilated[vidx(a, b, c)] = 1;
                        }
            }

    std::vector<std::uint8_t> outside(occupied.size(), 0);
    {
        std::vector<std::array<long, 3>> stack;
        const auto push = [&](long i, long j, long k) {
            if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz)
                return;
            const auto id = vidx(i, j, k);
            if (dilated[id] || outside[id])
                return;
            outside[id] = 1;
            stack.push_back({i, j, k});
        };
        push(0, 0, 0);
        while (!stack.empty()) {
            const auto [i, j, k] = stack.back();
            stack.pop_back();
            push(i + 1, j, k);
            push(i - 1, j, k);
            push(i, j + 1, k);
            push(i, j - 1, k);
            push(i, j, k + 1);
            push(i, j, k - 1);
        }
    }

    // inside = occupied + eroded interior (removes the dilation skin)
    std::vector<std::uint8_t> solid(occupied.size(), 0);
    for (long i = 0; i < nx; ++i)
        for (long j = 0; j < ny; ++j)
            for (long k = 0; k < nz; ++k) {
                const auto id = vidx(i, j, k);
                if (occupied[id]) {
                    solid[id] = 1;
                    continue;
                }
                if (outside[id])
                    continue;
                const bool interior = i > 0 && j > 0 && k > 0 && i + 1 < nx && j + 1 < ny && k + 1 < nz &&
                                      !outside[vidx(i - 1, j, k)] && !outside[vidx(i + 1, j, k)] &&
                                      !outside[vidx(i, j - 1, k)] && !outside[vidx(i, j + 1, k)] &&
                                      !outside[vidx(i, j, k - 1)] && !outside[vidx(i, j, k + 1)];
                if (interior)
                    solid[id] = 1;
            }

    const PointGrid nn(cloud.points, voxel);
    const auto center = [&](long i, long j, long k) {
        return Vec3(origin.x() + (i + 0.5) * voxel, origin.y() + (j + 0.5) * voxel,
                    origin.z() + (k + 0.5) * voxel);
    };
    const auto inside = [&](long i, long j, long k) { return solid[vidx(i, j, k)] != 0; };

    // Crossing position between an inside and an outside voxel center from
    // distances to the cloud (clamped to avoid degenerate slivers).
    const auto crossing = [&](const Vec3 &pin, const Vec3 &pout) {
        const double da = std::min(nn.nearest_dist(pin), 2.0 * voxel);
        const double db = std::min(nn.nearest_dist(pout), 2.0 * voxel);
        double t = (da + db > 1e-12) ? da / (da + db) : 0.5;
        t = std::clamp(t, 0.05, 0.95);
        return Vec3(pin + t * (pout - pin));
    };

    IndexedMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    const auto edge_key = [&](long i, long j, long k, int axis) {
        return ((static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(ny + 1) +
                 static_cast<std::uint64_t>(j)) *
                    static_cast<std::uint64_t>(nz + 1) +
                static_cast<std::uint64_t>(k)) *
                   3ULL +
               static_cast<std::uint64_t>(axis);
    };

    // Cube corner offsets in the classic table order; edges reference the
    // canonical (base corner, axis) pairs below.
    static const long corner_off[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                          {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    static const int edge_corners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                            {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    static const int edge_axis[12] = {0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2};
    static const int edge_base[12] = {0, 1, 3, 0, 4, 5, 7, 4, 0, 1, 2, 3};

    for (long i = 0; i + 1 < nx; ++i) {
        for (long j = 0; j + 1 < ny; ++j) {
            for (long k = 0; k + 1 < nz; ++k) {
                int cube = 0;
                bool ins[8];
                for (int c = 0; c < 8; ++c) {
                    ins[c] = inside(i + corner_off[c][0], j + corner_off[c][1], k + corner_off[c][2]);
                    if (!ins[c])
                        cube |= 1 << c; // bit set when below the iso level (outside)
                }
                if (detail::kMcEdgeTable[cube] == 0)
                    continue;
                int everts[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(detail::kMcEdgeTable[cube] & (1 << e)))
                        continue;
                    const int b = edge_base[e];
                    const std::uint64_t kk = edge_key(i + corner_off[b][0], j + corner_off[b][1],
                                                      k + corner_off[b][2], edge_axis[e]);
                    const auto it = edge_vertex.find(kk);
                    if (it != edge_vertex.end()) {
                        everts[e] = it->second;
                        continue;
                    }
                    const int c0 = edge_corners[e][0], c1 = edge_corners[e][1];
                    const Vec3 p0 = center(i + corner_off[c0][0], j + corner_off[c0][1], k + corner_off[c0][2]);
                    const Vec3 p1 = center(i + corner_off[c1][0], j + corner_off[c1][1], k + corner_off[c1][2]);
                    const Vec3 v = ins[c0] ? crossing(p0, p1) : crossing(p1, p0);
                    everts[e] = static_cast<int>(mesh.vertices.size());
                    mesh.vertices.push_back(v);
                    edge_vertex.emplace(kk, everts[e]);
                }
                for (int t = 0; detail::kMcTriTable[cube][t] != -1; t += 3) {
                    const std::array<int, 3> f = {everts[detail::kMcTriTable[cube][t]],
                                                  everts[detail::kMcTriTable[cube][t + 1]],
                                                  everts[detail::kMcTriTable[cube][t + 2]]};
                    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
                        continue;
                    const Triangle tri{mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]};
                    if (tri.area() < 1e-12)
                        continue;
                    mesh.faces.push_back(f);
                }
            }
        }
    }
    if (mesh.faces.empty())
        throw validation_error("reconstruct_mesh: no surface extracted");
    return mesh;
}

// ------------------------------------------------------------------------
// decimate_mesh - greedy quadric edge collapse to a face budget.
//
// Candidate positions per collapse are the two endpoints and the midpoint;
// collapses that would flip a surviving face normal, create a degenerate
// face, or break the local link condition are rejected. When the queue
// drains before the budget is met the best achieved mesh is returned with
// reached_target = false.
// ------------------------------------------------------------------------
struct DecimateResult {
    IndexedMesh mesh;
    bool reached_target = true;
};

inline DecimateResult decimate_mesh(const IndexedMesh &input, std::size_t target_faces) {
    if (target_faces < 4)
        throw validation_error("decimate_mesh: target must be >= 4");

    DecimateResult res;
    res.mesh = input;
    IndexedMesh &mesh = res.mesh;

    const std::size_t nv = mesh.vertices.size();
    std::vector<Eigen::Matrix4d> quadric(nv, Eigen::Matrix4d::Zero());
    std::vector<std::set<int>> vfaces(nv);
    std::vector<std::uint8_t> face_alive(mesh.faces.size(), 1);
    std::vector<int> vertex_version(nv, 0);
    std::vector<std::uint8_t> vertex_alive(nv, 1);

    const auto face_plane_quadric = [&](const std::array<int, 3> &f) {
        const Triangle t{mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]};
        const Vec3 n = t.raw_normal();
        const double nn = n.norm();
        Eigen::Vector4d p;
        if (nn < 1e-300)
            return Eigen::Matrix4d::Zero().eval();
        p << n.x() / nn, n.y() / nn, n.z() / nn, -n.dot(t.a) / nn;
        return (p * p.transpose()).eval();
    };

    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto &f = mesh.faces[fi];
        const Eigen::Matrix4d q = face_plane_quadric(f);
        for (int c = 0; c < 3; ++c) {
            quadric[f[c]] += q;
            vfaces[f[c]].insert(static_cast<int>(fi));
        }
    }

    const auto vertex_error = [&](const Eigen::Matrix4d &q, const Vec3 &v) {
        Eigen::Vector4d h;
        h << v.x(), v.y(), v.z(), 1.0;
        return h.dot(q * h);
    };

    struct Cand {
        double cost;
        int u, v;       // collapse v into u
        int uver, vver; // versions at push time
        Vec3 pos;
        bool operator>(const Cand &o) const {
            if (cost != o.cost)
                return cost > o.cost;
            if (u != o.u)
                return u > o.u;
            return v > o.v;
        }
    };
    std::priority_queue<Cand, std::vector<Cand>, std::greater<Cand>> queue;

    const auto push_edge = [&](int u, int v) {
        if (u > v)
            std::swap(u, v);
        const Eigen::Matrix4d q = quadric[u] + quadric[v];
        const Vec3 mid = 0.5 * (mesh.vertices[u] + mesh.vertices[v]);
        const double edge_len = (mesh.vertices[u] - mesh.vertices[v]).norm();

        std::vector<Vec3> cands = {mid, mesh.vertices[u], mesh.vertices[v]};
        // Quadric-optimal position when the 3x3 block is well conditioned.
        {
            const Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
            const Eigen::Vector3d b = -q.topRightCorner<3, 1>();
            const Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
            if (lu.isInvertible()) {
                const Vec3 opt = lu.solve(b);
                if ((opt - mid).norm() < 4.0 * edge_len + 1e-9)
                    cands.insert(cands.begin(), opt);
            }
        }
        double best = std::numeric_limits<double>::max();
        Vec3 best_pos = mid;
        for (const auto &p : cands) {
            const double e = vertex_error(q, p);
            if (e < best - 1e-15) {
                best = e;
                best_pos = p;
            }
        }
        queue.push({best, u, v, vertex_version[u], vertex_version[v], best_pos});
    };

    {
        std::set<std::pair<int, int>> edges;
        for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
            const auto &f = mesh.faces[fi];
            for (int c = 0; c < 3; ++c) {
                int a = f[c], b = f[(c + 1) % 3];
                if (a > b)
                    std::swap(a, b);
                edges.emplace(a, b);
            }
        }
        for (const auto &[a, b] : edges)
            push_edge(a, b);
    }

    std::size_t alive_faces = mesh.faces.size();

    const auto neighbors_of = [&](int v) {
        std::set<int> nb;
        for (int fi : vfaces[v])
            if (face_alive[fi])
                for (int c = 0; c < 3; ++c)
                    if (mesh.faces[fi][c] != v)
                        nb.insert(mesh.faces[fi][c]);
        return nb;
    };

    while (alive_faces > target_faces && !queue.empty()) {
        const Cand cand = queue.top();
        queue.pop();
        const int u = cand.u, v = cand.v;
        if (!vertex_alive[u] || !vertex_alive[v])
            continue;
        if (cand.uver != vertex_version[u] || cand.vver != vertex_version[v])
            continue; // stale entry

        // Link condition: u and v may share at most two neighbors.
        const std::set<int> nu = neighbors_of(u);
        const std::set<int> nv = neighbors_of(v);
        if (!nu.count(v))
            continue; // edge no longer exists
        int common = 0;
        for (int n : nu)
            if (nv.count(n))
                ++common;
        if (common > 2)
            continue;

        // Normal-flip and degeneracy test over surviving faces.
        bool ok = true;
        for (int vi : {u, v}) {
            for (int fi : vfaces[vi]) {
                if (!face_alive[fi])
                    continue;
                const auto &f = mesh.faces[fi];
                const bool dies = (f[0] == u || f[1] == u || f[2] == u) && (f[0] == v || f[1] == v || f[2] == v);
                if (dies)
                    continue;
                Vec3 p[3], pnew[3];
                for (int c = 0; c < 3; ++c) {
                    p[c] = mesh.vertices[f[c]];
                    pnew[c] = (f[c] == u || f[c] == v) ? cand.pos : p[c];
                }
                const Vec3 n_old = (p[1] - p[0]).cross(p[2] - p[0]);
                const Vec3 n_new = (pnew[1] - pnew[0]).cross(pnew[2] - pnew[0]);
                // reject inverted (dot < 0) or degenerate faces; a pure
                // right-angle rotation is not an inversion
                if (n_new.norm() < 1e-12 || n_old.dot(n_new) < 0.0) {
                    ok = false;
                    break;
                }
            }
            if (!ok)
                break;
        }
        if (!ok)
            continue;

        // Commit: v merges into u at cand.pos.
        mesh.vertices[u] = cand.pos;
        quadric[u] += quadric[v];
        vertex_alive[v] = 0;
        ++vertex_version[u];

        for (int fi : vfaces[v]) {
            if (!face_alive[fi])
                continue;
            auto &f = mesh.faces[fi];
            const bool has_u = (f[0] == u || f[1] == u || f[2] == u);
            if (has_u) {
                face_alive[fi] = 0;
                --alive_faces;
                continue;
            }
            for (int c = 0; c < 3; ++c)
                if (f[c] == v)
                    f[c] = u;
            vfaces[u].insert(fi);
        }
        vfaces[v].clear();

        for (int n : neighbors_of(u))
            push_edge(u, n);
    }

    res.reached_target = alive_faces <= target_faces;

    // Compact the result.
    IndexedMesh out;
    std::vector<int> remap(mesh.vertices.size(), -1);
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        if (!face_alive[fi])
            continue;
        std::array<int, 3> nf;
        for (int c = 0; c < 3; ++c) {
            const int ov = mesh.faces[fi][c];
            if (remap[ov] < 0) {
                remap[ov] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[ov]);
            }
            nf[c] = remap[ov];
        }
        out.faces.push_back(nf);
    }
    res.mesh = std::move(out);
    return res;
}

// ------------------------------------------------------------------------
// EM material fidelity
// ------------------------------------------------------------------------
struct MaterialDelta {
    double delta_eps_r = 0.0;
    double delta_sigma = 0.0;
    bool sigma_absolute = false; // reference sigma was zero; absolute diff reported
};

inline MaterialDelta material_delta(const Material &real, const Material &twin) {
    if (real.eps_r <= 0.0)
        throw validation_error("material_delta: reference eps_r must be > 0");
    MaterialDelta d;
    d.delta_eps_r = std::fabs(real.eps_r - twin.eps_r) / real.eps_r;
    if (real.sigma > 0.0) {
        d.delta_sigma = std::fabs(real.sigma - twin.sigma) / real.sigma;
    } else {
        d.delta_sigma = std::fabs(real.sigma - twin.sigma);
        d.sigma_absolute = true;
    }
    return d;
}

// Aggregated fidelity summary for one twin configuration.
struct FidelityReport {
    double f1 = 100.0;
    double precision = 100.0;
    double recall = 100.0;
    double tau_m = 0.0;
    double delta_eps_r = 0.0;
    double delta_sigma = 0.0;
    int max_reflections = 4;
    double fov_deg = 180.0;
};

} // namespace twincsi
