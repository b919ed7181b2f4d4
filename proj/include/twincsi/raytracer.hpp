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
// Deterministic image-method ray tracer.
//
// Specular paths are enumerated exactly: the BS is mirrored recursively
// across facet planes, forming an image tree whose nodes carry the clipped
// "beam" polygon (the region of the facet reachable by the specular bundle,
// occlusion ignored). A UE query walks the tree, tests membership in each
// beam, and confirms candidates with an exact mirror back-trace plus
// per-segment occlusion tests. Facets are two-sided reflectors; diffraction,
// diffuse scattering and transmission are not modeled.

#pragma once

#include <complex>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "twincsi/scene.hpp"

namespace twincsi {

struct Path {
    std::complex<double> gain;     // linear complex amplitude
    double delay_s = 0.0;          // seconds, = length / c
    double aod_az_rad = 0.0;       // azimuth of departure, from +x, CCW
    double aod_el_rad = 0.0;       // elevation of departure, from horizontal, up+
    std::vector<int> bounce_facets;
    double length_m = 0.0;

    int order() const { return static_cast<int>(bounce_facets.size()); }
};

struct TraceConfig {
    int max_reflections = 4;
    double min_path_gain_db = -160.0; // prune threshold on 20*log10(|gain|)
    bool apply_fov = true;
    bool visibility_prune = true; // sampled facet-facet visibility graph
};

// TE (perpendicular) Fresnel reflection coefficient for incidence from air.
//   Gamma = (cos(ti) - sqrt(eps_c - sin^2(ti))) / (cos(ti) + sqrt(eps_c - sin^2(ti)))
inline std::complex<double> fresnel_coeff(const Material &m, double incidence_angle_rad, double freq_hz) {
    const std::complex<double> eps_c = complex_permittivity(m, freq_hz);
    const double ci = std::cos(incidence_angle_rad);
    const double si = std::sin(incidence_angle_rad);
    const std::complex<double> root = std::sqrt(eps_c - si * si);
    return (ci - root) / (ci + root);
}

namespace detail {

// True when the segment p0->p1 is blocked by any facet other than the two
// excluded ones (the facets the segment endpoints lie on).
inline bool segment_occluded(const std::vector<Facet> &facets, const Vec3 &p0, const Vec3 &p1, int exclude_a,
                             int exclude_b) {
    for (std::size_t i = 0; i < facets.size(); ++i) {
        const int fi = static_cast<int>(i);
        if (fi == exclude_a || fi == exclude_b)
            continue;
        if (segment_triangle_hit(p0, p1, facets[i].tri))
            return true;
    }
    return false;
}

inline bool coplanar_facets(const Plane &a, const Plane &b) {
    // Identical plane up to orientation: n_b = s n_a and d_b = s d_a.
    const double s = a.normal.dot(b.normal);
    if (std::fabs(s) < 1.0 - 1e-9)
        return false;
    return std::fabs(b.d - s * a.d) < 1e-9;
}

} // namespace detail

// ------------------------------------------------------------------------
// validate_specular_chain - exact image-method back-trace.
//
// Returns the polyline BS -> hit_1 -> ... -> hit_L -> UE when every mirror
// unfolding lands inside its facet triangle and every segment is unoccluded;
// empty otherwise.
// ------------------------------------------------------------------------
inline std::vector<Vec3> validate_specular_chain(const Scene &scene, const std::vector<int> &bounce_facets,
                                                 const Vec3 &ue) {
    const std::size_t order = bounce_facets.size();
    for (int f : bounce_facets)
        if (f < 0 || f >= static_cast<int>(scene.facets.size()))
            throw validation_error("bounce facet index " + std::to_string(f) + " out of range");

    if (order == 0) {
        if (detail::segment_occluded(scene.facets, scene.bs.position, ue, -1, -1))
            return {};
        return {scene.bs.position, ue};
    }

    std::vector<Plane> planes(order);
    std::vector<Vec3> images(order + 1);
    images[0] = scene.bs.position;
    for (std::size_t k = 0; k < order; ++k) {
        planes[k] = Plane::from_triangle(scene.facets[bounce_facets[k]].tri);
        images[k + 1] = planes[k].mirror(images[k]);
    }

    // Back-trace from the UE through each mirror plane.
    std::vector<Vec3> hits(order);
    Vec3 p = ue;
    for (std::size_t k = order; k-- > 0;) {
        const auto t = segment_plane_t(planes[k], images[k + 1], p);
        if (!t)
            return {};
        const Vec3 r = images[k + 1] + *t * (p - images[k + 1]);
        if (!point_in_triangle(r, scene.facets[bounce_facets[k]].tri, 1e-9))
            return {};
        hits[k] = r;
        p = r;
    }

    std::vector<Vec3> poly;
    poly.reserve(order + 2);
    poly.push_back(scene.bs.position);
    for (const auto &h : hits)
        poly.push_back(h);
    poly.push_back(ue);

    // Occlusion per segment, ignoring the facets the endpoints lie on.
    for (std::size_t s = 0; s + 1 < poly.size(); ++s) {
        const int fa = (s == 0) ? -1 : bounce_facets[s - 1];
        const int fb = (s + 1 == poly.size() - 1) ? -1 : bounce_facets[s];
        if (detail::segment_occluded(scene.facets, poly[s], poly[s + 1], fa, fb))
            return {};
    }
    return poly;
}

// ------------------------------------------------------------------------
// path_gain - amplitude model
//   alpha = lambda/(4 pi L) * prod Gamma_i * 10^(-A_fol/20) * exp(-j 2 pi L / lambda)
// with A_fol the accumulated foliage crossing in dB.
// ------------------------------------------------------------------------
inline std::complex<double> path_gain(const Scene &scene, const std::vector<Vec3> &polyline,
                                      const std::vector<int> &bounce_facets, double freq_hz) {
    if (polyline.size() != bounce_facets.size() + 2)
        throw validation_error("path_gain: polyline/bounce mismatch");
    const double lambda = kSpeedOfLight / freq_hz;

    double length = 0.0;
    double atten_db = 0.0;
    for (std::size_t s = 0; s + 1 < polyline.size(); ++s) {
        length += (polyline[s + 1] - polyline[s]).norm();
        for (const auto &vol : scene.foliage)
            atten_db += segment_aabb_overlap(polyline[s], polyline[s + 1], vol.box) * vol.atten_db_per_m;
    }

    std::complex<double> refl(1.0, 0.0);
    for (std::size_t k = 0; k < bounce_facets.size(); ++k) {
        const Facet &f = scene.facets[bounce_facets[k]];
        const Vec3 n = f.tri.unit_normal();
        const Vec3 din = (polyline[k + 1] - polyline[k]).normalized();
        const double c = std::min(1.0, std::fabs(din.dot(n))); // two-sided facet
        const double theta_i = std::acos(c);
        refl *= fresnel_coeff(scene.materials[f.material_id], theta_i, freq_hz);
    }

    const double amp = lambda / (4.0 * kPi * length) * std::pow(10.0, -atten_db / 20.0);
    const double phase = -2.0 * kPi * length / lambda;
    return amp * refl * std::complex<double>(std::cos(phase), std::sin(phase));
}

// Keeps paths whose horizontal-plane departure direction is within
// fov_deg/2 of the boresight. Vertical departures (no horizontal component)
// and vertical boresights leave the angle undefined; such paths are kept.
inline std::vector<Path> fov_filter(const std::vector<Path> &paths, const ArrayConfig &array) {
    const double half_fov_rad = 0.5 * array.fov_deg * kPi / 180.0;
    const double bx = array.boresight.x(), by = array.boresight.y();
    const double bn = std::hypot(bx, by);
    std::vector<Path> out;
    out.reserve(paths.size());
    for (const auto &p : paths) {
        bool keep = true;
        const double dx = std::cos(p.aod_el_rad) * std::cos(p.aod_az_rad);
        const double dy = std::cos(p.aod_el_rad) * std::sin(p.aod_az_rad);
        const double dn = std::hypot(dx, dy);
        if (bn > 1e-12 && dn > 1e-12) {
            double c = (dx * bx + dy * by) / (dn * bn);
            c = std::clamp(c, -1.0, 1.0);
            keep = std::acos(c) <= half_fov_rad + 1e-12;
        }
        if (keep)
            out.push_back(p);
    }
    return out;
}

// ------------------------------------------------------------------------
// ImageTracer - per-scene image tree, reusable across UE queries.
// ------------------------------------------------------------------------
class ImageTracer {
  public:
    ImageTracer(const Scene &scene, const TraceConfig &cfg) : scene_(scene), cfg_(cfg) {
        planes_.reserve(scene.facets.size());
        for (const auto &f : scene.facets)
            planes_.push_back(Plane::from_triangle(f.tri));
        ue_box_ = Aabb{};
        for (const auto &p : scene.ue_grid)
            ue_box_.expand(p);
        ue_box_.lo -= Vec3::Constant(1e-6);
        ue_box_.hi += Vec3::Constant(1e-6);
        if (cfg.visibility_prune)
            build_visibility();
        build_tree();
    }

    const TraceConfig &config() const { return cfg_; }
    std::size_t node_count() const { return nodes_.size(); }

    std::vector<Path> trace(const Vec3 &ue) const {
        std::vector<Path> out;
        // Line of sight.
        if (!detail::segment_occluded(scene_.facets, scene_.bs.position, ue, -1, -1))
            emit_path(out, {scene_.bs.position, ue}, {});

        // The grid-box reachability flag only applies to queries inside the
        // grid box; other points get the full node scan.
        const bool use_reach_flag = ue_box_.valid() && (ue.array() >= ue_box_.lo.array()).all() &&
                                    (ue.array() <= ue_box_.hi.array()).all();

        std::vector<int> chain;
        for (std::size_t ni = 0; ni < nodes_.size(); ++ni) {
            const Node &n = nodes_[ni];
            if (use_reach_flag && !n.ue_candidate)
                continue;
            // Quick beam membership: UE beyond the mirror plane, back-trace
            // crossing inside the clipped polygon (with slack; the exact
            // validator is the arbiter).
            const Plane &pl = planes_[n.facet];
            const double s_img = pl.signed_distance(n.image);
            const double s_ue = pl.signed_distance(ue);
            if (s_img * s_ue >= 0.0)
                continue;
            const auto t = segment_plane_t(pl, n.image, ue);
            if (!t)
                continue;
            const Vec3 x = n.image + *t * (ue - n.image);
            if (!point_in_beam(n, x))
                continue;

            chain.clear();
            for (int cur = static_cast<int>(ni); cur >= 0; cur = nodes_[cur].parent)
                chain.push_back(nodes_[cur].facet);
            std::reverse(chain.begin(), chain.end());

            const auto poly = validate_specular_chain(scene_, chain, ue);
            if (!poly.empty())
                emit_path(out, poly, chain);
        }
        if (cfg_.apply_fov)
            out = fov_filter(out, scene_.bs);
        return out;
    }

  private:
    struct Node {
        int facet = -1;
        int parent = -1;
        int order = 1;
        Vec3 image;               // BS mirrored across the chain up to here
        Vec3 prev_image;          // image one level up (defines beam direction)
        std::vector<Vec3> beam;   // convex region of the facet reachable by the bundle
        bool ue_candidate = true; // beam cone may intersect the UE grid box
    };

    void emit_path(std::vector<Path> &out, const std::vector<Vec3> &poly, const std::vector<int> &chain) const {
        Path p;
        p.bounce_facets = chain;
        p.length_m = 0.0;
        for (std::size_t s = 0; s + 1 < poly.size(); ++s)
            p.length_m += (poly[s + 1] - poly[s]).norm();
        p.gain = path_gain(scene_, poly, chain, scene_.ofdm.fc_hz);
        if (20.0 * std::log10(std::abs(p.gain)) < cfg_.min_path_gain_db)
            return;
        p.delay_s = p.length_m / kSpeedOfLight;
        const Vec3 dep = (poly[1] - poly[0]).normalized();
        p.aod_az_rad = std::atan2(dep.y(), dep.x());
        p.aod_el_rad = std::asin(std::clamp(dep.z(), -1.0, 1.0));
        out.push_back(std::move(p));
    }

    bool point_in_beam(const Node &n, const Vec3 &x) const {
        const std::size_t m = n.beam.size();
        if (m < 3)
            return false;
        // Inside the cone from prev_image through the beam polygon.
        Vec3 centroid = Vec3::Zero();
        for (const auto &v : n.beam)
            centroid += v;
        centroid /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            const Vec3 &a = n.beam[i];
            const Vec3 &b = n.beam[(i + 1) % m];
            Vec3 nn = (a - n.prev_image).cross(b - n.prev_image);
            const double side_c = nn.dot(centroid - n.prev_image);
            if (std::fabs(side_c) < 1e-300)
                continue;
            if (side_c < 0.0)
                nn = -nn;
            if (nn.dot(x - n.prev_image) < -1e-7 * nn.norm())
                return false;
        }
        return true;
    }

    // Sampled facet-facet visibility. Conservative in intent, approximate by
    // construction: two facets count as visible if any sampled segment
    // between them is unoccluded. Slivers of mutual visibility below the
    // sampling resolution may be missed.
    void build_visibility() {
        const std::size_t nf = scene_.facets.size();
        vis_.assign(nf * nf, 0);
        std::vector<std::array<Vec3, 4>> samples(nf);
        for (std::size_t i = 0; i < nf; ++i) {
            const Triangle &t = scene_.facets[i].tri;
            samples[i] = {t.centroid(), 0.5 * (t.a + t.b), 0.5 * (t.b + t.c), 0.5 * (t.c + t.a)};
        }
        for (std::size_t i = 0; i < nf; ++i) {
            for (std::size_t k = i + 1; k < nf; ++k) {
                if (detail::coplanar_facets(planes_[i], planes_[k]))
                    continue;
                bool visible = false;
                for (const auto &pa : samples[i]) {
                    for (const auto &pb : samples[k]) {
                        if (!detail::segment_occluded(scene_.facets, pa, pb, static_cast<int>(i),
                                                      static_cast<int>(k))) {
                            visible = true;
                            break;
                        }
                    }
                    if (visible)
                        break;
                }
                if (visible)
                    vis_[i * nf + k] = vis_[k * nf + i] = 1;
            }
        }
    }

    bool chainable(int from, int to) const {
        if (from == to)
            return false;
        if (cfg_.visibility_prune)
            return vis_[static_cast<std::size_t>(from) * scene_.facets.size() + to] != 0;
        return !detail::coplanar_facets(planes_[from], planes_[to]);
    }

    // Conservative reachability of the UE grid box by the node's beam:
    // prunes only when one cone face (or the mirror plane) separates the box.
    // The reflected bundle is the cone with apex at the node image, opening
    // through the beam polygon beyond the mirror plane.
    bool beam_may_reach_box(const Node &n) const {
        if (!ue_box_.valid())
            return true;
        const auto corners = ue_box_.corners();
        {
            const Plane &pl = planes_[n.facet];
            const double s_img = pl.signed_distance(n.image);
            bool any = false;
            for (const auto &c : corners)
                if (pl.signed_distance(c) * s_img < 0.0) {
                    any = true;
                    break;
                }
            if (!any)
                return false;
        }
        const std::size_t m = n.beam.size();
        Vec3 centroid = Vec3::Zero();
        for (const auto &v : n.beam)
            centroid += v;
        centroid /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            Vec3 nn = (n.beam[i] - n.image).cross(n.beam[(i + 1) % m] - n.image);
            const double side_c = nn.dot(centroid - n.image);
            if (std::fabs(side_c) < 1e-300)
                continue;
            if (side_c < 0.0)
                nn = -nn;
            bool any = false;
            for (const auto &c : corners)
                if (nn.dot(c - n.image) >= -1e-7 * nn.norm()) {
                    any = true;
                    break;
                }
            if (!any)
                return false;
        }
        return true;
    }

    void build_tree() {
        const std::size_t nf = scene_.facets.size();
        const double lambda = scene_.ofdm.wavelength();
        // Unfolded path length above which even a loss-free path falls under
        // the prune threshold.
        const double max_len = lambda / (4.0 * kPi) * std::pow(10.0, -cfg_.min_path_gain_db / 20.0);

        if (cfg_.max_reflections < 1)
            return;

        std::size_t level_begin = 0;
        for (std::size_t f = 0; f < nf; ++f) {
            const Plane &pl = planes_[f];
            if (std::fabs(pl.signed_distance(scene_.bs.position)) < 1e-9)
                continue; // BS on the facet plane: degenerate mirror
            Node n;
            n.facet = static_cast<int>(f);
            n.parent = -1;
            n.order = 1;
            n.prev_image = scene_.bs.position;
            n.image = pl.mirror(scene_.bs.position);
            const Triangle &t = scene_.facets[f].tri;
            n.beam = {t.a, t.b, t.c};
            n.ue_candidate = beam_may_reach_box(n);
            nodes_.push_back(std::move(n));
        }

        for (int level = 2; level <= cfg_.max_reflections; ++level) {
            const std::size_t level_end = nodes_.size();
            for (std::size_t pi = level_begin; pi < level_end; ++pi) {
                for (std::size_t g = 0; g < nf; ++g) {
                    const Node &parent = nodes_[pi]; // re-read: push_back may realloc
                    if (!chainable(parent.facet, static_cast<int>(g)))
                        continue;
                    const Plane &pg = planes_[g];
                    if (std::fabs(pg.signed_distance(parent.image)) < 1e-9)
                        continue;

                    // Clip the candidate facet to the parent's beam:
                    // (1) beyond the parent's mirror plane (side opposite the image),
                    // (2) inside the cone from the parent image through its beam.
                    const Plane &pf = planes_[parent.facet];
                    const double s_img = pf.signed_distance(parent.image);
                    std::vector<Vec3> poly = {scene_.facets[g].tri.a, scene_.facets[g].tri.b,
                                              scene_.facets[g].tri.c};
                    const double side = (s_img > 0.0) ? -1.0 : 1.0;
                    poly = clip_polygon(poly, side * pf.normal, side * pf.d);
                    if (poly.size() < 3)
                        continue;
                    Vec3 centroid = Vec3::Zero();
                    for (const auto &v : parent.beam)
                        centroid += v;
                    centroid /= static_cast<double>(parent.beam.size());
                    for (std::size_t e = 0; e < parent.beam.size() && poly.size() >= 3; ++e) {
                        const Vec3 &a = parent.beam[e];
                        const Vec3 &b = parent.beam[(e + 1) % parent.beam.size()];
                        Vec3 nn = (a - parent.prev_image).cross(b - parent.prev_image);
                        const double side_c = nn.dot(centroid - parent.prev_image);
                        if (std::fabs(side_c) < 1e-300)
                            continue;
                        if (side_c < 0.0)
                            nn = -nn;
                        poly = clip_polygon(poly, nn, nn.dot(parent.prev_image), 1e-9 * nn.norm());
                    }
                    if (poly.size() < 3 || polygon_area(poly) < 1e-12)
                        continue;

                    Node child;
                    child.facet = static_cast<int>(g);
                    child.parent = static_cast<int>(pi);
                    child.order = level;
                    child.prev_image = parent.image;
                    child.image = pg.mirror(parent.image);
                    child.beam = std::move(poly);
                    // Length lower bound: distance from the child image to its
                    // beam plane; paths through this subtree are never shorter.
                    if (std::fabs(pg.signed_distance(child.image)) > max_len)
                        continue;
                    child.ue_candidate = beam_may_reach_box(child);
                    nodes_.push_back(std::move(child));
                    if (nodes_.size() > kMaxNodes)
                        throw error("image tree exceeds node budget (" + std::to_string(kMaxNodes) + ")");
                }
            }
            level_begin = level_end;
        }
    }

    static constexpr std::size_t kMaxNodes = 4000000;

    const Scene &scene_;
    TraceConfig cfg_;
    std::vector<Plane> planes_;
    std::vector<Node> nodes_;
    std::vector<std::uint8_t> vis_;
    Aabb ue_box_;
};

// Single-UE convenience wrapper; builds the tree per call. Batch workloads
// should hold an ImageTracer.
inline std::vector<Path> enumerate_paths(const Scene &scene, const Vec3 &ue, const TraceConfig &cfg) {
    return ImageTracer(scene, cfg).trace(ue);
}

// Path dump (CSV): one row per path,
//   ue_index, path_index, order, gain_re, gain_im, delay_s, aod_az_rad,
//   aod_el_rad, length_m, facets("a;b;c")
inline void dump_paths_csv_header(std::ostream &os) {
    os << "ue_index,path_index,order,gain_re,gain_im,delay_s,aod_az_rad,aod_el_rad,length_m,facets\n";
}

inline void dump_paths_csv(std::ostream &os, int ue_index, const std::vector<Path> &paths) {
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const Path &p = paths[i];
        std::string chain;
        for (std::size_t k = 0; k < p.bounce_facets.size(); ++k) {
            if (k)
                chain += ';';
            chain += std::to_string(p.bounce_facets[k]);
        }
        os << ue_index << ',' << i << ',' << p.order() << ',' << fmt_g(p.gain.real()) << ','
           << fmt_g(p.gain.imag()) << ',' << fmt_g(p.delay_s) << ',' << fmt_g(p.aod_az_rad) << ','
           << fmt_g(p.aod_el_rad) << ',' << fmt_g(p.length_m) << ",\"" << chain << "\"\n";
    }
}

} // namespace twincsi
