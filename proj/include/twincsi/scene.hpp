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
// Scene representation: triangle-facet geometry with per-facet materials,
// volumetric foliage attenuation, a uniform linear BS array, a UE grid and
// the OFDM numerology. Scenes are immutable after loading and safe to share
// across threads.

#pragma once

#include <json.hpp>

#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "twincsi/geometry.hpp"

namespace twincsi {

struct Material {
    std::string name;
    double eps_r = 1.0; // relative permittivity, >= 1
    double sigma = 0.0; // conductivity S/m, >= 0
};

// eps_c = eps_r - j sigma / (eps_0 omega), non-magnetic media.
inline std::complex<double> complex_permittivity(const Material &m, double freq_hz) {
    if (freq_hz <= 0.0)
        throw validation_error("complex_permittivity: frequency must be > 0");
    const double omega = 2.0 * kPi * freq_hz;
    return {m.eps_r, -m.sigma / (kVacuumPermittivity * omega)};
}

struct Facet {
    Triangle tri;
    int material_id = 0;
};

struct FoliageVolume {
    Aabb box;
    double atten_db_per_m = 0.0;
};

struct ArrayConfig {
    Vec3 position = Vec3::Zero();
    int num_antennas = 1;
    double element_spacing = 0.0; // meters
    Vec3 axis = Vec3::UnitX();
    Vec3 boresight = Vec3::UnitY();
    double fov_deg = 360.0;

    // p_n = position + n * spacing * axis
    Vec3 element_position(int n) const { return position + static_cast<double>(n) * element_spacing * axis; }
};

struct OfdmConfig {
    double fc_hz = 3.5e9;
    int num_subcarriers = 256;
    double delta_f_hz = 30e3;
    int max_delay_taps = 32;

    double sample_period() const { return 1.0 / (num_subcarriers * delta_f_hz); }
    double wavelength() const { return kSpeedOfLight / fc_hz; }
};

struct Scene {
    std::vector<Facet> facets;
    std::vector<Material> materials;
    std::vector<FoliageVolume> foliage;
    ArrayConfig bs;
    std::vector<Vec3> ue_grid;
    OfdmConfig ofdm;

    Aabb bounds() const {
        Aabb b;
        for (const auto &f : facets) {
            b.expand(f.tri.a);
            b.expand(f.tri.b);
            b.expand(f.tri.c);
        }
        for (const auto &p : ue_grid)
            b.expand(p);
        b.expand(bs.position);
        return b;
    }
};

// ------------------------------------------------------------------------
// Material presets, evaluated from the ITU-R P.2040 power-law model
//     eps_r = a * f_GHz^b,   sigma = c * f_GHz^d
// at the requested frequency. Table revision: P.2040 building materials plus
// the ground entries.
// ------------------------------------------------------------------------
inline constexpr int kMaterialPresetVersion = 1;

inline Material itu_material(const std::string &name, double freq_hz) {
    struct Coef {
        const char *name;
        double a, b, c, d;
    };
    // {name, a, b, c, d}
    static const Coef table[] = {
        {"vacuum", 1.0, 0.0, 0.0, 0.0},
        {"concrete", 5.24, 0.0, 0.0462, 0.7822},
        {"brick", 3.91, 0.0, 0.0238, 0.16},
        {"plasterboard", 2.73, 0.0, 0.0085, 0.9395},
        {"drywall", 2.73, 0.0, 0.0085, 0.9395}, // alias of plasterboard
        {"wood", 1.99, 0.0, 0.0047, 1.0718},
        {"glass", 6.31, 0.0, 0.0036, 1.3394},
        {"metal", 1.0, 0.0, 1e7, 0.0},
        {"very_dry_ground", 3.0, 0.0, 0.00015, 2.52},
        {"medium_dry_ground", 15.0, -0.1, 0.035, 1.63},
        {"wet_ground", 30.0, -0.4, 0.15, 1.30},
        {"wet_earth", 30.0, -0.4, 0.15, 1.30}, // alias of wet_ground
    };
    const double f_ghz = freq_hz * 1e-9;
    for (const auto &c : table) {
        if (name == c.name) {
            Material m;
            m.name = name;
            m.eps_r = c.a * std::pow(f_ghz, c.b);
            m.sigma = c.c * std::pow(f_ghz, c.d);
            return m;
        }
    }
    throw validation_error("unknown material preset '" + name + "'");
}

// ------------------------------------------------------------------------
// build_ue_grid - row-major grid at fixed height.
// count = (floor(extent_x/spacing)+1) * (floor(extent_y/spacing)+1)
// ------------------------------------------------------------------------
inline std::vector<Vec3> build_ue_grid(const Vec3 &origin, double extent_x, double extent_y, double spacing,
                                       double height) {
    if (extent_x < 0.0 || extent_y < 0.0)
        throw validation_error("ue_grid extents must be >= 0");
    if (spacing <= 0.0)
        throw validation_error("ue_grid spacing must be > 0");
    const long nx = static_cast<long>(std::floor(extent_x / spacing)) + 1;
    const long ny = static_cast<long>(std::floor(extent_y / spacing)) + 1;
    std::vector<Vec3> grid;
    grid.reserve(static_cast<std::size_t>(nx * ny));
    for (long j = 0; j < ny; ++j)
        for (long i = 0; i < nx; ++i)
            grid.emplace_back(origin.x() + i * spacing, origin.y() + j * spacing, height);
    return grid;
}

// ------------------------------------------------------------------------
// Scene JSON schema (External Interfaces):
//   materials: [{name, eps_r, sigma}]            (or {name} -> ITU preset)
//   facets:    [{v: [[x,y,z] x3], material}]
//   foliage:   [{min, max, atten_db_per_m}]
//   bs:        {position, n_antennas, spacing_m | "half_lambda",
//               axis, boresight, fov_deg}
//   ue_grid:   {points: [...]} or {origin, extent_x, extent_y, spacing, height}
//   ofdm:      {fc_hz, k, delta_f_hz, d_taps}
// Lengths in meters, frequencies in Hz, angles in degrees.
// ------------------------------------------------------------------------

namespace detail {

inline Vec3 parse_vec3(const nlohmann::json &j, const std::string &what) {
    if (!j.is_array() || j.size() != 3)
        throw parse_error(what + " must be an array of 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

} // namespace detail

inline void validate_scene(const Scene &scene) {
    const int nmat = static_cast<int>(scene.materials.size());
    for (std::size_t i = 0; i < scene.materials.size(); ++i) {
        const auto &m = scene.materials[i];
        if (m.eps_r < 1.0)
            throw validation_error("material '" + m.name + "': eps_r must be >= 1");
        if (m.sigma < 0.0)
            throw validation_error("material '" + m.name + "': sigma must be >= 0");
    }
    for (std::size_t i = 0; i < scene.facets.size(); ++i) {
        const auto &f = scene.facets[i];
        if (f.material_id < 0 || f.material_id >= nmat)
            throw validation_error("facet " + std::to_string(i) + ": material_id " +
                                   std::to_string(f.material_id) + " out of range (" + std::to_string(nmat) +
                                   " materials)");
        if (f.tri.area() <= 1e-9)
            throw validation_error("facet " + std::to_string(i) + ": degenerate triangle (area <= 1e-9 m^2)");
    }
    for (std::size_t i = 0; i < scene.foliage.size(); ++i) {
        const auto &v = scene.foliage[i];
        if (!(v.box.lo.x() < v.box.hi.x() && v.box.lo.y() < v.box.hi.y() && v.box.lo.z() < v.box.hi.z()))
            throw validation_error("foliage " + std::to_string(i) + ": min corner must be < max corner");
        if (v.atten_db_per_m < 0.0)
            throw validation_error("foliage " + std::to_string(i) + ": attenuation must be >= 0");
    }
    if (scene.bs.num_antennas < 1)
        throw validation_error("bs: n_antennas must be >= 1");
    if (std::fabs(scene.bs.axis.norm() - 1.0) > 1e-9 || std::fabs(scene.bs.boresight.norm() - 1.0) > 1e-9)
        throw validation_error("bs: axis and boresight must be unit vectors");
    if (std::fabs(scene.bs.axis.dot(scene.bs.boresight)) >= 1e-9)
        throw validation_error("bs: boresight must be perpendicular to axis");
    if (!(scene.bs.fov_deg > 0.0 && scene.bs.fov_deg <= 360.0))
        throw validation_error("bs: fov_deg must be in (0, 360]");
    if (scene.ue_grid.empty())
        throw validation_error("ue_grid: must be non-empty");
    for (std::size_t i = 0; i < scene.ue_grid.size(); ++i)
        if ((scene.ue_grid[i] - scene.bs.position).norm() < 1e-9)
            throw validation_error("ue_grid point " + std::to_string(i) + " coincides with BS position");
    const auto &o = scene.ofdm;
    if (o.fc_hz <= 0.0 || o.num_subcarriers < 1 || o.delta_f_hz <= 0.0)
        throw validation_error("ofdm: fc_hz, k, delta_f_hz must be positive");
    if (o.max_delay_taps < 1 || o.max_delay_taps > o.num_subcarriers)
        throw validation_error("ofdm: d_taps must be in [1, k]");
    if (std::fabs(o.sample_period() * o.num_subcarriers * o.delta_f_hz - 1.0) > 1e-12)
        throw validation_error("ofdm: T_S * K * delta_f must equal 1");
}

inline Scene scene_from_json(const nlohmann::json &j) {
    Scene scene;
    if (!j.is_object())
        throw parse_error("scene document must be a JSON object");

    // ofdm first: "half_lambda" spacing needs the carrier.
    if (!j.contains("ofdm"))
        throw parse_error("missing 'ofdm'");
    {
        const auto &jo = j["ofdm"];
        scene.ofdm.fc_hz = jo.at("fc_hz").get<double>();
        scene.ofdm.num_subcarriers = jo.at("k").get<int>();
        scene.ofdm.delta_f_hz = jo.at("delta_f_hz").get<double>();
        scene.ofdm.max_delay_taps = jo.value("d_taps", 32);
    }

    if (!j.contains("materials") || !j["materials"].is_array() || j["materials"].empty())
        throw parse_error("missing or empty 'materials' array");
    std::map<std::string, int> mat_index;
    for (const auto &jm : j["materials"]) {
        Material m;
        m.name = jm.at("name").get<std::string>();
        if (jm.contains("eps_r") || jm.contains("sigma")) {
            m.eps_r = jm.at("eps_r").get<double>();
            m.sigma = jm.at("sigma").get<double>();
        } else {
            m = itu_material(m.name, scene.ofdm.fc_hz); // preset lookup
        }
        mat_index[m.name] = static_cast<int>(scene.materials.size());
        scene.materials.push_back(m);
    }

    if (j.contains("facets")) {
        for (const auto &jf : j["facets"]) {
            Facet f;
            const auto &v = jf.at("v");
            if (!v.is_array() || v.size() != 3)
                throw parse_error("facet 'v' must hold 3 vertices");
            f.tri.a = detail::parse_vec3(v[0], "facet vertex");
            f.tri.b = detail::parse_vec3(v[1], "facet vertex");
            f.tri.c = detail::parse_vec3(v[2], "facet vertex");
            const auto &jmat = jf.at("material");
            if (jmat.is_string()) {
                const auto it = mat_index.find(jmat.get<std::string>());
                if (it == mat_index.end())
                    throw validation_error("facet " + std::to_string(scene.facets.size()) +
                                           ": unknown material '" + jmat.get<std::string>() + "'");
                f.material_id = it->second;
            } else {
                f.material_id = jmat.get<int>();
            }
            scene.facets.push_back(f);
        }
    }

    if (j.contains("foliage")) {
        for (const auto &jv : j["foliage"]) {
            FoliageVolume v;
            v.box.lo = detail::parse_vec3(jv.at("min"), "foliage min");
            v.box.hi = detail::parse_vec3(jv.at("max"), "foliage max");
            v.atten_db_per_m = jv.at("atten_db_per_m").get<double>();
            scene.foliage.push_back(v);
        }
    }

    if (!j.contains("bs"))
        throw parse_error("missing 'bs'");
    {
        const auto &jb = j["bs"];
        scene.bs.position = detail::parse_vec3(jb.at("position"), "bs position");
        scene.bs.num_antennas = jb.at("n_antennas").get<int>();
        const auto &sp = jb.at("spacing_m");
        if (sp.is_string()) {
            if (sp.get<std::string>() != "half_lambda")
                throw parse_error("bs spacing_m must be a number or \"half_lambda\"");
            scene.bs.element_spacing = 0.5 * scene.ofdm.wavelength();
        } else {
            scene.bs.element_spacing = sp.get<double>();
        }
        if (jb.contains("axis"))
            scene.bs.axis = detail::parse_vec3(jb["axis"], "bs axis").normalized();
        if (jb.contains("boresight"))
            scene.bs.boresight = detail::parse_vec3(jb["boresight"], "bs boresight").normalized();
        scene.bs.fov_deg = jb.value("fov_deg", 360.0);
    }

    if (!j.contains("ue_grid"))
        throw parse_error("missing 'ue_grid'");
    {
        const auto &jg = j["ue_grid"];
        if (jg.contains("points")) {
            for (const auto &jp : jg["points"])
                scene.ue_grid.push_back(detail::parse_vec3(jp, "ue point"));
        } else {
            scene.ue_grid = build_ue_grid(detail::parse_vec3(jg.at("origin"), "ue_grid origin"),
                                          jg.at("extent_x").get<double>(), jg.at("extent_y").get<double>(),
                                          jg.at("spacing").get<double>(), jg.at("height").get<double>());
        }
    }

    validate_scene(scene);
    return scene;
}

inline Scene load_scene(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw error("cannot open scene file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw parse_error(path + ": " + e.what());
    }
    try {
        return scene_from_json(j);
    } catch (const nlohmann::json::exception &e) {
        throw parse_error(path + ": " + e.what());
    }
}

inline nlohmann::json scene_to_json(const Scene &scene) {
    nlohmann::json j;
    j["materials"] = nlohmann::json::array();
    for (const auto &m : scene.materials)
        j["materials"].push_back({{"name", m.name}, {"eps_r", m.eps_r}, {"sigma", m.sigma}});
    j["facets"] = nlohmann::json::array();
    for (const auto &f : scene.facets) {
        nlohmann::json jf;
        jf["v"] = {{f.tri.a.x(), f.tri.a.y(), f.tri.a.z()},
                   {f.tri.b.x(), f.tri.b.y(), f.tri.b.z()},
                   {f.tri.c.x(), f.tri.c.y(), f.tri.c.z()}};
        jf["material"] = f.material_id;
        j["facets"].push_back(jf);
    }
    j["foliage"] = nlohmann::json::array();
    for (const auto &v : scene.foliage)
        j["foliage"].push_back({{"min", {v.box.lo.x(), v.box.lo.y(), v.box.lo.z()}},
                                {"max", {v.box.hi.x(), v.box.hi.y(), v.box.hi.z()}},
                                {"atten_db_per_m", v.atten_db_per_m}});
    j["bs"] = {{"position", {scene.bs.position.x(), scene.bs.position.y(), scene.bs.position.z()}},
               {"n_antennas", scene.bs.num_antennas},
               {"spacing_m", scene.bs.element_spacing},
               {"axis", {scene.bs.axis.x(), scene.bs.axis.y(), scene.bs.axis.z()}},
               {"boresight", {scene.bs.boresight.x(), scene.bs.boresight.y(), scene.bs.boresight.z()}},
               {"fov_deg", scene.bs.fov_deg}};
    j["ue_grid"]["points"] = nlohmann::json::array();
    for (const auto &p : scene.ue_grid)
        j["ue_grid"]["points"].push_back({p.x(), p.y(), p.z()});
    j["ofdm"] = {{"fc_hz", scene.ofdm.fc_hz},
                 {"k", scene.ofdm.num_subcarriers},
                 {"delta_f_hz", scene.ofdm.delta_f_hz},
                 {"d_taps", scene.ofdm.max_delay_taps}};
    return j;
}

inline void save_scene(const Scene &scene, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw error("cannot open for writing: " + path);
    out << scene_to_json(scene).dump(2) << "\n";
}

} // namespace twincsi
