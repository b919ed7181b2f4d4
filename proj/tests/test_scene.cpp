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

#include "testutil.hpp"

#include <filesystem>

using namespace twincsi;

namespace {
Scene from_json_text(const std::string &text) {
    return scene_from_json(nlohmann::json::parse(text));
}
} // namespace

TEST_CASE("minimal scene loads") {
    const Scene s = from_json_text(R"({
        "materials": [{"name": "concrete", "eps_r": 5.24, "sigma": 0.123}],
        "facets": [{"v": [[0,5,0],[10,5,0],[5,5,10]], "material": 0}],
        "bs": {"position": [2,0,2], "n_antennas": 4, "spacing_m": 0.04,
               "axis": [1,0,0], "boresight": [0,1,0], "fov_deg": 360},
        "ue_grid": {"points": [[8,0,1.5]]},
        "ofdm": {"fc_hz": 3.5e9, "k": 64, "delta_f_hz": 30e3, "d_taps": 16}
    })");
    REQUIRE(s.facets.size() == 1);
    REQUIRE(s.materials.size() == 1);
    REQUIRE(s.ue_grid.size() == 1);
}

TEST_CASE("bad material reference names the facet") {
    const std::string text = R"({
        "materials": [{"name": "a", "eps_r": 2, "sigma": 0}, {"name": "b", "eps_r": 2, "sigma": 0}],
        "facets": [{"v": [[0,0,0],[1,0,0],[0,1,0]], "material": 0},
                   {"v": [[0,0,1],[1,0,1],[0,1,1]], "material": 5}],
        "bs": {"position": [0,0,5], "n_antennas": 2, "spacing_m": 0.04,
               "axis": [1,0,0], "boresight": [0,1,0], "fov_deg": 360},
        "ue_grid": {"points": [[3,3,1]]},
        "ofdm": {"fc_hz": 3.5e9, "k": 32, "delta_f_hz": 30e3, "d_taps": 8}
    })";
    try {
        from_json_text(text);
        FAIL("expected validation error");
    } catch (const validation_error &e) {
        REQUIRE(std::string(e.what()).find("facet 1") != std::string::npos);
        REQUIRE(std::string(e.what()).find("5") != std::string::npos);
    }
}

TEST_CASE("degenerate facet rejected") {
    const std::string text = R"({
        "materials": [{"name": "a", "eps_r": 2, "sigma": 0}],
        "facets": [{"v": [[0,0,0],[1,0,0],[2,0,0]], "material": 0}],
        "bs": {"position": [0,0,5], "n_antennas": 2, "spacing_m": 0.04,
               "axis": [1,0,0], "boresight": [0,1,0], "fov_deg": 360},
        "ue_grid": {"points": [[3,3,1]]},
        "ofdm": {"fc_hz": 3.5e9, "k": 32, "delta_f_hz": 30e3, "d_taps": 8}
    })";
    REQUIRE_THROWS_AS(from_json_text(text), validation_error);
}

TEST_CASE("demo scene matches the reference constants") {
    const Scene s = load_scene(std::string(TEST_DATA_DIR) + "/demo_target.json");
    REQUIRE(s.bs.num_antennas == 32);
    REQUIRE(s.bs.position.z() == Catch::Approx(15.0));
    REQUIRE(s.bs.fov_deg == Catch::Approx(180.0));
    REQUIRE(s.ofdm.fc_hz == Catch::Approx(3.5e9));
    REQUIRE(s.ofdm.num_subcarriers == 256);
    REQUIRE(s.ofdm.delta_f_hz == Catch::Approx(30e3));
    REQUIRE(s.ofdm.max_delay_taps == 32);
    // half-wavelength ULA
    REQUIRE(s.bs.element_spacing == Catch::Approx(0.5 * kSpeedOfLight / 3.5e9).epsilon(1e-12));
    // grid: 0.37 m spacing at 2 m height
    REQUIRE(s.ue_grid.size() > 5120);
    REQUIRE((s.ue_grid[1] - s.ue_grid[0]).norm() == Catch::Approx(0.37).epsilon(1e-12));
    for (const auto &p : s.ue_grid)
        REQUIRE(p.z() == Catch::Approx(2.0));
    REQUIRE(s.foliage.size() == 1);
    REQUIRE(s.foliage[0].atten_db_per_m == Catch::Approx(1.0));
    // building + terrain materials
    REQUIRE(s.materials[0].name == "concrete");
    REQUIRE(s.materials[1].name == "wet_earth");
}

TEST_CASE("build_ue_grid counts") {
    REQUIRE(build_ue_grid(Vec3(0, 0, 0), 0, 0, 1.0, 3.0).size() == 1);
    REQUIRE(build_ue_grid(Vec3(0, 0, 0), 1, 1, 0.5, 3.0).size() == 9);
    // reference-scale service area: independent floor evaluation
    const long nx = static_cast<long>(std::floor(200.0 / 0.37)) + 1;
    const long ny = static_cast<long>(std::floor(230.0 / 0.37)) + 1;
    REQUIRE(nx == 541);
    REQUIRE(ny == 622);
    REQUIRE(build_ue_grid(Vec3(0, 0, 0), 200, 230, 0.37, 2.0).size() ==
            static_cast<std::size_t>(nx * ny));
}

TEST_CASE("grid count formula holds for random draws") {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        const double ex = rng.uniform(0.1, 40.0);
        const double ey = rng.uniform(0.1, 40.0);
        const double sp = rng.uniform(0.2, 5.0);
        const auto grid = build_ue_grid(Vec3(0, 0, 0), ex, ey, sp, 1.0);
        const std::size_t expect = static_cast<std::size_t>((std::floor(ex / sp) + 1) * (std::floor(ey / sp) + 1));
        REQUIRE(grid.size() == expect);
    }
}

TEST_CASE("scene round trips through JSON") {
    const Scene s = load_scene(std::string(TEST_DATA_DIR) + "/demo_target.json");
    const std::string tmp = (std::filesystem::temp_directory_path() / "twincsi_scene_rt.json").string();
    save_scene(s, tmp);
    const Scene t = load_scene(tmp);
    REQUIRE(t.facets.size() == s.facets.size());
    REQUIRE(t.materials.size() == s.materials.size());
    REQUIRE(t.ue_grid.size() == s.ue_grid.size());
    for (std::size_t i = 0; i < s.facets.size(); ++i) {
        REQUIRE(t.facets[i].material_id == s.facets[i].material_id);
        REQUIRE((t.facets[i].tri.a - s.facets[i].tri.a).norm() == 0.0);
        REQUIRE((t.facets[i].tri.b - s.facets[i].tri.b).norm() == 0.0);
        REQUIRE((t.facets[i].tri.c - s.facets[i].tri.c).norm() == 0.0);
    }
    REQUIRE(t.bs.element_spacing == s.bs.element_spacing);
    REQUIRE(t.ofdm.fc_hz == s.ofdm.fc_hz);
    std::filesystem::remove(tmp);
}

TEST_CASE("facet normals are unit") {
    const Scene s = load_scene(std::string(TEST_DATA_DIR) + "/demo_target.json");
    for (const auto &f : s.facets)
        REQUIRE(std::fabs(f.tri.unit_normal().norm() - 1.0) < 1e-12);
}

TEST_CASE("validation catches bad arrays and grids") {
    Scene s = testutil::base_scene();
    SECTION("eps_r below one") {
        s.materials[0].eps_r = 0.5;
        REQUIRE_THROWS_AS(validate_scene(s), validation_error);
    }
    SECTION("non-perpendicular boresight") {
        s.bs.boresight = Vec3(1, 0, 0);
        REQUIRE_THROWS_AS(validate_scene(s), validation_error);
    }
    SECTION("UE at the BS position") {
        s.ue_grid.push_back(s.bs.position);
        REQUIRE_THROWS_AS(validate_scene(s), validation_error);
    }
    SECTION("foliage with inverted corners") {
        FoliageVolume v;
        v.box.lo = Vec3(1, 1, 1);
        v.box.hi = Vec3(0, 2, 2);
        v.atten_db_per_m = 1.0;
        s.foliage.push_back(v);
        REQUIRE_THROWS_AS(validate_scene(s), validation_error);
    }
    SECTION("d_taps above K") {
        s.ofdm.max_delay_taps = s.ofdm.num_subcarriers + 1;
        REQUIRE_THROWS_AS(validate_scene(s), validation_error);
    }
}

TEST_CASE("ITU presets at 3.5 GHz") {
    // independent evaluation of the power laws
    const double f = 3.5;
    const Material concrete = itu_material("concrete", 3.5e9);
    REQUIRE(concrete.eps_r == Catch::Approx(5.24).epsilon(1e-12));
    REQUIRE(concrete.sigma == Catch::Approx(0.0462 * std::exp(0.7822 * std::log(f))).epsilon(1e-12));

    const Material drywall = itu_material("drywall", 3.5e9);
    REQUIRE(drywall.eps_r == Catch::Approx(2.73).epsilon(1e-12));
    REQUIRE(drywall.sigma == Catch::Approx(0.0085 * std::exp(0.9395 * std::log(f))).epsilon(1e-12));

    const Material wet = itu_material("wet_earth", 3.5e9);
    REQUIRE(wet.eps_r == Catch::Approx(30.0 * std::exp(-0.4 * std::log(f))).epsilon(1e-12));
    REQUIRE(wet.sigma == Catch::Approx(0.15 * std::exp(1.30 * std::log(f))).epsilon(1e-12));

    REQUIRE_THROWS_AS(itu_material("adamantium", 3.5e9), validation_error);
}

TEST_CASE("complex permittivity") {
    SECTION("zero conductivity is purely real") {
        const auto ec = complex_permittivity({"x", 4.0, 0.0}, 3.5e9);
        REQUIRE(ec.real() == Catch::Approx(4.0));
        REQUIRE(ec.imag() == 0.0);
    }
    SECTION("concrete-like at 3.5 GHz") {
        const auto ec = complex_permittivity({"x", 5.24, 0.123}, 3.5e9);
        const double expect = 0.123 / (8.8541878128e-12 * 2.0 * kPi * 3.5e9);
        REQUIRE(ec.real() == Catch::Approx(5.24));
        REQUIRE(ec.imag() == Catch::Approx(-expect).epsilon(1e-12));
        REQUIRE(expect == Catch::Approx(0.6316).epsilon(1e-3));
    }
    SECTION("doubling frequency halves the imaginary part") {
        const Material m{"x", 5.24, 0.123};
        const auto a = complex_permittivity(m, 2e9);
        const auto b = complex_permittivity(m, 4e9);
        REQUIRE(b.imag() * 2.0 == Catch::Approx(a.imag()).epsilon(1e-14));
    }
}
