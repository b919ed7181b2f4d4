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

#include "twincsi/experiment.hpp"

using namespace twincsi;
using namespace twincsi::testutil;

namespace {

// Small urban-like scene for fast end-to-end runs.
Scene mini_city() {
    Scene s = base_scene();
    s.bs.num_antennas = 8;
    s.bs.position = Vec3(6, -3, 8);
    s.ofdm.num_subcarriers = 32;
    s.ofdm.max_delay_taps = 16;
    s.bs.element_spacing = 0.5 * s.ofdm.wavelength();
    s.bs.fov_deg = 180.0;
    s.facets.clear();
    s.materials = {itu_material("concrete", s.ofdm.fc_hz), itu_material("wet_earth", s.ofdm.fc_hz)};
    // terrain
    add_facet(s, Vec3(-10, -10, 0), Vec3(25, -10, 0), Vec3(25, 25, 0), 1);
    add_facet(s, Vec3(-10, -10, 0), Vec3(25, 25, 0), Vec3(-10, 25, 0), 1);
    add_box(s, Vec3(-4, 0, 0), Vec3(-1, 14, 9), 0);
    add_box(s, Vec3(14, 0, 0), Vec3(17, 14, 8), 0);
    FoliageVolume fol;
    fol.box.lo = Vec3(4, 6, 0.5);
    fol.box.hi = Vec3(9, 10, 5);
    fol.atten_db_per_m = 1.0;
    s.foliage.push_back(fol);
    s.ue_grid = build_ue_grid(Vec3(0, 1, 0), 12, 12, 1.0, 1.5);
    return s;
}

} // namespace

TEST_CASE("base twin removes foliage only") {
    const Scene target = mini_city();
    const Scene twin = make_base_twin(target);
    REQUIRE(twin.foliage.empty());
    REQUIRE(twin.facets.size() == target.facets.size());
    REQUIRE(twin.bs.fov_deg == target.bs.fov_deg);
}

TEST_CASE("degrade_twin material override preserves terrain") {
    const Scene target = mini_city();
    TwinDegradeOptions opt;
    opt.material_override = "drywall";
    const TwinDegradeResult r = degrade_twin(target, opt);
    REQUIRE(r.scene.materials[0].eps_r == Catch::Approx(2.73)); // concrete -> drywall
    REQUIRE(r.scene.materials[1].eps_r == Catch::Approx(target.materials[1].eps_r)); // terrain kept
    // delta vs concrete: |5.24 - 2.73| / 5.24
    REQUIRE(r.report.delta_eps_r == Catch::Approx((5.24 - 2.73) / 5.24).epsilon(1e-9));
}

TEST_CASE("degrade_twin fov override") {
    const Scene target = mini_city();
    TwinDegradeOptions opt;
    opt.fov_deg = 140.0;
    const TwinDegradeResult r = degrade_twin(target, opt);
    REQUIRE(r.scene.bs.fov_deg == 140.0);
    REQUIRE(r.report.fov_deg == 140.0);
}

TEST_CASE("degrade_twin geometry pipeline") {
    const Scene target = mini_city();
    TwinDegradeOptions opt;
    opt.geometry_density = 2.0;
    opt.eval_density = 2.0;
    const TwinDegradeResult r = degrade_twin(target, opt);
    REQUIRE(r.dropped_components == 0);
    // terrain facets survive untouched
    std::size_t terrain = 0;
    for (const auto &f : r.scene.facets)
        if (r.scene.materials[f.material_id].name == "wet_earth")
            ++terrain;
    REQUIRE(terrain == 2);
    REQUIRE(r.report.f1 > 50.0);
    REQUIRE(r.report.f1 <= 100.0);
    REQUIRE(r.report.tau_m > 0.0);
    // decimation aimed at the original per-component budget
    REQUIRE(r.scene.facets.size() < target.facets.size() * 3);
}

TEST_CASE("subsample_cols is deterministic and order-preserving") {
    Eigen::MatrixXd m(2, 6);
    m << 0, 1, 2, 3, 4, 5, 0, 10, 20, 30, 40, 50;
    const Eigen::MatrixXd a = subsample_cols(m, 3, 9);
    const Eigen::MatrixXd b = subsample_cols(m, 3, 9);
    REQUIRE((a - b).norm() == 0.0);
    REQUIRE(a.cols() == 3);
    for (int c = 1; c < 3; ++c)
        REQUIRE(a(0, c) > a(0, c - 1)); // kept in original order
    REQUIRE((subsample_cols(m, 9, 1) - m).norm() == 0.0);
}

TEST_CASE("results accumulation and CSV") {
    Results r;
    r.add("x", "m", 3.0, 1, 0xabc);
    r.add("x", "m", 1.0, 2, 0xabc);
    r.add("x", "m", 2.0, 3, 0xabc);
    REQUIRE(r.median("x", "m") == 2.0);
    REQUIRE(r.values("x", "m").size() == 3);
    REQUIRE_THROWS_AS(r.median("y", "m"), error);

    const std::string tmp = (std::filesystem::temp_directory_path() / "twincsi_results.csv").string();
    r.write_csv(tmp);
    std::ifstream in(tmp);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "experiment_id,metric,value,seed,config_hash");
    std::getline(in, line);
    REQUIRE(line == "x,m,3,1,0000000000000abc");
    std::filesystem::remove(tmp);
}

TEST_CASE("experiment spec loads with defaults and overrides") {
    const std::string tmp = (std::filesystem::temp_directory_path() / "twincsi_spec.json").string();
    {
        std::ofstream out(tmp);
        out << R"({
            "name": "mini",
            "target_scene": "t.json",
            "seeds": [7],
            "train": {"epochs": 3, "ratio": 0.03125},
            "trace": {"max_reflections": 2},
            "fidelity": {"densities": [1.0], "epochs": 2},
            "eval": {"users": [2], "draws": 5}
        })";
    }
    const ExperimentSpec s = load_experiment_spec(tmp);
    REQUIRE(s.name == "mini");
    REQUIRE(s.seeds == std::vector<std::uint64_t>{7});
    REQUIRE(s.epochs == 3);
    REQUIRE(s.compression_ratio == Catch::Approx(0.03125));
    REQUIRE(s.trace.max_reflections == 2);
    REQUIRE(s.densities == std::vector<double>{1.0});
    REQUIRE(s.sweep_epochs == 2);
    REQUIRE(s.user_counts == std::vector<int>{2});
    REQUIRE(s.split_ratio == 0.8); // default
    std::filesystem::remove(tmp);
}

TEST_CASE("tiny end-to-end experiment run") {
    const Scene target = mini_city();
    const std::string dir = (std::filesystem::temp_directory_path() / "twincsi_exp").string();
    std::filesystem::remove_all(dir);

    const std::string scene_path = dir + "_scene.json";
    save_scene(target, scene_path);

    ExperimentSpec spec;
    spec.name = "tiny";
    spec.out_dir = dir;
    spec.target_scene_path = scene_path;
    spec.recipes = {"direct-generalization", "spectral-efficiency"};
    spec.seeds = {1};
    spec.trace.max_reflections = 2;
    spec.epochs = 2;
    spec.twin_train_size = 60;
    spec.train_sizes = {40};
    spec.compression_ratio = 1.0 / 64.0;
    spec.sumrate_draws = 3;
    spec.user_counts = {2};

    run_experiment(spec);

    REQUIRE(std::filesystem::exists(dir + "/direct-generalization.csv"));
    REQUIRE(std::filesystem::exists(dir + "/spectral-efficiency.csv"));
    REQUIRE(std::filesystem::exists(dir + "/summary.csv"));

    // rerun reproduces the CSVs byte for byte
    const auto bytes = [](const std::string &p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    const std::string first = bytes(dir + "/direct-generalization.csv");
    run_experiment(spec);
    REQUIRE(bytes(dir + "/direct-generalization.csv") == first);

    std::filesystem::remove_all(dir);
    std::filesystem::remove(scene_path);
}
