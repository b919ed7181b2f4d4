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
// Experiment orchestration: twin-scene degradation along the four fidelity
// axes and the reproducible experiment recipes (direct generalization,
// compression sweep, refinement, fidelity sweep, refinement after
// impairment, spectral efficiency). The CLI and the acceptance suite both
// run these entry points; every emitted row carries its seed and a hash of
// the resolved configuration.

#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "twincsi/dataset.hpp"
#include "twincsi/evaluation.hpp"
#include "twincsi/fidelity.hpp"
#include "twincsi/refinement.hpp"

namespace twincsi {

// ------------------------------------------------------------------------
// Twin degradation
// ------------------------------------------------------------------------
struct TwinDegradeOptions {
    bool remove_foliage = true;
    double geometry_density = -1.0; // pts/m^2; <= 0 keeps the original geometry
    std::uint64_t geometry_seed = 1;
    std::string material_override;    // applied to non-preserved materials; empty keeps
    double fov_deg = -1.0;            // <= 0 keeps
    double eval_density = 2.0;        // F1 evaluation sampling density
    std::set<std::string> preserve = {"wet_ground", "wet_earth", "medium_dry_ground",
                                      "very_dry_ground"}; // terrain: never degraded/overridden
};

struct TwinDegradeResult {
    Scene scene;
    FidelityReport report;
    std::size_t dropped_components = 0; // building components lost to reconstruction
};

inline Scene make_base_twin(const Scene &target) {
    Scene twin = target;
    twin.foliage.clear();
    return twin;
}

inline TwinDegradeResult degrade_twin(const Scene &target, const TwinDegradeOptions &opt) {
    TwinDegradeResult res;
    res.scene = target;
    Scene &twin = res.scene;
    if (opt.remove_foliage)
        twin.foliage.clear();
    if (opt.fov_deg > 0.0) {
        twin.bs.fov_deg = opt.fov_deg;
        res.report.fov_deg = opt.fov_deg;
    } else {
        res.report.fov_deg = twin.bs.fov_deg;
    }

    const auto preserved = [&](int material_id) {
        return opt.preserve.count(target.materials[material_id].name) > 0;
    };

    if (!opt.material_override.empty()) {
        const Material override_mat = itu_material(opt.material_override, target.ofdm.fc_hz);
        double worst_eps = 0.0, worst_sig = 0.0;
        for (std::size_t i = 0; i < twin.materials.size(); ++i) {
            if (opt.preserve.count(twin.materials[i].name))
                continue;
            const MaterialDelta d = material_delta(target.materials[i], override_mat);
            worst_eps = std::max(worst_eps, d.delta_eps_r);
            worst_sig = std::max(worst_sig, d.delta_sigma);
            Material m = override_mat;
            twin.materials[i] = m;
        }
        res.report.delta_eps_r = worst_eps;
        res.report.delta_sigma = worst_sig;
    }

    if (opt.geometry_density > 0.0) {
        std::vector<Facet> kept;
        std::vector<Facet> buildings;
        for (const auto &f : target.facets)
            (preserved(f.material_id) ? kept : buildings).push_back(f);

        const std::vector<Triangle> orig_tris = facet_triangles(buildings);
        const auto components = split_components(orig_tris);
        std::vector<Facet> rebuilt;
        for (std::size_t ci = 0; ci < components.size(); ++ci) {
            std::vector<Triangle> comp;
            std::map<int, int> mat_votes;
            for (int fi : components[ci]) {
                comp.push_back(orig_tris[fi]);
                mat_votes[buildings[fi].material_id]++;
            }
            int mat = comp.empty() ? 0 : mat_votes.begin()->first;
            int best_votes = -1;
            for (const auto &[id, votes] : mat_votes)
                if (votes > best_votes) {
                    best_votes = votes;
                    mat = id;
                }
            try {
                const PointCloud cloud =
                    sample_point_cloud(comp, opt.geometry_density, substream(opt.geometry_seed, ci));
                const IndexedMesh mc = reconstruct_mesh(cloud);
                const DecimateResult dec = decimate_mesh(mc, std::max<std::size_t>(comp.size(), 4));
                for (const auto &t : mesh_triangles(dec.mesh)) {
                    if (t.area() <= 1e-9)
                        continue;
                    rebuilt.push_back({t, mat});
                }
            } catch (const error &) {
                ++res.dropped_components; // too few samples to rebuild this component
            }
        }
        twin.facets = kept;
        twin.facets.insert(twin.facets.end(), rebuilt.begin(), rebuilt.end());

        // Geometry fidelity vs the original buildings at the (fixed)
        // evaluation density, threshold per the max-distance rule.
        if (!rebuilt.empty()) {
            const std::vector<Triangle> new_tris = facet_triangles(rebuilt);
            const double tau =
                threshold_select(orig_tris, opt.eval_density, substream(opt.geometry_seed, 9001),
                                 substream(opt.geometry_seed, 9002));
            const PointCloud x =
                sample_point_cloud(orig_tris, opt.eval_density, substream(opt.geometry_seed, 9003));
            const PointCloud x_hat =
                sample_point_cloud(new_tris, opt.eval_density, substream(opt.geometry_seed, 9004));
            const F1Result f1 = f1_score(x, x_hat, tau);
            res.report.f1 = f1.f1;
            res.report.precision = f1.precision;
            res.report.recall = f1.recall;
            res.report.tau_m = tau;
        } else {
            res.report.f1 = 0.0;
            res.report.precision = 0.0;
            res.report.recall = 0.0;
        }
    }

    validate_scene(twin);
    return res;
}

// ------------------------------------------------------------------------
// Results accumulation: `experiment_id, metric, value, seed, config_hash`
// ------------------------------------------------------------------------
struct ResultRow {
    std::string experiment_id;
    std::string metric;
    double value = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

class Results {
  public:
    void add(const std::string &id, const std::string &metric, double value, std::uint64_t seed,
             std::uint64_t config_hash) {
        rows_.push_back({id, metric, value, seed, config_hash});
    }

    const std::vector<ResultRow> &rows() const { return rows_; }

    std::vector<double> values(const std::string &id, const std::string &metric) const {
        std::vector<double> v;
        for (const auto &r : rows_)
            if (r.experiment_id == id && r.metric == metric)
                v.push_back(r.value);
        return v;
    }

    double median(const std::string &id, const std::string &metric) const {
        std::vector<double> v = values(id, metric);
        if (v.empty())
            throw error("no rows for " + id + " / " + metric);
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

    void write_csv(const std::string &path) const {
        std::ofstream out(path);
        if (!out)
            throw error("cannot open for writing: " + path);
        out << "experiment_id,metric,value,seed,config_hash\n";
        for (const auto &r : rows_)
            out << r.experiment_id << ',' << r.metric << ',' << fmt_g(r.value) << ',' << r.seed << ','
                << hex64(r.config_hash) << '\n';
    }

  private:
    std::vector<ResultRow> rows_;
};

// ------------------------------------------------------------------------
// ExperimentSpec
// ------------------------------------------------------------------------
struct ExperimentSpec {
    std::string name = "experiment";
    std::string out_dir = "results";
    std::string target_scene_path;
    std::string twin_scene_path; // optional; default derives target minus foliage
    std::vector<std::string> recipes;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    double split_ratio = 0.8;
    std::uint64_t split_seed = 2024;
    TraceConfig trace{};
    unsigned threads = 1;

    // training
    int epochs = 25;
    double learning_rate = 1e-3;
    int batch_size = 64;
    double compression_ratio = 1.0 / 64.0;
    std::size_t twin_train_size = 5120;
    std::vector<std::size_t> train_sizes = {1280, 5120};
    std::vector<std::string> sources = {"twin", "statistical", "target"};
    std::vector<double> ratios = {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8};
    std::size_t ratio_train_size = 0; // 0: twin_train_size
    int ratio_epochs = 0;             // 0: epochs

    // statistical baseline
    StatGenConfig statgen{};

    // fidelity sweeps
    std::vector<double> densities = {2.0, 0.5, 0.05};
    std::vector<int> reflections = {4, 3, 2, 1};
    std::vector<double> fovs = {180, 170, 160, 150, 140};
    std::vector<std::string> materials = {"concrete", "drywall"};
    double eval_density = 2.0;
    std::uint64_t geometry_seed = 11;
    std::size_t sweep_train_size = 2560;
    int sweep_epochs = 12;

    // refinement
    std::size_t refine_selected = 80;
    std::size_t corr_top = 100;
    std::size_t refine_iters = 500;
    double refine_lr = 1e-4;

    // evaluation
    EvalConfig eval{};
    std::vector<int> user_counts = {2, 4};
    int sumrate_draws = 20;

    std::uint64_t hash() const {
        std::ostringstream os;
        os << name << '|' << target_scene_path << '|' << twin_scene_path << '|' << split_ratio << '|'
           << split_seed << '|' << trace.max_reflections << '|' << trace.min_path_gain_db << '|'
           << trace.apply_fov << '|' << epochs << '|' << learning_rate << '|' << batch_size << '|'
           << compression_ratio << '|' << twin_train_size << '|' << sweep_train_size << '|' << sweep_epochs
           << '|' << refine_selected << '|' << refine_iters << '|' << refine_lr << '|' << eval.eirp_dbm
           << '|' << eval.noise_figure_db << '|' << eval_density << '|' << geometry_seed;
        for (auto s : seeds)
            os << '|' << s;
        return fnv1a64(os.str());
    }
};

inline ExperimentSpec load_experiment_spec(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw error("cannot open experiment spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw parse_error(path + ": " + e.what());
    }
    ExperimentSpec s;
    s.name = j.value("name", s.name);
    s.out_dir = j.value("out_dir", s.out_dir);
    s.target_scene_path = j.value("target_scene", std::string());
    s.twin_scene_path = j.value("twin_scene", std::string());
    if (j.contains("recipes"))
        for (const auto &r : j["recipes"])
            s.recipes.push_back(r.get<std::string>());
    if (j.contains("seeds")) {
        s.seeds.clear();
        for (const auto &v : j["seeds"])
            s.seeds.push_back(v.get<std::uint64_t>());
    }
    s.split_ratio = j.value("split_ratio", s.split_ratio);
    s.split_seed = j.value("split_seed", s.split_seed);
    if (j.contains("trace")) {
        const auto &t = j["trace"];
        s.trace.max_reflections = t.value("max_reflections", s.trace.max_reflections);
        s.trace.min_path_gain_db = t.value("min_gain_db", s.trace.min_path_gain_db);
        s.trace.apply_fov = t.value("apply_fov", s.trace.apply_fov);
    }
    s.threads = j.value("threads", s.threads);
    if (j.contains("train")) {
        const auto &t = j["train"];
        s.epochs = t.value("epochs", s.epochs);
        s.learning_rate = t.value("lr", s.learning_rate);
        s.batch_size = t.value("batch", s.batch_size);
        s.compression_ratio = t.value("ratio", s.compression_ratio);
        s.twin_train_size = t.value("twin_train_size", s.twin_train_size);
    }
    if (j.contains("train_sizes")) {
        s.train_sizes.clear();
        for (const auto &v : j["train_sizes"])
            s.train_sizes.push_back(v.get<std::size_t>());
    }
    if (j.contains("sources")) {
        s.sources.clear();
        for (const auto &v : j["sources"])
            s.sources.push_back(v.get<std::string>());
    }
    if (j.contains("ratios")) {
        s.ratios.clear();
        for (const auto &v : j["ratios"])
            s.ratios.push_back(v.get<double>());
    }
    s.ratio_train_size = j.value("ratio_train_size", s.ratio_train_size);
    s.ratio_epochs = j.value("ratio_epochs", s.ratio_epochs);
    if (j.contains("fidelity")) {
        const auto &f = j["fidelity"];
        if (f.contains("densities")) {
            s.densities.clear();
            for (const auto &v : f["densities"])
                s.densities.push_back(v.get<double>());
        }
        if (f.contains("reflections")) {
            s.reflections.clear();
            for (const auto &v : f["reflections"])
                s.reflections.push_back(v.get<int>());
        }
        if (f.contains("fovs")) {
            s.fovs.clear();
            for (const auto &v : f["fovs"])
                s.fovs.push_back(v.get<double>());
        }
        if (f.contains("materials")) {
            s.materials.clear();
            for (const auto &v : f["materials"])
                s.materials.push_back(v.get<std::string>());
        }
        s.eval_density = f.value("eval_density", s.eval_density);
        s.geometry_seed = f.value("geometry_seed", s.geometry_seed);
        s.sweep_train_size = f.value("train_size", s.sweep_train_size);
        s.sweep_epochs = f.value("epochs", s.sweep_epochs);
    }
    if (j.contains("refine")) {
        const auto &r = j["refine"];
        s.refine_selected = r.value("selected", s.refine_selected);
        s.corr_top = r.value("corr_top", s.corr_top);
        s.refine_iters = r.value("iters", s.refine_iters);
        s.refine_lr = r.value("lr", s.refine_lr);
    }
    if (j.contains("eval")) {
        const auto &e = j["eval"];
        s.eval.eirp_dbm = e.value("eirp_dbm", s.eval.eirp_dbm);
        s.eval.noise_figure_db = e.value("noise_figure_db", s.eval.noise_figure_db);
        s.sumrate_draws = e.value("draws", s.sumrate_draws);
        if (e.contains("users")) {
            s.user_counts.clear();
            for (const auto &v : e["users"])
                s.user_counts.push_back(v.get<int>());
        }
    }
    return s;
}

// ------------------------------------------------------------------------
// LabContext - shared scenes, datasets and trained models for one spec.
// ------------------------------------------------------------------------
inline double nmse_to_db(double v) { return 10.0 * std::log10(v); }

inline Eigen::MatrixXd subsample_cols(const Eigen::MatrixXd &m, std::size_t n, std::uint64_t seed) {
    if (n >= static_cast<std::size_t>(m.cols()))
        return m;
    std::vector<std::size_t> idx(static_cast<std::size_t>(m.cols()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(idx[i]));
    return out;
}

class LabContext {
  public:
    LabContext(const ExperimentSpec &spec, Scene target_scene) : spec_(spec), target_(std::move(target_scene)) {
        if (!spec.twin_scene_path.empty())
            twin_ = load_scene(spec.twin_scene_path);
        else
            twin_ = make_base_twin(target_);
        spec_hash_ = spec.hash();
    }

    const ExperimentSpec &spec() const { return spec_; }
    const Scene &target() const { return target_; }
    const Scene &twin() const { return twin_; }
    std::uint64_t spec_hash() const { return spec_hash_; }

    // Full-coverage target dataset and its split.
    const Dataset &target_dataset() {
        if (!target_ds_) {
            target_ds_ = gen_dataset(target_, spec_.trace, 0, 1, DatasetOrigin::target, spec_.threads);
            auto parts = split_dataset(*target_ds_, spec_.split_ratio, spec_.split_seed);
            target_train_ = std::move(parts.first);
            target_test_ = std::move(parts.second);
        }
        return *target_ds_;
    }
    const Dataset &target_train() {
        target_dataset();
        return *target_train_;
    }
    const Dataset &target_test() {
        target_dataset();
        return *target_test_;
    }

    const Dataset &twin_dataset() {
        if (!twin_ds_)
            twin_ds_ = gen_dataset(twin_, spec_.trace, spec_.twin_train_size, 1, DatasetOrigin::twin,
                                   spec_.threads);
        return *twin_ds_;
    }

    // Matrices are cached by name.
    const Eigen::MatrixXd &matrix(const std::string &key, const Dataset &ds) {
        auto it = matrices_.find(key);
        if (it == matrices_.end())
            it = matrices_.emplace(key, ds.to_matrix()).first;
        return it->second;
    }

    const Eigen::MatrixXd &target_train_matrix() { return matrix("target_train", target_train()); }
    const Eigen::MatrixXd &target_test_matrix() { return matrix("target_test", target_test()); }
    const Eigen::MatrixXd &twin_matrix() { return matrix("twin", twin_dataset()); }

    Eigen::MatrixXd statistical_matrix(std::size_t count, std::uint64_t seed) {
        StatGenConfig cfg = spec_.statgen;
        cfg.seed = substream(seed, 0x57a7);
        const Dataset ds = statistical_dataset(cfg, target_.bs, target_.ofdm, count, spec_.threads);
        return ds.to_matrix();
    }

    TrainConfig train_config(std::uint64_t seed, int epochs = -1) const {
        TrainConfig cfg;
        cfg.learning_rate = spec_.learning_rate;
        cfg.batch_size = spec_.batch_size;
        cfg.epochs = epochs > 0 ? epochs : spec_.epochs;
        cfg.seed = seed;
        return cfg;
    }

    // Pre-trained twin model, cached per (seed).
    const AutoencoderModel &pretrained(std::uint64_t seed) {
        const std::string key = "pretrain/" + std::to_string(seed);
        auto it = models_.find(key);
        if (it == models_.end()) {
            const int m = latent_from_ratio(spec_.compression_ratio, model_input_dim());
            const AutoencoderModel init = init_model(m, substream(seed, 0x1417), model_input_dim());
            const TrainResult tr = train(init, twin_matrix(), train_config(seed));
            it = models_.emplace(key, tr.model).first;
        }
        return it->second;
    }

    int model_input_dim() {
        const Dataset &ds = twin_dataset();
        return 2 * ds.rows() * ds.cols();
    }

    std::map<std::string, AutoencoderModel> models_; // shared cache for recipes

  private:
    ExperimentSpec spec_;
    Scene target_, twin_;
    std::uint64_t spec_hash_ = 0;
    std::optional<Dataset> target_ds_, target_train_, target_test_, twin_ds_;
    std::map<std::string, Eigen::MatrixXd> matrices_;
};

// ------------------------------------------------------------------------
// Recipes
// ------------------------------------------------------------------------
inline void run_direct_generalization(LabContext &ctx, Results &res) {
    const auto &spec = ctx.spec();
    const int m_latent = latent_from_ratio(spec.compression_ratio, ctx.model_input_dim());
    const Eigen::MatrixXd &test = ctx.target_test_matrix();

    for (const std::string &source : spec.sources) {
        for (const std::size_t size : spec.train_sizes) {
            for (const std::uint64_t seed : spec.seeds) {
                const std::string id = "fig4/source=" + source + "/size=" + std::to_string(size);
                double v = 0.0;
                if (source == "twin" && size == spec.twin_train_size) {
                    // identical configuration to the shared pre-trained model
                    v = nmse_to_db(mean_reconstruction_nmse(ctx.pretrained(seed), test));
                } else {
                    Eigen::MatrixXd train_data;
                    if (source == "twin")
                        train_data = subsample_cols(ctx.twin_matrix(), size, substream(0xC01, size));
                    else if (source == "target")
                        train_data = subsample_cols(ctx.target_train_matrix(), size, substream(0xC02, size));
                    else
                        train_data = ctx.statistical_matrix(size, seed);
                    if (static_cast<std::size_t>(train_data.cols()) < size)
                        throw error("direct-generalization: not enough " + source + " samples");
                    const AutoencoderModel init =
                        init_model(m_latent, substream(seed, 0x1417), ctx.model_input_dim());
                    const TrainResult tr = train(init, train_data, ctx.train_config(seed));
                    v = nmse_to_db(mean_reconstruction_nmse(tr.model, test));
                }
                res.add(id, "test_nmse_db", v, seed, fnv1a64(id) ^ ctx.spec_hash());
            }
        }
    }
}

inline void run_compression_sweep(LabContext &ctx, Results &res) {
    const auto &spec = ctx.spec();
    const Eigen::MatrixXd &test = ctx.target_test_matrix();
    const std::size_t size = spec.ratio_train_size > 0 ? spec.ratio_train_size : spec.twin_train_size;
    const int epochs = spec.ratio_epochs > 0 ? spec.ratio_epochs : spec.epochs;
    const Eigen::MatrixXd data = subsample_cols(ctx.twin_matrix(), size, substream(0xC05, size));
    for (const double ratio : spec.ratios) {
        const int m_latent = latent_from_ratio(ratio, ctx.model_input_dim());
        for (const std::uint64_t seed : spec.seeds) {
            const AutoencoderModel init =
                init_model(m_latent, substream(seed, 0x1417), ctx.model_input_dim());
            const TrainResult tr = train(init, data, ctx.train_config(seed, epochs));
            const double v = nmse_to_db(mean_reconstruction_nmse(tr.model, test));
            const std::string id = "fig5/latent=" + std::to_string(m_latent);
            res.add(id, "test_nmse_db", v, seed, fnv1a64(id) ^ ctx.spec_hash());
        }
    }
}

inline void run_refinement(LabContext &ctx, Results &res) {
    const auto &spec = ctx.spec();
    const Eigen::MatrixXd &test = ctx.target_test_matrix();
    const Eigen::MatrixXd &ttrain = ctx.target_train_matrix();

    // Twin samples as complex matrices for the correlation diagnostic.
    std::vector<Eigen::MatrixXcd> twin_g;
    for (const auto &s : ctx.twin_dataset().samples)
        twin_g.push_back(s.g);
    const int rows = ctx.twin_dataset().rows(), cols = ctx.twin_dataset().cols();

    for (const std::uint64_t seed : spec.seeds) {
        const AutoencoderModel &pre = ctx.pretrained(seed);
        const auto add = [&](const std::string &approach, const std::string &metric, double v) {
            const std::string id = "fig6/approach=" + approach;
            res.add(id, metric, v, seed, fnv1a64(id) ^ ctx.spec_hash());
        };

        add("none", "test_nmse_db", nmse_to_db(mean_reconstruction_nmse(pre, test)));

        // Correlation diagnostic: top-NMSE selection vs a random draw.
        const Selection top_corr = select_top_k(pre, ttrain, std::min(spec.corr_top,
                                                                      static_cast<std::size_t>(ttrain.cols())));
        double mean_sel = 0.0;
        for (Eigen::Index c = 0; c < top_corr.samples.cols(); ++c) {
            const Eigen::MatrixXcd g = csi_from_real_vec(top_corr.samples.col(c), rows, cols);
            mean_sel += max_correlation(g, twin_g);
        }
        mean_sel /= static_cast<double>(top_corr.samples.cols());
        add("selected", "mean_max_corr", mean_sel);

        Eigen::MatrixXd rand_set = subsample_cols(ttrain, top_corr.indices.size(), substream(seed, 0xAB));
        double mean_rand = 0.0;
        for (Eigen::Index c = 0; c < rand_set.cols(); ++c) {
            const Eigen::MatrixXcd g = csi_from_real_vec(rand_set.col(c), rows, cols);
            mean_rand += max_correlation(g, twin_g);
        }
        mean_rand /= static_cast<double>(rand_set.cols());
        add("random", "mean_max_corr", mean_rand);

        // Refinement proper.
        TrainConfig rcfg = ctx.train_config(substream(seed, 0xF1));
        rcfg.learning_rate = spec.refine_lr;
        rcfg.max_batches = spec.refine_iters;
        rcfg.epochs = 1 << 20; // iteration budget governs

        const Selection top80 = select_top_k(pre, ttrain, spec.refine_selected);
        const TrainResult naive = refine_naive(pre, top80.samples, rcfg);
        add("naive", "test_nmse_db", nmse_to_db(mean_reconstruction_nmse(naive.model, test)));

        const TrainResult rehearsal = refine_rehearsal(pre, ctx.twin_matrix(), top80.samples, rcfg);
        add("rehearsal", "test_nmse_db", nmse_to_db(mean_reconstruction_nmse(rehearsal.model, test)));
        ctx.models_["rehearsal/" + std::to_string(seed)] = rehearsal.model;

        const Eigen::MatrixXd rand80 = subsample_cols(ttrain, spec.refine_selected, substream(seed, 0xAC));
        const TrainResult rand_ref = refine_rehearsal(pre, ctx.twin_matrix(), rand80, rcfg);
        add("random_rehearsal", "test_nmse_db", nmse_to_db(mean_reconstruction_nmse(rand_ref.model, test)));

        // Scratch model on the full target training set (Fig 7 reference).
        const int m_latent = latent_from_ratio(spec.compression_ratio, ctx.model_input_dim());
        const AutoencoderModel init = init_model(m_latent, substream(seed, 0x1418), ctx.model_input_dim());
        const TrainResult scratch = train(init, ttrain, ctx.train_config(seed));
        add("scratch", "test_nmse_db", nmse_to_db(mean_reconstruction_nmse(scratch.model, test)));
    }
}

// Fidelity sweep cells; each emits test NMSE rows plus a fidelity report row.
struct FidelityCell {
    std::string axis;      // geometry | material | rt | fov
    std::string parameter; // density / material name / reflections / degrees
    double value = 0.0;
    FidelityReport report;
};

inline void run_fidelity_sweep(LabContext &ctx, Results &res, std::vector<FidelityCell> *cells_out = nullptr) {
    const auto &spec = ctx.spec();
    const Eigen::MatrixXd &test = ctx.target_test_matrix();
    const int m_latent = latent_from_ratio(spec.compression_ratio, ctx.model_input_dim());

    // Cells that resolve to the same twin configuration (for instance the
    // R=4 / FoV=180 / unchanged-material baselines) share one training run.
    std::map<std::string, std::vector<double>> memo; // config key -> per-seed NMSE dB

    const auto cell_key = [&](const Scene &twin_scene, const TraceConfig &trace, double density) {
        std::ostringstream os;
        os << fmt_g(density) << '|' << trace.max_reflections << '|' << fmt_g(twin_scene.bs.fov_deg) << '|'
           << spec.sweep_train_size << '|' << spec.sweep_epochs;
        for (const auto &m : twin_scene.materials)
            os << '|' << fmt_g(m.eps_r) << ':' << fmt_g(m.sigma);
        return os.str();
    };

    const auto run_cell = [&](const std::string &axis, const std::string &param, double value,
                              const Scene &twin_scene, const TraceConfig &trace, const FidelityReport &rep,
                              double density) {
        const std::string id = "fig12/axis=" + axis + "/" + param;
        const std::string key = cell_key(twin_scene, trace, density);
        auto it = memo.find(key);
        if (it == memo.end()) {
            const Dataset ds = gen_dataset(twin_scene, trace, spec.sweep_train_size, 1, DatasetOrigin::twin,
                                           spec.threads);
            const Eigen::MatrixXd data = ds.to_matrix();
            std::vector<double> per_seed;
            for (const std::uint64_t seed : spec.seeds) {
                const AutoencoderModel init =
                    init_model(m_latent, substream(seed, 0x1417), ctx.model_input_dim());
                const TrainResult tr = train(init, data, ctx.train_config(seed, spec.sweep_epochs));
                per_seed.push_back(nmse_to_db(mean_reconstruction_nmse(tr.model, test)));
            }
            it = memo.emplace(key, std::move(per_seed)).first;
        }
        for (std::size_t i = 0; i < spec.seeds.size(); ++i)
            res.add(id, "test_nmse_db", it->second[i], spec.seeds[i], fnv1a64(id) ^ ctx.spec_hash());
        res.add(id, "f1", rep.f1, 0, fnv1a64(id) ^ ctx.spec_hash());
        if (cells_out)
            cells_out->push_back({axis, param, value, rep});
    };

    for (const double density : spec.densities) {
        TwinDegradeOptions opt;
        opt.geometry_density = density;
        opt.geometry_seed = spec.geometry_seed;
        opt.eval_density = spec.eval_density;
        const TwinDegradeResult dt = degrade_twin(ctx.target(), opt);
        run_cell("geometry", "density=" + fmt_g(density), density, dt.scene, spec.trace, dt.report, density);
    }
    for (const std::string &mat : spec.materials) {
        TwinDegradeOptions opt;
        opt.material_override = mat;
        const TwinDegradeResult dt = degrade_twin(ctx.target(), opt);
        run_cell("material", "material=" + mat, 0.0, dt.scene, spec.trace, dt.report, -1.0);
    }
    for (const int r : spec.reflections) {
        TraceConfig trace = spec.trace;
        trace.max_reflections = r;
        FidelityReport rep;
        rep.max_reflections = r;
        run_cell("rt", "reflections=" + std::to_string(r), r, ctx.twin(), trace, rep, -1.0);
    }
    for (const double fov : spec.fovs) {
        TwinDegradeOptions opt;
        opt.fov_deg = fov;
        const TwinDegradeResult dt = degrade_twin(ctx.target(), opt);
        run_cell("fov", "fov=" + fmt_g(fov), fov, dt.scene, spec.trace, dt.report, -1.0);
    }
}

inline void run_refinement_after_impairment(LabContext &ctx, Results &res) {
    const auto &spec = ctx.spec();
    const Eigen::MatrixXd &test = ctx.target_test_matrix();
    const Eigen::MatrixXd &ttrain = ctx.target_train_matrix();
    const int m_latent = latent_from_ratio(spec.compression_ratio, ctx.model_input_dim());

    // One impaired twin per axis (the worst sweep value).
    struct Impair {
        std::string axis;
        Scene scene;
        TraceConfig trace;
    };
    std::vector<Impair> impairments;
    {
        TwinDegradeOptions opt;
        opt.geometry_density = spec.densities.empty() ? 0.05 : spec.densities.back();
        opt.geometry_seed = spec.geometry_seed;
        impairments.push_back({"geometry", degrade_twin(ctx.target(), opt).scene, spec.trace});
    }
    {
        TraceConfig t = spec.trace;
        t.max_reflections = spec.reflections.empty() ? 1 : spec.reflections.back();
        impairments.push_back({"rt", ctx.twin(), t});
    }
    {
        TwinDegradeOptions opt;
        opt.fov_deg = spec.fovs.empty() ? 140.0 : spec.fovs.back();
        impairments.push_back({"fov", degrade_twin(ctx.target(), opt).scene, spec.trace});
    }

    for (const auto &imp : impairments) {
        Dataset ds = gen_dataset(imp.scene, imp.trace, spec.sweep_train_size, 1, DatasetOrigin::twin,
                                 spec.threads);
        const Eigen::MatrixXd data = ds.to_matrix();
        for (const std::uint64_t seed : spec.seeds) {
            const AutoencoderModel init = init_model(m_latent, substream(seed, 0x1417), ctx.model_input_dim());
            const TrainResult pre = train(init, data, ctx.train_config(seed, spec.sweep_epochs));
            const std::string id = "fig13/axis=" + imp.axis;
            res.add(id, "pre_nmse_db", nmse_to_db(mean_reconstruction_nmse(pre.model, test)), seed,
                    fnv1a64(id) ^ ctx.spec_hash());

            TrainConfig rcfg = ctx.train_config(substream(seed, 0xF2));
            rcfg.learning_rate = spec.refine_lr;
            rcfg.max_batches = spec.refine_iters;
            rcfg.epochs = 1 << 20;
            const Selection sel = select_top_k(pre.model, ttrain, spec.refine_selected);
            const TrainResult reh = refine_rehearsal(pre.model, data, sel.samples, rcfg);
            res.add(id, "post_nmse_db", nmse_to_db(mean_reconstruction_nmse(reh.model, test)), seed,
                    fnv1a64(id) ^ ctx.spec_hash());
        }
    }
}

// Spectral efficiency with ZF precoding on reconstructed noisy estimates.
inline void run_spectral_efficiency(LabContext &ctx, Results &res) {
    const auto &spec = ctx.spec();
    const Scene &target = ctx.target();
    const double sigma_n2 = noise_power_w(target.ofdm.delta_f_hz, spec.eval.noise_figure_db);
    const double p_subcarrier = eirp_w(spec.eval.eirp_dbm) / target.ofdm.num_subcarriers;
    const double sigma_e2 = estimation_noise_var(spec.eval, target.ofdm);

    // Covered UE list and per-UE channels come from a raw-enabled dataset on
    // a modest seeded subset of the grid.
    const std::size_t pool = std::min<std::size_t>(512, ctx.target_dataset().samples.size());
    Dataset pool_ds = gen_dataset(target, spec.trace, pool, 3, DatasetOrigin::target, spec.threads, true);

    const int rows = pool_ds.rows(), cols = pool_ds.cols();

    const auto reconstruct_h = [&](const AutoencoderModel &model, const Eigen::MatrixXcd &h_est) {
        const AngularDelayCsi g = to_delay_angular({h_est, -1});
        const Eigen::VectorXd v = csi_to_real_vec(g.g);
        const Eigen::VectorXd rec = decode(model, encode(model, v));
        AngularDelayCsi out;
        out.g = csi_from_real_vec(rec, rows, cols);
        out.scale = g.scale;
        return from_delay_angular(out, target.ofdm.num_subcarriers).h;
    };

    for (const std::uint64_t seed : spec.seeds) {
        const AutoencoderModel &pre = ctx.pretrained(seed);
        const auto it_reh = ctx.models_.find("rehearsal/" + std::to_string(seed));
        for (const int users : spec.user_counts) {
            double sum_pre = 0.0, sum_reh = 0.0, sum_perfect = 0.0;
            int ok_draws = 0;
            Rng draw_rng(substream(seed, 0xD0A0 + static_cast<std::uint64_t>(users)));
            Rng noise_rng(substream(seed, 0x4015E));
            for (int d = 0; d < spec.sumrate_draws; ++d) {
                // users distinct UEs from the pool
                std::vector<std::size_t> pick;
                while (pick.size() < static_cast<std::size_t>(users)) {
                    const std::size_t c = draw_rng.index(pool_ds.samples.size());
                    if (std::find(pick.begin(), pick.end(), c) == pick.end())
                        pick.push_back(c);
                }
                std::vector<Eigen::MatrixXcd> h_true, h_pre, h_reh;
                for (const std::size_t u : pick) {
                    const Eigen::MatrixXcd &h = pool_ds.raw[u];
                    h_true.push_back(h);
                    const Eigen::MatrixXcd h_est = noisy_channel_estimate(h, sigma_e2, noise_rng);
                    h_pre.push_back(reconstruct_h(pre, h_est));
                    if (it_reh != ctx.models_.end())
                        h_reh.push_back(reconstruct_h(it_reh->second, h_est));
                }
                try {
                    const auto rate_with = [&](const std::vector<Eigen::MatrixXcd> &h_for_precoding) {
                        std::vector<Eigen::MatrixXcd> precoders(target.ofdm.num_subcarriers);
                        for (int k = 0; k < target.ofdm.num_subcarriers; ++k) {
                            Eigen::MatrixXcd hk(target.bs.num_antennas, users);
                            for (int u = 0; u < users; ++u)
                                hk.col(u) = h_for_precoding[static_cast<std::size_t>(u)].col(k);
                            precoders[static_cast<std::size_t>(k)] = zf_precoder(hk, p_subcarrier);
                        }
                        return sum_rate(h_true, precoders, sigma_n2);
                    };
                    const double r_pre = rate_with(h_pre);
                    const double r_perfect = rate_with(h_true);
                    double r_reh = 0.0;
                    if (!h_reh.empty())
                        r_reh = rate_with(h_reh);
                    sum_pre += r_pre;
                    sum_perfect += r_perfect;
                    sum_reh += r_reh;
                    ++ok_draws;
                } catch (const validation_error &) {
                    continue; // rank-deficient draw; skip deterministically
                }
            }
            if (ok_draws == 0)
                throw error("spectral-efficiency: all draws rank-deficient");
            const std::string base = "fig14/users=" + std::to_string(users);
            res.add(base + "/model=pretrained", "sum_rate_bps_hz", sum_pre / ok_draws, seed,
                    fnv1a64(base) ^ ctx.spec_hash());
            if (it_reh != ctx.models_.end())
                res.add(base + "/model=rehearsal", "sum_rate_bps_hz", sum_reh / ok_draws, seed,
                        fnv1a64(base) ^ ctx.spec_hash());
            res.add(base + "/model=perfect", "sum_rate_bps_hz", sum_perfect / ok_draws, seed,
                    fnv1a64(base) ^ ctx.spec_hash());
        }
    }
}

// ------------------------------------------------------------------------
// run_experiment - dispatch the spec's recipes and write per-recipe CSVs
// plus a summary.
// ------------------------------------------------------------------------
inline void write_fidelity_csv(const std::vector<FidelityCell> &cells, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw error("cannot open for writing: " + path);
    out << "axis,parameter,value,f1,precision,recall,tau_m,delta_eps_r,delta_sigma\n";
    for (const auto &c : cells)
        out << c.axis << ',' << c.parameter << ',' << fmt_g(c.value) << ',' << fmt_g(c.report.f1) << ','
            << fmt_g(c.report.precision) << ',' << fmt_g(c.report.recall) << ',' << fmt_g(c.report.tau_m)
            << ',' << fmt_g(c.report.delta_eps_r) << ',' << fmt_g(c.report.delta_sigma) << '\n';
}

inline void run_experiment(const ExperimentSpec &spec) {
    if (spec.target_scene_path.empty())
        throw validation_error("experiment spec: target_scene is required");
    std::filesystem::create_directories(spec.out_dir);
    LabContext ctx(spec, load_scene(spec.target_scene_path));

    std::vector<std::string> recipes = spec.recipes;
    if (recipes.empty())
        recipes = {"direct-generalization"};

    std::ofstream summary(spec.out_dir + "/summary.csv");
    if (!summary)
        throw error("cannot open for writing: " + spec.out_dir + "/summary.csv");
    summary << "recipe,rows,config_hash\n";

    for (const std::string &recipe : recipes) {
        Results res;
        try {
            if (recipe == "direct-generalization")
                run_direct_generalization(ctx, res);
            else if (recipe == "compression-sweep")
                run_compression_sweep(ctx, res);
            else if (recipe == "refinement")
                run_refinement(ctx, res);
            else if (recipe == "fidelity-sweep") {
                std::vector<FidelityCell> cells;
                run_fidelity_sweep(ctx, res, &cells);
                write_fidelity_csv(cells, spec.out_dir + "/fidelity_report.csv");
            } else if (recipe == "refinement-after-impairment")
                run_refinement_after_impairment(ctx, res);
            else if (recipe == "spectral-efficiency")
                run_spectral_efficiency(ctx, res);
            else
                throw validation_error("unknown recipe '" + recipe + "'");
        } catch (const std::exception &e) {
            throw error("recipe '" + recipe + "' failed: " + e.what());
        }
        res.write_csv(spec.out_dir + "/" + recipe + ".csv");
        summary << recipe << ',' << res.rows().size() << ',' << hex64(ctx.spec_hash()) << '\n';
    }
}

} // namespace twincsi
