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
// Downstream metrics: NMSE, zero-forcing precoding, sum spectral
// efficiency, channel-estimation noise injection, and grid coverage.

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "twincsi/channel.hpp"
#include "twincsi/raytracer.hpp"

namespace twincsi {

struct EvalConfig {
    double eirp_dbm = 43.0;
    double noise_figure_db = 7.0;
    double sum_power_w = -1.0; // <= 0: derived as EIRP_linear / K per subcarrier
    int num_users = 4;
    std::uint64_t seed = 1;
};

inline double nmse(const Eigen::MatrixXcd &h, const Eigen::MatrixXcd &h_hat) {
    if (h.rows() != h_hat.rows() || h.cols() != h_hat.cols())
        throw validation_error("nmse: shape mismatch");
    const double ref = h.squaredNorm();
    if (ref <= 0.0)
        throw validation_error("nmse: zero reference channel");
    return (h - h_hat).squaredNorm() / ref;
}

inline double db10(double x) { return 10.0 * std::log10(x); }

// Thermal noise power in watts: -174 dBm/Hz + 10 log10(delta_f) + NF.
inline double noise_power_w(double delta_f_hz, double noise_figure_db) {
    const double dbm = -174.0 + 10.0 * std::log10(delta_f_hz) + noise_figure_db;
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

inline double eirp_w(double eirp_dbm) { return std::pow(10.0, (eirp_dbm - 30.0) / 10.0); }

// ------------------------------------------------------------------------
// zf_precoder - F_raw = H (H^H H)^-1, scaled so the total per-subcarrier
// power equals p. Throws when the stacked channel is rank deficient
// (condition number above 1e8).
// ------------------------------------------------------------------------
inline Eigen::MatrixXcd zf_precoder(const Eigen::MatrixXcd &h_k, double p) {
    const Eigen::Index u = h_k.cols();
    if (u < 1 || h_k.rows() < u)
        throw validation_error("zf_precoder: need N_t >= U >= 1");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h_k);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(u - 1);
    if (!(smin > 0.0) || smax / smin > 1e8)
        throw validation_error("zf_precoder: rank-deficient stacked channel");

    const Eigen::MatrixXcd gram = h_k.adjoint() * h_k;
    const Eigen::MatrixXcd f_raw = h_k * gram.inverse();
    const double pow_raw = f_raw.squaredNorm();
    return f_raw * std::sqrt(p / pow_raw);
}

// ------------------------------------------------------------------------
// sum_rate - Eq.-style sum spectral efficiency in bits/s/Hz.
//   true_h: per user, N_t x K true channels.
//   precoders: per subcarrier, N_t x U.
// ------------------------------------------------------------------------
inline double sum_rate(const std::vector<Eigen::MatrixXcd> &true_h,
                       const std::vector<Eigen::MatrixXcd> &precoders, double sigma_n2) {
    const std::size_t users = true_h.size();
    if (users == 0 || precoders.empty())
        throw validation_error("sum_rate: empty inputs");
    const Eigen::Index k_count = static_cast<Eigen::Index>(precoders.size());
    double rate = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
        const Eigen::MatrixXcd &f = precoders[static_cast<std::size_t>(k)];
        if (f.cols() != static_cast<Eigen::Index>(users))
            throw validation_error("sum_rate: precoder user count mismatch");
        for (std::size_t u = 0; u < users; ++u) {
            const Eigen::VectorXcd h = true_h[u].col(k);
            const double sig = std::norm(h.dot(f.col(static_cast<Eigen::Index>(u))));
            double interf = 0.0;
            for (std::size_t v = 0; v < users; ++v)
                if (v != u)
                    interf += std::norm(h.dot(f.col(static_cast<Eigen::Index>(v))));
            rate += std::log2(1.0 + sig / (interf + sigma_n2));
        }
    }
    return rate / static_cast<double>(k_count);
}

// ------------------------------------------------------------------------
// noisy_channel_estimate - H + E with i.i.d. circular complex Gaussian
// entries. The per-entry error variance models per-antenna orthogonal
// pilots at P_pilot / K each: sigma_e^2 = sigma_n^2 / (P_pilot / K).
// ------------------------------------------------------------------------
inline double estimation_noise_var(const EvalConfig &cfg, const OfdmConfig &ofdm) {
    const double sigma_n2 = noise_power_w(ofdm.delta_f_hz, cfg.noise_figure_db);
    const double pilot = eirp_w(cfg.eirp_dbm) / ofdm.num_subcarriers;
    return sigma_n2 / pilot;
}

inline Eigen::MatrixXcd noisy_channel_estimate(const Eigen::MatrixXcd &h, double sigma_e2, Rng &rng) {
    Eigen::MatrixXcd out = h;
    if (sigma_e2 <= 0.0)
        return out;
    const double s = std::sqrt(sigma_e2 / 2.0);
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            out(r, c) += std::complex<double>(s * rng.gauss(), s * rng.gauss());
    return out;
}

// Fraction of the UE grid with at least one path.
inline double coverage(const Scene &scene, const TraceConfig &cfg, unsigned threads = 1) {
    if (scene.ue_grid.empty())
        return 0.0;
    const ImageTracer tracer(scene, cfg);
    std::vector<std::uint8_t> covered(scene.ue_grid.size(), 0);
    parallel_for(scene.ue_grid.size(), threads,
                 [&](std::size_t i) { covered[i] = tracer.trace(scene.ue_grid[i]).empty() ? 0 : 1; });
    std::size_t n = 0;
    for (auto c : covered)
        n += c;
    return static_cast<double>(n) / static_cast<double>(scene.ue_grid.size());
}

} // namespace twincsi
