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
// Path list -> delay-domain -> frequency-domain MIMO channel synthesis,
// plus a clustered statistical channel generator used as the generic
// (non-site-specific) baseline.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "twincsi/raytracer.hpp"
#include "twincsi/scene.hpp"

namespace twincsi {

struct ChannelMatrix {
    Eigen::MatrixXcd h; // N_t x K
    int ue_index = -1;
};

struct StatGenConfig {
    int num_clusters = 5;
    int rays_per_cluster = 10;
    double delay_scale = 5e-7;  // seconds, mean of the cluster delay law
    double angle_spread = 0.08; // radians, per-ray Laplacian scale
    std::uint64_t seed = 1;
};

// a_n = exp(j (2 pi / lambda) <p_n - p_0, u(az, el)>),
// u = (cos el cos az, cos el sin az, sin el). ||a||^2 = N_t.
inline Eigen::VectorXcd array_response(const ArrayConfig &array, double az_rad, double el_rad, double lambda) {
    const Vec3 u(std::cos(el_rad) * std::cos(az_rad), std::cos(el_rad) * std::sin(az_rad), std::sin(el_rad));
    const double step = (2.0 * kPi / lambda) * array.element_spacing * array.axis.dot(u);
    Eigen::VectorXcd a(array.num_antennas);
    for (int n = 0; n < array.num_antennas; ++n)
        a(n) = std::complex<double>(std::cos(step * n), std::sin(step * n));
    return a;
}

// Normalized sinc pulse, p(0) = 1, zero at the other integer taps.
inline double pulse_sinc(double tau_over_ts) {
    if (std::fabs(tau_over_ts) < 1e-13)
        return 1.0;
    const double x = kPi * tau_over_ts;
    return std::sin(x) / x;
}

struct DelayChannel {
    std::vector<Eigen::VectorXcd> taps; // D vectors of length N_t
    std::size_t clipped_paths = 0;      // paths with delay beyond (D-1+8) T_S
};

// h_d = sum_l alpha_l p(d T_S - tau_l) a(az_l, el_l), d = 0..D-1.
inline DelayChannel delay_domain_channel(const std::vector<Path> &paths, const ArrayConfig &array,
                                         const OfdmConfig &ofdm) {
    const int d_taps = ofdm.max_delay_taps;
    const double ts = ofdm.sample_period();
    const double lambda = ofdm.wavelength();

    DelayChannel out;
    out.taps.assign(d_taps, Eigen::VectorXcd::Zero(array.num_antennas));
    for (const auto &p : paths) {
        if (p.delay_s > (d_taps - 1 + 8) * ts)
            ++out.clipped_paths;
        const Eigen::VectorXcd a = array_response(array, p.aod_az_rad, p.aod_el_rad, lambda);
        for (int d = 0; d < d_taps; ++d) {
            const double w = pulse_sinc((d * ts - p.delay_s) / ts);
            if (w != 0.0)
                out.taps[d] += (p.gain * w) * a;
        }
    }
    return out;
}

// h_k = sum_{d=0}^{D-1} h_d exp(-j 2 pi k d / K), k = 0..K-1.
inline ChannelMatrix freq_channel(const DelayChannel &delay, int num_subcarriers, int ue_index = -1) {
    const int d_taps = static_cast<int>(delay.taps.size());
    if (d_taps > num_subcarriers)
        throw validation_error("freq_channel: D must be <= K");
    const int n_t = d_taps > 0 ? static_cast<int>(delay.taps[0].size()) : 0;

    ChannelMatrix cm;
    cm.ue_index = ue_index;
    cm.h = Eigen::MatrixXcd::Zero(n_t, num_subcarriers);
    for (int d = 0; d < d_taps; ++d) {
        if (delay.taps[d].isZero(0.0))
            continue;
        for (int k = 0; k < num_subcarriers; ++k) {
            const double ph = -2.0 * kPi * static_cast<double>(k) * d / num_subcarriers;
            cm.h.col(k) += delay.taps[d] * std::complex<double>(std::cos(ph), std::sin(ph));
        }
    }
    return cm;
}

// Convenience: paths -> frequency-domain channel.
inline ChannelMatrix synthesize_channel(const std::vector<Path> &paths, const ArrayConfig &array,
                                        const OfdmConfig &ofdm, int ue_index = -1) {
    return freq_channel(delay_domain_channel(paths, array, ofdm), ofdm.num_subcarriers, ue_index);
}

// ------------------------------------------------------------------------
// statistical_channels - clustered random channels, E||H||_F^2 = N_t K.
//
// Per sample: cluster delays are exponential(delay_scale) snapped to taps
// below D; cluster mean azimuths are uniform inside the array FoV around the
// boresight; rays get Laplacian angle offsets and complex Gaussian gains
// with exponentially decaying cluster power (sum of expectations = 1).
// Sample i uses an independent substream of cfg.seed, so generation can be
// parallelized without changing results.
// ------------------------------------------------------------------------
inline ChannelMatrix statistical_channel_sample(const StatGenConfig &cfg, const ArrayConfig &array,
                                                const OfdmConfig &ofdm, std::uint64_t sample_index) {
    Rng rng(substream(cfg.seed, sample_index));
    const double ts = ofdm.sample_period();
    const double lambda = ofdm.wavelength();
    const int d_taps = ofdm.max_delay_taps;

    const double bore_az = std::atan2(array.boresight.y(), array.boresight.x());
    const double half_fov = 0.5 * array.fov_deg * kPi / 180.0;

    // Cluster powers P_c ~ exp(-c), normalized to sum to 1.
    std::vector<double> powers(cfg.num_clusters);
    double psum = 0.0;
    for (int c = 0; c < cfg.num_clusters; ++c) {
        powers[c] = std::exp(-static_cast<double>(c));
        psum += powers[c];
    }
    for (auto &p : powers)
        p /= psum;

    DelayChannel dch;
    dch.taps.assign(d_taps, Eigen::VectorXcd::Zero(array.num_antennas));
    for (int c = 0; c < cfg.num_clusters; ++c) {
        const double delay = rng.exponential(cfg.delay_scale);
        int tap = static_cast<int>(std::lround(delay / ts));
        tap = std::min(std::max(tap, 0), d_taps - 1);
        const double mean_az = bore_az + rng.uniform(-half_fov, half_fov);
        const double ray_var = powers[c] / cfg.rays_per_cluster;
        for (int r = 0; r < cfg.rays_per_cluster; ++r) {
            const double az = mean_az + rng.laplacian(cfg.angle_spread);
            const std::complex<double> gain(std::sqrt(ray_var / 2.0) * rng.gauss(),
                                            std::sqrt(ray_var / 2.0) * rng.gauss());
            dch.taps[tap] += gain * array_response(array, az, 0.0, lambda);
        }
    }
    ChannelMatrix cm = freq_channel(dch, ofdm.num_subcarriers, static_cast<int>(sample_index));
    return cm;
}

inline std::vector<ChannelMatrix> statistical_channels(const StatGenConfig &cfg, const ArrayConfig &array,
                                                       const OfdmConfig &ofdm, std::size_t count,
                                                       unsigned threads = 1) {
    if (count < 1)
        throw validation_error("statistical_channels: count must be >= 1");
    std::vector<ChannelMatrix> out(count);
    parallel_for(count, threads,
                 [&](std::size_t i) { out[i] = statistical_channel_sample(cfg, array, ofdm, i); });
    return out;
}

} // namespace twincsi
