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

#include "twincsi/csiproc.hpp"

using namespace twincsi;
using namespace twincsi::testutil;

namespace {

Scene small_scene() {
    Scene s = base_scene();
    s.bs.num_antennas = 8;
    s.ofdm.num_subcarriers = 64;
    s.ofdm.max_delay_taps = 16;
    return s;
}

ChannelMatrix on_grid_channel(const Scene &s, int tap, double az) {
    Path p;
    p.gain = {1.0, 0.0};
    p.delay_s = tap * s.ofdm.sample_period();
    p.aod_az_rad = az;
    p.aod_el_rad = 0.0;
    return synthesize_channel({p}, s.bs, s.ofdm);
}

} // namespace

TEST_CASE("delay-angular transform") {
    const Scene s = small_scene();

    SECTION("dominant entry at (tap, angular bin 0)") {
        const ChannelMatrix cm = on_grid_channel(s, 3, kPi / 2.0);
        const AngularDelayCsi csi = to_delay_angular(cm);
        double best = 0.0;
        int br = -1, bc = -1;
        for (int r = 0; r < csi.g.rows(); ++r)
            for (int c = 0; c < csi.g.cols(); ++c)
                if (std::abs(csi.g(r, c)) > best) {
                    best = std::abs(csi.g(r, c));
                    br = r;
                    bc = c;
                }
        REQUIRE(br == 3);
        REQUIRE(bc == 0);
        REQUIRE(best == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("unit Frobenius norm and positive scale") {
        const ChannelMatrix cm = on_grid_channel(s, 5, 0.7);
        const AngularDelayCsi csi = to_delay_angular(cm);
        REQUIRE(std::fabs(csi.g.norm() - 1.0) < 1e-9);
        REQUIRE(csi.scale > 0.0);
    }
    SECTION("scaling invariance") {
        ChannelMatrix cm = on_grid_channel(s, 5, 0.7);
        const AngularDelayCsi a = to_delay_angular(cm);
        cm.h *= 7.0;
        const AngularDelayCsi b = to_delay_angular(cm);
        REQUIRE((a.g - b.g).norm() < 1e-12);
        REQUIRE(b.scale == Catch::Approx(7.0 * a.scale).epsilon(1e-12));
    }
    SECTION("all-zero channel rejected") {
        ChannelMatrix cm;
        cm.h = Eigen::MatrixXcd::Zero(8, 64);
        REQUIRE_THROWS_AS(to_delay_angular(cm), validation_error);
    }
    SECTION("unitarity before truncation") {
        Rng rng(12);
        ChannelMatrix cm;
        cm.h.resize(8, 64);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 64; ++c)
                cm.h(r, c) = {rng.gauss(), rng.gauss()};
        const AngularDelayCsi full = to_delay_angular(cm, 64); // no truncation
        REQUIRE(full.scale == Catch::Approx(cm.h.norm()).epsilon(1e-10));
    }
    SECTION("truncation is lossless for on-grid channels") {
        const ChannelMatrix cm = on_grid_channel(s, 9, 1.1);
        const AngularDelayCsi full = to_delay_angular(cm, 64);
        double tail = 0.0;
        for (int r = 32; r < full.g.rows(); ++r)
            tail += full.g.row(r).squaredNorm();
        REQUIRE(tail < 1e-12);
    }
}

TEST_CASE("round trip") {
    const Scene s = small_scene();
    SECTION("deterministic two-path channel") {
        Path p1, p2;
        p1.gain = {0.8, -0.1};
        p1.delay_s = 2 * s.ofdm.sample_period();
        p1.aod_az_rad = 0.3;
        p2.gain = {-0.05, 0.4};
        p2.delay_s = 11 * s.ofdm.sample_period();
        p2.aod_az_rad = -1.2;
        const ChannelMatrix cm = synthesize_channel({p1, p2}, s.bs, s.ofdm);
        const ChannelMatrix rec = from_delay_angular(to_delay_angular(cm), s.ofdm.num_subcarriers);
        REQUIRE((rec.h - cm.h).cwiseAbs().maxCoeff() < 1e-10);
    }
    SECTION("statistical corpus with delays inside the truncation window") {
        StatGenConfig cfg;
        cfg.seed = 77;
        const auto chans = statistical_channels(cfg, s.bs, s.ofdm, 50);
        for (const auto &cm : chans) {
            const ChannelMatrix rec = from_delay_angular(to_delay_angular(cm), s.ofdm.num_subcarriers);
            REQUIRE((rec.h - cm.h).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("real-vector layout") {
    Eigen::MatrixXcd g(2, 3);
    int v = 0;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            g(r, c) = {static_cast<double>(++v), static_cast<double>(100 + v)};
        }
    const Eigen::VectorXd vec = csi_to_real_vec(g);
    REQUIRE(vec.size() == 12);
    // real plane first, row-major
    REQUIRE(vec(0) == 1.0);
    REQUIRE(vec(1) == 2.0);
    REQUIRE(vec(5) == 6.0);
    REQUIRE(vec(6) == 101.0);
    const Eigen::MatrixXcd back = csi_from_real_vec(vec, 2, 3);
    REQUIRE((back - g).norm() == 0.0);
}
