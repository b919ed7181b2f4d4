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

#include "twincsi/evaluation.hpp"

using namespace twincsi;
using namespace twincsi::testutil;

namespace {

Eigen::MatrixXcd random_matrix(Rng &rng, int rows, int cols) {
    Eigen::MatrixXcd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = {rng.gauss(), rng.gauss()};
    return m;
}

} // namespace

TEST_CASE("nmse") {
    Rng rng(1);
    const Eigen::MatrixXcd h = random_matrix(rng, 4, 6);
    SECTION("perfect reconstruction") {
        REQUIRE(nmse(h, h) == 0.0);
    }
    SECTION("zero estimate") {
        REQUIRE(nmse(h, Eigen::MatrixXcd::Zero(4, 6)) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("scalar case") {
        Eigen::MatrixXcd a(1, 1), b(1, 1);
        a(0, 0) = 1.0;
        b(0, 0) = 0.5;
        REQUIRE(nmse(a, b) == Catch::Approx(0.25).epsilon(1e-15));
    }
    SECTION("common scaling cancels exactly") {
        const Eigen::MatrixXcd h_hat = random_matrix(rng, 4, 6);
        const std::complex<double> c{-2.7, 1.3};
        REQUIRE(nmse(c * h, c * h_hat) == Catch::Approx(nmse(h, h_hat)).epsilon(1e-12));
    }
    SECTION("zero reference throws") {
        REQUIRE_THROWS_AS(nmse(Eigen::MatrixXcd::Zero(2, 2), h.topLeftCorner(2, 2)), validation_error);
    }
}

TEST_CASE("zero-forcing precoder") {
    Rng rng(3);
    SECTION("single user points along the channel") {
        Eigen::MatrixXcd h = random_matrix(rng, 8, 1);
        const double p = 2.0;
        const Eigen::MatrixXcd f = zf_precoder(h, p);
        REQUIRE(f.squaredNorm() == Catch::Approx(p).epsilon(1e-12));
        const std::complex<double> r = h.col(0).dot(f.col(0)); // h^H f
        REQUIRE(r.real() > 0.0);
        REQUIRE(std::fabs(r.imag()) < 1e-12 * std::abs(r));
        // parallel: |h^H f| == ||h|| ||f||
        REQUIRE(std::abs(r) == Catch::Approx(h.norm() * f.norm()).epsilon(1e-10));
    }
    SECTION("interference nulling") {
        const Eigen::MatrixXcd h = random_matrix(rng, 4, 2);
        const Eigen::MatrixXcd f = zf_precoder(h, 1.0);
        const Eigen::MatrixXcd prod = h.adjoint() * f;
        REQUIRE(std::abs(prod(0, 1)) < 1e-10 * std::abs(prod(0, 0)));
        REQUIRE(std::abs(prod(1, 0)) < 1e-10 * std::abs(prod(1, 1)));
    }
    SECTION("orthogonal users keep their own directions") {
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(4, 2);
        h(0, 0) = {2.0, 0.0};
        h(2, 1) = {0.0, 1.5};
        const Eigen::MatrixXcd f = zf_precoder(h, 1.0);
        // f_u parallel to h_u
        REQUIRE(std::abs(f(1, 0)) + std::abs(f(2, 0)) + std::abs(f(3, 0)) < 1e-12);
        REQUIRE(std::abs(f(0, 1)) + std::abs(f(1, 1)) + std::abs(f(3, 1)) < 1e-12);
    }
    SECTION("rank deficiency throws") {
        Eigen::MatrixXcd h = random_matrix(rng, 4, 2);
        h.col(1) = h.col(0);
        REQUIRE_THROWS_AS(zf_precoder(h, 1.0), validation_error);
    }
}

TEST_CASE("sum rate") {
    Rng rng(5);
    SECTION("vanishes as the noise blows up") {
        const Eigen::MatrixXcd h = random_matrix(rng, 4, 8);
        std::vector<Eigen::MatrixXcd> precoders;
        for (int k = 0; k < 8; ++k)
            precoders.push_back(zf_precoder(h.col(k).eval(), 1.0));
        const double r = sum_rate({h}, precoders, 1e12);
        REQUIRE(r < 1e-10);
    }
    SECTION("single user closed form") {
        const int k_count = 8;
        const double p = 0.5, sigma2 = 1e-3;
        const Eigen::MatrixXcd h = random_matrix(rng, 4, k_count);
        std::vector<Eigen::MatrixXcd> precoders;
        for (int k = 0; k < k_count; ++k)
            precoders.push_back(zf_precoder(h.col(k).eval(), p));
        double expect = 0.0;
        for (int k = 0; k < k_count; ++k)
            expect += std::log2(1.0 + p * h.col(k).squaredNorm() / sigma2);
        expect /= k_count;
        REQUIRE(sum_rate({h}, precoders, sigma2) == Catch::Approx(expect).epsilon(1e-10));
    }
    SECTION("two-user toy matches direct arithmetic") {
        const int k_count = 2, users = 2;
        const double sigma2 = 0.01;
        std::vector<Eigen::MatrixXcd> h = {random_matrix(rng, 2, k_count), random_matrix(rng, 2, k_count)};
        std::vector<Eigen::MatrixXcd> f = {random_matrix(rng, 2, users), random_matrix(rng, 2, users)};
        double expect = 0.0;
        for (int k = 0; k < k_count; ++k)
            for (int u = 0; u < users; ++u) {
                std::complex<double> sig{0, 0}, other{0, 0};
                for (int n = 0; n < 2; ++n) {
                    sig += std::conj(h[u](n, k)) * f[k](n, u);
                    other += std::conj(h[u](n, k)) * f[k](n, 1 - u);
                }
                expect += std::log2(1.0 + std::norm(sig) / (std::norm(other) + sigma2));
            }
        expect /= k_count;
        REQUIRE(sum_rate(h, f, sigma2) == Catch::Approx(expect).epsilon(1e-12));
    }
    SECTION("invariant under a common unitary rotation") {
        const int k_count = 4, users = 2, nt = 4;
        std::vector<Eigen::MatrixXcd> h = {random_matrix(rng, nt, k_count), random_matrix(rng, nt, k_count)};
        std::vector<Eigen::MatrixXcd> f;
        for (int k = 0; k < k_count; ++k) {
            Eigen::MatrixXcd hk(nt, users);
            hk.col(0) = h[0].col(k);
            hk.col(1) = h[1].col(k);
            f.push_back(zf_precoder(hk, 1.0));
        }
        const double base = sum_rate(h, f, 0.01);

        const Eigen::MatrixXcd q =
            Eigen::HouseholderQR<Eigen::MatrixXcd>(random_matrix(rng, nt, nt)).householderQ();
        std::vector<Eigen::MatrixXcd> hq = {q * h[0], q * h[1]};
        std::vector<Eigen::MatrixXcd> fq;
        for (const auto &fk : f)
            fq.push_back(q * fk);
        REQUIRE(sum_rate(hq, fq, 0.01) == Catch::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("channel estimation noise") {
    SECTION("thermal noise power at the reference numerology") {
        // -174 dBm/Hz + 10 log10(30 kHz) + 7 dB
        const double dbm = 10.0 * std::log10(noise_power_w(30e3, 7.0) * 1000.0);
        REQUIRE(dbm == Catch::Approx(-174.0 + 10.0 * std::log10(30e3) + 7.0).margin(1e-9));
        REQUIRE(dbm == Catch::Approx(-122.23).margin(0.01));
    }
    SECTION("zero variance is the identity") {
        Rng rng(2);
        const Eigen::MatrixXcd h = random_matrix(rng, 4, 4);
        Rng noise(3);
        REQUIRE((noisy_channel_estimate(h, 0.0, noise) - h).norm() == 0.0);
    }
    SECTION("empirical variance matches") {
        const double var = 3.7e-3;
        Rng noise(9);
        const Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(100, 1000);
        const Eigen::MatrixXcd e = noisy_channel_estimate(h, var, noise);
        const double emp = e.squaredNorm() / (100.0 * 1000.0);
        REQUIRE(emp == Catch::Approx(var).epsilon(0.05));
    }
    SECTION("derived estimation variance") {
        EvalConfig cfg;
        OfdmConfig ofdm;
        const double expect = noise_power_w(ofdm.delta_f_hz, cfg.noise_figure_db) /
                              (eirp_w(cfg.eirp_dbm) / ofdm.num_subcarriers);
        REQUIRE(estimation_noise_var(cfg, ofdm) == Catch::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("coverage") {
    SECTION("free space covers everything") {
        Scene s = base_scene();
        s.facets.clear();
        s.ue_grid = build_ue_grid(Vec3(-5, -5, 0), 10, 10, 2.5, 1.5);
        REQUIRE(coverage(s, TraceConfig{2, -200.0, false, true}) == 1.0);
    }
    SECTION("an enclosing box blocks some UEs, and more reflections never hurt") {
        Scene s = base_scene();
        s.facets.clear();
        s.bs.position = Vec3(0, -10, 8);
        add_box(s, Vec3(-3, -3, 0), Vec3(3, 3, 6)); // UEs inside the box have no path
        s.ue_grid = build_ue_grid(Vec3(-6, -6, 0), 12, 12, 1.5, 1.5);
        const double c1 = coverage(s, TraceConfig{1, -200.0, false, true});
        const double c4 = coverage(s, TraceConfig{4, -200.0, false, true});
        REQUIRE(c1 < 1.0);
        REQUIRE(c1 <= c4);
    }
    SECTION("narrow field of view can only lose coverage") {
        Scene s = base_scene();
        s.facets.clear();
        s.bs.position = Vec3(0, -10, 8);
        s.bs.boresight = Vec3(0, 1, 0);
        add_box(s, Vec3(-12, 0, 0), Vec3(-9, 12, 10));
        s.ue_grid = build_ue_grid(Vec3(-14, 2, 0), 24, 8, 2.0, 1.5);
        Scene narrow = s;
        narrow.bs.fov_deg = 60.0;
        const double wide = coverage(s, TraceConfig{2, -200.0, true, true});
        const double got = coverage(narrow, TraceConfig{2, -200.0, true, true});
        REQUIRE(got <= wide);
        REQUIRE(got < 1.0);
    }
}
