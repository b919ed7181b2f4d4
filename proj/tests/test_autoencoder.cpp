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

#include "twincsi/autoencoder.hpp"

using namespace twincsi;

namespace {

// Unit-norm samples on a low-dimensional manifold so a small model can learn.
Eigen::MatrixXd toy_corpus(int dim, int count, std::uint64_t seed, int manifold_dim = 3) {
    Rng rng(seed);
    Eigen::MatrixXd basis(dim, manifold_dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < manifold_dim; ++c)
            basis(r, c) = rng.gauss();
    Eigen::MatrixXd out(dim, count);
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd z(manifold_dim);
        for (int c = 0; c < manifold_dim; ++c)
            z(c) = rng.gauss();
        Eigen::VectorXd x = basis * z;
        out.col(i) = x / x.norm();
    }
    return out;
}

} // namespace

TEST_CASE("latent size from compression ratio") {
    REQUIRE(latent_from_ratio(1.0 / 64.0) == 32);
    REQUIRE(latent_from_ratio(1.0 / 32.0) == 64);
    REQUIRE(latent_from_ratio(1.0 / 16.0) == 128);
    REQUIRE(latent_from_ratio(1.0 / 8.0) == 256);
    REQUIRE_THROWS_AS(latent_from_ratio(2.0), validation_error);
}

TEST_CASE("init_model") {
    const auto a = init_model(32, 5);
    const auto b = init_model(32, 5);
    REQUIRE(a.enc_layers[0].w.rows() == 512);
    REQUIRE(a.enc_layers[0].w.cols() == 2048);
    REQUIRE(a.enc_layers[1].w.rows() == 32);
    REQUIRE(a.dec_layers[1].w.rows() == 2048);
    REQUIRE((a.enc_layers[0].w - b.enc_layers[0].w).norm() == 0.0);
    REQUIRE(a.enc_layers[0].b.norm() == 0.0);
    const auto c = init_model(32, 6);
    REQUIRE((a.enc_layers[0].w - c.enc_layers[0].w).norm() != 0.0);
}

TEST_CASE("encode and decode basics") {
    const auto m = init_model(8, 3, 64, 16);
    SECTION("zero input gives zero latent") {
        const Eigen::VectorXd z = encode(m, Eigen::VectorXd::Zero(64));
        REQUIRE(z.norm() == 0.0); // biases are zero and leaky-relu(0) = 0
    }
    SECTION("output length and unit norm") {
        Rng rng(4);
        Eigen::VectorXd z(8);
        for (int i = 0; i < 8; ++i)
            z(i) = rng.gauss();
        const Eigen::VectorXd y = decode(m, z);
        REQUIRE(y.size() == 64);
        REQUIRE(std::fabs(y.norm() - 1.0) < 1e-9);
    }
    SECTION("zero-guarded normalization flags") {
        AutoencoderModel z = m;
        for (auto &l : z.dec_layers) {
            l.w.setZero();
            l.b.setZero();
        }
        const DecodeResult r = decode_ex(z, Eigen::VectorXd::Ones(8));
        REQUIRE(r.zero_guarded);
        REQUIRE(std::isfinite(r.y.norm()));
    }
    SECTION("shape mismatch throws") {
        REQUIRE_THROWS_AS(encode(m, Eigen::VectorXd::Zero(65)), validation_error);
        REQUIRE_THROWS_AS(decode(m, Eigen::VectorXd::Zero(9)), validation_error);
    }
}

TEST_CASE("forward pass matches an independent oracle") {
    const auto m = init_model(8, 11, 64, 16);
    Rng rng(2);
    Eigen::VectorXd x(64);
    for (int i = 0; i < 64; ++i)
        x(i) = rng.gauss();
    x /= x.norm();

    // naive loop-based forward in long double
    const auto dense = [](const DenseLayer &l, const std::vector<long double> &in) {
        std::vector<long double> out(l.w.rows());
        for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
            long double acc = l.b(r);
            for (Eigen::Index c = 0; c < l.w.cols(); ++c)
                acc += static_cast<long double>(l.w(r, c)) * in[c];
            out[r] = acc;
        }
        return out;
    };
    const auto lrelu = [](std::vector<long double> v) {
        for (auto &e : v)
            if (e < 0)
                e *= 0.3L;
        return v;
    };
    std::vector<long double> cur(x.data(), x.data() + 64);
    cur = lrelu(dense(m.enc_layers[0], cur));
    cur = dense(m.enc_layers[1], cur);
    const Eigen::VectorXd z = encode(m, x);
    REQUIRE(z.size() == 8);
    for (int i = 0; i < 8; ++i)
        REQUIRE(std::fabs(z(i) - static_cast<double>(cur[i])) < 1e-10);

    cur = lrelu(dense(m.dec_layers[0], cur));
    cur = dense(m.dec_layers[1], cur);
    long double norm2 = 0.0;
    for (auto &e : cur) {
        e = std::tanh(e);
        norm2 += e * e;
    }
    const long double norm = std::sqrt(norm2);
    const Eigen::VectorXd y = decode(m, z);
    for (int i = 0; i < 64; ++i)
        REQUIRE(std::fabs(y(i) - static_cast<double>(cur[i] / norm)) < 1e-10);
}

TEST_CASE("gradient check on a reduced model") {
    Rng rng(8);
    for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
        const auto m = init_model(8, seed, 64, 16);
        Eigen::VectorXd x(64);
        for (int i = 0; i < 64; ++i)
            x(i) = rng.gauss();
        x /= x.norm();
        REQUIRE(gradient_check(m, x, 200, seed) < 1e-4);
    }
}

TEST_CASE("gradient check near a zero-loss point") {
    // Identity-like model: equal-magnitude input, pass-through layers, tanh
    // applied uniformly, renormalization recovers the input exactly.
    AutoencoderModel m;
    m.latent_size = 4;
    const auto ident = [](int n) {
        DenseLayer l;
        l.w = Eigen::MatrixXd::Identity(n, n);
        l.b = Eigen::VectorXd::Zero(n);
        return l;
    };
    m.enc_layers = {ident(4), ident(4)};
    m.dec_layers = {ident(4), ident(4)};
    Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.5); // unit norm, equal entries

    detail::ForwardPass fp;
    detail::Gradients g;
    detail::forward(m, x, fp);
    const double loss = detail::backward(m, fp, g);
    REQUIRE(loss < 1e-24);
    for (const auto *grad : {&g.w1, &g.w2, &g.w3, &g.w4})
        REQUIRE(grad->norm() < 1e-12);
}

TEST_CASE("gradient corruption is detected") {
    const auto m = init_model(8, 77, 64, 16);
    Rng rng(9);
    Eigen::VectorXd x(64);
    for (int i = 0; i < 64; ++i)
        x(i) = rng.gauss();
    x /= x.norm();
    REQUIRE(gradient_check(m, x, 50, 1, true, 2.0) > 1e-2);
}

TEST_CASE("training") {
    const Eigen::MatrixXd data = toy_corpus(64, 100, 31);
    const auto init = init_model(8, 5, 64, 16);

    SECTION("loss halves on the toy corpus") {
        TrainConfig cfg;
        cfg.epochs = 50;
        cfg.batch_size = 16;
        cfg.seed = 1;
        const TrainResult tr = train(init, data, cfg);
        REQUIRE(tr.history.size() == 50);
        REQUIRE(tr.history.back().train_nmse < 0.5 * tr.history.front().train_nmse);
    }
    SECTION("zero learning rate freezes the loss") {
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.learning_rate = 0.0;
        cfg.seed = 1;
        const TrainResult tr = train(init, data, cfg);
        // constant up to floating-point regrouping across shuffled batches
        for (const auto &e : tr.history)
            REQUIRE(e.train_nmse == Catch::Approx(tr.history.front().train_nmse).epsilon(1e-12));
    }
    SECTION("same seed gives a bit-identical history") {
        TrainConfig cfg;
        cfg.epochs = 8;
        cfg.seed = 33;
        const TrainResult a = train(init, data, cfg);
        const TrainResult b = train(init, data, cfg);
        for (std::size_t i = 0; i < a.history.size(); ++i)
            REQUIRE(a.history[i].train_nmse == b.history[i].train_nmse);
    }
    SECTION("loss is non-increasing within the 5% transient allowance") {
        TrainConfig cfg;
        cfg.epochs = 40;
        cfg.seed = 2;
        const TrainResult tr = train(init, data, cfg);
        for (std::size_t i = 1; i < tr.history.size(); ++i)
            REQUIRE(tr.history[i].train_nmse <= 1.05 * tr.history[i - 1].train_nmse);
    }
    SECTION("iteration budget caps the update count") {
        TrainConfig cfg;
        cfg.epochs = 100;
        cfg.batch_size = 25; // 4 batches per epoch
        cfg.max_batches = 10;
        cfg.seed = 3;
        const TrainResult tr = train(init, data, cfg);
        REQUIRE(tr.history.size() == 3); // 4 + 4 + 2 batches
    }
    SECTION("validation loss is tracked") {
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.seed = 4;
        const Eigen::MatrixXd val = toy_corpus(64, 20, 99);
        const TrainResult tr = train(init, data, cfg, &val);
        for (const auto &e : tr.history)
            REQUIRE(std::isfinite(e.val_nmse));
    }
}

TEST_CASE("capacity trend: larger latent reconstructs no worse") {
    const Eigen::MatrixXd data = toy_corpus(64, 160, 17, 6);
    const Eigen::MatrixXd test = toy_corpus(64, 60, 18, 6);
    std::vector<double> med;
    for (const int latent : {2, 8, 24}) {
        std::vector<double> runs;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            TrainConfig cfg;
            cfg.epochs = 30;
            cfg.seed = seed;
            const TrainResult tr = train(init_model(latent, seed, 64, 16), data, cfg);
            runs.push_back(mean_reconstruction_nmse(tr.model, test));
        }
        std::sort(runs.begin(), runs.end());
        med.push_back(runs[1]);
    }
    REQUIRE(med[1] <= med[0] * 1.05);
    REQUIRE(med[2] <= med[1] * 1.05);
}

TEST_CASE("checkpoint round trip") {
    const auto m = init_model(8, 21, 64, 16);
    const std::string tmp = (std::filesystem::temp_directory_path() / "twincsi_model.adae").string();
    save_model(m, tmp);
    const auto r = load_model(tmp);
    REQUIRE(r.latent_size == 8);
    REQUIRE((r.enc_layers[0].w - m.enc_layers[0].w).norm() == 0.0);
    REQUIRE((r.dec_layers[1].b - m.dec_layers[1].b).norm() == 0.0);

    Rng rng(5);
    Eigen::VectorXd x(64);
    for (int i = 0; i < 64; ++i)
        x(i) = rng.gauss();
    REQUIRE((reconstruct(m, x) - reconstruct(r, x)).norm() == 0.0);

    // corrupting the magic must fail
    {
        std::fstream f(tmp, std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');
    }
    REQUIRE_THROWS_AS(load_model(tmp), parse_error);
    std::filesystem::remove(tmp);
}

TEST_CASE("loss history CSV") {
    std::vector<EpochLoss> hist = {{0.5, 0.6}, {0.25, std::numeric_limits<double>::quiet_NaN()}};
    const std::string tmp = (std::filesystem::temp_directory_path() / "twincsi_loss.csv").string();
    save_loss_history_csv(hist, tmp);
    std::ifstream in(tmp);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "epoch,train_nmse,val_nmse");
    std::getline(in, line);
    REQUIRE(line == "0,0.5,0.6");
    std::getline(in, line);
    REQUIRE(line == "1,0.25,");
    std::filesystem::remove(tmp);
}
