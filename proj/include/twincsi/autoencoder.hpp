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
// Dense CSI compression autoencoder trained from scratch.
//
// Encoder: in -> hidden (leaky ReLU, slope 0.3) -> M (linear).
// Decoder: M -> hidden (leaky ReLU) -> in, tanh, then renormalization to a
// unit Frobenius norm so reconstructions live on the same sphere as the
// normalized delay-angular inputs. Loss is batch-mean NMSE, which equals the
// squared error for unit-norm targets. Training is plain mini-batch Adam
// with a seeded shuffle; identical seeds give bit-identical histories.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "twincsi/common.hpp"

namespace twincsi {

inline constexpr double kLeakySlope = 0.3;
inline constexpr double kNormEps = 1e-12;
inline constexpr int kCsiInputDim = 2048; // 2 * 32 delay rows * 32 antennas
inline constexpr int kHiddenDim = 512;

struct DenseLayer {
    Eigen::MatrixXd w; // out x in
    Eigen::VectorXd b; // out
};

struct AutoencoderModel {
    std::vector<DenseLayer> enc_layers;
    std::vector<DenseLayer> dec_layers;
    int latent_size = 0;

    int input_dim() const { return enc_layers.empty() ? 0 : static_cast<int>(enc_layers.front().w.cols()); }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto *bank : {&enc_layers, &dec_layers})
            for (const auto &l : *bank)
                n += static_cast<std::size_t>(l.w.size()) + static_cast<std::size_t>(l.b.size());
        return n;
    }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 10;
    std::uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t max_batches = 0; // 0 = unlimited; caps total update steps
};

struct EpochLoss {
    double train_nmse = 0.0;
    double val_nmse = std::numeric_limits<double>::quiet_NaN();
};

// Compression ratio r (real elements kept / real elements in) -> latent size.
inline int latent_from_ratio(double ratio, int input_dim = kCsiInputDim) {
    const int m = static_cast<int>(std::lround(ratio * input_dim));
    if (m < 1 || m >= input_dim)
        throw validation_error("latent size from ratio out of range");
    return m;
}

inline AutoencoderModel init_model(int latent_size, std::uint64_t seed, int input_dim = kCsiInputDim,
                                   int hidden_dim = kHiddenDim) {
    if (latent_size < 1 || latent_size >= input_dim)
        throw validation_error("init_model: latent size must be in [1, input_dim)");
    Rng rng(seed);
    const auto make_layer = [&](int out, int in) {
        DenseLayer l;
        l.w.resize(out, in);
        const double s = std::sqrt(1.0 / in); // fan-in scaled
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c)
                l.w(r, c) = rng.uniform(-s, s);
        l.b = Eigen::VectorXd::Zero(out);
        return l;
    };
    AutoencoderModel m;
    m.latent_size = latent_size;
    m.enc_layers.push_back(make_layer(hidden_dim, input_dim));
    m.enc_layers.push_back(make_layer(latent_size, hidden_dim));
    m.dec_layers.push_back(make_layer(hidden_dim, latent_size));
    m.dec_layers.push_back(make_layer(input_dim, hidden_dim));
    return m;
}

namespace detail {

inline Eigen::MatrixXd leaky_relu(const Eigen::MatrixXd &x) {
    return x.cwiseMax(kLeakySlope * x);
}

inline Eigen::MatrixXd leaky_relu_grad(const Eigen::MatrixXd &pre) {
    return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

// Forward activations kept for backprop.
struct ForwardPass {
    Eigen::MatrixXd x;       // input batch (in x B)
    Eigen::MatrixXd a1, h1;  // encoder hidden pre/post activation
    Eigen::MatrixXd z;       // latent (M x B)
    Eigen::MatrixXd a3, h3;  // decoder hidden pre/post activation
    Eigen::MatrixXd t;       // tanh output before renormalization
    Eigen::VectorXd norms;   // per-column ||t||, before the epsilon guard
    Eigen::MatrixXd y;       // renormalized output
};

inline void forward(const AutoencoderModel &m, const Eigen::MatrixXd &x, ForwardPass &fp) {
    fp.x = x;
    fp.a1 = (m.enc_layers[0].w * x).colwise() + m.enc_layers[0].b;
    fp.h1 = leaky_relu(fp.a1);
    fp.z = (m.enc_layers[1].w * fp.h1).colwise() + m.enc_layers[1].b;
    fp.a3 = (m.dec_layers[0].w * fp.z).colwise() + m.dec_layers[0].b;
    fp.h3 = leaky_relu(fp.a3);
    fp.t = ((m.dec_layers[1].w * fp.h3).colwise() + m.dec_layers[1].b).array().tanh().matrix();
    const Eigen::Index bsz = x.cols();
    fp.norms.resize(bsz);
    fp.y.resizeLike(fp.t);
    for (Eigen::Index j = 0; j < bsz; ++j) {
        const double nu = fp.t.col(j).norm();
        fp.norms(j) = nu;
        fp.y.col(j) = fp.t.col(j) / std::max(nu, kNormEps);
    }
}

struct Gradients {
    Eigen::MatrixXd w1, w2, w3, w4;
    Eigen::VectorXd b1, b2, b3, b4;
};

// Batch-mean squared-error loss and its gradients.
inline double backward(const AutoencoderModel &m, const ForwardPass &fp, Gradients &g) {
    const Eigen::Index bsz = fp.x.cols();
    const double inv_b = 1.0 / static_cast<double>(bsz);

    const Eigen::MatrixXd diff = fp.y - fp.x;
    const double loss = diff.squaredNorm() * inv_b;

    // d loss / d y
    Eigen::MatrixXd dy = 2.0 * inv_b * diff;
    // Renormalization: y = t / max(||t||, eps)
    Eigen::MatrixXd dt(dy.rows(), dy.cols());
    for (Eigen::Index j = 0; j < bsz; ++j) {
        const double nu = std::max(fp.norms(j), kNormEps);
        if (fp.norms(j) > kNormEps) {
            const double proj = fp.y.col(j).dot(dy.col(j));
            dt.col(j) = (dy.col(j) - proj * fp.y.col(j)) / nu;
        } else {
            dt.col(j) = dy.col(j) / nu;
        }
    }
    // tanh
    Eigen::MatrixXd da4 = (dt.array() * (1.0 - fp.t.array().square())).matrix();
    g.w4 = da4 * fp.h3.transpose();
    g.b4 = da4.rowwise().sum();
    Eigen::MatrixXd dh3 = m.dec_layers[1].w.transpose() * da4;
    Eigen::MatrixXd da3 = (dh3.array() * leaky_relu_grad(fp.a3).array()).matrix();
    g.w3 = da3 * fp.z.transpose();
    g.b3 = da3.rowwise().sum();
    Eigen::MatrixXd dz = m.dec_layers[0].w.transpose() * da3;
    g.w2 = dz * fp.h1.transpose();
    g.b2 = dz.rowwise().sum();
    Eigen::MatrixXd dh1 = m.enc_layers[1].w.transpose() * dz;
    Eigen::MatrixXd da1 = (dh1.array() * leaky_relu_grad(fp.a1).array()).matrix();
    g.w1 = da1 * fp.x.transpose();
    g.b1 = da1.rowwise().sum();
    return loss;
}

} // namespace detail

inline Eigen::VectorXd encode(const AutoencoderModel &m, const Eigen::VectorXd &x) {
    if (x.size() != m.input_dim())
        throw validation_error("encode: input length mismatch");
    Eigen::VectorXd a1 = m.enc_layers[0].w * x + m.enc_layers[0].b;
    Eigen::VectorXd h1 = a1.cwiseMax(kLeakySlope * a1);
    return m.enc_layers[1].w * h1 + m.enc_layers[1].b;
}

struct DecodeResult {
    Eigen::VectorXd y;
    bool zero_guarded = false; // pre-normalization output was (near) zero
};

inline DecodeResult decode_ex(const AutoencoderModel &m, const Eigen::VectorXd &z) {
    if (z.size() != m.latent_size)
        throw validation_error("decode: latent length mismatch");
    Eigen::VectorXd a3 = m.dec_layers[0].w * z + m.dec_layers[0].b;
    Eigen::VectorXd h3 = a3.cwiseMax(kLeakySlope * a3);
    Eigen::VectorXd t = (m.dec_layers[1].w * h3 + m.dec_layers[1].b).array().tanh();
    const double nu = t.norm();
    DecodeResult r;
    r.zero_guarded = nu <= kNormEps;
    r.y = t / std::max(nu, kNormEps);
    return r;
}

inline Eigen::VectorXd decode(const AutoencoderModel &m, const Eigen::VectorXd &z) {
    return decode_ex(m, z).y;
}

inline Eigen::VectorXd reconstruct(const AutoencoderModel &m, const Eigen::VectorXd &x) {
    return decode(m, encode(m, x));
}

// Mean squared reconstruction error over columns (NMSE for unit-norm data).
inline double mean_reconstruction_nmse(const AutoencoderModel &m, const Eigen::MatrixXd &data) {
    if (data.cols() == 0)
        throw validation_error("mean_reconstruction_nmse: empty data");
    detail::ForwardPass fp;
    double total = 0.0;
    const Eigen::Index chunk = 256;
    for (Eigen::Index c0 = 0; c0 < data.cols(); c0 += chunk) {
        const Eigen::Index n = std::min(chunk, data.cols() - c0);
        detail::forward(m, data.middleCols(c0, n), fp);
        total += (fp.y - fp.x).squaredNorm();
    }
    return total / static_cast<double>(data.cols());
}

// Per-sample squared reconstruction error.
inline Eigen::VectorXd per_sample_nmse(const AutoencoderModel &m, const Eigen::MatrixXd &data) {
    Eigen::VectorXd out(data.cols());
    detail::ForwardPass fp;
    const Eigen::Index chunk = 256;
    for (Eigen::Index c0 = 0; c0 < data.cols(); c0 += chunk) {
        const Eigen::Index n = std::min(chunk, data.cols() - c0);
        detail::forward(m, data.middleCols(c0, n), fp);
        for (Eigen::Index j = 0; j < n; ++j)
            out(c0 + j) = (fp.y.col(j) - fp.x.col(j)).squaredNorm();
    }
    return out;
}

struct TrainResult {
    AutoencoderModel model;
    std::vector<EpochLoss> history;
};

inline TrainResult train(const AutoencoderModel &start, const Eigen::MatrixXd &data, const TrainConfig &cfg,
                         const Eigen::MatrixXd *val = nullptr) {
    if (data.cols() == 0)
        throw validation_error("train: dataset is empty");
    if (data.rows() != start.input_dim())
        throw validation_error("train: sample dimension mismatch");
    if (cfg.learning_rate < 0.0 || cfg.batch_size < 1)
        throw validation_error("train: bad config");

    TrainResult res;
    res.model = start;
    AutoencoderModel &m = res.model;

    // Adam state, one slot per layer bank in update order.
    struct Slot {
        Eigen::MatrixXd mw, vw;
        Eigen::VectorXd mb, vb;
    };
    std::vector<DenseLayer *> layers = {&m.enc_layers[0], &m.enc_layers[1], &m.dec_layers[0],
                                        &m.dec_layers[1]};
    std::vector<Slot> adam(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        adam[i].mw = Eigen::MatrixXd::Zero(layers[i]->w.rows(), layers[i]->w.cols());
        adam[i].vw = adam[i].mw;
        adam[i].mb = Eigen::VectorXd::Zero(layers[i]->b.size());
        adam[i].vb = adam[i].mb;
    }

    Rng rng(cfg.seed);
    std::vector<Eigen::Index> order(data.cols());
    for (Eigen::Index i = 0; i < data.cols(); ++i)
        order[i] = i;

    detail::ForwardPass fp;
    detail::Gradients g;
    std::size_t steps = 0;
    long long adam_t = 0;
    bool out_of_budget = false;

    for (int epoch = 0; epoch < cfg.epochs && !out_of_budget; ++epoch) {
        rng.shuffle(order);
        double epoch_sq = 0.0;
        Eigen::Index seen = 0;
        for (Eigen::Index b0 = 0; b0 < data.cols(); b0 += cfg.batch_size) {
            const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, data.cols() - b0);
            Eigen::MatrixXd batch(data.rows(), bsz);
            for (Eigen::Index j = 0; j < bsz; ++j)
                batch.col(j) = data.col(order[b0 + j]);

            detail::forward(m, batch, fp);
            const double loss = detail::backward(m, fp, g);
            if (!std::isfinite(loss))
                throw error("train: loss became non-finite at epoch " + std::to_string(epoch));
            epoch_sq += loss * static_cast<double>(bsz);
            seen += bsz;

            ++adam_t;
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_t));
            Eigen::MatrixXd *gw[4] = {&g.w1, &g.w2, &g.w3, &g.w4};
            Eigen::VectorXd *gb[4] = {&g.b1, &g.b2, &g.b3, &g.b4};
            for (std::size_t i = 0; i < layers.size(); ++i) {
                Slot &s = adam[i];
                s.mw = cfg.adam_beta1 * s.mw + (1.0 - cfg.adam_beta1) * (*gw[i]);
                s.vw = cfg.adam_beta2 * s.vw + (1.0 - cfg.adam_beta2) * gw[i]->array().square().matrix();
                s.mb = cfg.adam_beta1 * s.mb + (1.0 - cfg.adam_beta1) * (*gb[i]);
                s.vb = cfg.adam_beta2 * s.vb + (1.0 - cfg.adam_beta2) * gb[i]->array().square().matrix();
                layers[i]->w.array() -=
                    cfg.learning_rate * (s.mw.array() / bc1) / ((s.vw.array() / bc2).sqrt() + cfg.adam_eps);
                layers[i]->b.array() -=
                    cfg.learning_rate * (s.mb.array() / bc1) / ((s.vb.array() / bc2).sqrt() + cfg.adam_eps);
            }
            ++steps;
            if (cfg.max_batches > 0 && steps >= cfg.max_batches) {
                out_of_budget = true;
                break;
            }
        }
        EpochLoss el;
        el.train_nmse = epoch_sq / static_cast<double>(seen);
        if (val)
            el.val_nmse = mean_reconstruction_nmse(m, *val);
        res.history.push_back(el);
    }
    return res;
}

// ------------------------------------------------------------------------
// gradient_check - analytic backprop vs central finite differences on a
// reduced model. Returns the max relative error over the sampled parameters.
// With corrupt_one set, the analytic gradient of the largest-magnitude
// parameter is scaled by corrupt_scale before comparison (detector hook).
// ------------------------------------------------------------------------
inline double gradient_check(const AutoencoderModel &model, const Eigen::VectorXd &sample,
                             int num_params = 200, std::uint64_t seed = 7, bool corrupt_one = false,
                             double corrupt_scale = 2.0) {
    AutoencoderModel m = model;
    detail::ForwardPass fp;
    detail::Gradients g;
    Eigen::MatrixXd x = sample;
    detail::forward(m, x, fp);
    detail::backward(m, fp, g);

    std::vector<Eigen::MatrixXd *> ws = {&m.enc_layers[0].w, &m.enc_layers[1].w, &m.dec_layers[0].w,
                                         &m.dec_layers[1].w};
    std::vector<Eigen::VectorXd *> bs = {&m.enc_layers[0].b, &m.enc_layers[1].b, &m.dec_layers[0].b,
                                         &m.dec_layers[1].b};
    std::vector<Eigen::MatrixXd *> gws = {&g.w1, &g.w2, &g.w3, &g.w4};
    std::vector<Eigen::VectorXd *> gbs = {&g.b1, &g.b2, &g.b3, &g.b4};

    std::size_t total = 0;
    for (auto *w : ws)
        total += static_cast<std::size_t>(w->size());
    for (auto *b : bs)
        total += static_cast<std::size_t>(b->size());

    const auto param_ref = [&](std::size_t flat) -> double & {
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (flat < static_cast<std::size_t>(ws[i]->size()))
                return ws[i]->data()[flat];
            flat -= static_cast<std::size_t>(ws[i]->size());
        }
        for (std::size_t i = 0; i < bs.size(); ++i) {
            if (flat < static_cast<std::size_t>(bs[i]->size()))
                return bs[i]->data()[flat];
            flat -= static_cast<std::size_t>(bs[i]->size());
        }
        throw error("gradient_check: flat index out of range");
    };
    const auto grad_at = [&](std::size_t flat) -> double {
        for (std::size_t i = 0; i < gws.size(); ++i) {
            if (flat < static_cast<std::size_t>(gws[i]->size()))
                return gws[i]->data()[flat];
            flat -= static_cast<std::size_t>(gws[i]->size());
        }
        for (std::size_t i = 0; i < gbs.size(); ++i) {
            if (flat < static_cast<std::size_t>(gbs[i]->size()))
                return gbs[i]->data()[flat];
            flat -= static_cast<std::size_t>(gbs[i]->size());
        }
        throw error("gradient_check: flat index out of range");
    };

    std::vector<std::size_t> picks;
    picks.reserve(static_cast<std::size_t>(num_params) + 1);
    Rng rng(seed);
    for (int k = 0; k < num_params; ++k)
        picks.push_back(rng.index(total));
    std::size_t corrupt_flat = total; // sentinel: none
    if (corrupt_one) {
        double best = -1.0;
        for (std::size_t i = 0; i < total; ++i)
            if (std::fabs(grad_at(i)) > best) {
                best = std::fabs(grad_at(i));
                corrupt_flat = i;
            }
        picks.push_back(corrupt_flat);
    }

    const double h = 1e-5;
    double max_rel = 0.0;
    for (const std::size_t flat : picks) {
        double analytic = grad_at(flat);
        if (flat == corrupt_flat && corrupt_one)
            analytic *= corrupt_scale;
        double &p = param_ref(flat);
        const double saved = p;
        p = saved + h;
        detail::forward(m, x, fp);
        const double lp = (fp.y - fp.x).squaredNorm();
        p = saved - h;
        detail::forward(m, x, fp);
        const double lm = (fp.y - fp.x).squaredNorm();
        p = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
        max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
    }
    return max_rel;
}

// ------------------------------------------------------------------------
// Checkpoint format: magic "ADAE", version u16, M u32, layer count u32,
// then per layer rows u32, cols u32, row-major f64 weights, f64 biases
// (length rows). Encoder layers come first.
// ------------------------------------------------------------------------
inline void save_model(const AutoencoderModel &m, const std::string &path) {
    ByteSink out(path);
    out.bytes("ADAE", 4);
    out.le<std::uint16_t>(1);
    out.le<std::uint32_t>(static_cast<std::uint32_t>(m.latent_size));
    const std::uint32_t count = static_cast<std::uint32_t>(m.enc_layers.size() + m.dec_layers.size());
    out.le<std::uint32_t>(count);
    const auto dump_layer = [&](const DenseLayer &l) {
        out.le<std::uint32_t>(static_cast<std::uint32_t>(l.w.rows()));
        out.le<std::uint32_t>(static_cast<std::uint32_t>(l.w.cols()));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c)
                out.le<double>(l.w(r, c));
        for (Eigen::Index r = 0; r < l.b.size(); ++r)
            out.le<double>(l.b(r));
    };
    for (const auto &l : m.enc_layers)
        dump_layer(l);
    for (const auto &l : m.dec_layers)
        dump_layer(l);
}

inline AutoencoderModel load_model(const std::string &path) {
    ByteSource in(path);
    char magic[4];
    in.bytes(magic, 4);
    if (std::string(magic, 4) != "ADAE")
        throw parse_error(path + ": bad model magic");
    const auto version = in.le<std::uint16_t>();
    if (version != 1)
        throw parse_error(path + ": unsupported model version");
    AutoencoderModel m;
    m.latent_size = static_cast<int>(in.le<std::uint32_t>());
    const auto count = in.le<std::uint32_t>();
    if (count < 2 || count % 2 != 0)
        throw parse_error(path + ": bad layer count");
    const auto read_layer = [&]() {
        DenseLayer l;
        const auto rows = in.le<std::uint32_t>();
        const auto cols = in.le<std::uint32_t>();
        if (rows == 0 || cols == 0 || static_cast<std::uint64_t>(rows) * cols > (1ull << 28))
            throw parse_error(path + ": bad layer dimensions");
        l.w.resize(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c)
                l.w(r, c) = in.le<double>();
        l.b.resize(rows);
        for (std::uint32_t r = 0; r < rows; ++r)
            l.b(r) = in.le<double>();
        return l;
    };
    for (std::uint32_t i = 0; i < count / 2; ++i)
        m.enc_layers.push_back(read_layer());
    for (std::uint32_t i = 0; i < count / 2; ++i)
        m.dec_layers.push_back(read_layer());
    // Shape chain
    int prev = m.enc_layers.front().w.cols();
    for (const auto *bank : {&m.enc_layers, &m.dec_layers})
        for (const auto &l : *bank) {
            if (l.w.cols() != prev)
                throw parse_error(path + ": layer shapes do not chain");
            prev = static_cast<int>(l.w.rows());
        }
    if (m.enc_layers.back().w.rows() != m.latent_size)
        throw parse_error(path + ": latent size does not match layers");
    return m;
}

inline void save_loss_history_csv(const std::vector<EpochLoss> &hist, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw error("cannot open for writing: " + path);
    out << "epoch,train_nmse,val_nmse\n";
    for (std::size_t i = 0; i < hist.size(); ++i) {
        out << i << ',' << fmt_g(hist[i].train_nmse) << ',';
        if (std::isfinite(hist[i].val_nmse))
            out << fmt_g(hist[i].val_nmse);
        out << '\n';
    }
}

} // namespace twincsi
