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
// CSI dataset container, binary persistence and generation.
//
// File layout: magic "CSID", version u16, origin u8, count u32, rows u16,
// cols u16, flags u8 (bit0: raw channels present; if set, h_rows u16 and
// h_cols u16 follow), then per sample: scale f64 and the row-major complex
// entries as little-endian f32 pairs (g first, then the raw channel when
// present). The file ends with an 8-byte checksum: the sum of all preceding
// bytes mod 2^64. Sample ue_index is not persisted; loading numbers samples
// by position.

#pragma once

#include <string>
#include <vector>

#include "twincsi/csiproc.hpp"
#include "twincsi/raytracer.hpp"

namespace twincsi {

enum class DatasetOrigin : std::uint8_t { target = 0, twin = 1, statistical = 2, selected = 3 };

inline const char *origin_name(DatasetOrigin o) {
    switch (o) {
    case DatasetOrigin::target:
        return "target";
    case DatasetOrigin::twin:
        return "twin";
    case DatasetOrigin::statistical:
        return "statistical";
    case DatasetOrigin::selected:
        return "selected";
    }
    return "unknown";
}

struct Dataset {
    std::vector<AngularDelayCsi> samples;
    std::vector<Eigen::MatrixXcd> raw; // optional raw channels, parallel to samples
    DatasetOrigin origin = DatasetOrigin::twin;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::size_t dropped_zero_coverage = 0; // bookkeeping from generation

    int rows() const { return samples.empty() ? 0 : static_cast<int>(samples.front().g.rows()); }
    int cols() const { return samples.empty() ? 0 : static_cast<int>(samples.front().g.cols()); }
    bool has_raw() const { return !raw.empty(); }

    // Real-vector view for model training: one column per sample.
    Eigen::MatrixXd to_matrix() const {
        if (samples.empty())
            throw validation_error("Dataset: empty");
        const int dim = 2 * rows() * cols();
        Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i)
            m.col(static_cast<Eigen::Index>(i)) = csi_to_real_vec(samples[i].g);
        return m;
    }
};

inline void save_dataset(const Dataset &ds, const std::string &path) {
    if (ds.samples.empty())
        throw validation_error("save_dataset: empty dataset");
    const int rows = ds.rows(), cols = ds.cols();
    for (const auto &s : ds.samples)
        if (s.g.rows() != rows || s.g.cols() != cols)
            throw validation_error("save_dataset: inhomogeneous sample shapes");
    if (ds.has_raw() && ds.raw.size() != ds.samples.size())
        throw validation_error("save_dataset: raw channel count mismatch");

    ByteSink out(path);
    out.bytes("CSID", 4);
    out.le<std::uint16_t>(1);
    out.le<std::uint8_t>(static_cast<std::uint8_t>(ds.origin));
    out.le<std::uint32_t>(static_cast<std::uint32_t>(ds.samples.size()));
    out.le<std::uint16_t>(static_cast<std::uint16_t>(rows));
    out.le<std::uint16_t>(static_cast<std::uint16_t>(cols));
    out.le<std::uint8_t>(ds.has_raw() ? 1 : 0);
    int h_rows = 0, h_cols = 0;
    if (ds.has_raw()) {
        h_rows = static_cast<int>(ds.raw.front().rows());
        h_cols = static_cast<int>(ds.raw.front().cols());
        out.le<std::uint16_t>(static_cast<std::uint16_t>(h_rows));
        out.le<std::uint16_t>(static_cast<std::uint16_t>(h_cols));
    }
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        out.le<double>(ds.samples[i].scale);
        const auto &g = ds.samples[i].g;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                out.le<float>(static_cast<float>(g(r, c).real()));
                out.le<float>(static_cast<float>(g(r, c).imag()));
            }
        if (ds.has_raw()) {
            const auto &h = ds.raw[i];
            if (h.rows() != h_rows || h.cols() != h_cols)
                throw validation_error("save_dataset: inhomogeneous raw shapes");
            for (int r = 0; r < h_rows; ++r)
                for (int c = 0; c < h_cols; ++c) {
                    out.le<float>(static_cast<float>(h(r, c).real()));
                    out.le<float>(static_cast<float>(h(r, c).imag()));
                }
        }
    }
    out.finish_with_checksum();
}

inline Dataset load_dataset(const std::string &path) {
    ByteSource in(path);
    char magic[4];
    in.bytes(magic, 4);
    if (std::string(magic, 4) != "CSID")
        throw parse_error(path + ": bad dataset magic");
    const auto version = in.le<std::uint16_t>();
    if (version != 1)
        throw parse_error(path + ": unsupported dataset version");
    Dataset ds;
    const auto origin = in.le<std::uint8_t>();
    if (origin > 3)
        throw parse_error(path + ": bad origin byte");
    ds.origin = static_cast<DatasetOrigin>(origin);
    const auto count = in.le<std::uint32_t>();
    const auto rows = in.le<std::uint16_t>();
    const auto cols = in.le<std::uint16_t>();
    const auto flags = in.le<std::uint8_t>();
    if (count == 0 || rows == 0 || cols == 0)
        throw parse_error(path + ": empty dataset");
    int h_rows = 0, h_cols = 0;
    const bool has_raw = (flags & 1) != 0;
    if (has_raw) {
        h_rows = in.le<std::uint16_t>();
        h_cols = in.le<std::uint16_t>();
    }
    ds.samples.resize(count);
    if (has_raw)
        ds.raw.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto &s = ds.samples[i];
        s.scale = in.le<double>();
        s.ue_index = static_cast<int>(i);
        s.g.resize(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const float re = in.le<float>();
                const float im = in.le<float>();
                s.g(r, c) = std::complex<double>(re, im);
            }
        if (has_raw) {
            ds.raw[i].resize(h_rows, h_cols);
            for (int r = 0; r < h_rows; ++r)
                for (int c = 0; c < h_cols; ++c) {
                    const float re = in.le<float>();
                    const float im = in.le<float>();
                    ds.raw[i](r, c) = std::complex<double>(re, im);
                }
        }
    }
    in.verify_checksum();
    return ds;
}

// ------------------------------------------------------------------------
// gen_dataset - trace the UE grid, synthesize channels, convert to the
// normalized delay-angular form. UEs without any path are dropped (their
// count is reported on the dataset). With a positive sample_limit, a seeded
// subset of exactly that many covered UEs is kept, in grid order.
// ------------------------------------------------------------------------
inline Dataset gen_dataset(const Scene &scene, const TraceConfig &trace_cfg, std::size_t sample_limit,
                           std::uint64_t seed, DatasetOrigin origin = DatasetOrigin::twin,
                           unsigned threads = 1, bool include_raw = false) {
    const ImageTracer tracer(scene, trace_cfg);
    std::vector<std::vector<Path>> per_ue(scene.ue_grid.size());
    parallel_for(scene.ue_grid.size(), threads,
                 [&](std::size_t i) { per_ue[i] = tracer.trace(scene.ue_grid[i]); });

    std::vector<std::size_t> covered;
    for (std::size_t i = 0; i < per_ue.size(); ++i)
        if (!per_ue[i].empty())
            covered.push_back(i);
    if (covered.empty())
        throw error("gen_dataset: zero coverage on the whole UE grid");

    std::size_t dropped = per_ue.size() - covered.size();
    if (sample_limit > 0 && covered.size() > sample_limit) {
        Rng rng(substream(seed, 0x5e1ec7));
        rng.shuffle(covered);
        covered.resize(sample_limit);
        std::sort(covered.begin(), covered.end());
    }
    if (sample_limit > 0 && covered.size() < sample_limit)
        throw error("gen_dataset: only " + std::to_string(covered.size()) + " covered UEs, need " +
                    std::to_string(sample_limit));

    Dataset ds;
    ds.origin = origin;
    ds.seed = seed;
    ds.dropped_zero_coverage = dropped;
    ds.samples.resize(covered.size());
    if (include_raw)
        ds.raw.resize(covered.size());
    parallel_for(covered.size(), threads, [&](std::size_t n) {
        const std::size_t i = covered[n];
        const ChannelMatrix cm =
            synthesize_channel(per_ue[i], scene.bs, scene.ofdm, static_cast<int>(i));
        ds.samples[n] = to_delay_angular(cm);
        if (include_raw)
            ds.raw[n] = cm.h;
    });
    return ds;
}

inline Dataset statistical_dataset(const StatGenConfig &cfg, const ArrayConfig &array, const OfdmConfig &ofdm,
                                   std::size_t count, unsigned threads = 1) {
    const auto channels = statistical_channels(cfg, array, ofdm, count, threads);
    Dataset ds;
    ds.origin = DatasetOrigin::statistical;
    ds.seed = cfg.seed;
    ds.samples.resize(channels.size());
    parallel_for(channels.size(), threads,
                 [&](std::size_t i) { ds.samples[i] = to_delay_angular(channels[i]); });
    return ds;
}

// Disjoint seeded split; union equals the input. The first part holds
// round(ratio * n) samples.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset &ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw validation_error("split_dataset: ratio must be in (0, 1)");
    std::vector<std::size_t> order(ds.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    Rng rng(substream(seed, 0x59317));
    rng.shuffle(order);
    const std::size_t n_first = static_cast<std::size_t>(std::llround(ratio * ds.samples.size()));

    const auto build = [&](std::size_t lo, std::size_t hi) {
        Dataset part;
        part.origin = ds.origin;
        part.seed = seed;
        part.config_hash = ds.config_hash;
        std::vector<std::size_t> idx(order.begin() + lo, order.begin() + hi);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx) {
            part.samples.push_back(ds.samples[i]);
            if (ds.has_raw())
                part.raw.push_back(ds.raw[i]);
        }
        return part;
    };
    return {build(0, n_first), build(n_first, order.size())};
}

} // namespace twincsi
