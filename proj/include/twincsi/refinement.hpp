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
// Online refinement: NMSE-based sample selection, the max-correlation
// diagnostic, and the two fine-tuning strategies (naive vs rehearsal).

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "twincsi/autoencoder.hpp"

namespace twincsi {

struct Selection {
    std::vector<std::size_t> indices; // into the candidate set
    Eigen::MatrixXd samples;          // selected columns
    Eigen::VectorXd nmse;             // reconstruction NMSE per selected sample
};

namespace detail {

inline Selection gather(const Eigen::MatrixXd &data, const Eigen::VectorXd &all_nmse,
                        const std::vector<std::size_t> &idx) {
    Selection s;
    s.indices = idx;
    s.samples.resize(data.rows(), static_cast<Eigen::Index>(idx.size()));
    s.nmse.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        s.samples.col(static_cast<Eigen::Index>(i)) = data.col(static_cast<Eigen::Index>(idx[i]));
        s.nmse(static_cast<Eigen::Index>(i)) = all_nmse(static_cast<Eigen::Index>(idx[i]));
    }
    return s;
}

} // namespace detail

// Samples whose reconstruction NMSE exceeds eta, input order preserved.
inline Selection select_candidates(const AutoencoderModel &model, const Eigen::MatrixXd &samples,
                                   double eta) {
    const Eigen::VectorXd errs = per_sample_nmse(model, samples);
    std::vector<std::size_t> idx;
    for (Eigen::Index i = 0; i < errs.size(); ++i)
        if (errs(i) > eta)
            idx.push_back(static_cast<std::size_t>(i));
    return detail::gather(samples, errs, idx);
}

// The k samples with the highest NMSE, sorted by NMSE descending; ties break
// toward the lower input index.
inline Selection select_top_k(const AutoencoderModel &model, const Eigen::MatrixXd &samples, std::size_t k) {
    if (k > static_cast<std::size_t>(samples.cols()))
        throw validation_error("select_top_k: k exceeds sample count");
    const Eigen::VectorXd errs = per_sample_nmse(model, samples);
    std::vector<std::size_t> order(static_cast<std::size_t>(samples.cols()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (errs(static_cast<Eigen::Index>(a)) != errs(static_cast<Eigen::Index>(b)))
            return errs(static_cast<Eigen::Index>(a)) > errs(static_cast<Eigen::Index>(b));
        return a < b;
    });
    order.resize(k);
    return detail::gather(samples, errs, order);
}

// max_i |<u(g), u(g_i)>| / (||u(g)|| ||u(g_i)||) over the twin set, with the
// conjugated inner product on the flattened matrices.
inline double max_correlation(const Eigen::MatrixXcd &g, const std::vector<Eigen::MatrixXcd> &twin_set) {
    if (twin_set.empty())
        throw validation_error("max_correlation: empty twin set");
    const double gn = g.norm();
    double best = 0.0;
    for (const auto &t : twin_set) {
        const std::complex<double> ip = (g.conjugate().cwiseProduct(t)).sum();
        const double corr = std::abs(ip) / (gn * t.norm());
        best = std::max(best, corr);
    }
    return best;
}

// Continue training on the refinement set only. Adam moments restart; the
// caller supplies the fine-tuning rate (default pre-training rate / 10).
inline TrainResult refine_naive(const AutoencoderModel &model, const Eigen::MatrixXd &refine_set,
                                const TrainConfig &cfg) {
    if (refine_set.cols() == 0)
        throw validation_error("refine_naive: refinement set is empty");
    return train(model, refine_set, cfg);
}

// Rehearsal: continue training on the union of the twin and refinement
// sets. The default mixes them uniformly (plain concatenation); a positive
// refine_fraction oversamples the refinement set by replication until it
// makes up roughly that fraction of the union.
inline TrainResult refine_rehearsal(const AutoencoderModel &model, const Eigen::MatrixXd &twin_set,
                                    const Eigen::MatrixXd &refine_set, const TrainConfig &cfg,
                                    double refine_fraction = -1.0) {
    if (twin_set.cols() == 0 || refine_set.cols() == 0)
        throw validation_error("refine_rehearsal: both sets must be non-empty");
    if (twin_set.rows() != refine_set.rows())
        throw validation_error("refine_rehearsal: dimension mismatch");

    Eigen::Index reps = 1;
    if (refine_fraction > 0.0 && refine_fraction < 1.0) {
        const double want = refine_fraction / (1.0 - refine_fraction) * static_cast<double>(twin_set.cols()) /
                            static_cast<double>(refine_set.cols());
        reps = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(want)));
    }
    Eigen::MatrixXd combined(twin_set.rows(), twin_set.cols() + reps * refine_set.cols());
    combined.leftCols(twin_set.cols()) = twin_set;
    for (Eigen::Index r = 0; r < reps; ++r)
        combined.middleCols(twin_set.cols() + r * refine_set.cols(), refine_set.cols()) = refine_set;
    return train(model, combined, cfg);
}

} // namespace twincsi
