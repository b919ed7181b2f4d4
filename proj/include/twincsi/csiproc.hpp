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
// Frequency-antenna <-> normalized delay-angular CSI conversion.
//
// G = F_d H^T F_a^H with unitary DFTs on both axes (rows = delay bins,
// columns = angular bins), truncated to the first kCsiDelayRows rows and
// scaled to unit Frobenius norm. The discarded norm is kept so the transform
// can be inverted for evaluation.

#pragma once

#include <Eigen/Dense>
#include <complex>

#include "twincsi/channel.hpp"

namespace twincsi {

inline constexpr int kCsiDelayRows = 32;

struct AngularDelayCsi {
    Eigen::MatrixXcd g; // delay_rows x N_t, unit Frobenius norm
    double scale = 1.0; // the discarded ||G_trunc||_F
    int ue_index = -1;
};

namespace detail {

// Delay-axis transform: rows x K slice of the unitary inverse-DFT, chosen so
// that an on-grid delay tap d concentrates on row d.
inline Eigen::MatrixXcd delay_dft(int rows, int k) {
    Eigen::MatrixXcd f(rows, k);
    const double s = 1.0 / std::sqrt(static_cast<double>(k));
    for (int m = 0; m < rows; ++m)
        for (int i = 0; i < k; ++i) {
            const double ph = 2.0 * kPi * static_cast<double>(m) * i / k;
            f(m, i) = s * std::complex<double>(std::cos(ph), std::sin(ph));
        }
    return f;
}

// Angular-axis transform F_a^H (n x n); a broadside steering vector
// concentrates on column 0.
inline Eigen::MatrixXcd angular_dft_h(int n) {
    Eigen::MatrixXcd f(n, n);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i)
        for (int q = 0; q < n; ++q) {
            const double ph = 2.0 * kPi * static_cast<double>(q) * i / n;
            f(i, q) = s * std::complex<double>(std::cos(ph), std::sin(ph));
        }
    return f;
}

} // namespace detail

inline AngularDelayCsi to_delay_angular(const ChannelMatrix &cm, int trunc_rows = kCsiDelayRows) {
    const int n_t = static_cast<int>(cm.h.rows());
    const int k = static_cast<int>(cm.h.cols());
    if (n_t < 1 || k < 1)
        throw validation_error("to_delay_angular: empty channel");
    if (!cm.h.allFinite())
        throw validation_error("to_delay_angular: channel has non-finite entries");
    if (trunc_rows > k)
        trunc_rows = k;

    const Eigen::MatrixXcd fd = detail::delay_dft(trunc_rows, k);
    const Eigen::MatrixXcd fah = detail::angular_dft_h(n_t);
    Eigen::MatrixXcd g_trunc = fd * cm.h.transpose() * fah;

    const double scale = g_trunc.norm();
    if (scale <= 0.0)
        throw validation_error("to_delay_angular: all-zero channel");
    AngularDelayCsi out;
    out.g = g_trunc / scale;
    out.scale = scale;
    out.ue_index = cm.ue_index;
    return out;
}

inline ChannelMatrix from_delay_angular(const AngularDelayCsi &csi, int num_subcarriers) {
    const int rows = static_cast<int>(csi.g.rows());
    const int n_t = static_cast<int>(csi.g.cols());
    if (rows < 1 || n_t < 1)
        throw validation_error("from_delay_angular: empty CSI");
    if (rows > num_subcarriers)
        throw validation_error("from_delay_angular: more delay rows than subcarriers");

    // H^T = F_d^H G_pad F_a; only the first `rows` rows of G_pad are nonzero.
    const Eigen::MatrixXcd fd = detail::delay_dft(rows, num_subcarriers); // rows x K
    const Eigen::MatrixXcd fah = detail::angular_dft_h(n_t);              // F_a^H
    const Eigen::MatrixXcd scaled = csi.scale * csi.g;
    Eigen::MatrixXcd ht = fd.adjoint() * (scaled * fah.adjoint()); // K x N_t

    ChannelMatrix cm;
    cm.h = ht.transpose();
    cm.ue_index = csi.ue_index;
    return cm;
}

// Model I/O layout: [Re(g) row-major, Im(g) row-major], length 2*rows*cols.
inline Eigen::VectorXd csi_to_real_vec(const Eigen::MatrixXcd &g) {
    const int rows = static_cast<int>(g.rows());
    const int cols = static_cast<int>(g.cols());
    Eigen::VectorXd v(2 * rows * cols);
    int idx = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            v(idx++) = g(r, c).real();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            v(idx++) = g(r, c).imag();
    return v;
}

inline Eigen::MatrixXcd csi_from_real_vec(const Eigen::VectorXd &v, int rows, int cols) {
    if (v.size() != 2 * rows * cols)
        throw validation_error("csi_from_real_vec: length mismatch");
    Eigen::MatrixXcd g(rows, cols);
    int idx = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            g(r, c).real(v(idx++));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            g(r, c).imag(v(idx++));
    return g;
}

} // namespace twincsi
