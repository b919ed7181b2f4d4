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

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace twincsi {

inline constexpr double kSpeedOfLight = 299792458.0;        // m/s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // F/m
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Error hierarchy. parse_error covers malformed input files, validation_error
// covers structurally sound input that violates a domain invariant. Messages
// name the offending entity (facet index, material name, ...).
class error : public std::runtime_error {
  public:
    explicit error(const std::string &msg) : std::runtime_error(msg) {}
};

class parse_error : public error {
  public:
    explicit parse_error(const std::string &msg) : error("parse error: " + msg) {}
};

class validation_error : public error {
  public:
    explicit validation_error(const std::string &msg) : error("validation error: " + msg) {}
};

// ------------------------------------------------------------------------
// Rng - seeded deterministic random source.
//
// All distribution transforms are written out explicitly instead of using
// std::*_distribution, whose output is implementation-defined. This keeps
// seeded runs byte-identical across standard libraries.
// ------------------------------------------------------------------------
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        // Rejection-free modulo is fine here: n is always tiny vs 2^64.
        return static_cast<std::size_t>(gen_() % n);
    }

    // Standard normal via Box-Muller, with the spare value cached.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    // Exponential with the given mean.
    double exponential(double mean) {
        double u = 0.0;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -mean * std::log(u);
    }

    // Zero-mean Laplacian with scale b (variance 2 b^2), by inverse CDF.
    double laplacian(double scale) {
        const double u = uniform() - 0.5;
        const double s = (u < 0.0) ? -1.0 : 1.0;
        return -scale * s * std::log(1.0 - 2.0 * std::fabs(u));
    }

    // Fisher-Yates shuffle.
    template <typename T> void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[index(i)]);
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derive an independent stream from a base seed and a stream label.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 step over the combined word
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a over a byte string; used for config hashes in reports.
inline std::uint64_t fnv1a64(const std::string &s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// Fixed-format floating point for CSV output; locale-independent and stable.
inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

// ------------------------------------------------------------------------
// Little-endian binary IO with a running byte sum (file checksums).
// ------------------------------------------------------------------------
class ByteSink {
  public:
    explicit ByteSink(const std::string &path) : out_(path, std::ios::binary) {
        if (!out_)
            throw error("cannot open for writing: " + path);
    }

    void bytes(const void *p, std::size_t n) {
        const auto *b = static_cast<const unsigned char *>(p);
        for (std::size_t i = 0; i < n; ++i)
            sum_ += b[i];
        out_.write(reinterpret_cast<const char *>(p), static_cast<std::streamsize>(n));
    }

    template <typename T> void le(T v) {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(buf[i], buf[sizeof(T) - 1 - i]);
#endif
        bytes(buf, sizeof(T));
    }

    std::uint64_t byte_sum() const { return sum_; }

    // Writes the trailing checksum (not itself included in the sum).
    void finish_with_checksum() {
        std::uint64_t s = sum_;
        out_.write(reinterpret_cast<const char *>(&s), 8);
        out_.flush();
        if (!out_)
            throw error("write failure while finishing file");
    }

  private:
    std::ofstream out_;
    std::uint64_t sum_ = 0;
};

class ByteSource {
  public:
    explicit ByteSource(const std::string &path) : in_(path, std::ios::binary) {
        if (!in_)
            throw error("cannot open for reading: " + path);
    }

    void bytes(void *p, std::size_t n) {
        in_.read(reinterpret_cast<char *>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw parse_error("unexpected end of file");
        const auto *b = static_cast<const unsigned char *>(p);
        for (std::size_t i = 0; i < n; ++i)
            sum_ += b[i];
    }

    template <typename T> T le() {
        unsigned char buf[sizeof(T)];
        bytes(buf, sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(buf[i], buf[sizeof(T) - 1 - i]);
#endif
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return v;
    }

    std::uint64_t byte_sum() const { return sum_; }

    void verify_checksum() {
        const std::uint64_t expect = sum_;
        std::uint64_t got = 0;
        in_.read(reinterpret_cast<char *>(&got), 8);
        if (in_.gcount() != 8)
            throw parse_error("missing trailing checksum");
        if (got != expect)
            throw parse_error("checksum mismatch");
    }

  private:
    std::ifstream in_;
    std::uint64_t sum_ = 0;
};

// ------------------------------------------------------------------------
// parallel_for - chunked index-space parallelism.
//
// Each index writes only its own output slot, so results are independent of
// the schedule. threads <= 1 runs inline.
// ------------------------------------------------------------------------
template <typename Fn> void parallel_for(std::size_t n, unsigned threads, Fn &&fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    const unsigned t = std::min<unsigned>(threads, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::exception_ptr err;
    std::mutex err_mtx;
    for (unsigned w = 0; w < t; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n; i += t)
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mtx);
                if (!err)
                    err = std::current_exception();
            }
        });
    }
    for (auto &th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace twincsi
