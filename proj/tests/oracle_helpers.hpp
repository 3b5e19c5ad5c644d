#pragma once

// Test-only reference implementations, independent of the code paths they
// check: dense softmax attention, unfused projections/FFN/norm, brute-force
// byte walkers, and a sort-and-pack packer for KV tiering.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nmpsim/kernels.hpp"
#include "nmpsim/mapper.hpp"
#include "nmpsim/workload.hpp"

namespace oracle {

inline nmpsim::Matrix random_matrix(std::mt19937& rng, std::size_t rows, std::size_t cols,
                                    double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    nmpsim::Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

/// Dense attention: softmax(scale * Q.K^T) . V with the full score matrix.
inline nmpsim::Matrix dense_attention(const nmpsim::Matrix& q, const nmpsim::Matrix& k_t,
                                      const nmpsim::Matrix& v, double scale) {
    nmpsim::Matrix scores = nmpsim::matmul(q, k_t);
    for (double& s : scores.data()) s *= scale;
    nmpsim::Matrix probs(scores.rows(), scores.cols());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        double mx = scores.at(r, 0);
        for (std::size_t c = 1; c < scores.cols(); ++c) mx = std::max(mx, scores.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < scores.cols(); ++c) {
            probs.at(r, c) = std::exp(scores.at(r, c) - mx);
            sum += probs.at(r, c);
        }
        for (std::size_t c = 0; c < scores.cols(); ++c) probs.at(r, c) /= sum;
    }
    return nmpsim::matmul(probs, v);
}

/// Unfused three-GEMM projection reference.
inline nmpsim::QkvResult dense_qkv(const nmpsim::Matrix& x, const nmpsim::Matrix& wq,
                                   const nmpsim::Matrix& bq, const nmpsim::Matrix& wk,
                                   const nmpsim::Matrix& bk, const nmpsim::Matrix& wv,
                                   const nmpsim::Matrix& bv) {
    nmpsim::QkvResult r;
    r.q = nmpsim::add_bias_row(nmpsim::matmul(x, wq), bq);
    r.k_t = nmpsim::add_bias_row(nmpsim::matmul(x, wk), bk).transposed();
    r.v = nmpsim::add_bias_row(nmpsim::matmul(x, wv), bv);
    return r;
}

/// Unfused two-GEMM FFN reference.
inline nmpsim::Matrix dense_ffn(const nmpsim::Matrix& x, const nmpsim::Matrix& w1,
                                const nmpsim::Matrix& b1, const nmpsim::Matrix& w2,
                                const nmpsim::Matrix& b2, nmpsim::Activation act) {
    nmpsim::Matrix h = nmpsim::add_bias_row(nmpsim::matmul(x, w1), b1);
    for (double& v : h.data()) v = nmpsim::apply_activation(act, v);
    return nmpsim::add_bias_row(nmpsim::matmul(h, w2), b2);
}

/// Direct-formula layer norm reference.
inline nmpsim::Matrix dense_layernorm(const nmpsim::Matrix& x, const nmpsim::Matrix& g,
                                      const nmpsim::Matrix& b, double eps = 1e-5) {
    nmpsim::Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) mean += x.at(r, c);
        mean /= n;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double d = x.at(r, c) - mean;
            var += d * d;
        }
        var /= n;
        for (std::size_t c = 0; c < x.cols(); ++c)
            out.at(r, c) = (x.at(r, c) - mean) / std::sqrt(var + eps) * g.at(0, c) + b.at(0, c);
    }
    return out;
}

/// Independent shape walker: expected KV bytes read at decode step t, summed
/// over layers, straight from the config arithmetic.
inline std::int64_t expected_kv_read_bytes_at_step(const nmpsim::ModelConfig& cfg,
                                                   std::int64_t prefill_len, int t) {
    return (prefill_len + t) * cfg.num_layers * cfg.kv_bytes_per_token_per_layer;
}

/// Brute-force sort-and-pack reference for KV tier assignment: blocks sorted
/// by hotness descending fill tiers in order; overflow marked for RRAM.
struct PackedBlock {
    std::uint32_t id;
    int tier;      // -1 means RRAM
};
inline std::vector<PackedBlock> sort_and_pack(std::vector<nmpsim::KvBlock> blocks,
                                              const std::vector<std::int64_t>& tier_caps) {
    std::sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) {
        if (a.hotness != b.hotness) return a.hotness > b.hotness;
        return a.id < b.id;
    });
    std::vector<std::int64_t> free = tier_caps;
    std::vector<PackedBlock> out;
    std::size_t next = 0;
    for (int tier = 0; tier < static_cast<int>(tier_caps.size()) && next < blocks.size(); ++tier)
        while (next < blocks.size() && blocks[next].bytes <= free[tier]) {
            free[tier] -= blocks[next].bytes;
            out.push_back({blocks[next].id, tier});
            ++next;
        }
    for (; next < blocks.size(); ++next) out.push_back({blocks[next].id, -1});
    return out;
}

}  // namespace oracle
