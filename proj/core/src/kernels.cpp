#include "nmpsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace nmpsim {

SoftmaxState::SoftmaxState(std::size_t rows, std::size_t out_cols)
    : running_max(rows, -std::numeric_limits<double>::infinity()),
      running_sum(rows, 0.0),
      accumulator(rows, out_cols) {}

QkvResult fused_qkv_proj(const Matrix& x, const Matrix& wq, const Matrix& bq,
                         const Matrix& wk, const Matrix& bk, const Matrix& wv,
                         const Matrix& bv) {
    QkvResult r;
    r.q = add_bias_row(matmul(x, wq), bq);
    r.k_t = add_bias_row(matmul(x, wk), bk).transposed();
    r.v = add_bias_row(matmul(x, wv), bv);
    return r;
}

Matrix fused_attn_stream(const Matrix& q, const Matrix& k_t, const Matrix& v,
                         double scale, std::size_t tile_size) {
    if (tile_size < 1) throw std::invalid_argument("fused_attn_stream: tile_size < 1");
    if (q.cols() != k_t.rows()) throw std::invalid_argument("fused_attn_stream: Q/K dim mismatch");
    if (k_t.cols() != v.rows()) throw std::invalid_argument("fused_attn_stream: K/V ctx mismatch");
    const std::size_t n_q = q.rows();
    const std::size_t ctx = k_t.cols();
    const std::size_t dim = q.cols();

    SoftmaxState state(n_q, v.cols());

    for (std::size_t tile_start = 0; tile_start < ctx; tile_start += tile_size) {
        const std::size_t tile_end = std::min(ctx, tile_start + tile_size);
        const std::size_t width = tile_end - tile_start;

        // Scores for this tile only.
        Matrix scores(n_q, width);
        for (std::size_t i = 0; i < n_q; ++i) {
            for (std::size_t j = 0; j < width; ++j) {
                double dot = 0.0;
                for (std::size_t d = 0; d < dim; ++d)
                    dot += q.at(i, d) * k_t.at(d, tile_start + j);
                scores.at(i, j) = scale * dot;
            }
        }

        for (std::size_t i = 0; i < n_q; ++i) {
            double tile_max = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < width; ++j)
                tile_max = std::max(tile_max, scores.at(i, j));
            const double new_max = std::max(state.running_max[i], tile_max);
            const double correction =
                std::isinf(state.running_max[i]) ? 0.0 : std::exp(state.running_max[i] - new_max);

            state.running_sum[i] *= correction;
            for (std::size_t c = 0; c < v.cols(); ++c) state.accumulator.at(i, c) *= correction;

            for (std::size_t j = 0; j < width; ++j) {
                const double w = std::exp(scores.at(i, j) - new_max);
                state.running_sum[i] += w;
                const double* vrow = v.row_ptr(tile_start + j);
                for (std::size_t c = 0; c < v.cols(); ++c)
                    state.accumulator.at(i, c) += w * vrow[c];
            }
            state.running_max[i] = new_max;
            if (!std::isfinite(state.running_sum[i]))
                throw std::runtime_error("fused_attn_stream: non-finite softmax sum");
        }
    }

    Matrix out(n_q, v.cols());
    for (std::size_t i = 0; i < n_q; ++i) {
        if (state.running_sum[i] <= 0.0)
            throw std::runtime_error("fused_attn_stream: empty softmax row");
        for (std::size_t c = 0; c < v.cols(); ++c)
            out.at(i, c) = state.accumulator.at(i, c) / state.running_sum[i];
    }
    if (!out.all_finite()) throw std::runtime_error("fused_attn_stream: non-finite output");
    return out;
}

double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::ReLU:
            return x > 0.0 ? x : 0.0;
        case Activation::GELU:
            // tanh approximation, the form used by most transformer stacks
            return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
        case Activation::SiLU:
            return x / (1.0 + std::exp(-x));
        case Activation::Identity:
            return x;
    }
    return x;
}

Matrix fused_ffn_act(const Matrix& x, const Matrix& w1, const Matrix& b1,
                     const Matrix& w2, const Matrix& b2, Activation act) {
    Matrix hidden = add_bias_row(matmul(x, w1), b1);
    for (double& v : hidden.data()) v = apply_activation(act, v);
    return add_bias_row(matmul(hidden, w2), b2);
}

Matrix fused_norm(const Matrix& x, const Matrix& g, const Matrix& b, NormKind kind,
                  double eps) {
    if (x.cols() < 2) throw std::invalid_argument("fused_norm: row length must be >= 2");
    if (g.rows() != 1 || g.cols() != x.cols() || b.rows() != 1 || b.cols() != x.cols())
        throw std::invalid_argument("fused_norm: g/b must be 1 x cols");
    Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) mean += x.at(r, c);
        mean /= n;
        if (kind == NormKind::LayerNorm) {
            double var = 0.0;
            for (std::size_t c = 0; c < x.cols(); ++c) {
                const double d = x.at(r, c) - mean;
                var += d * d;
            }
            var /= n;
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t c = 0; c < x.cols(); ++c)
                out.at(r, c) = (x.at(r, c) - mean) * inv * g.at(0, c) + b.at(0, c);
        } else {
            double ms = 0.0;
            for (std::size_t c = 0; c < x.cols(); ++c) ms += x.at(r, c) * x.at(r, c);
            ms /= n;
            const double inv = 1.0 / std::sqrt(ms + eps);
            for (std::size_t c = 0; c < x.cols(); ++c)
                out.at(r, c) = x.at(r, c) * inv * g.at(0, c) + b.at(0, c);
        }
    }
    return out;
}

double round_to_fp16(double x) {
    const float f = static_cast<float>(x);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));

    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const int exp = static_cast<int>((bits >> 23) & 0xFFu) - 127;
    std::uint32_t mant = bits & 0x7FFFFFu;

    std::uint16_t half;
    if (exp == 128) {  // inf / nan
        half = static_cast<std::uint16_t>(sign | 0x7C00u | (mant ? 0x200u : 0u));
    } else if (exp > 15) {
        half = static_cast<std::uint16_t>(sign | 0x7C00u);  // overflow to inf
    } else if (exp >= -14) {
        // normal: round mantissa to 10 bits, round-to-nearest-even
        std::uint32_t m = mant >> 13;
        const std::uint32_t rem = mant & 0x1FFFu;
        if (rem > 0x1000u || (rem == 0x1000u && (m & 1u))) ++m;
        std::uint32_t h = (static_cast<std::uint32_t>(exp + 15) << 10) + m;
        half = static_cast<std::uint16_t>(sign | h);
    } else if (exp >= -24) {
        // subnormal
        mant |= 0x800000u;
        const int shift = -exp - 14 + 13;
        std::uint32_t m = mant >> shift;
        const std::uint32_t rem = mant & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (m & 1u))) ++m;
        half = static_cast<std::uint16_t>(sign | m);
    } else {
        half = static_cast<std::uint16_t>(sign);  // underflow to zero
    }

    // expand back to double
    const std::uint32_t hsign = (half & 0x8000u) << 16;
    const std::uint32_t hexp = (half >> 10) & 0x1Fu;
    const std::uint32_t hmant = half & 0x3FFu;
    std::uint32_t outbits;
    if (hexp == 0) {
        if (hmant == 0) {
            outbits = hsign;
        } else {
            int e = -1;
            std::uint32_t m = hmant;
            while (!(m & 0x400u)) {
                m <<= 1;
                --e;
            }
            m &= 0x3FFu;
            outbits = hsign | (static_cast<std::uint32_t>(e - 14 + 127) << 23) | (m << 13);
        }
    } else if (hexp == 0x1Fu) {
        outbits = hsign | 0x7F800000u | (hmant << 13);
    } else {
        outbits = hsign | ((hexp - 15 + 127) << 23) | (hmant << 13);
    }
    float outf;
    std::memcpy(&outf, &outbits, sizeof(outf));
    return static_cast<double>(outf);
}

}  // namespace nmpsim
