#pragma once

#include <cstddef>
#include <tuple>

#include "nmpsim/matrix.hpp"

namespace nmpsim {

enum class Activation { ReLU, GELU, SiLU, Identity };
enum class NormKind { LayerNorm, RMSNorm };

/// Per-row running state of the online softmax used by the streaming
/// attention kernel: running max, running sum of rescaled exponentials,
/// and the rescaled output accumulator.
struct SoftmaxState {
    std::vector<double> running_max;
    std::vector<double> running_sum;
    Matrix accumulator;

    explicit SoftmaxState(std::size_t rows, std::size_t out_cols);
};

struct QkvResult {
    Matrix q;
    Matrix k_t;  // returned transposed, ready for score GEMMs
    Matrix v;
};

/// Q = X.Wq + bq, K^T = (X.Wk + bk)^T, V = X.Wv + bv.
QkvResult fused_qkv_proj(const Matrix& x, const Matrix& wq, const Matrix& bq,
                         const Matrix& wk, const Matrix& bk, const Matrix& wv,
                         const Matrix& bv);

/// Streaming softmax attention: softmax(scale * Q.K^T) . V, computed over
/// tiles of tile_size key/value columns with online max/sum rescaling. The
/// full score matrix is never materialized (one tile of scores at a time).
/// Throws if any intermediate goes non-finite.
Matrix fused_attn_stream(const Matrix& q, const Matrix& k_t, const Matrix& v,
                         double scale, std::size_t tile_size);

/// Out = act(X.W1 + b1).W2 + b2.
Matrix fused_ffn_act(const Matrix& x, const Matrix& w1, const Matrix& b1,
                     const Matrix& w2, const Matrix& b2, Activation act);

/// Row normalization followed by scale g and shift b (both 1 x cols).
/// LayerNorm: (x - mean) / sqrt(var + eps); RMSNorm: x / sqrt(ms + eps).
Matrix fused_norm(const Matrix& x, const Matrix& g, const Matrix& b,
                  NormKind kind = NormKind::LayerNorm, double eps = 1e-5);

double apply_activation(Activation act, double x);

/// Round a double through IEEE binary16 (for quantization-noise probes of
/// the reference kernels; performance model is unaffected).
double round_to_fp16(double x);

}  // namespace nmpsim
