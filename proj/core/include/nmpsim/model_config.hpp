#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmpsim/hardware.hpp"
#include "nmpsim/kernels.hpp"

namespace nmpsim {

enum class EncoderKind { ViT, PVT, FastViTHD };
enum class ConnectorKind { MLP, CrossAttention };

/// Dimensions and workload knobs of one multimodal model. Backbone dims are
/// external calibration inputs (public model cards), all overridable in the
/// JSON config.
struct ModelConfig {
    std::string name;
    int hidden_dim = 0;
    int num_layers = 0;
    int num_heads = 0;
    int head_dim = 0;
    int ffn_dim = 0;
    std::int64_t vocab_size = 0;
    int element_size = 2;  // FP16 end to end

    EncoderKind encoder_kind = EncoderKind::ViT;
    int encoder_tokens_out = 0;
    double encoder_gflops = 0.0;        // at encoder_base_image_px square input
    int encoder_base_image_px = 512;    // flops scale with pixel count
    std::uint64_t encoder_weight_bytes = 0;

    ConnectorKind connector_kind = ConnectorKind::MLP;
    std::vector<int> connector_dims;  // layer widths; last must equal hidden_dim

    NormKind norm_kind = NormKind::RMSNorm;
    Activation activation = Activation::SiLU;
    bool qkv_bias = false;
    bool include_lm_head = true;

    std::int64_t kv_bytes_per_token_per_layer = 0;  // default 2 * hidden * element_size

    std::int64_t derived_kv_bytes_per_token_per_layer() const {
        return 2ll * hidden_dim * element_size;
    }
    std::int64_t attn_weight_bytes_per_layer() const {
        // Wq, Wk, Wv, Wo
        return 4ll * hidden_dim * hidden_dim * element_size;
    }
    std::int64_t ffn_weight_bytes_per_layer() const {
        return 2ll * hidden_dim * ffn_dim * element_size;
    }
    std::int64_t lm_head_weight_bytes() const {
        return include_lm_head ? static_cast<std::int64_t>(hidden_dim) * vocab_size * element_size
                               : 0;
    }
    std::int64_t connector_weight_bytes() const;

    void validate() const;
};

ModelConfig load_model_config(const std::string& path);
std::string model_config_to_json(const ModelConfig& cfg);

const char* to_string(EncoderKind k);
const char* to_string(ConnectorKind k);

}  // namespace nmpsim
