#include "nmpsim/model_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace nmpsim {

using nlohmann::ordered_json;

std::int64_t ModelConfig::connector_weight_bytes() const {
    if (connector_dims.size() < 2) return 0;
    std::int64_t total = 0;
    for (std::size_t i = 0; i + 1 < connector_dims.size(); ++i)
        total += static_cast<std::int64_t>(connector_dims[i]) * connector_dims[i + 1];
    return total * element_size;
}

void ModelConfig::validate() const {
    if (name.empty()) throw ConfigError("model: name required");
    if (hidden_dim <= 0 || num_layers <= 0 || num_heads <= 0 || head_dim <= 0 || ffn_dim <= 0 ||
        vocab_size <= 0)
        throw ConfigError("model '" + name + "': all dims must be strictly positive");
    if (hidden_dim != num_heads * head_dim)
        throw ConfigError("model '" + name + "': hidden_dim != num_heads * head_dim");
    if (element_size <= 0) throw ConfigError("model '" + name + "': bad element_size");
    if (encoder_tokens_out < 1)
        throw ConfigError("model '" + name + "': encoder_tokens_out must be >= 1");
    if (!connector_dims.empty()) {
        if (connector_dims.size() < 2)
            throw ConfigError("model '" + name + "': connector_dims needs at least two widths");
        for (int d : connector_dims)
            if (d <= 0) throw ConfigError("model '" + name + "': connector width <= 0");
        if (connector_dims.back() != hidden_dim)
            throw ConfigError("model '" + name +
                              "': connector_dims last width must equal hidden_dim");
    }
    if (kv_bytes_per_token_per_layer < 0)
        throw ConfigError("model '" + name + "': negative kv bytes");
}

const char* to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::ViT: return "vit";
        case EncoderKind::PVT: return "pvt";
        case EncoderKind::FastViTHD: return "fastvithd";
    }
    return "vit";
}

const char* to_string(ConnectorKind k) {
    return k == ConnectorKind::MLP ? "mlp" : "cross_attention";
}

namespace {

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + section);
}

EncoderKind parse_encoder(const std::string& s) {
    if (s == "vit") return EncoderKind::ViT;
    if (s == "pvt") return EncoderKind::PVT;
    if (s == "fastvithd") return EncoderKind::FastViTHD;
    throw ConfigError("encoder.kind must be one of vit|pvt|fastvithd, got '" + s + "'");
}

ConnectorKind parse_connector(const std::string& s) {
    if (s == "mlp") return ConnectorKind::MLP;
    if (s == "cross_attention") return ConnectorKind::CrossAttention;
    throw ConfigError("connector.kind must be mlp|cross_attention, got '" + s + "'");
}

NormKind parse_norm(const std::string& s) {
    if (s == "layernorm") return NormKind::LayerNorm;
    if (s == "rmsnorm") return NormKind::RMSNorm;
    throw ConfigError("norm must be layernorm|rmsnorm, got '" + s + "'");
}

Activation parse_act(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "gelu") return Activation::GELU;
    if (s == "silu") return Activation::SiLU;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("activation must be relu|gelu|silu|identity, got '" + s + "'");
}

const char* act_name(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::GELU: return "gelu";
        case Activation::SiLU: return "silu";
        case Activation::Identity: return "identity";
    }
    return "silu";
}

}  // namespace

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open model config: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("model config parse error in " + path + ": " + e.what());
    }

    check_keys(j,
               {"name", "hidden_dim", "num_layers", "num_heads", "head_dim", "ffn_dim",
                "vocab_size", "element_size", "encoder", "connector", "norm", "activation",
                "qkv_bias", "include_lm_head", "kv_bytes_per_token_per_layer", "source_note"},
               "model");

    ModelConfig cfg;
    auto req = [&](const char* key) -> const ordered_json& {
        if (!j.contains(key)) throw ConfigError(std::string("model: missing key '") + key + "'");
        return j.at(key);
    };
    cfg.name = req("name").get<std::string>();
    cfg.hidden_dim = req("hidden_dim").get<int>();
    cfg.num_layers = req("num_layers").get<int>();
    cfg.num_heads = req("num_heads").get<int>();
    cfg.head_dim = req("head_dim").get<int>();
    cfg.ffn_dim = req("ffn_dim").get<int>();
    cfg.vocab_size = req("vocab_size").get<std::int64_t>();
    if (j.contains("element_size")) cfg.element_size = j.at("element_size").get<int>();

    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        check_keys(e, {"kind", "tokens_out", "gflops", "base_image_px", "weight_bytes"},
                   "model.encoder");
        cfg.encoder_kind = parse_encoder(e.at("kind").get<std::string>());
        cfg.encoder_tokens_out = e.at("tokens_out").get<int>();
        if (e.contains("gflops")) cfg.encoder_gflops = e.at("gflops").get<double>();
        if (e.contains("base_image_px")) cfg.encoder_base_image_px = e.at("base_image_px").get<int>();
        if (e.contains("weight_bytes"))
            cfg.encoder_weight_bytes = e.at("weight_bytes").get<std::uint64_t>();
    } else {
        cfg.encoder_tokens_out = 1;
    }

    if (j.contains("connector")) {
        const auto& c = j.at("connector");
        check_keys(c, {"kind", "dims"}, "model.connector");
        cfg.connector_kind = parse_connector(c.at("kind").get<std::string>());
        cfg.connector_dims = c.at("dims").get<std::vector<int>>();
    }

    if (j.contains("norm")) cfg.norm_kind = parse_norm(j.at("norm").get<std::string>());
    if (j.contains("activation")) cfg.activation = parse_act(j.at("activation").get<std::string>());
    if (j.contains("qkv_bias")) cfg.qkv_bias = j.at("qkv_bias").get<bool>();
    if (j.contains("include_lm_head")) cfg.include_lm_head = j.at("include_lm_head").get<bool>();
    if (j.contains("kv_bytes_per_token_per_layer"))
        cfg.kv_bytes_per_token_per_layer = j.at("kv_bytes_per_token_per_layer").get<std::int64_t>();
    if (cfg.kv_bytes_per_token_per_layer == 0)
        cfg.kv_bytes_per_token_per_layer = cfg.derived_kv_bytes_per_token_per_layer();
    cfg.validate();
    return cfg;
}

std::string model_config_to_json(const ModelConfig& cfg) {
    ordered_json j;
    j["name"] = cfg.name;
    j["hidden_dim"] = cfg.hidden_dim;
    j["num_layers"] = cfg.num_layers;
    j["num_heads"] = cfg.num_heads;
    j["head_dim"] = cfg.head_dim;
    j["ffn_dim"] = cfg.ffn_dim;
    j["vocab_size"] = cfg.vocab_size;
    j["element_size"] = cfg.element_size;
    j["encoder"] = {{"kind", to_string(cfg.encoder_kind)},
                    {"tokens_out", cfg.encoder_tokens_out},
                    {"gflops", cfg.encoder_gflops},
                    {"base_image_px", cfg.encoder_base_image_px},
                    {"weight_bytes", cfg.encoder_weight_bytes}};
    j["connector"] = {{"kind", to_string(cfg.connector_kind)}, {"dims", cfg.connector_dims}};
    j["norm"] = cfg.norm_kind == NormKind::LayerNorm ? "layernorm" : "rmsnorm";
    j["activation"] = act_name(cfg.activation);
    j["qkv_bias"] = cfg.qkv_bias;
    j["include_lm_head"] = cfg.include_lm_head;
    j["kv_bytes_per_token_per_layer"] = cfg.kv_bytes_per_token_per_layer;
    return j.dump(2) + "\n";
}

}  // namespace nmpsim
