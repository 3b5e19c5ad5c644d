#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "nmpsim/model_config.hpp"

namespace nmpsim {

enum class KernelKind : std::uint8_t {
    GEMM,
    Softmax,
    Elementwise,
    Norm,
    Activation,
    KVAppend,
    KVRead,
    Transfer
};

enum class Phase : std::uint8_t { Encode, Connect, Prefill, DecodeStep };

/// Fine-grained role of a kernel inside the model; drives placement and
/// fusion grouping without shape pattern-matching.
enum class KernelRole : std::uint8_t {
    EncoderGemm,
    EncoderElt,
    ConnectorGemm,
    ConnectorAct,
    AttnNorm,
    QkvGemm,
    QkvBias,
    KvAppend,
    KvRead,
    ScoreGemm,
    AttnSoftmax,
    AttnValueGemm,
    OutProjGemm,
    Residual,
    FfnNorm,
    FfnGemm1,
    FfnAct,
    FfnGemm2,
    FinalNorm,
    LmHeadGemm
};

struct TensorShape {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    int element_size = 2;
    std::int64_t bytes() const { return rows * cols * element_size; }
};

struct KernelNode {
    std::uint32_t id = 0;
    KernelKind kind = KernelKind::GEMM;
    KernelRole role = KernelRole::QkvGemm;
    Phase phase = Phase::Prefill;
    int layer_index = -1;   // -1 outside the backbone
    int decode_step = 0;    // 1-based decode step; 0 elsewhere

    std::int64_t flops = 0;
    // Traffic split by class: weight streams hit the resident memory arrays,
    // KV bytes hit the cache tiers, io bytes are SRAM-held activations.
    std::int64_t weight_bytes = 0;
    std::int64_t kv_read_bytes = 0;
    std::int64_t kv_write_bytes = 0;
    std::int64_t io_bytes_in = 0;
    std::int64_t io_bytes_out = 0;
    std::int64_t sfpe_elems = 0;

    std::vector<TensorShape> operand_shapes;
    std::vector<std::uint32_t> deps;

    std::int64_t bytes_read() const { return weight_bytes + kv_read_bytes + io_bytes_in; }
    std::int64_t bytes_written() const { return kv_write_bytes + io_bytes_out; }
};

struct ImageDims {
    int width = 0;
    int height = 0;
    bool present() const { return width > 0 && height > 0; }
};

struct OperatorGraph {
    ModelConfig cfg;
    std::vector<KernelNode> nodes;
    std::vector<std::uint32_t> entry_ids;
    std::vector<std::uint32_t> exit_ids;
    int prompt_tokens = 0;
    int visual_tokens = 0;
    int output_tokens = 0;

    int prefill_len() const { return prompt_tokens + visual_tokens; }
    /// KV entries visible to attention at decode step t (1-based).
    std::int64_t context_at_step(int t) const { return prefill_len() + t; }

    /// Kahn topological order; throws if the dependency graph has a cycle.
    std::vector<std::uint32_t> topological_order() const;
};

std::int64_t flops_of_gemm(std::int64_t m, std::int64_t n, std::int64_t k);

/// Builds the full operator graph: encoder -> connector -> prefill ->
/// output_tokens decode-step subgraphs.
OperatorGraph build_graph(const ModelConfig& cfg, int prompt_tokens, ImageDims image,
                          int output_tokens);

struct SimReport;  // engine.hpp

/// Fraction of simulated time spent per phase; fractions sum to 1.
std::map<Phase, double> phase_fractions(const OperatorGraph& graph, const SimReport& report);

const char* to_string(Phase p);
const char* to_string(KernelKind k);

}  // namespace nmpsim
