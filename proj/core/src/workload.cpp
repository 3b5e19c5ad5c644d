#include "nmpsim/workload.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "nmpsim/engine.hpp"

namespace nmpsim {

std::int64_t flops_of_gemm(std::int64_t m, std::int64_t n, std::int64_t k) {
    if (m < 1 || n < 1 || k < 1) throw ConfigError("flops_of_gemm: dims must be >= 1");
    return 2 * m * n * k;
}

std::vector<std::uint32_t> OperatorGraph::topological_order() const {
    std::vector<int> indegree(nodes.size(), 0);
    std::vector<std::vector<std::uint32_t>> consumers(nodes.size());
    for (const auto& n : nodes)
        for (std::uint32_t d : n.deps) {
            if (d >= nodes.size()) throw std::runtime_error("graph: dangling dependency");
            ++indegree[n.id];
            consumers[d].push_back(n.id);
        }
    std::deque<std::uint32_t> ready;
    for (const auto& n : nodes)
        if (indegree[n.id] == 0) ready.push_back(n.id);
    std::vector<std::uint32_t> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
        const std::uint32_t id = ready.front();
        ready.pop_front();
        order.push_back(id);
        for (std::uint32_t c : consumers[id])
            if (--indegree[c] == 0) ready.push_back(c);
    }
    if (order.size() != nodes.size())
        throw std::runtime_error("graph: dependency cycle detected");
    return order;
}

namespace {

class GraphBuilder {
public:
    explicit GraphBuilder(OperatorGraph& g) : g_(g), e_(g.cfg.element_size) {}

    std::uint32_t add(KernelNode n) {
        n.id = static_cast<std::uint32_t>(g_.nodes.size());
        if (last_ != kNone && n.deps.empty()) n.deps.push_back(last_);
        last_ = n.id;
        g_.nodes.push_back(std::move(n));
        return last_;
    }

    KernelNode gemm(KernelRole role, Phase phase, std::int64_t m, std::int64_t k,
                    std::int64_t n, std::int64_t weight_bytes) {
        KernelNode node;
        node.kind = KernelKind::GEMM;
        node.role = role;
        node.phase = phase;
        node.flops = flops_of_gemm(m, n, k);
        node.weight_bytes = weight_bytes;
        node.io_bytes_in = m * k * e_;
        node.io_bytes_out = m * n * e_;
        node.operand_shapes = {{m, k, e_}, {k, n, e_}};
        return node;
    }

    KernelNode sfpe(KernelKind kind, KernelRole role, Phase phase, std::int64_t elems,
                    std::int64_t weight_bytes = 0) {
        KernelNode node;
        node.kind = kind;
        node.role = role;
        node.phase = phase;
        node.sfpe_elems = elems;
        node.weight_bytes = weight_bytes;
        node.io_bytes_in = elems * e_;
        node.io_bytes_out = elems * e_;
        return node;
    }

    std::uint32_t last() const { return last_; }

private:
    static constexpr std::uint32_t kNone = 0xFFFFFFFFu;
    OperatorGraph& g_;
    int e_;
    std::uint32_t last_ = kNone;
};

}  // namespace

OperatorGraph build_graph(const ModelConfig& cfg, int prompt_tokens, ImageDims image,
                          int output_tokens) {
    cfg.validate();
    if (prompt_tokens < 1) throw ConfigError("build_graph: prompt_tokens must be >= 1");
    if (output_tokens < 1) throw ConfigError("build_graph: output_tokens must be >= 1");

    OperatorGraph g;
    g.cfg = cfg;
    g.prompt_tokens = prompt_tokens;
    g.visual_tokens = image.present() ? cfg.encoder_tokens_out : 0;
    g.output_tokens = output_tokens;

    const std::int64_t h = cfg.hidden_dim;
    const std::int64_t ffn = cfg.ffn_dim;
    const std::int64_t e = cfg.element_size;
    const std::int64_t kv_per_tok = cfg.kv_bytes_per_token_per_layer;
    const int layers = cfg.num_layers;

    // Rough per-node budget: backbone layer chain plus per-step head.
    const std::size_t per_layer = 16 + (cfg.qkv_bias ? 3 : 0);
    g.nodes.reserve(static_cast<std::size_t>(output_tokens + 1) * layers * per_layer +
                    static_cast<std::size_t>(output_tokens + 1) * 3 + 8);

    GraphBuilder b(g);

    // --- Encode + Connect ---------------------------------------------------
    if (g.visual_tokens > 0) {
        const double base_px = static_cast<double>(cfg.encoder_base_image_px) *
                               cfg.encoder_base_image_px;
        const double scale = base_px > 0 ? (static_cast<double>(image.width) * image.height) /
                                               base_px
                                         : 1.0;
        const std::int64_t feat_dim = cfg.connector_dims.empty() ? h : cfg.connector_dims.front();

        KernelNode enc;
        enc.kind = KernelKind::GEMM;
        enc.role = KernelRole::EncoderGemm;
        enc.phase = Phase::Encode;
        enc.flops = static_cast<std::int64_t>(std::llround(cfg.encoder_gflops * 1e9 * scale));
        enc.weight_bytes = static_cast<std::int64_t>(cfg.encoder_weight_bytes);
        enc.io_bytes_in = static_cast<std::int64_t>(image.width) * image.height * 3;
        enc.io_bytes_out = g.visual_tokens * feat_dim * e;
        b.add(std::move(enc));
        b.add(b.sfpe(KernelKind::Elementwise, KernelRole::EncoderElt, Phase::Encode,
                     g.visual_tokens * feat_dim));

        if (cfg.connector_dims.size() >= 2) {
            for (std::size_t i = 0; i + 1 < cfg.connector_dims.size(); ++i) {
                const std::int64_t din = cfg.connector_dims[i];
                const std::int64_t dout = cfg.connector_dims[i + 1];
                b.add(b.gemm(KernelRole::ConnectorGemm, Phase::Connect, g.visual_tokens, din,
                             dout, din * dout * e));
                if (i + 2 < cfg.connector_dims.size())
                    b.add(b.sfpe(KernelKind::Activation, KernelRole::ConnectorAct, Phase::Connect,
                                 g.visual_tokens * dout));
            }
        }
    }

    // --- Backbone pass builder ----------------------------------------------
    // One pass covers either the whole prefill (rows = prefill_len, causal
    // attention over the in-flight sequence) or a single decode step
    // (rows = 1, attention over prefill_len + t cached entries).
    auto backbone_pass = [&](Phase phase, int step, std::int64_t rows, std::int64_t ctx,
                             std::int64_t score_flops, std::int64_t softmax_elems,
                             std::int64_t kv_read_bytes) {
        for (int layer = 0; layer < layers; ++layer) {
            auto tag = [&](KernelNode n) {
                n.layer_index = layer;
                n.decode_step = step;
                return n;
            };

            b.add(tag(b.sfpe(KernelKind::Norm, KernelRole::AttnNorm, phase, rows * h,
                             2 * h * e)));
            const std::uint32_t norm1 = b.last();

            std::uint32_t q = 0, k = 0, v = 0;
            for (int which = 0; which < 3; ++which) {
                KernelNode proj = tag(b.gemm(KernelRole::QkvGemm, phase, rows, h, h, h * h * e));
                proj.deps = {norm1};
                const std::uint32_t gid = b.add(std::move(proj));
                std::uint32_t out = gid;
                if (cfg.qkv_bias) {
                    KernelNode bias =
                        tag(b.sfpe(KernelKind::Elementwise, KernelRole::QkvBias, phase, rows * h,
                                   h * e));
                    bias.deps = {gid};
                    out = b.add(std::move(bias));
                }
                if (which == 0) q = out;
                else if (which == 1) k = out;
                else v = out;
            }

            KernelNode append = tag(KernelNode{});
            append.kind = KernelKind::KVAppend;
            append.role = KernelRole::KvAppend;
            append.phase = phase;
            append.kv_write_bytes = rows * kv_per_tok;
            append.io_bytes_in = rows * kv_per_tok;
            append.deps = {k, v};
            const std::uint32_t app_id = b.add(std::move(append));

            KernelNode read = tag(KernelNode{});
            read.kind = KernelKind::KVRead;
            read.role = KernelRole::KvRead;
            read.phase = phase;
            read.kv_read_bytes = kv_read_bytes;
            read.io_bytes_out = kv_read_bytes;
            read.deps = {app_id};
            const std::uint32_t read_id = b.add(std::move(read));

            // Head-partitioned equivalent shapes: Q (rows x hidden), K^T (hidden x ctx).
            KernelNode score = tag(KernelNode{});
            score.kind = KernelKind::GEMM;
            score.role = KernelRole::ScoreGemm;
            score.phase = phase;
            score.flops = score_flops;
            score.io_bytes_in = rows * h * e;
            score.io_bytes_out = softmax_elems * e;
            score.operand_shapes = {{rows, h, static_cast<int>(e)},
                                    {h, ctx, static_cast<int>(e)}};
            score.deps = {q, read_id};
            const std::uint32_t score_id = b.add(std::move(score));

            KernelNode sm = tag(b.sfpe(KernelKind::Softmax, KernelRole::AttnSoftmax, phase,
                                       softmax_elems));
            sm.deps = {score_id};
            const std::uint32_t sm_id = b.add(std::move(sm));

            KernelNode av = tag(KernelNode{});
            av.kind = KernelKind::GEMM;
            av.role = KernelRole::AttnValueGemm;
            av.phase = phase;
            av.flops = score_flops;
            av.io_bytes_in = softmax_elems * e;
            av.io_bytes_out = rows * h * e;
            av.operand_shapes = {{rows, ctx, static_cast<int>(e)},
                                 {ctx, h, static_cast<int>(e)}};
            av.deps = {sm_id, read_id};
            const std::uint32_t av_id = b.add(std::move(av));

            KernelNode oproj = tag(b.gemm(KernelRole::OutProjGemm, phase, rows, h, h, h * h * e));
            oproj.deps = {av_id};
            b.add(std::move(oproj));

            b.add(tag(b.sfpe(KernelKind::Elementwise, KernelRole::Residual, phase, rows * h)));
            b.add(tag(b.sfpe(KernelKind::Norm, KernelRole::FfnNorm, phase, rows * h, 2 * h * e)));
            b.add(tag(b.gemm(KernelRole::FfnGemm1, phase, rows, h, ffn, h * ffn * e)));
            b.add(tag(b.sfpe(KernelKind::Activation, KernelRole::FfnAct, phase, rows * ffn)));
            b.add(tag(b.gemm(KernelRole::FfnGemm2, phase, rows, ffn, h, h * ffn * e)));
            b.add(tag(b.sfpe(KernelKind::Elementwise, KernelRole::Residual, phase, rows * h)));
        }

        KernelNode fnorm = b.sfpe(KernelKind::Norm, KernelRole::FinalNorm, phase, h, 2 * h * e);
        fnorm.decode_step = step;
        b.add(std::move(fnorm));
        if (cfg.include_lm_head) {
            // Logits for the last position only.
            KernelNode lm = b.gemm(KernelRole::LmHeadGemm, phase, 1, h, cfg.vocab_size,
                                   h * cfg.vocab_size * e);
            lm.decode_step = step;
            b.add(std::move(lm));
        }
    };

    // --- Prefill -------------------------------------------------------------
    const std::int64_t T = g.prefill_len();
    backbone_pass(Phase::Prefill, /*step=*/0, /*rows=*/T, /*ctx=*/T,
                  /*score_flops=*/2 * h * T * (T + 1) / 2,
                  /*softmax_elems=*/static_cast<std::int64_t>(cfg.num_heads) * T * (T + 1) / 2,
                  /*kv_read_bytes=*/T * (T + 1) / 2 * kv_per_tok);

    // --- Decode steps ----------------------------------------------------------
    for (int t = 1; t <= output_tokens; ++t) {
        const std::int64_t ctx = g.context_at_step(t);
        backbone_pass(Phase::DecodeStep, t, /*rows=*/1, ctx,
                      /*score_flops=*/2 * ctx * h,
                      /*softmax_elems=*/static_cast<std::int64_t>(cfg.num_heads) * ctx,
                      /*kv_read_bytes=*/ctx * kv_per_tok);
    }

    g.entry_ids = {0};
    g.exit_ids = {static_cast<std::uint32_t>(g.nodes.size() - 1)};
    return g;
}

std::map<Phase, double> phase_fractions(const OperatorGraph&, const SimReport& report) {
    double total = 0.0;
    for (const auto& [phase, ns] : report.phase_latency_ns) total += ns;
    if (total <= 0.0) throw std::invalid_argument("phase_fractions: empty report");
    std::map<Phase, double> out;
    for (const auto& [phase, ns] : report.phase_latency_ns) out[phase] = ns / total;
    return out;
}

const char* to_string(Phase p) {
    switch (p) {
        case Phase::Encode: return "encode";
        case Phase::Connect: return "connect";
        case Phase::Prefill: return "prefill";
        case Phase::DecodeStep: return "decode";
    }
    return "?";
}

const char* to_string(KernelKind k) {
    switch (k) {
        case KernelKind::GEMM: return "gemm";
        case KernelKind::Softmax: return "softmax";
        case KernelKind::Elementwise: return "elementwise";
        case KernelKind::Norm: return "norm";
        case KernelKind::Activation: return "activation";
        case KernelKind::KVAppend: return "kv_append";
        case KernelKind::KVRead: return "kv_read";
        case KernelKind::Transfer: return "transfer";
    }
    return "?";
}

}  // namespace nmpsim
