#include "nmpsim/mapper.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace nmpsim {

namespace {

bool is_ffn_role(KernelRole r) {
    return r == KernelRole::FfnGemm1 || r == KernelRole::FfnAct || r == KernelRole::FfnGemm2;
}

std::string fmt_bytes(std::int64_t b) {
    return std::to_string(b) + " bytes";
}

}  // namespace

Placement place(const OperatorGraph& graph, const PlatformSpec& platform,
                PlacementPolicy policy) {
    const ModelConfig& cfg = graph.cfg;
    Placement p;
    p.policy = policy;
    p.chiplet_of.assign(graph.nodes.size(), Chiplet::DramNmp);

    if (policy == PlacementPolicy::DramOnly) {
        // Everything stays on the DRAM chiplet; capacity checked in
        // plan_weight_residency when the full plan is built.
        return p;
    }

    if (!platform.rram_present)
        throw MappingError("heterogeneous placement requires an RRAM chiplet");

    const std::int64_t ffn_weights =
        static_cast<std::int64_t>(cfg.num_layers) * cfg.ffn_weight_bytes_per_layer();
    const std::int64_t rram_cap =
        static_cast<std::int64_t>(platform.rram.effective_capacity_bytes());
    if (ffn_weights > rram_cap)
        throw CapacityError("FFN weights exceed RRAM capacity by " +
                            fmt_bytes(ffn_weights - rram_cap) + " (" + fmt_bytes(ffn_weights) +
                            " required, " + fmt_bytes(rram_cap) + " available)");

    for (const auto& n : graph.nodes)
        if (is_ffn_role(n.role)) p.chiplet_of[n.id] = Chiplet::RramNmp;

    // Two fixed activation-only transfer points per layer per backbone pass:
    // AttnOut crosses into the FFN (Dram -> Rram) and FFNOut returns.
    const std::int64_t e = cfg.element_size;
    for (const auto& n : graph.nodes) {
        if (n.role == KernelRole::FfnGemm1) {
            const std::int64_t rows = n.operand_shapes.front().rows;
            TransferEdge in;
            in.producer = n.deps.front();
            in.consumer = n.id;
            in.bytes = rows * cfg.hidden_dim * e;
            in.point = TransferPoint::AttnOut;
            in.phase = n.phase;
            in.decode_step = n.decode_step;
            in.layer_index = n.layer_index;
            p.transfer_edges.push_back(in);
        } else if (n.role == KernelRole::FfnGemm2) {
            const std::int64_t rows = n.operand_shapes.front().rows;
            TransferEdge out;
            out.producer = n.id;
            out.consumer = n.id + 1;  // the residual add that consumes FFNOut
            out.bytes = rows * cfg.hidden_dim * e;
            out.point = TransferPoint::FfnOut;
            out.phase = n.phase;
            out.decode_step = n.decode_step;
            out.layer_index = n.layer_index;
            p.transfer_edges.push_back(out);
        }
    }
    return p;
}

std::int64_t attn_tile_iterations(std::int64_t ctx, std::int64_t tile) {
    if (ctx < 1 || tile < 1) throw MappingError("attn_tile_iterations: ctx/tile must be >= 1");
    return (ctx + tile - 1) / tile;
}

std::vector<FusionGroup> fuse(const OperatorGraph& graph, const Placement& placement) {
    if (placement.chiplet_of.size() != graph.nodes.size())
        throw MappingError("fuse: placement does not cover the graph");

    std::vector<FusionGroup> groups;
    auto emit = [&](FusionKind kind, std::vector<std::uint32_t> members,
                    std::int64_t local_bytes) {
        if (members.empty()) return;
        FusionGroup g;
        g.id = static_cast<std::uint32_t>(groups.size());
        g.kind = kind;
        g.chiplet = placement.chiplet_of[members.front()];
        for (std::uint32_t m : members)
            if (placement.chiplet_of[m] != g.chiplet)
                throw MappingError("fuse: group would cross the chiplet boundary at kernel " +
                                   std::to_string(m));
        g.members = std::move(members);
        g.intermediate_bytes_kept_local = local_bytes;
        groups.push_back(std::move(g));
    };

    const std::int64_t e = graph.cfg.element_size;
    std::size_t i = 0;
    const auto& nodes = graph.nodes;
    while (i < nodes.size()) {
        const KernelNode& n = nodes[i];
        switch (n.role) {
            case KernelRole::AttnNorm:
            case KernelRole::FfnNorm:
            case KernelRole::FinalNorm: {
                emit(FusionKind::FusedNorm, {n.id}, n.sfpe_elems * e);
                ++i;
                break;
            }
            case KernelRole::QkvGemm: {
                // Q, K, V projections plus their bias adds form one group.
                std::vector<std::uint32_t> members;
                std::int64_t local = 0;
                while (i < nodes.size() && (nodes[i].role == KernelRole::QkvGemm ||
                                            nodes[i].role == KernelRole::QkvBias)) {
                    if (nodes[i].role == KernelRole::QkvBias)
                        local += nodes[i].sfpe_elems * e;  // pre-bias projection held local
                    members.push_back(nodes[i].id);
                    ++i;
                }
                emit(FusionKind::FusedQkvProj, std::move(members), local);
                break;
            }
            case KernelRole::KvRead: {
                // Streaming attention: tile reads feed score GEMM, online
                // softmax, and the accumulating value GEMM. The score matrix
                // (= softmax work) is the tensor never materialized.
                std::vector<std::uint32_t> members{n.id};
                std::int64_t local = 0;
                std::size_t j = i + 1;
                while (j < nodes.size() &&
                       (nodes[j].role == KernelRole::ScoreGemm ||
                        nodes[j].role == KernelRole::AttnSoftmax ||
                        nodes[j].role == KernelRole::AttnValueGemm)) {
                    if (nodes[j].role == KernelRole::AttnSoftmax) local = nodes[j].sfpe_elems * e;
                    members.push_back(nodes[j].id);
                    ++j;
                }
                if (members.size() != 4)
                    throw MappingError("fuse: malformed attention chain at kernel " +
                                       std::to_string(n.id));
                emit(FusionKind::FusedAttnStream, std::move(members), local);
                i = j;
                break;
            }
            case KernelRole::FfnGemm1: {
                if (i + 2 >= nodes.size() || nodes[i + 1].role != KernelRole::FfnAct ||
                    nodes[i + 2].role != KernelRole::FfnGemm2)
                    throw MappingError("fuse: malformed FFN chain at kernel " +
                                       std::to_string(n.id));
                // The rows x ffn_dim hidden tensor stays on the logic die.
                const std::int64_t local = nodes[i + 1].sfpe_elems * e;
                emit(FusionKind::FusedFfnAct, {n.id, nodes[i + 1].id, nodes[i + 2].id}, local);
                i += 3;
                break;
            }
            default:
                // Everything else stands alone (KV append, residuals, output
                // projection, lm head, encoder/connector kernels).
                ++i;
                break;
        }
    }
    return groups;
}

KvBudget kv_budget(const DramChipletSpec& dram, const RramChipletSpec* rram,
                   const WeightResidency& weights) {
    KvBudget b;
    b.dram_tier_bytes.assign(dram.tiers, static_cast<std::int64_t>(dram.tier_capacity_bytes));
    for (std::size_t t = 0; t < weights.dram_tier_used_bytes.size() &&
                            t < b.dram_tier_bytes.size();
         ++t)
        b.dram_tier_bytes[t] -= weights.dram_tier_used_bytes[t];
    if (rram) {
        b.rram_bytes = static_cast<std::int64_t>(rram->effective_capacity_bytes()) -
                       weights.rram_ffn_bytes;
        b.rram_bytes = std::max<std::int64_t>(b.rram_bytes, 0);
    }
    return b;
}

void assign_kv(std::vector<KvBlock>& cache_state, const DramChipletSpec& dram,
               const KvBudget& budget, HotnessPolicy policy) {
    if (policy != HotnessPolicy::Recency) throw MappingError("assign_kv: unknown hotness policy");
    if (budget.dram_tier_bytes.size() != static_cast<std::size_t>(dram.tiers))
        throw MappingError("assign_kv: budget does not match tier count");

    // Recency: blocks holding the most recent tokens are hottest.
    for (auto& blk : cache_state) blk.hotness = static_cast<double>(blk.token_end - 1);

    std::vector<KvBlock*> movable;
    std::int64_t rram_used = 0;
    for (auto& blk : cache_state) {
        if (blk.on_rram)
            rram_used += blk.bytes;  // one-shot offload: never returns to DRAM
        else
            movable.push_back(&blk);
    }
    std::sort(movable.begin(), movable.end(), [](const KvBlock* a, const KvBlock* b) {
        if (a->hotness != b->hotness) return a->hotness > b->hotness;
        return a->id < b->id;
    });

    std::vector<std::int64_t> tier_free = budget.dram_tier_bytes;
    std::size_t next = 0;
    for (int tier = 0; tier < dram.tiers && next < movable.size(); ++tier) {
        while (next < movable.size() && movable[next]->bytes <= tier_free[tier]) {
            tier_free[tier] -= movable[next]->bytes;
            movable[next]->residence_tier = tier;
            movable[next]->on_rram = false;
            ++next;
        }
    }
    // Coldest overflow goes to RRAM, written exactly once.
    for (; next < movable.size(); ++next) {
        KvBlock* blk = movable[next];
        if (rram_used + blk->bytes > budget.rram_bytes)
            throw CapacityError("KV cache exceeds DRAM tier budgets plus RRAM budget (" +
                                fmt_bytes(blk->bytes) + " block does not fit)");
        rram_used += blk->bytes;
        blk->on_rram = true;
        blk->residence_tier = -1;
        blk->write_count += 1;
    }
}

void assign_kv(std::vector<KvBlock>& cache_state, const DramChipletSpec& dram,
               HotnessPolicy policy) {
    KvBudget b;
    b.dram_tier_bytes.assign(dram.tiers, static_cast<std::int64_t>(dram.tier_capacity_bytes));
    b.rram_bytes = 0;
    assign_kv(cache_state, dram, b, policy);
}

MigrationCost migration_cost(const std::vector<KvBlock>& before,
                             const std::vector<KvBlock>& after, const PlatformSpec& platform) {
    if (before.size() != after.size())
        throw MappingError("migration_cost: plans cover different caches");
    MigrationCost cost;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const KvBlock& a = before[i];
        const KvBlock& b = after[i];
        if (a.id != b.id) throw MappingError("migration_cost: block id mismatch");
        if (a.on_rram == b.on_rram && a.residence_tier == b.residence_tier) continue;
        if (a.on_rram && !b.on_rram)
            throw MappingError("migration_cost: RRAM-resident block may not return to DRAM");

        const std::uint64_t bits = static_cast<std::uint64_t>(a.bytes) * 8;
        cost.bytes_moved += a.bytes;
        cost.blocks_moved += 1;
        if (!a.on_rram && b.on_rram) {
            // DRAM read, link transfer, RRAM write.
            cost.joules += dram_access_energy_j(platform.dram, bits);
            cost.joules += static_cast<double>(bits) * platform.link.energy_pj_per_bit * 1e-12;
            cost.joules += rram_access_energy_j(platform.rram, bits, RramAccess::Write);
            cost.ns += dram_stream_time_ns(platform.dram, a.bytes, a.residence_tier);
            cost.ns += platform.link.latency_ns +
                       static_cast<double>(a.bytes) / platform.link.bandwidth_bytes_per_s * 1e9;
            cost.ns += static_cast<double>(a.bytes) /
                       platform.rram.write_stream_bw_bytes_per_s() * 1e9;
            cost.bytes_to_rram += a.bytes;
            cost.dram_bits += bits;
            cost.rram_bits_written += bits;
        } else {
            // Tier-to-tier move inside the DRAM stack: read plus write.
            cost.joules += 2.0 * dram_access_energy_j(platform.dram, bits);
            cost.ns += dram_stream_time_ns(platform.dram, a.bytes, a.residence_tier);
            cost.ns += dram_stream_time_ns(platform.dram, a.bytes, b.residence_tier);
            cost.dram_bits += 2 * bits;
        }
    }
    return cost;
}

std::vector<KvBlock> make_kv_blocks(const ModelConfig& cfg, std::int64_t tokens,
                                    int block_tokens) {
    std::vector<KvBlock> blocks;
    if (tokens <= 0) return blocks;
    const std::int64_t per_tok = cfg.kv_bytes_per_token_per_layer;
    std::uint32_t id = 0;
    for (std::int64_t start = 0; start < tokens; start += block_tokens) {
        const std::int64_t end = std::min<std::int64_t>(tokens, start + block_tokens);
        for (int layer = 0; layer < cfg.num_layers; ++layer) {
            KvBlock b;
            b.id = id++;
            b.layer_index = layer;
            b.token_start = start;
            b.token_end = end;
            b.bytes = (end - start) * per_tok;
            b.hotness = static_cast<double>(end - 1);
            blocks.push_back(b);
        }
    }
    return blocks;
}

namespace {

// Greedy fill of one weight class across tiers in preference order.
WeightSpread fill_class(std::int64_t bytes, const std::vector<int>& preference,
                        std::vector<std::int64_t>& tier_free, const char* what) {
    WeightSpread s;
    for (int tier : preference) {
        if (bytes == 0) break;
        const std::int64_t take = std::min(bytes, tier_free[tier]);
        if (take > 0) {
            s.tier_bytes.emplace_back(tier, take);
            tier_free[tier] -= take;
            bytes -= take;
        }
    }
    if (bytes > 0)
        throw CapacityError(std::string(what) + " weights overflow the DRAM tiers by " +
                            fmt_bytes(bytes));
    return s;
}

}  // namespace

WeightResidency plan_weight_residency(const ModelConfig& cfg, const PlatformSpec& platform,
                                      PlacementPolicy policy) {
    const DramChipletSpec& dram = platform.dram;
    WeightResidency w;
    std::vector<std::int64_t> tier_free(dram.tiers,
                                        static_cast<std::int64_t>(dram.tier_capacity_bytes));

    // Encoder and connector weights live in the top (slowest) tier; backbone
    // weights prefer the home tier and spread outward, keeping Tier-0 free
    // for hot KV blocks.
    std::vector<int> top_down;
    for (int t = dram.tiers - 1; t >= 0; --t) top_down.push_back(t);
    std::vector<int> backbone_pref;
    backbone_pref.push_back(dram.weight_home_tier);
    for (int below = dram.weight_home_tier - 1; below >= 1; --below) backbone_pref.push_back(below);
    for (int above = dram.weight_home_tier + 1; above < dram.tiers; ++above)
        backbone_pref.push_back(above);
    backbone_pref.push_back(0);

    w.encoder = fill_class(cfg.encoder_weight_bytes, top_down, tier_free, "encoder");
    w.connector = fill_class(cfg.connector_weight_bytes(), top_down, tier_free, "connector");

    const std::int64_t norm_params = static_cast<std::int64_t>(cfg.num_layers) * 2 * 2 *
                                         cfg.hidden_dim * cfg.element_size +
                                     2 * cfg.hidden_dim * cfg.element_size;
    const std::int64_t attn_bytes =
        static_cast<std::int64_t>(cfg.num_layers) * cfg.attn_weight_bytes_per_layer() +
        norm_params;
    w.attn = fill_class(attn_bytes, backbone_pref, tier_free, "attention");
    w.lm_head = fill_class(cfg.lm_head_weight_bytes(), backbone_pref, tier_free, "lm head");

    const std::int64_t ffn_bytes =
        static_cast<std::int64_t>(cfg.num_layers) * cfg.ffn_weight_bytes_per_layer();
    if (policy == PlacementPolicy::DramOnly) {
        w.ffn = fill_class(ffn_bytes, backbone_pref, tier_free, "ffn");
        w.rram_ffn_bytes = 0;
    } else {
        w.rram_ffn_bytes = ffn_bytes;
    }

    w.dram_tier_used_bytes.assign(dram.tiers, 0);
    for (const WeightSpread* s : {&w.encoder, &w.connector, &w.attn, &w.lm_head, &w.ffn})
        for (const auto& [tier, bytes] : s->tier_bytes) w.dram_tier_used_bytes[tier] += bytes;
    return w;
}

MappingPlan build_plan(const OperatorGraph& graph, const PlatformSpec& platform,
                       PlacementPolicy policy) {
    MappingPlan plan;
    plan.placement = place(graph, platform, policy);
    plan.fusion_groups = fuse(graph, plan.placement);
    plan.group_of_node.assign(graph.nodes.size(), kUngrouped);
    for (const auto& g : plan.fusion_groups)
        for (std::uint32_t m : g.members) plan.group_of_node[m] = g.id;

    plan.weights = plan_weight_residency(graph.cfg, platform, policy);

    plan.kv_assignment =
        make_kv_blocks(graph.cfg, graph.prefill_len(), platform.knobs.kv_block_tokens);
    const RramChipletSpec* rram =
        (policy == PlacementPolicy::Heterogeneous && platform.rram_present) ? &platform.rram
                                                                            : nullptr;
    assign_kv(plan.kv_assignment, platform.dram, kv_budget(platform.dram, rram, plan.weights),
              HotnessPolicy::Recency);

    plan.expected_link_bytes_per_decode_step =
        policy == PlacementPolicy::Heterogeneous
            ? 2ll * graph.cfg.num_layers * graph.cfg.hidden_dim * graph.cfg.element_size
            : 0;
    return plan;
}

const char* to_string(Chiplet c) { return c == Chiplet::DramNmp ? "dram" : "rram"; }
const char* to_string(PlacementPolicy p) {
    return p == PlacementPolicy::Heterogeneous ? "heterogeneous" : "dram-only";
}
const char* to_string(FusionKind k) {
    switch (k) {
        case FusionKind::FusedQkvProj: return "fused_qkv_proj";
        case FusionKind::FusedAttnStream: return "fused_attn_stream";
        case FusionKind::FusedFfnAct: return "fused_ffn_act";
        case FusionKind::FusedNorm: return "fused_norm";
    }
    return "?";
}

}  // namespace nmpsim
