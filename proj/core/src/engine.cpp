#include "nmpsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_map>

namespace nmpsim {

// ---------------------------------------------------------------------------
// Roofline timing

LinkTransferCost time_link_transfer(std::int64_t bytes, const LinkSpec& link) {
    if (bytes < 0) throw SimulationError("time_link_transfer: negative bytes");
    LinkTransferCost c;
    c.ns = link.latency_ns + static_cast<double>(bytes) / link.bandwidth_bytes_per_s * 1e9;
    c.joules = static_cast<double>(bytes) * 8.0 * link.energy_pj_per_bit * 1e-12;
    return c;
}

KernelCost time_kernel(const WorkItem& w, Chiplet where, const PlatformSpec& p) {
    KernelCost c;
    c.chiplet = where;
    double energy = 0.0;

    if (where == Chiplet::DramNmp) {
        const DramChipletSpec& d = p.dram;
        const double pe_ns =
            w.flops > 0 ? static_cast<double>(w.flops) /
                              (d.peak_flops * p.knobs.tensor_utilization) * 1e9
                        : 0.0;
        const double sfpe_ns =
            w.sfpe_elems > 0 ? static_cast<double>(w.sfpe_elems) /
                                   (d.sfpe_elems_per_s() * p.knobs.sfpe_utilization) * 1e9
                             : 0.0;
        if (w.reducer_elems > 0)
            throw SimulationError("time_kernel: reducer work is an RRAM-side path");
        c.compute_ns = std::max(pe_ns, sfpe_ns);

        double mem_ns = 0.0;
        for (const auto& [tier, bytes] : w.legs.dram_read_tier_bytes) {
            mem_ns += dram_stream_time_ns(d, static_cast<std::uint64_t>(bytes), tier);
            c.dram_bits += static_cast<std::uint64_t>(bytes) * 8;
        }
        for (const auto& [tier, bytes] : w.legs.dram_write_tier_bytes) {
            mem_ns += dram_stream_time_ns(d, static_cast<std::uint64_t>(bytes), tier);
            c.dram_bits += static_cast<std::uint64_t>(bytes) * 8;
        }
        energy += dram_access_energy_j(d, c.dram_bits);

        // KV blocks offloaded to RRAM are read back through the interface and
        // across the UCIe link each attention pass; spill writes take the
        // mirrored path.
        if (w.legs.rram_io_read_bytes > 0) {
            const std::int64_t bytes = w.legs.rram_io_read_bytes;
            mem_ns += static_cast<double>(bytes) / p.rram.peak_bw_bytes_per_s * 1e9;
            c.rram_bits_read += static_cast<std::uint64_t>(bytes) * 8;
            energy += rram_access_energy_j(p.rram, static_cast<std::uint64_t>(bytes) * 8,
                                           RramAccess::Read);
            if (w.legs.rram_io_over_link) {
                const LinkTransferCost lk = time_link_transfer(bytes, p.link);
                mem_ns += lk.ns;
                c.link_ns += lk.ns;
                c.link_bytes += static_cast<std::uint64_t>(bytes);
                energy += lk.joules;
            }
        }
        if (w.legs.rram_io_write_bytes > 0) {
            const std::int64_t bytes = w.legs.rram_io_write_bytes;
            mem_ns += static_cast<double>(bytes) / p.rram.write_stream_bw_bytes_per_s() * 1e9;
            c.rram_bits_written += static_cast<std::uint64_t>(bytes) * 8;
            energy += rram_access_energy_j(p.rram, static_cast<std::uint64_t>(bytes) * 8,
                                           RramAccess::Write);
            if (w.legs.rram_io_over_link) {
                const LinkTransferCost lk = time_link_transfer(bytes, p.link);
                mem_ns += lk.ns;
                c.link_ns += lk.ns;
                c.link_bytes += static_cast<std::uint64_t>(bytes);
                energy += lk.joules;
            }
        }
        c.memory_ns = mem_ns;
    } else {
        const RramChipletSpec& r = p.rram;
        if (w.sfpe_elems > 0)
            throw SimulationError(
                "time_kernel: softmax/norm/elementwise kernel placed on the RRAM NMP, which has "
                "no SFPE");
        const double pe_ns =
            w.flops > 0 ? static_cast<double>(w.flops) /
                              (r.peak_flops * p.knobs.tensor_utilization) * 1e9
                        : 0.0;
        const double red_ns = w.reducer_elems > 0
                                  ? static_cast<double>(w.reducer_elems) /
                                        r.reducer_elems_per_s() * 1e9
                                  : 0.0;
        c.compute_ns = std::max(pe_ns, red_ns);

        double mem_ns = 0.0;
        if (w.legs.rram_weight_bytes > 0) {
            mem_ns += static_cast<double>(w.legs.rram_weight_bytes) /
                      r.weight_stream_bw_bytes_per_s() * 1e9;
            c.rram_bits_read += static_cast<std::uint64_t>(w.legs.rram_weight_bytes) * 8;
            energy += rram_access_energy_j(
                r, static_cast<std::uint64_t>(w.legs.rram_weight_bytes) * 8, RramAccess::Read);
        }
        if (w.legs.rram_io_read_bytes > 0) {
            mem_ns += static_cast<double>(w.legs.rram_io_read_bytes) / r.peak_bw_bytes_per_s * 1e9;
            c.rram_bits_read += static_cast<std::uint64_t>(w.legs.rram_io_read_bytes) * 8;
            energy += rram_access_energy_j(
                r, static_cast<std::uint64_t>(w.legs.rram_io_read_bytes) * 8, RramAccess::Read);
        }
        if (w.legs.rram_io_write_bytes > 0) {
            mem_ns += static_cast<double>(w.legs.rram_io_write_bytes) /
                      r.write_stream_bw_bytes_per_s() * 1e9;
            c.rram_bits_written += static_cast<std::uint64_t>(w.legs.rram_io_write_bytes) * 8;
            energy += rram_access_energy_j(
                r, static_cast<std::uint64_t>(w.legs.rram_io_write_bytes) * 8, RramAccess::Write);
        }
        if (!w.legs.dram_read_tier_bytes.empty() || !w.legs.dram_write_tier_bytes.empty())
            throw SimulationError("time_kernel: DRAM legs on an RRAM-side kernel");
        c.memory_ns = mem_ns;
    }

    c.chosen_ns = std::max(c.compute_ns, c.memory_ns);
    c.dynamic_energy_j = energy;
    return c;
}

// ---------------------------------------------------------------------------
// Simulation state

namespace {

constexpr double kPsPerNs = 1000.0;

std::int64_t to_ps(double ns) { return std::llround(ns * kPsPerNs); }

/// Incremental KV cache state: per-layer tier mixes plus free budgets.
class KvState {
public:
    KvState(const ModelConfig& cfg, const PlatformSpec& platform, const MappingPlan& plan)
        : cfg_(cfg),
          dram_(platform.dram),
          budget_(kv_budget(platform.dram,
                            plan.placement.policy == PlacementPolicy::Heterogeneous &&
                                    platform.rram_present
                                ? &platform.rram
                                : nullptr,
                            plan.weights)),
          layer_tier_bytes_(cfg.num_layers, std::vector<std::int64_t>(platform.dram.tiers, 0)),
          layer_rram_bytes_(cfg.num_layers, 0),
          open_block_(cfg.num_layers, -1),
          tier_free_(budget_.dram_tier_bytes),
          rram_free_(budget_.rram_bytes) {}

    /// Adopts the post-prefill blocks of one layer (placement already chosen
    /// by the mapper); returns per-tier written bytes for the append charge.
    std::vector<std::pair<int, std::int64_t>> adopt_prefill_layer(
        const std::vector<KvBlock>& assignment, int layer) {
        std::vector<std::pair<int, std::int64_t>> writes;
        int newest_idx = -1;
        std::int64_t newest_end = -1;
        for (const KvBlock& b : assignment) {
            if (b.layer_index != layer) continue;
            blocks_.push_back(b);
            account_add(blocks_.back());
            if (!b.on_rram)
                writes.emplace_back(b.residence_tier, b.bytes);
            else
                rram_writes_pending_ += b.bytes;
            if (b.token_end > newest_end) {
                newest_end = b.token_end;
                newest_idx = static_cast<int>(blocks_.size()) - 1;
            }
        }
        open_block_[layer] = newest_idx;
        return writes;
    }

    std::int64_t take_rram_prefill_write_bytes() {
        const std::int64_t b = rram_writes_pending_;
        rram_writes_pending_ = 0;
        return b;
    }

    /// Appends one token's K/V to `layer`; returns the tier written.
    int append_token(int layer, std::int64_t token_index) {
        const std::int64_t bytes = cfg_.kv_bytes_per_token_per_layer;
        int idx = open_block_[layer];
        if (idx >= 0) {
            KvBlock& blk = blocks_[idx];
            const bool full =
                blk.token_end - blk.token_start >= block_tokens_ || blk.on_rram;
            if (!full && tier_free_[blk.residence_tier] >= bytes) {
                blk.token_end += 1;
                blk.bytes += bytes;
                blk.hotness = static_cast<double>(blk.token_end - 1);
                tier_free_[blk.residence_tier] -= bytes;
                layer_tier_bytes_[layer][blk.residence_tier] += bytes;
                return blk.residence_tier;
            }
        }
        // Open a new block in the hottest tier with room.
        for (int tier = 0; tier < dram_.tiers; ++tier) {
            if (tier_free_[tier] < bytes) continue;
            KvBlock blk;
            blk.id = next_id_++;
            blk.layer_index = layer;
            blk.token_start = token_index;
            blk.token_end = token_index + 1;
            blk.bytes = bytes;
            blk.hotness = static_cast<double>(token_index);
            blk.residence_tier = tier;
            blocks_.push_back(blk);
            open_block_[layer] = static_cast<int>(blocks_.size()) - 1;
            tier_free_[tier] -= bytes;
            layer_tier_bytes_[layer][tier] += bytes;
            return tier;
        }
        throw CapacityError("KV cache exceeds the DRAM tier budget during decode append");
    }

    void set_block_tokens(int t) { block_tokens_ = t; }

    const std::vector<std::int64_t>& layer_tier_bytes(int layer) const {
        return layer_tier_bytes_[layer];
    }
    std::int64_t layer_rram_bytes(int layer) const { return layer_rram_bytes_[layer]; }

    std::vector<KvBlock>& blocks() { return blocks_; }
    const KvBudget& budget() const { return budget_; }

    /// Re-derives the incremental tallies after a rebalance.
    void rebuild_accounting() {
        for (auto& v : layer_tier_bytes_) std::fill(v.begin(), v.end(), 0);
        std::fill(layer_rram_bytes_.begin(), layer_rram_bytes_.end(), 0);
        tier_free_ = budget_.dram_tier_bytes;
        rram_free_ = budget_.rram_bytes;
        for (const KvBlock& b : blocks_) account_add(b);
    }

    int max_write_count() const {
        int m = 0;
        for (const KvBlock& b : blocks_) m = std::max(m, b.write_count);
        return m;
    }
    std::uint64_t blocks_on_rram() const {
        std::uint64_t n = 0;
        for (const KvBlock& b : blocks_) n += b.on_rram ? 1 : 0;
        return n;
    }

private:
    void account_add(const KvBlock& b) {
        if (b.on_rram) {
            layer_rram_bytes_[b.layer_index] += b.bytes;
            rram_free_ -= b.bytes;
        } else {
            layer_tier_bytes_[b.layer_index][b.residence_tier] += b.bytes;
            tier_free_[b.residence_tier] -= b.bytes;
        }
    }

    const ModelConfig& cfg_;
    const DramChipletSpec& dram_;
    KvBudget budget_;
    std::vector<KvBlock> blocks_;
    std::vector<std::vector<std::int64_t>> layer_tier_bytes_;
    std::vector<std::int64_t> layer_rram_bytes_;
    std::vector<int> open_block_;
    std::vector<std::int64_t> tier_free_;
    std::int64_t rram_free_ = 0;
    std::int64_t rram_writes_pending_ = 0;
    int block_tokens_ = 64;
    std::uint32_t next_id_ = 1u << 24;  // decode blocks get ids above prefill blocks
};

const WeightSpread* spread_for_role(KernelRole role, const WeightResidency& w) {
    switch (role) {
        case KernelRole::EncoderGemm:
        case KernelRole::EncoderElt:
            return &w.encoder;
        case KernelRole::ConnectorGemm:
        case KernelRole::ConnectorAct:
            return &w.connector;
        case KernelRole::LmHeadGemm:
            return &w.lm_head;
        case KernelRole::FfnGemm1:
        case KernelRole::FfnGemm2:
        case KernelRole::FfnAct:
            return &w.ffn;  // only populated on DramOnly plans
        default:
            return &w.attn;
    }
}

/// Splits `bytes` across the class's resident tiers, proportional to
/// residency; the last tier absorbs rounding.
void add_weight_legs(std::int64_t bytes, const WeightSpread& spread,
                     std::vector<std::pair<int, std::int64_t>>& out) {
    if (bytes <= 0) return;
    const std::int64_t total = spread.total();
    if (total <= 0 || spread.tier_bytes.empty()) {
        out.emplace_back(0, bytes);  // untracked class, charge at the fastest tier
        return;
    }
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < spread.tier_bytes.size(); ++i) {
        const auto& [tier, resident] = spread.tier_bytes[i];
        std::int64_t part = i + 1 == spread.tier_bytes.size()
                                ? bytes - assigned
                                : bytes * resident / total;
        if (part > 0) out.emplace_back(tier, part);
        assigned += part;
    }
}

struct UnitStats {
    double ns = 0.0;
    double energy = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------
// run()

SimReport run(const OperatorGraph& graph, const MappingPlan& plan,
              const PlatformSpec& platform, const TraceSink* trace) {
    platform.validate();
    if (plan.placement.chiplet_of.size() != graph.nodes.size())
        throw SimulationError("run: plan does not cover the graph");
    graph.topological_order();  // rejects dependency cycles up front

    const ModelConfig& cfg = graph.cfg;
    const bool heterogeneous = plan.placement.policy == PlacementPolicy::Heterogeneous;

    SimReport rep;
    rep.model_name = cfg.name;
    rep.policy = to_string(plan.placement.policy);
    rep.prompt_tokens = graph.prompt_tokens;
    rep.visual_tokens = graph.visual_tokens;
    rep.output_tokens = graph.output_tokens;

    const PeakFlopsCheck dram_check = peak_flops_check_dram(platform.dram);
    rep.dram_flops_mismatch_flagged = dram_check.mismatch_flagged;
    rep.dram_derived_flops = dram_check.derived_flops;
    if (platform.rram_present) {
        const PeakFlopsCheck rram_check = peak_flops_check_rram(platform.rram);
        rep.rram_flops_mismatch_flagged = rram_check.mismatch_flagged;
        rep.rram_derived_flops = rram_check.derived_flops;
        const double declared = static_cast<double>(platform.rram.capacity_bytes);
        const double derived =
            static_cast<double>(platform.rram.capacity_from_organization_bytes());
        rep.rram_capacity_mismatch_flagged = std::fabs(derived - declared) / declared > 0.05;
    }

    KvState kv(cfg, platform, plan);
    kv.set_block_tokens(platform.knobs.kv_block_tokens);

    // Transfer edges keyed by consumer node.
    std::unordered_map<std::uint32_t, const TransferEdge*> edge_by_consumer;
    edge_by_consumer.reserve(plan.placement.transfer_edges.size());
    for (const TransferEdge& e : plan.placement.transfer_edges)
        edge_by_consumer[e.consumer] = &e;

    // Timeline: per-resource next-free instant, per-node finish instant.
    std::int64_t dram_free_ps = 0, rram_free_ps = 0, link_free_ps = 0;
    std::vector<std::int64_t> finish_ps(graph.nodes.size(), 0);
    std::int64_t now_ps = 0;

    std::map<Phase, double> phase_ns;
    std::map<std::string, UnitStats> kind_stats;

    double dram_busy_ns = 0.0, rram_busy_ns = 0.0, link_busy_ns = 0.0;
    double dram_dyn = 0.0, rram_dyn = 0.0, link_dyn = 0.0, migration_j = 0.0;
    bool rram_used = false;

    auto emit_trace = [&](std::int64_t t, const char* chiplet, const char* event,
                          std::uint64_t id) {
        if (trace) (*trace)(TraceRecord{t, chiplet, event, id});
    };

    auto link_task = [&](const TransferEdge& e, std::int64_t ready_ps) -> std::int64_t {
        const LinkTransferCost cost = time_link_transfer(e.bytes, platform.link);
        const std::int64_t start = std::max(ready_ps, link_free_ps);
        const std::int64_t dur = to_ps(cost.ns);
        link_free_ps = start + dur;
        link_busy_ns += cost.ns;
        link_dyn += cost.joules;
        rep.link_bytes_total += static_cast<std::uint64_t>(e.bytes);
        rep.link_activation_bytes += static_cast<std::uint64_t>(e.bytes);
        if (e.phase == Phase::DecodeStep)
            rep.decode_activation_link_bytes += static_cast<std::uint64_t>(e.bytes);
        phase_ns[e.phase] += cost.ns;
        emit_trace(start, "link", e.point == TransferPoint::AttnOut ? "attn_out" : "ffn_out",
                   e.consumer);
        emit_trace(start + dur, "link",
                   e.point == TransferPoint::AttnOut ? "attn_out_done" : "ffn_out_done",
                   e.consumer);
        return start + dur;
    };

    // ---- KV rebalance -------------------------------------------------------
    // Re-packing leaves one open block per layer of headroom (taken from the
    // coldest tiers) so appends between rebalances never stall.
    KvBudget rebalance_budget = kv.budget();
    {
        std::int64_t headroom = static_cast<std::int64_t>(platform.knobs.kv_block_tokens) *
                                cfg.kv_bytes_per_token_per_layer * cfg.num_layers;
        for (int tier = platform.dram.tiers - 1; tier >= 0 && headroom > 0; --tier) {
            const std::int64_t take =
                std::min(headroom, rebalance_budget.dram_tier_bytes[tier]);
            rebalance_budget.dram_tier_bytes[tier] -= take;
            headroom -= take;
        }
    }
    int steps_since_rebalance = 0;
    auto rebalance = [&](Phase phase) {
        std::vector<KvBlock> before = kv.blocks();
        assign_kv(kv.blocks(), platform.dram, rebalance_budget, HotnessPolicy::Recency);
        // Tier ordering must hold after every rebalance: no block in a lower
        // tier may be colder than one in a higher tier.
        {
            std::vector<double> tier_min(platform.dram.tiers,
                                         std::numeric_limits<double>::infinity());
            std::vector<double> tier_max(platform.dram.tiers,
                                         -std::numeric_limits<double>::infinity());
            for (const KvBlock& b : kv.blocks()) {
                if (b.on_rram) continue;
                tier_min[b.residence_tier] = std::min(tier_min[b.residence_tier], b.hotness);
                tier_max[b.residence_tier] = std::max(tier_max[b.residence_tier], b.hotness);
            }
            for (int t = 0; t + 1 < platform.dram.tiers; ++t)
                if (tier_min[t] < tier_max[t + 1])
                    throw SimulationError("kv rebalance produced a tier hotness inversion");
        }
        const MigrationCost cost = migration_cost(before, kv.blocks(), platform);
        kv.rebuild_accounting();
        if (cost.blocks_moved == 0) return;
        rep.kv_migrations += static_cast<std::uint64_t>(cost.blocks_moved);
        rep.kv_bytes_migrated += static_cast<std::uint64_t>(cost.bytes_moved);
        rep.dram_bits_accessed += cost.dram_bits;
        rep.rram_bits_written += cost.rram_bits_written;
        rep.link_bytes_total += static_cast<std::uint64_t>(cost.bytes_to_rram);
        rep.link_migration_bytes += static_cast<std::uint64_t>(cost.bytes_to_rram);
        migration_j += cost.joules;
        dram_dyn += cost.joules;  // booked under the DRAM side of the ledger
        const std::int64_t start = std::max(now_ps, dram_free_ps);
        const std::int64_t dur = to_ps(cost.ns);
        dram_free_ps = start + dur;
        now_ps = std::max(now_ps, dram_free_ps);
        dram_busy_ns += cost.ns;
        phase_ns[phase] += cost.ns;
        emit_trace(start, "dram", "kv_rebalance", rep.kv_migrations);
        if (cost.bytes_to_rram > 0) rram_used = true;
    };

    // ---- Walk scheduling units in dependency (id) order ---------------------
    const auto& nodes = graph.nodes;
    int current_decode_step = 0;

    std::size_t i = 0;
    while (i < nodes.size()) {
        // Unit = fusion group (members are contiguous by construction) or a
        // single ungrouped node.
        const std::uint32_t gid = plan.group_of_node[nodes[i].id];
        std::size_t unit_end = i + 1;
        if (gid != kUngrouped) {
            const FusionGroup& g = plan.fusion_groups[gid];
            unit_end = i + g.members.size();
        }
        const KernelNode& head = nodes[i];
        const Chiplet chiplet = plan.placement.chiplet_of[head.id];

        // Decode step boundary: periodic KV rebalance.
        if (head.phase == Phase::DecodeStep && head.decode_step != current_decode_step) {
            if (current_decode_step > 0) {
                ++steps_since_rebalance;
                if (steps_since_rebalance >= platform.knobs.kv_rebalance_period) {
                    rebalance(Phase::DecodeStep);
                    steps_since_rebalance = 0;
                }
            }
            current_decode_step = head.decode_step;
        }

        // Aggregate the unit's work.
        WorkItem work;
        const char* kind_label = nullptr;
        if (gid != kUngrouped) kind_label = to_string(plan.fusion_groups[gid].kind);
        else kind_label = to_string(head.kind);

        for (std::size_t k = i; k < unit_end; ++k) {
            const KernelNode& n = nodes[k];
            if (plan.placement.chiplet_of[n.id] != chiplet)
                throw SimulationError("run: fused group spans chiplets at kernel " +
                                      std::to_string(n.id));
            work.flops += n.flops;
            if (n.kind == KernelKind::Activation && chiplet == Chiplet::RramNmp) {
                work.reducer_elems += n.sfpe_elems;
                rep.rram_activation_on_reducer = true;
            } else {
                work.sfpe_elems += n.sfpe_elems;
            }

            if (n.weight_bytes > 0) {
                if (chiplet == Chiplet::RramNmp)
                    work.legs.rram_weight_bytes += n.weight_bytes;
                else
                    add_weight_legs(n.weight_bytes, *spread_for_role(n.role, plan.weights),
                                    work.legs.dram_read_tier_bytes);
            }

            if (n.kind == KernelKind::KVAppend) {
                if (n.phase == Phase::Prefill) {
                    const auto writes = kv.adopt_prefill_layer(plan.kv_assignment, n.layer_index);
                    for (const auto& [tier, bytes] : writes)
                        work.legs.dram_write_tier_bytes.emplace_back(tier, bytes);
                    const std::int64_t rram_bytes = kv.take_rram_prefill_write_bytes();
                    if (rram_bytes > 0) {
                        work.legs.rram_io_write_bytes += rram_bytes;  // unusual, tiny DRAM budget
                        work.legs.rram_io_over_link = true;
                    }
                } else {
                    const std::int64_t token_index =
                        graph.prefill_len() + head.decode_step - 1;
                    int tier;
                    try {
                        tier = kv.append_token(n.layer_index, token_index);
                    } catch (const CapacityError&) {
                        // DRAM tiers are full: push the coldest blocks to RRAM
                        // now instead of waiting for the periodic rebalance.
                        rebalance(head.phase);
                        steps_since_rebalance = 0;
                        tier = kv.append_token(n.layer_index, token_index);
                    }
                    work.legs.dram_write_tier_bytes.emplace_back(tier, n.kv_write_bytes);
                }
            }

            if (n.kind == KernelKind::KVRead && n.kv_read_bytes > 0) {
                const auto& mix = kv.layer_tier_bytes(n.layer_index);
                std::int64_t dram_total = 0;
                for (std::int64_t b : mix) dram_total += b;
                const std::int64_t rram_part = kv.layer_rram_bytes(n.layer_index);
                const std::int64_t total = dram_total + rram_part;
                if (total <= 0)
                    throw SimulationError("run: KV read before any append at layer " +
                                          std::to_string(n.layer_index));
                std::int64_t charged = 0;
                for (int tier = 0; tier < static_cast<int>(mix.size()); ++tier) {
                    const std::int64_t part = n.kv_read_bytes * mix[tier] / total;
                    if (part > 0) {
                        work.legs.dram_read_tier_bytes.emplace_back(tier, part);
                        charged += part;
                    }
                }
                const std::int64_t rram_read = n.kv_read_bytes - charged;
                if (rram_part > 0 && rram_read > 0) {
                    work.legs.rram_io_read_bytes += rram_read;
                    work.legs.rram_io_over_link = true;
                    rep.link_kv_bytes += static_cast<std::uint64_t>(rram_read);
                } else if (rram_read > 0) {
                    // rounding remainder stays on the fastest populated tier
                    work.legs.dram_read_tier_bytes.emplace_back(0, rram_read);
                }
            }
        }

        const KernelCost cost = time_kernel(work, chiplet, platform);

        // Ready when every external dependency has finished; cross-chiplet
        // dependencies ride the UCIe link.
        std::int64_t ready = 0;
        for (std::size_t k = i; k < unit_end; ++k) {
            for (std::uint32_t dep : nodes[k].deps) {
                if (dep >= nodes[k].id)
                    throw SimulationError("run: dependency from the future at kernel " +
                                          std::to_string(nodes[k].id));
                if (dep >= nodes[i].id) continue;  // intra-unit edge
                std::int64_t t = finish_ps[dep];
                if (plan.placement.chiplet_of[dep] != chiplet) {
                    auto it = edge_by_consumer.find(nodes[k].id);
                    if (it == edge_by_consumer.end())
                        throw SimulationError(
                            "run: cross-chiplet dependency without a transfer point at edge " +
                            std::to_string(dep) + " -> " + std::to_string(nodes[k].id));
                    t = link_task(*it->second, t);
                }
                ready = std::max(ready, t);
            }
        }

        std::int64_t& res_free = chiplet == Chiplet::DramNmp ? dram_free_ps : rram_free_ps;
        const std::int64_t start = std::max(ready, res_free);
        const std::int64_t dur = to_ps(cost.chosen_ns);
        const std::int64_t finish = start + dur;
        res_free = finish;
        now_ps = std::max(now_ps, finish);
        for (std::size_t k = i; k < unit_end; ++k) finish_ps[nodes[k].id] = finish;

        if (chiplet == Chiplet::DramNmp) {
            dram_busy_ns += cost.chosen_ns;
            dram_dyn += cost.dynamic_energy_j;
        } else {
            rram_busy_ns += cost.chosen_ns;
            rram_dyn += cost.dynamic_energy_j;
            rram_used = true;
        }
        link_busy_ns += cost.link_ns;
        rep.link_bytes_total += cost.link_bytes;
        rep.dram_bits_accessed += cost.dram_bits;
        rep.rram_bits_read += cost.rram_bits_read;
        rep.rram_bits_written += cost.rram_bits_written;

        phase_ns[head.phase] += cost.chosen_ns;
        auto& ks = kind_stats[kind_label];
        ks.ns += cost.chosen_ns;
        ks.energy += cost.dynamic_energy_j;

        emit_trace(start, chiplet == Chiplet::DramNmp ? "dram" : "rram", "start", head.id);
        emit_trace(finish, chiplet == Chiplet::DramNmp ? "dram" : "rram", "finish", head.id);

        i = unit_end;
    }

    // ---- Totals --------------------------------------------------------------
    const std::int64_t total_ps = std::max({now_ps, dram_free_ps, rram_free_ps, link_free_ps});
    rep.total_latency_ns = static_cast<double>(total_ps) / kPsPerNs;
    rep.phase_latency_ns = phase_ns;
    for (const auto& [label, s] : kind_stats) {
        rep.kind_latency_ns[label] = s.ns;
        rep.kind_energy_j[label] = s.energy;
    }
    rep.dram_busy_ns = dram_busy_ns;
    rep.rram_busy_ns = rram_busy_ns;
    rep.link_busy_ns = link_busy_ns;
    rep.migration_j = migration_j;

    // Static power: activity-scaled while busy, idle-scaled otherwise; an
    // unused chiplet is power-gated and contributes nothing.
    const double total_s = rep.total_latency_ns * 1e-9;
    double static_j = 0.0;
    {
        const double busy_s = dram_busy_ns * 1e-9;
        static_j += platform.dram.peak_power_w *
                    (platform.knobs.activity_factor * busy_s +
                     platform.knobs.idle_factor * std::max(0.0, total_s - busy_s));
    }
    if (platform.rram_present && (rram_used || heterogeneous)) {
        const double busy_s = rram_busy_ns * 1e-9;
        static_j += platform.rram.peak_power_w *
                    (platform.knobs.activity_factor * busy_s +
                     platform.knobs.idle_factor * std::max(0.0, total_s - busy_s));
    }
    rep.static_j = static_j;
    rep.dram_dynamic_j = dram_dyn;
    rep.rram_dynamic_j = rram_dyn;
    rep.link_dynamic_j = link_dyn;

    const double total_energy = dram_dyn + rram_dyn + link_dyn + static_j;
    rep.avg_power_w = total_s > 0 ? total_energy / total_s : 0.0;
    rep.energy_per_inference_j = rep.avg_power_w * total_s;
    rep.throughput_token_per_s = total_s > 0 ? graph.output_tokens / total_s : 0.0;
    rep.token_per_j = rep.avg_power_w > 0 ? rep.throughput_token_per_s / rep.avg_power_w : 0.0;

    auto decode_it = phase_ns.find(Phase::DecodeStep);
    if (decode_it != phase_ns.end() && graph.output_tokens > 0) {
        rep.steady_state_decode_ns_per_token = decode_it->second / graph.output_tokens;
        rep.steady_decode_token_per_s =
            rep.steady_state_decode_ns_per_token > 0
                ? 1e9 / rep.steady_state_decode_ns_per_token
                : 0.0;
    }

    rep.kv_blocks_on_rram = kv.blocks_on_rram();
    rep.max_kv_write_count = kv.max_write_count();
    return rep;
}

SimReport simulate(const RunInputs& in, const TraceSink* trace) {
    in.platform.validate();
    in.model.validate();
    const OperatorGraph graph =
        build_graph(in.model, in.prompt_tokens, in.image, in.output_tokens);
    const MappingPlan plan = build_plan(graph, in.platform, in.policy);
    return run(graph, plan, in.platform, trace);
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxis parse_sweep_axis(const std::string& s) {
    if (s == "seqlen") return SweepAxis::SeqLen;
    if (s == "policy") return SweepAxis::Policy;
    if (s == "linkbw") return SweepAxis::LinkBw;
    if (s == "tierpolicy") return SweepAxis::TierPolicy;
    throw ConfigError("unknown sweep axis '" + s + "' (seqlen|policy|linkbw|tierpolicy)");
}

const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::SeqLen: return "seqlen";
        case SweepAxis::Policy: return "policy";
        case SweepAxis::LinkBw: return "linkbw";
        case SweepAxis::TierPolicy: return "tierpolicy";
    }
    return "?";
}

namespace {

RunInputs apply_axis(const RunInputs& base, SweepAxis axis, const std::string& value) {
    RunInputs in = base;
    switch (axis) {
        case SweepAxis::SeqLen: {
            const int tokens = std::stoi(value);
            if (tokens < 1) throw ConfigError("seqlen sweep value must be >= 1");
            in.output_tokens = tokens;
            break;
        }
        case SweepAxis::Policy: {
            if (value == "heterogeneous" || value == "het")
                in.policy = PlacementPolicy::Heterogeneous;
            else if (value == "dram-only" || value == "dramonly")
                in.policy = PlacementPolicy::DramOnly;
            else
                throw ConfigError("policy sweep value must be het|dram-only, got '" + value + "'");
            break;
        }
        case SweepAxis::LinkBw: {
            const double gbps = std::stod(value);
            if (gbps <= 0) throw ConfigError("linkbw sweep value must be positive GB/s");
            in.platform.link.bandwidth_bytes_per_s = gbps * 1e9;
            break;
        }
        case SweepAxis::TierPolicy: {
            if (value == "worst")
                in.platform.dram.latency_policy = TierLatencyPolicy::WorstLayer;
            else if (value == "mean")
                in.platform.dram.latency_policy = TierLatencyPolicy::MeanLayer;
            else
                throw ConfigError("tierpolicy sweep value must be worst|mean, got '" + value +
                                  "'");
            break;
        }
    }
    return in;
}

}  // namespace

std::vector<SweepPoint> sweep(const RunInputs& base, SweepAxis axis,
                              const std::vector<std::string>& values, int jobs) {
    if (values.empty()) throw ConfigError("sweep: values must be non-empty");
    std::vector<SweepPoint> points(values.size());

    auto run_point = [&](std::size_t idx) {
        SweepPoint& pt = points[idx];
        pt.value = values[idx];
        try {
            const RunInputs in = apply_axis(base, axis, values[idx]);
            pt.report = simulate(in);
            pt.ok = true;
        } catch (const std::exception& e) {
            pt.ok = false;
            pt.error = e.what();
        }
    };

    if (jobs <= 1 || values.size() == 1) {
        for (std::size_t idx = 0; idx < values.size(); ++idx) run_point(idx);
        return points;
    }
    const int workers = std::min<int>(jobs, static_cast<int>(values.size()));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t idx = w; idx < values.size(); idx += workers) run_point(idx);
        });
    for (auto& t : pool) t.join();
    return points;
}

}  // namespace nmpsim
