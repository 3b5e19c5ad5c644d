#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nmpsim/hardware.hpp"
#include "nmpsim/workload.hpp"

namespace nmpsim {

struct MappingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Chiplet : std::uint8_t { DramNmp, RramNmp };
enum class PlacementPolicy : std::uint8_t { Heterogeneous, DramOnly };
enum class HotnessPolicy : std::uint8_t { Recency };
enum class TransferPoint : std::uint8_t { AttnOut, FfnOut };

struct TransferEdge {
    std::uint32_t producer = 0;  // kernel id on the source chiplet
    std::uint32_t consumer = 0;  // kernel id on the destination chiplet
    std::int64_t bytes = 0;
    TransferPoint point = TransferPoint::AttnOut;
    Phase phase = Phase::Prefill;
    int decode_step = 0;
    int layer_index = -1;
};

struct Placement {
    PlacementPolicy policy = PlacementPolicy::Heterogeneous;
    std::vector<Chiplet> chiplet_of;  // indexed by kernel id
    std::vector<TransferEdge> transfer_edges;
};

enum class FusionKind : std::uint8_t { FusedQkvProj, FusedAttnStream, FusedFfnAct, FusedNorm };

struct FusionGroup {
    std::uint32_t id = 0;
    FusionKind kind = FusionKind::FusedNorm;
    std::vector<std::uint32_t> members;  // contiguous in dependency order
    Chiplet chiplet = Chiplet::DramNmp;
    std::int64_t intermediate_bytes_kept_local = 0;
};

/// One KV-cache block: a token range of one layer.
struct KvBlock {
    std::uint32_t id = 0;
    int layer_index = 0;
    std::int64_t token_start = 0;
    std::int64_t token_end = 0;  // exclusive
    std::int64_t bytes = 0;
    double hotness = 0.0;
    int residence_tier = 0;  // DRAM tier when !on_rram
    bool on_rram = false;
    int write_count = 0;  // writes into RRAM; stays <= 1 (write-once offload)
};

/// Resident weight bytes per DRAM tier for one weight class; streams are
/// charged proportionally across this spread.
struct WeightSpread {
    std::vector<std::pair<int, std::int64_t>> tier_bytes;
    std::int64_t total() const {
        std::int64_t t = 0;
        for (const auto& [tier, b] : tier_bytes) t += b;
        return t;
    }
};

struct WeightResidency {
    WeightSpread attn;       // Wq/Wk/Wv/Wo + norm params
    WeightSpread lm_head;
    WeightSpread ffn;        // only populated for DramOnly plans
    WeightSpread encoder;
    WeightSpread connector;
    std::vector<std::int64_t> dram_tier_used_bytes;
    std::int64_t rram_ffn_bytes = 0;  // heterogeneous: FFN weights preloaded once
};

constexpr std::uint32_t kUngrouped = 0xFFFFFFFFu;

struct MappingPlan {
    Placement placement;
    std::vector<FusionGroup> fusion_groups;
    std::vector<std::uint32_t> group_of_node;  // node id -> group index, or kUngrouped
    std::vector<KvBlock> kv_assignment;        // state after prefill
    WeightResidency weights;
    std::int64_t expected_link_bytes_per_decode_step = 0;
};

/// Assigns kernels to chiplets. Heterogeneous puts the FFN chain on the RRAM
/// NMP and everything else on the DRAM NMP, yielding exactly two transfer
/// edges (AttnOut, FFNOut) per layer per backbone pass. DramOnly keeps every
/// kernel on the DRAM NMP and yields no transfer edges.
Placement place(const OperatorGraph& graph, const PlatformSpec& platform,
                PlacementPolicy policy);

/// Groups kernels into the four fused near-memory kernel kinds. Fusion never
/// crosses a chiplet boundary.
std::vector<FusionGroup> fuse(const OperatorGraph& graph, const Placement& placement);

/// Tile iterations of a streaming attention pass: ceil(ctx / tile).
std::int64_t attn_tile_iterations(std::int64_t ctx, std::int64_t tile);

/// Per-tier byte budgets available to the KV cache (tier capacity minus
/// resident weights), plus the RRAM overflow budget.
struct KvBudget {
    std::vector<std::int64_t> dram_tier_bytes;
    std::int64_t rram_bytes = 0;
};
KvBudget kv_budget(const DramChipletSpec& dram, const RramChipletSpec* rram,
                   const WeightResidency& weights);

/// Recomputes hotness per policy and re-packs blocks: hottest fill Tier-0
/// first, colder blocks go upward, overflow offloads to RRAM write-once.
/// Blocks already on RRAM never move back and are never rewritten.
void assign_kv(std::vector<KvBlock>& cache_state, const DramChipletSpec& dram,
               const KvBudget& budget, HotnessPolicy policy);
/// Spec-shaped overload: budgets are the raw tier capacities.
void assign_kv(std::vector<KvBlock>& cache_state, const DramChipletSpec& dram,
               HotnessPolicy policy);

struct MigrationCost {
    std::int64_t bytes_moved = 0;
    double joules = 0.0;
    double ns = 0.0;
    std::int64_t blocks_moved = 0;
    std::int64_t bytes_to_rram = 0;
    std::uint64_t dram_bits = 0;          // array bits touched inside the DRAM stack
    std::uint64_t rram_bits_written = 0;  // one-shot offload writes
};

/// Cost of moving from one assignment to another; covers only blocks whose
/// residence changed. Plans must describe the same block ids.
MigrationCost migration_cost(const std::vector<KvBlock>& before,
                             const std::vector<KvBlock>& after, const PlatformSpec& platform);

/// Full mapping pipeline: placement, fusion, weight residency, initial
/// (post-prefill) KV assignment.
MappingPlan build_plan(const OperatorGraph& graph, const PlatformSpec& platform,
                       PlacementPolicy policy);

WeightResidency plan_weight_residency(const ModelConfig& cfg, const PlatformSpec& platform,
                                      PlacementPolicy policy);

/// Chops `tokens` cache entries of every layer into blocks of
/// `block_tokens`; hotness is recency (max token index in the block).
std::vector<KvBlock> make_kv_blocks(const ModelConfig& cfg, std::int64_t tokens,
                                    int block_tokens);

const char* to_string(Chiplet c);
const char* to_string(PlacementPolicy p);
const char* to_string(FusionKind k);

}  // namespace nmpsim
