#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nmpsim/mapper.hpp"

namespace nmpsim {

struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Resolved memory residence of one kernel's (or fused group's) traffic.
/// DRAM legs carry a per-tier byte split; RRAM legs separate in-place weight
/// streams from interface-bound KV traffic (offloaded blocks read back over
/// the UCIe link).
struct MemoryLegs {
    std::vector<std::pair<int, std::int64_t>> dram_read_tier_bytes;
    std::vector<std::pair<int, std::int64_t>> dram_write_tier_bytes;
    std::int64_t rram_weight_bytes = 0;
    std::int64_t rram_io_read_bytes = 0;   // interface-bound (KV offload reads)
    std::int64_t rram_io_write_bytes = 0;  // interface-bound writes
    bool rram_io_over_link = false;        // KV offload traffic also crosses the link
};

struct KernelCost {
    std::uint32_t id = 0;
    double compute_ns = 0.0;
    double memory_ns = 0.0;
    double chosen_ns = 0.0;  // max(compute, memory): double-buffered overlap
    double dynamic_energy_j = 0.0;
    Chiplet chiplet = Chiplet::DramNmp;
    // traffic tallies for the report
    std::uint64_t dram_bits = 0;
    std::uint64_t rram_bits_read = 0;
    std::uint64_t rram_bits_written = 0;
    double link_ns = 0.0;  // embedded KV-offload link time, if any
    std::uint64_t link_bytes = 0;
};

/// Aggregate work of one scheduling unit (a fused group or a lone kernel).
struct WorkItem {
    std::int64_t flops = 0;
    std::int64_t sfpe_elems = 0;      // softmax/elementwise/norm work
    std::int64_t reducer_elems = 0;   // activation work on the RRAM PU reducers
    MemoryLegs legs;
};

/// Roofline timing of one work item on one chiplet.
KernelCost time_kernel(const WorkItem& work, Chiplet where, const PlatformSpec& platform);

struct LinkTransferCost {
    double ns = 0.0;
    double joules = 0.0;
};
LinkTransferCost time_link_transfer(std::int64_t bytes, const LinkSpec& link);

struct TraceRecord {
    std::int64_t time_ps = 0;
    std::string chiplet;
    std::string event;
    std::uint64_t id = 0;
};
using TraceSink = std::function<void(const TraceRecord&)>;

struct SimReport {
    std::string model_name;
    std::string policy;
    int prompt_tokens = 0;
    int visual_tokens = 0;
    int output_tokens = 0;

    double total_latency_ns = 0.0;
    std::map<Phase, double> phase_latency_ns;
    std::map<std::string, double> kind_latency_ns;
    std::map<std::string, double> kind_energy_j;

    double steady_state_decode_ns_per_token = 0.0;
    double steady_decode_token_per_s = 0.0;
    double throughput_token_per_s = 0.0;  // output tokens over total latency
    double avg_power_w = 0.0;
    double energy_per_inference_j = 0.0;
    double token_per_j = 0.0;

    double dram_dynamic_j = 0.0;
    double rram_dynamic_j = 0.0;
    double link_dynamic_j = 0.0;
    double static_j = 0.0;
    double migration_j = 0.0;

    std::uint64_t link_bytes_total = 0;
    std::uint64_t link_activation_bytes = 0;
    std::uint64_t link_kv_bytes = 0;
    std::uint64_t link_migration_bytes = 0;
    std::uint64_t decode_activation_link_bytes = 0;

    std::uint64_t dram_bits_accessed = 0;
    std::uint64_t rram_bits_read = 0;
    std::uint64_t rram_bits_written = 0;

    std::uint64_t kv_migrations = 0;       // blocks moved across rebalances
    std::uint64_t kv_blocks_on_rram = 0;
    int max_kv_write_count = 0;
    std::uint64_t kv_bytes_migrated = 0;

    double dram_busy_ns = 0.0;
    double rram_busy_ns = 0.0;
    double link_busy_ns = 0.0;

    bool rram_flops_mismatch_flagged = false;
    double rram_derived_flops = 0.0;
    bool dram_flops_mismatch_flagged = false;
    double dram_derived_flops = 0.0;
    bool rram_capacity_mismatch_flagged = false;
    bool rram_activation_on_reducer = false;  // FFN activation modeled on the PU reducers
};

/// Event-driven simulation of a mapping plan over the operator graph. The
/// decode pipeline rule is enforced by construction: step t+1's attention
/// cannot start before step t's final FFN output has returned.
SimReport run(const OperatorGraph& graph, const MappingPlan& plan, const PlatformSpec& platform,
              const TraceSink* trace = nullptr);

struct RunInputs {
    ModelConfig model;
    PlatformSpec platform;
    PlacementPolicy policy = PlacementPolicy::Heterogeneous;
    int prompt_tokens = 128;
    ImageDims image{512, 512};
    int output_tokens = 488;
};

/// Builds the graph and plan and runs the simulation in one shot.
SimReport simulate(const RunInputs& inputs, const TraceSink* trace = nullptr);

enum class SweepAxis { SeqLen, Policy, LinkBw, TierPolicy };

struct SweepPoint {
    std::string value;
    bool ok = false;
    std::string error;
    SimReport report;
};

/// Independent deterministic runs over the axis values, emitted in input
/// order. Per-point failures are recorded and the sweep continues.
std::vector<SweepPoint> sweep(const RunInputs& base, SweepAxis axis,
                              const std::vector<std::string>& values, int jobs = 1);

SweepAxis parse_sweep_axis(const std::string& s);
const char* to_string(SweepAxis a);

}  // namespace nmpsim
