#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace nmpsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FileError : ConfigError {
    using ConfigError::ConfigError;
};
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TierLatencyPolicy { WorstLayer, MeanLayer };
enum class RramAccess { Read, Write };
enum class CapacityPolicy { Declared, Derived };

/// Monolithic-3D DRAM chiplet: a 200-layer stack partitioned into latency
/// tiers, with a near-memory processor (16 PUs of 16 PEs) on the logic die.
struct DramChipletSpec {
    int layers = 200;
    int tiers = 5;
    std::uint64_t tier_capacity_bytes = 1'250'000'000ull;  // 1.25 GB per tier
    int channels = 16;
    int banks_per_channel = 16;
    std::uint64_t bank_capacity_bits = 200'000'000ull;  // 200 Mb
    int row_buffer_bits = 32768;
    int mat_rows = 1024;
    int mat_cols = 1024;
    double read_write_energy_pj_per_bit = 0.429;
    double latency_base_ns = 3.0;   // read/write latency (3 + 0.8*L) ns
    double latency_slope_ns = 0.8;

    // NMP on the logic die
    int pus = 16;
    int pes_per_pu = 16;
    int mac_rows = 2;
    int mac_cols = 2;
    int sfpe_simd_width = 256;
    double clock_ghz = 1.0;
    double peak_flops = 2e12;   // declared, authoritative for roofline math
    double peak_power_w = 0.671;
    std::uint64_t shared_mem_bytes_per_pu = 20 * 1024;
    std::uint64_t pe_buffer_bytes = 1024;
    std::uint64_t sram_capacity_bits = 512 * 1024;

    // Internal vertical datapath: each channel streams row-buffer bursts to
    // its PU over a wide MIV bus. The 64b figure in the device table is the
    // external I/O; the near-memory path is modeled at miv_bus_bits.
    int external_io_bits_per_channel = 64;
    int miv_bus_bits = 512;

    TierLatencyPolicy latency_policy = TierLatencyPolicy::MeanLayer;
    int weight_home_tier = 2;  // backbone weights fill from this tier upward

    int layers_per_tier() const { return layers / tiers; }
    std::uint64_t row_buffer_bytes() const { return static_cast<std::uint64_t>(row_buffer_bits) / 8; }
    std::uint64_t total_capacity_bytes() const {
        return tier_capacity_bytes * static_cast<std::uint64_t>(tiers);
    }
    std::uint64_t capacity_from_banks_bytes() const {
        return static_cast<std::uint64_t>(channels) * banks_per_channel * bank_capacity_bits / 8;
    }
    /// Aggregate streaming rate of the per-channel MIV buses, bytes/s.
    double stream_bw_bytes_per_s() const {
        return static_cast<double>(channels) * miv_bus_bits / 8.0 * clock_ghz * 1e9;
    }
    double sfpe_elems_per_s() const { return sfpe_simd_width * clock_ghz * 1e9; }
    void validate() const;
};

/// Monolithic-3D RRAM chiplet: 8 stacked layers over a logic die with a
/// 16-PU NMP; weights are read in place through per-channel datapaths.
struct RramChipletSpec {
    int layers = 8;
    int controllers = 8;
    int channels_per_controller = 16;
    int tiles_per_channel = 4;
    int units_per_tile = 256;
    int unit_rows = 1024;
    int unit_cols = 1024;
    double read_latency_ns = 2.3;
    double write_latency_ns = 11.0;
    double read_energy_pj_per_bit = 0.4;
    double write_energy_pj_per_bit = 1.33;
    std::uint64_t capacity_bytes = 2'000'000'000ull;  // declared chip capacity
    double peak_bw_bytes_per_s = 512e9;               // interface: 8 ctrl x 512 bit x 1 GHz
    int interface_bits_per_controller = 512;
    int datapath_bits_per_channel = 512;

    int pus = 16;
    int pes_per_pu = 16;
    int mac_rows = 4;
    int mac_cols = 4;
    double clock_ghz = 1.0;
    double peak_flops = 32e12;  // declared; organization-derived value is a cross-check
    double peak_power_w = 2.584;
    std::uint64_t sram_bytes = 1024 * 1024;
    std::uint64_t endurance_writes_per_cell = 100'000;

    CapacityPolicy capacity_policy = CapacityPolicy::Derived;

    int total_channels() const { return controllers * channels_per_controller; }
    std::uint64_t capacity_from_organization_bytes() const {
        const std::uint64_t units = static_cast<std::uint64_t>(controllers) *
                                    channels_per_controller * tiles_per_channel * units_per_tile;
        return units * unit_rows * unit_cols / 8;
    }
    std::uint64_t effective_capacity_bytes() const {
        return capacity_policy == CapacityPolicy::Derived ? capacity_from_organization_bytes()
                                                          : capacity_bytes;
    }
    double derived_interface_bw_bytes_per_s() const {
        return controllers * interface_bits_per_controller / 8.0 * clock_ghz * 1e9;
    }
    /// Sustained in-place weight streaming rate: every channel delivers one
    /// datapath beat per read latency.
    double weight_stream_bw_bytes_per_s() const {
        return total_channels() * (datapath_bits_per_channel / 8.0) / read_latency_ns * 1e9;
    }
    double write_stream_bw_bytes_per_s() const {
        return total_channels() * (datapath_bits_per_channel / 8.0) / write_latency_ns * 1e9;
    }
    double reducer_elems_per_s() const { return pus * clock_ghz * 1e9; }
    void validate() const;
};

struct LinkSpec {
    double bandwidth_bytes_per_s = 128e9;
    // Default chosen so a saturated link dissipates ~1 W: 1 / (128e9 * 8) J/bit.
    double energy_pj_per_bit = 0.9765625;
    double latency_ns = 20.0;
    void validate() const;
};

struct EngineKnobs {
    double tensor_utilization = 0.8;
    double sfpe_utilization = 1.0;
    double activity_factor = 0.2;  // fraction of peak power while busy
    double idle_factor = 0.04;     // fraction of peak power while idle
    int kv_block_tokens = 64;
    int kv_rebalance_period = 64;  // decode steps between KV rebalances
    void validate() const;
};

struct PlatformSpec {
    DramChipletSpec dram;
    RramChipletSpec rram;
    LinkSpec link;
    EngineKnobs knobs;
    bool rram_present = true;  // dram-only platforms power-gate the RRAM chiplet
    double dram_die_area_mm2 = 28.71;
    double rram_die_area_mm2 = 24.85;
    std::string default_policy = "heterogeneous";
    void validate() const;
};

/// Read/write latency of one tier per the per-layer affine formula.
double tier_access_latency_ns(const DramChipletSpec& spec, int tier, TierLatencyPolicy policy);
double layer_access_latency_ns(const DramChipletSpec& spec, int layer);

double dram_access_energy_j(const DramChipletSpec& spec, std::uint64_t bits);
double rram_access_energy_j(const RramChipletSpec& spec, std::uint64_t bits, RramAccess kind);

struct PeakFlopsCheck {
    double derived_flops = 0.0;
    double declared_flops = 0.0;
    bool mismatch_flagged = false;  // derived vs declared differ by more than 5%
};
PeakFlopsCheck peak_flops_check_dram(const DramChipletSpec& spec);
PeakFlopsCheck peak_flops_check_rram(const RramChipletSpec& spec);

/// Effective per-tier streaming bandwidth: per-channel MIV transfer plus the
/// tier's access latency serialized per row-buffer burst on each channel.
double dram_tier_stream_bw_bytes_per_s(const DramChipletSpec& spec, int tier);
/// Time to stream `bytes` resident in `tier` into the NMP.
double dram_stream_time_ns(const DramChipletSpec& spec, std::uint64_t bytes, int tier);

PlatformSpec default_platform();
PlatformSpec dram_only_platform();

/// Loads a platform from JSON (strict keys), or a named preset
/// ("default" / "dram-only").
PlatformSpec load_platform(const std::string& preset_or_path);
std::string platform_to_json(const PlatformSpec& spec);

}  // namespace nmpsim
