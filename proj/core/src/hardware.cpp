#include "nmpsim/hardware.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace nmpsim {

using nlohmann::ordered_json;

void DramChipletSpec::validate() const {
    if (layers <= 0 || tiers <= 0 || layers % tiers != 0)
        throw ConfigError("dram: layers must be a positive multiple of tiers");
    if (channels <= 0 || banks_per_channel <= 0) throw ConfigError("dram: bad organization");
    if (row_buffer_bits <= 0 || row_buffer_bits % 8 != 0) throw ConfigError("dram: bad row buffer");
    if (clock_ghz <= 0 || peak_flops <= 0 || peak_power_w <= 0)
        throw ConfigError("dram: clock/peak values must be positive");
    if (weight_home_tier < 0 || weight_home_tier >= tiers)
        throw ConfigError("dram: weight_home_tier out of range");
    if (total_capacity_bytes() > capacity_from_banks_bytes())
        throw ConfigError("dram: tier capacities exceed capacity derived from banks");
}

void RramChipletSpec::validate() const {
    if (layers <= 0 || controllers <= 0 || channels_per_controller <= 0)
        throw ConfigError("rram: bad organization");
    if (write_energy_pj_per_bit <= read_energy_pj_per_bit)
        throw ConfigError("rram: write energy must exceed read energy");
    if (write_latency_ns <= read_latency_ns)
        throw ConfigError("rram: write latency must exceed read latency");
    if (peak_bw_bytes_per_s <= 0 || clock_ghz <= 0) throw ConfigError("rram: bad rates");
}

void LinkSpec::validate() const {
    if (bandwidth_bytes_per_s <= 0) throw ConfigError("link: bandwidth must be positive");
    if (energy_pj_per_bit < 0 || latency_ns < 0) throw ConfigError("link: negative cost");
}

void EngineKnobs::validate() const {
    if (tensor_utilization <= 0 || tensor_utilization > 1.0)
        throw ConfigError("knobs: tensor_utilization must be in (0, 1]");
    if (sfpe_utilization <= 0 || sfpe_utilization > 1.0)
        throw ConfigError("knobs: sfpe_utilization must be in (0, 1]");
    if (activity_factor < 0 || activity_factor > 1 || idle_factor < 0 || idle_factor > 1)
        throw ConfigError("knobs: power factors must be in [0, 1]");
    if (kv_block_tokens <= 0 || kv_rebalance_period <= 0)
        throw ConfigError("knobs: kv block/period must be positive");
}

void PlatformSpec::validate() const {
    dram.validate();
    if (rram_present) rram.validate();
    link.validate();
    knobs.validate();
    if (dram_die_area_mm2 <= 0 || rram_die_area_mm2 <= 0)
        throw ConfigError("platform: die areas must be positive");
}

double layer_access_latency_ns(const DramChipletSpec& spec, int layer) {
    if (layer < 0 || layer >= spec.layers) throw ConfigError("dram: layer out of range");
    return spec.latency_base_ns + spec.latency_slope_ns * layer;
}

double tier_access_latency_ns(const DramChipletSpec& spec, int tier, TierLatencyPolicy policy) {
    if (tier < 0 || tier >= spec.tiers) throw ConfigError("dram: tier out of range");
    const int per = spec.layers_per_tier();
    const int first = tier * per;
    const int last = first + per - 1;
    const double layer = policy == TierLatencyPolicy::WorstLayer
                             ? static_cast<double>(last)
                             : 0.5 * (first + last);
    return spec.latency_base_ns + spec.latency_slope_ns * layer;
}

double dram_access_energy_j(const DramChipletSpec& spec, std::uint64_t bits) {
    return static_cast<double>(bits) * spec.read_write_energy_pj_per_bit * 1e-12;
}

double rram_access_energy_j(const RramChipletSpec& spec, std::uint64_t bits, RramAccess kind) {
    const double pj =
        kind == RramAccess::Read ? spec.read_energy_pj_per_bit : spec.write_energy_pj_per_bit;
    return static_cast<double>(bits) * pj * 1e-12;
}

static PeakFlopsCheck make_check(double derived, double declared) {
    PeakFlopsCheck c;
    c.derived_flops = derived;
    c.declared_flops = declared;
    c.mismatch_flagged =
        declared > 0 && std::fabs(derived - declared) / declared > 0.05;
    return c;
}

PeakFlopsCheck peak_flops_check_dram(const DramChipletSpec& spec) {
    const double derived = static_cast<double>(spec.pus) * spec.pes_per_pu *
                           (spec.mac_rows * spec.mac_cols) * 2.0 * spec.clock_ghz * 1e9;
    return make_check(derived, spec.peak_flops);
}

PeakFlopsCheck peak_flops_check_rram(const RramChipletSpec& spec) {
    const double derived = static_cast<double>(spec.pus) * spec.pes_per_pu *
                           (spec.mac_rows * spec.mac_cols) * 2.0 * spec.clock_ghz * 1e9;
    return make_check(derived, spec.peak_flops);
}

double dram_tier_stream_bw_bytes_per_s(const DramChipletSpec& spec, int tier) {
    const double lat = tier_access_latency_ns(spec, tier, spec.latency_policy);
    const double row_bytes = static_cast<double>(spec.row_buffer_bytes());
    const double transfer_ns = row_bytes / (spec.miv_bus_bits / 8.0 * spec.clock_ghz);
    // One burst in flight per channel: activation latency plus transfer.
    const double per_channel = row_bytes / (lat + transfer_ns) * 1e9;
    return per_channel * spec.channels;
}

double dram_stream_time_ns(const DramChipletSpec& spec, std::uint64_t bytes, int tier) {
    if (bytes == 0) return 0.0;
    const double lat = tier_access_latency_ns(spec, tier, spec.latency_policy);
    const std::uint64_t row_bytes = spec.row_buffer_bytes();
    const std::uint64_t bursts = (bytes + row_bytes - 1) / row_bytes;
    const double transfer_ns = static_cast<double>(bytes) / spec.stream_bw_bytes_per_s() * 1e9;
    return transfer_ns + static_cast<double>(bursts) * lat / spec.channels;
}

PlatformSpec default_platform() {
    PlatformSpec p;
    p.validate();
    return p;
}

PlatformSpec dram_only_platform() {
    PlatformSpec p;
    p.rram_present = false;
    p.default_policy = "dram-only";
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// JSON (strict: unknown keys are an error)

namespace {

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + section);
}

template <typename T>
void get_if(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void from_json_dram(const ordered_json& j, DramChipletSpec& d) {
    check_keys(j,
               {"layers", "tiers", "tier_capacity_bytes", "channels", "banks_per_channel",
                "bank_capacity_bits", "row_buffer_bits", "mat_rows", "mat_cols",
                "read_write_energy_pj_per_bit", "latency_base_ns", "latency_slope_ns", "pus",
                "pes_per_pu", "mac_rows", "mac_cols", "sfpe_simd_width", "clock_ghz",
                "peak_flops", "peak_power_w", "shared_mem_bytes_per_pu", "pe_buffer_bytes",
                "sram_capacity_bits", "external_io_bits_per_channel", "miv_bus_bits",
                "latency_policy", "weight_home_tier"},
               "dram");
    get_if(j, "layers", d.layers);
    get_if(j, "tiers", d.tiers);
    get_if(j, "tier_capacity_bytes", d.tier_capacity_bytes);
    get_if(j, "channels", d.channels);
    get_if(j, "banks_per_channel", d.banks_per_channel);
    get_if(j, "bank_capacity_bits", d.bank_capacity_bits);
    get_if(j, "row_buffer_bits", d.row_buffer_bits);
    get_if(j, "mat_rows", d.mat_rows);
    get_if(j, "mat_cols", d.mat_cols);
    get_if(j, "read_write_energy_pj_per_bit", d.read_write_energy_pj_per_bit);
    get_if(j, "latency_base_ns", d.latency_base_ns);
    get_if(j, "latency_slope_ns", d.latency_slope_ns);
    get_if(j, "pus", d.pus);
    get_if(j, "pes_per_pu", d.pes_per_pu);
    get_if(j, "mac_rows", d.mac_rows);
    get_if(j, "mac_cols", d.mac_cols);
    get_if(j, "sfpe_simd_width", d.sfpe_simd_width);
    get_if(j, "clock_ghz", d.clock_ghz);
    get_if(j, "peak_flops", d.peak_flops);
    get_if(j, "peak_power_w", d.peak_power_w);
    get_if(j, "shared_mem_bytes_per_pu", d.shared_mem_bytes_per_pu);
    get_if(j, "pe_buffer_bytes", d.pe_buffer_bytes);
    get_if(j, "sram_capacity_bits", d.sram_capacity_bits);
    get_if(j, "external_io_bits_per_channel", d.external_io_bits_per_channel);
    get_if(j, "miv_bus_bits", d.miv_bus_bits);
    get_if(j, "weight_home_tier", d.weight_home_tier);
    if (j.contains("latency_policy")) {
        const std::string p = j.at("latency_policy").get<std::string>();
        if (p == "worst")
            d.latency_policy = TierLatencyPolicy::WorstLayer;
        else if (p == "mean")
            d.latency_policy = TierLatencyPolicy::MeanLayer;
        else
            throw ConfigError("dram.latency_policy must be 'worst' or 'mean'");
    }
}

void from_json_rram(const ordered_json& j, RramChipletSpec& r) {
    check_keys(j,
               {"layers", "controllers", "channels_per_controller", "tiles_per_channel",
                "units_per_tile", "unit_rows", "unit_cols", "read_latency_ns",
                "write_latency_ns", "read_energy_pj_per_bit", "write_energy_pj_per_bit",
                "capacity_bytes", "peak_bw_bytes_per_s", "interface_bits_per_controller",
                "datapath_bits_per_channel", "pus", "pes_per_pu", "mac_rows", "mac_cols",
                "clock_ghz", "peak_flops", "peak_power_w", "sram_bytes",
                "endurance_writes_per_cell", "capacity_policy"},
               "rram");
    get_if(j, "layers", r.layers);
    get_if(j, "controllers", r.controllers);
    get_if(j, "channels_per_controller", r.channels_per_controller);
    get_if(j, "tiles_per_channel", r.tiles_per_channel);
    get_if(j, "units_per_tile", r.units_per_tile);
    get_if(j, "unit_rows", r.unit_rows);
    get_if(j, "unit_cols", r.unit_cols);
    get_if(j, "read_latency_ns", r.read_latency_ns);
    get_if(j, "write_latency_ns", r.write_latency_ns);
    get_if(j, "read_energy_pj_per_bit", r.read_energy_pj_per_bit);
    get_if(j, "write_energy_pj_per_bit", r.write_energy_pj_per_bit);
    get_if(j, "capacity_bytes", r.capacity_bytes);
    get_if(j, "peak_bw_bytes_per_s", r.peak_bw_bytes_per_s);
    get_if(j, "interface_bits_per_controller", r.interface_bits_per_controller);
    get_if(j, "datapath_bits_per_channel", r.datapath_bits_per_channel);
    get_if(j, "pus", r.pus);
    get_if(j, "pes_per_pu", r.pes_per_pu);
    get_if(j, "mac_rows", r.mac_rows);
    get_if(j, "mac_cols", r.mac_cols);
    get_if(j, "clock_ghz", r.clock_ghz);
    get_if(j, "peak_flops", r.peak_flops);
    get_if(j, "peak_power_w", r.peak_power_w);
    get_if(j, "sram_bytes", r.sram_bytes);
    get_if(j, "endurance_writes_per_cell", r.endurance_writes_per_cell);
    if (j.contains("capacity_policy")) {
        const std::string p = j.at("capacity_policy").get<std::string>();
        if (p == "declared")
            r.capacity_policy = CapacityPolicy::Declared;
        else if (p == "derived")
            r.capacity_policy = CapacityPolicy::Derived;
        else
            throw ConfigError("rram.capacity_policy must be 'declared' or 'derived'");
    }
}

void from_json_link(const ordered_json& j, LinkSpec& l) {
    check_keys(j, {"bandwidth_bytes_per_s", "energy_pj_per_bit", "latency_ns"}, "link");
    get_if(j, "bandwidth_bytes_per_s", l.bandwidth_bytes_per_s);
    get_if(j, "energy_pj_per_bit", l.energy_pj_per_bit);
    get_if(j, "latency_ns", l.latency_ns);
}

void from_json_knobs(const ordered_json& j, EngineKnobs& k) {
    check_keys(j,
               {"tensor_utilization", "sfpe_utilization", "activity_factor", "idle_factor",
                "kv_block_tokens", "kv_rebalance_period"},
               "knobs");
    get_if(j, "tensor_utilization", k.tensor_utilization);
    get_if(j, "sfpe_utilization", k.sfpe_utilization);
    get_if(j, "activity_factor", k.activity_factor);
    get_if(j, "idle_factor", k.idle_factor);
    get_if(j, "kv_block_tokens", k.kv_block_tokens);
    get_if(j, "kv_rebalance_period", k.kv_rebalance_period);
}

}  // namespace

PlatformSpec load_platform(const std::string& preset_or_path) {
    if (preset_or_path == "default") return default_platform();
    if (preset_or_path == "dram-only") return dram_only_platform();

    std::ifstream in(preset_or_path);
    if (!in) throw FileError("cannot open hardware config: " + preset_or_path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("hardware config parse error in " + preset_or_path + ": " + e.what());
    }
    check_keys(j,
               {"dram", "rram", "link", "knobs", "rram_present", "dram_die_area_mm2",
                "rram_die_area_mm2", "default_policy", "source_note"},
               "platform");
    PlatformSpec p;
    if (j.contains("dram")) from_json_dram(j.at("dram"), p.dram);
    if (j.contains("rram")) from_json_rram(j.at("rram"), p.rram);
    if (j.contains("link")) from_json_link(j.at("link"), p.link);
    if (j.contains("knobs")) from_json_knobs(j.at("knobs"), p.knobs);
    get_if(j, "rram_present", p.rram_present);
    get_if(j, "dram_die_area_mm2", p.dram_die_area_mm2);
    get_if(j, "rram_die_area_mm2", p.rram_die_area_mm2);
    get_if(j, "default_policy", p.default_policy);
    p.validate();
    return p;
}

std::string platform_to_json(const PlatformSpec& p) {
    ordered_json j;
    j["dram"] = {{"layers", p.dram.layers},
                 {"tiers", p.dram.tiers},
                 {"tier_capacity_bytes", p.dram.tier_capacity_bytes},
                 {"channels", p.dram.channels},
                 {"banks_per_channel", p.dram.banks_per_channel},
                 {"bank_capacity_bits", p.dram.bank_capacity_bits},
                 {"row_buffer_bits", p.dram.row_buffer_bits},
                 {"mat_rows", p.dram.mat_rows},
                 {"mat_cols", p.dram.mat_cols},
                 {"read_write_energy_pj_per_bit", p.dram.read_write_energy_pj_per_bit},
                 {"latency_base_ns", p.dram.latency_base_ns},
                 {"latency_slope_ns", p.dram.latency_slope_ns},
                 {"pus", p.dram.pus},
                 {"pes_per_pu", p.dram.pes_per_pu},
                 {"mac_rows", p.dram.mac_rows},
                 {"mac_cols", p.dram.mac_cols},
                 {"sfpe_simd_width", p.dram.sfpe_simd_width},
                 {"clock_ghz", p.dram.clock_ghz},
                 {"peak_flops", p.dram.peak_flops},
                 {"peak_power_w", p.dram.peak_power_w},
                 {"shared_mem_bytes_per_pu", p.dram.shared_mem_bytes_per_pu},
                 {"pe_buffer_bytes", p.dram.pe_buffer_bytes},
                 {"sram_capacity_bits", p.dram.sram_capacity_bits},
                 {"external_io_bits_per_channel", p.dram.external_io_bits_per_channel},
                 {"miv_bus_bits", p.dram.miv_bus_bits},
                 {"latency_policy",
                  p.dram.latency_policy == TierLatencyPolicy::MeanLayer ? "mean" : "worst"},
                 {"weight_home_tier", p.dram.weight_home_tier}};
    j["rram"] = {{"layers", p.rram.layers},
                 {"controllers", p.rram.controllers},
                 {"channels_per_controller", p.rram.channels_per_controller},
                 {"tiles_per_channel", p.rram.tiles_per_channel},
                 {"units_per_tile", p.rram.units_per_tile},
                 {"unit_rows", p.rram.unit_rows},
                 {"unit_cols", p.rram.unit_cols},
                 {"read_latency_ns", p.rram.read_latency_ns},
                 {"write_latency_ns", p.rram.write_latency_ns},
                 {"read_energy_pj_per_bit", p.rram.read_energy_pj_per_bit},
                 {"write_energy_pj_per_bit", p.rram.write_energy_pj_per_bit},
                 {"capacity_bytes", p.rram.capacity_bytes},
                 {"peak_bw_bytes_per_s", p.rram.peak_bw_bytes_per_s},
                 {"interface_bits_per_controller", p.rram.interface_bits_per_controller},
                 {"datapath_bits_per_channel", p.rram.datapath_bits_per_channel},
                 {"pus", p.rram.pus},
                 {"pes_per_pu", p.rram.pes_per_pu},
                 {"mac_rows", p.rram.mac_rows},
                 {"mac_cols", p.rram.mac_cols},
                 {"clock_ghz", p.rram.clock_ghz},
                 {"peak_flops", p.rram.peak_flops},
                 {"peak_power_w", p.rram.peak_power_w},
                 {"sram_bytes", p.rram.sram_bytes},
                 {"endurance_writes_per_cell", p.rram.endurance_writes_per_cell},
                 {"capacity_policy",
                  p.rram.capacity_policy == CapacityPolicy::Derived ? "derived" : "declared"}};
    j["link"] = {{"bandwidth_bytes_per_s", p.link.bandwidth_bytes_per_s},
                 {"energy_pj_per_bit", p.link.energy_pj_per_bit},
                 {"latency_ns", p.link.latency_ns}};
    j["knobs"] = {{"tensor_utilization", p.knobs.tensor_utilization},
                  {"sfpe_utilization", p.knobs.sfpe_utilization},
                  {"activity_factor", p.knobs.activity_factor},
                  {"idle_factor", p.knobs.idle_factor},
                  {"kv_block_tokens", p.knobs.kv_block_tokens},
                  {"kv_rebalance_period", p.knobs.kv_rebalance_period}};
    j["rram_present"] = p.rram_present;
    j["dram_die_area_mm2"] = p.dram_die_area_mm2;
    j["rram_die_area_mm2"] = p.rram_die_area_mm2;
    j["default_policy"] = p.default_policy;
    return j.dump(2) + "\n";
}

}  // namespace nmpsim
