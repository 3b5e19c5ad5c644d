#include "nmpsim/report_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nmpsim {

using nlohmann::ordered_json;

const int kCsvSchemaVersion = 1;

std::string report_to_json(const SimReport& r) {
    ordered_json j;
    j["model"] = r.model_name;
    j["policy"] = r.policy;
    j["workload"] = {{"prompt_tokens", r.prompt_tokens},
                     {"visual_tokens", r.visual_tokens},
                     {"output_tokens", r.output_tokens}};
    j["total_latency_ns"] = r.total_latency_ns;

    ordered_json phases;
    for (const auto& [phase, ns] : r.phase_latency_ns) phases[to_string(phase)] = ns;
    j["phase_latency_ns"] = phases;

    ordered_json kinds;
    for (const auto& [kind, ns] : r.kind_latency_ns) kinds[kind] = ns;
    j["kind_latency_ns"] = kinds;
    ordered_json kinds_e;
    for (const auto& [kind, e] : r.kind_energy_j) kinds_e[kind] = e;
    j["kind_energy_j"] = kinds_e;

    j["steady_state_decode_ns_per_token"] = r.steady_state_decode_ns_per_token;
    j["steady_decode_token_per_s"] = r.steady_decode_token_per_s;
    j["throughput_token_per_s"] = r.throughput_token_per_s;
    j["avg_power_w"] = r.avg_power_w;
    j["energy_per_inference_j"] = r.energy_per_inference_j;
    j["token_per_j"] = r.token_per_j;

    j["energy_breakdown_j"] = {{"dram_dynamic", r.dram_dynamic_j},
                               {"rram_dynamic", r.rram_dynamic_j},
                               {"link_dynamic", r.link_dynamic_j},
                               {"static", r.static_j},
                               {"kv_migration", r.migration_j}};

    j["traffic"] = {{"link_bytes_total", r.link_bytes_total},
                    {"link_activation_bytes", r.link_activation_bytes},
                    {"link_kv_bytes", r.link_kv_bytes},
                    {"link_migration_bytes", r.link_migration_bytes},
                    {"decode_activation_link_bytes", r.decode_activation_link_bytes},
                    {"dram_bits_accessed", r.dram_bits_accessed},
                    {"rram_bits_read", r.rram_bits_read},
                    {"rram_bits_written", r.rram_bits_written}};

    j["kv"] = {{"migrations", r.kv_migrations},
               {"bytes_migrated", r.kv_bytes_migrated},
               {"blocks_on_rram", r.kv_blocks_on_rram},
               {"max_write_count", r.max_kv_write_count}};

    j["busy_ns"] = {{"dram", r.dram_busy_ns}, {"rram", r.rram_busy_ns}, {"link", r.link_busy_ns}};

    j["flags"] = {{"dram_flops_mismatch", r.dram_flops_mismatch_flagged},
                  {"dram_derived_flops", r.dram_derived_flops},
                  {"rram_flops_mismatch", r.rram_flops_mismatch_flagged},
                  {"rram_derived_flops", r.rram_derived_flops},
                  {"rram_capacity_mismatch", r.rram_capacity_mismatch_flagged},
                  {"rram_activation_on_reducer", r.rram_activation_on_reducer}};
    return j.dump(2) + "\n";
}

std::string report_csv_header() {
    return "csv_schema,model,policy,prompt_tokens,visual_tokens,output_tokens,"
           "total_latency_ns,encode_ns,connect_ns,prefill_ns,decode_ns,"
           "steady_decode_ns_per_token,steady_decode_tps,throughput_tps,avg_power_w,"
           "energy_j,token_per_j,link_bytes_total,link_activation_bytes,link_kv_bytes,"
           "decode_activation_link_bytes,dram_bits,rram_bits_read,rram_bits_written,"
           "kv_migrations,kv_blocks_on_rram,kv_max_write_count";
}

std::string report_csv_row(const SimReport& r) {
    auto phase_ns = [&](Phase p) {
        auto it = r.phase_latency_ns.find(p);
        return it == r.phase_latency_ns.end() ? 0.0 : it->second;
    };
    std::ostringstream os;
    os.precision(17);
    os << kCsvSchemaVersion << ',' << r.model_name << ',' << r.policy << ',' << r.prompt_tokens
       << ',' << r.visual_tokens << ',' << r.output_tokens << ',' << r.total_latency_ns << ','
       << phase_ns(Phase::Encode) << ',' << phase_ns(Phase::Connect) << ','
       << phase_ns(Phase::Prefill) << ',' << phase_ns(Phase::DecodeStep) << ','
       << r.steady_state_decode_ns_per_token << ',' << r.steady_decode_token_per_s << ','
       << r.throughput_token_per_s << ',' << r.avg_power_w << ',' << r.energy_per_inference_j
       << ',' << r.token_per_j << ',' << r.link_bytes_total << ',' << r.link_activation_bytes
       << ',' << r.link_kv_bytes << ',' << r.decode_activation_link_bytes << ','
       << r.dram_bits_accessed << ',' << r.rram_bits_read << ',' << r.rram_bits_written << ','
       << r.kv_migrations << ',' << r.kv_blocks_on_rram << ',' << r.max_kv_write_count;
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

}  // namespace nmpsim
