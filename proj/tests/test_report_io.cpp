#include <doctest.h>

#include <sstream>

#include "nmpsim/baselines.hpp"
#include "nmpsim/engine.hpp"
#include "nmpsim/report_io.hpp"

using namespace nmpsim;

namespace {

SimReport tiny_run() {
    ModelConfig cfg;
    cfg.name = "tiny";
    cfg.hidden_dim = 256;
    cfg.num_layers = 1;
    cfg.num_heads = 4;
    cfg.head_dim = 64;
    cfg.ffn_dim = 512;
    cfg.vocab_size = 100;
    cfg.encoder_tokens_out = 1;
    cfg.include_lm_head = false;
    cfg.kv_bytes_per_token_per_layer = cfg.derived_kv_bytes_per_token_per_layer();
    RunInputs in;
    in.model = cfg;
    in.platform = default_platform();
    in.prompt_tokens = 2;
    in.image = {};
    in.output_tokens = 2;
    return simulate(in);
}

}  // namespace

TEST_CASE("csv schema is pinned") {
    // Golden column order, schema version 1. Changing this is a breaking
    // change for downstream table consumers.
    CHECK(report_csv_header() ==
          "csv_schema,model,policy,prompt_tokens,visual_tokens,output_tokens,"
          "total_latency_ns,encode_ns,connect_ns,prefill_ns,decode_ns,"
          "steady_decode_ns_per_token,steady_decode_tps,throughput_tps,avg_power_w,"
          "energy_j,token_per_j,link_bytes_total,link_activation_bytes,link_kv_bytes,"
          "decode_activation_link_bytes,dram_bits,rram_bits_read,rram_bits_written,"
          "kv_migrations,kv_blocks_on_rram,kv_max_write_count");
    CHECK(kCsvSchemaVersion == 1);

    const SimReport rep = tiny_run();
    const std::string row = report_csv_row(rep);
    const auto count_commas = [](const std::string& s) {
        return std::count(s.begin(), s.end(), ',');
    };
    CHECK(count_commas(row) == count_commas(report_csv_header()));
    CHECK(row.rfind("1,tiny,heterogeneous,2,0,2,", 0) == 0);
}

TEST_CASE("report json is deterministic and complete") {
    const SimReport rep = tiny_run();
    const std::string a = report_to_json(rep);
    const std::string b = report_to_json(rep);
    CHECK(a == b);
    for (const char* key :
         {"\"model\"", "\"policy\"", "\"total_latency_ns\"", "\"phase_latency_ns\"",
          "\"kind_latency_ns\"", "\"kind_energy_j\"", "\"steady_state_decode_ns_per_token\"",
          "\"throughput_token_per_s\"", "\"avg_power_w\"", "\"energy_per_inference_j\"",
          "\"token_per_j\"", "\"traffic\"", "\"kv\"", "\"flags\"", "\"busy_ns\""})
        CHECK_MESSAGE(a.find(key) != std::string::npos, key);
}

TEST_CASE("baseline records and comparisons") {
    const auto all = builtin_baselines();
    const auto& jetson = find_baseline(all, "jetson");
    CHECK(jetson.tps_hi == doctest::Approx(11.0));
    CHECK_THROWS_AS(find_baseline(all, "nope"), ConfigError);

    SimReport rep;
    rep.model_name = "x";
    rep.steady_decode_token_per_s = 533.0;
    rep.token_per_j = 266.5;
    const Comparison c = compare(rep, jetson);
    CHECK(c.speedup_vs_hi == doctest::Approx(533.0 / 11.0));  // 48.45x
    CHECK(c.speedup_vs_lo == doctest::Approx(533.0 / 7.4));

    // identical numbers compare at exactly 1x
    BaselineRecord self;
    self.name = "self";
    self.tps_lo = self.tps_hi = 533.0;
    self.token_per_j_lo = self.token_per_j_hi = 266.5;
    const Comparison cs = compare(rep, self);
    CHECK(cs.speedup_vs_lo == doctest::Approx(1.0));
    CHECK(cs.efficiency_vs_hi == doctest::Approx(1.0));

    // published throughput leap endpoints reproduce from the table values
    SimReport low;
    low.steady_decode_token_per_s = 233.0;
    const auto& facil = find_baseline(all, "facil");
    CHECK(compare(low, facil).speedup_vs_hi == doctest::Approx(233.0 / 19.3));  // 12.07x

    BaselineRecord bad = jetson;
    bad.tps_lo = 20.0;  // lo > hi
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("comparison table renders one row per baseline") {
    const SimReport rep = tiny_run();
    const std::string table = comparison_table(rep, builtin_baselines());
    std::istringstream ss(table);
    std::string line;
    int rows = 0;
    while (std::getline(ss, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);  // header + jetson + facil
}
