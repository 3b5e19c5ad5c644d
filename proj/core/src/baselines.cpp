#include "nmpsim/baselines.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nmpsim {

using nlohmann::ordered_json;

void BaselineRecord::validate() const {
    if (name.empty()) throw ConfigError("baseline: name required");
    if (tps_lo > tps_hi || power_lo_w > power_hi_w || token_per_j_lo > token_per_j_hi)
        throw ConfigError("baseline '" + name + "': ranges must satisfy lo <= hi");
    if (tps_lo <= 0) throw ConfigError("baseline '" + name + "': throughput must be positive");
}

std::vector<BaselineRecord> builtin_baselines() {
    BaselineRecord jetson;
    jetson.name = "jetson";
    jetson.tps_lo = 7.4;
    jetson.tps_hi = 11.0;
    jetson.power_lo_w = 10.0;
    jetson.power_hi_w = 40.0;
    jetson.token_per_j_lo = 0.28;
    jetson.token_per_j_hi = 0.74;
    jetson.area_mm2 = 200.0;
    jetson.source_note = "published edge-GPU operating range";

    BaselineRecord facil;
    facil.name = "facil";
    facil.tps_lo = 7.7;
    facil.tps_hi = 19.3;
    facil.power_lo_w = 5.7;
    facil.power_hi_w = 38.5;
    facil.token_per_j_lo = 0.50;
    facil.token_per_j_hi = 1.35;
    facil.area_mm2 = 200.0;
    facil.source_note = "published near-bank DRAM accelerator range";
    return {jetson, facil};
}

std::vector<BaselineRecord> load_baselines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open baselines file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("baselines parse error in " + path + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("baselines file must be a JSON array");
    std::vector<BaselineRecord> out;
    for (const auto& item : j) {
        for (auto it = item.begin(); it != item.end(); ++it) {
            static const std::set<std::string> allowed = {
                "name",       "tps_lo",         "tps_hi",         "power_lo_w", "power_hi_w",
                "token_per_j_lo", "token_per_j_hi", "area_mm2",   "source_note"};
            if (!allowed.count(it.key()))
                throw ConfigError("unknown key '" + it.key() + "' in baselines entry");
        }
        BaselineRecord b;
        b.name = item.at("name").get<std::string>();
        b.tps_lo = item.at("tps_lo").get<double>();
        b.tps_hi = item.at("tps_hi").get<double>();
        b.power_lo_w = item.value("power_lo_w", 0.0);
        b.power_hi_w = item.value("power_hi_w", 0.0);
        b.token_per_j_lo = item.value("token_per_j_lo", 0.0);
        b.token_per_j_hi = item.value("token_per_j_hi", 0.0);
        b.area_mm2 = item.value("area_mm2", 0.0);
        b.source_note = item.value("source_note", std::string{});
        b.validate();
        out.push_back(std::move(b));
    }
    return out;
}

const BaselineRecord& find_baseline(const std::vector<BaselineRecord>& all,
                                    const std::string& name) {
    for (const auto& b : all)
        if (b.name == name) return b;
    throw ConfigError("unknown baseline '" + name + "'");
}

Comparison compare(const SimReport& report, const BaselineRecord& b) {
    Comparison c;
    c.baseline = b.name;
    const double tps = report.steady_decode_token_per_s;
    c.speedup_vs_lo = b.tps_lo > 0 ? tps / b.tps_lo : 0.0;
    c.speedup_vs_hi = b.tps_hi > 0 ? tps / b.tps_hi : 0.0;
    c.efficiency_vs_lo = b.token_per_j_lo > 0 ? report.token_per_j / b.token_per_j_lo : 0.0;
    c.efficiency_vs_hi = b.token_per_j_hi > 0 ? report.token_per_j / b.token_per_j_hi : 0.0;
    return c;
}

std::string comparison_table(const SimReport& report,
                             const std::vector<BaselineRecord>& baselines) {
    std::ostringstream os;
    os << "baseline,baseline_tps_lo,baseline_tps_hi,sim_tps,speedup_vs_lo,speedup_vs_hi,"
          "sim_token_per_j,efficiency_vs_lo,efficiency_vs_hi\n";
    os.precision(6);
    for (const auto& b : baselines) {
        const Comparison c = compare(report, b);
        os << b.name << ',' << b.tps_lo << ',' << b.tps_hi << ','
           << report.steady_decode_token_per_s << ',' << c.speedup_vs_lo << ','
           << c.speedup_vs_hi << ',' << report.token_per_j << ',' << c.efficiency_vs_lo << ','
           << c.efficiency_vs_hi << '\n';
    }
    return os.str();
}

}  // namespace nmpsim
