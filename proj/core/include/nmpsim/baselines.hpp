#pragma once

#include <string>
#include <vector>

#include "nmpsim/engine.hpp"

namespace nmpsim {

/// Published operating ranges of a reference platform. These numbers are
/// imported constants, never simulated.
struct BaselineRecord {
    std::string name;
    double tps_lo = 0.0, tps_hi = 0.0;
    double power_lo_w = 0.0, power_hi_w = 0.0;
    double token_per_j_lo = 0.0, token_per_j_hi = 0.0;
    double area_mm2 = 0.0;
    std::string source_note;
    void validate() const;
};

std::vector<BaselineRecord> load_baselines(const std::string& path);
std::vector<BaselineRecord> builtin_baselines();
const BaselineRecord& find_baseline(const std::vector<BaselineRecord>& all,
                                    const std::string& name);

struct Comparison {
    std::string baseline;
    double speedup_vs_lo = 0.0;   // report TPS / baseline low endpoint
    double speedup_vs_hi = 0.0;
    double efficiency_vs_lo = 0.0;  // report token/J / baseline low endpoint
    double efficiency_vs_hi = 0.0;
};

/// Speedup and efficiency ratios of a simulated report against a baseline's
/// published endpoints. Uses steady-state decode throughput.
Comparison compare(const SimReport& report, const BaselineRecord& baseline);

std::string comparison_table(const SimReport& report,
                             const std::vector<BaselineRecord>& baselines);

}  // namespace nmpsim
