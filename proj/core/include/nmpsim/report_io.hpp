#pragma once

#include <string>
#include <vector>

#include "nmpsim/engine.hpp"

namespace nmpsim {

/// Deterministic JSON rendering of a report (fixed key order, shortest
/// round-trip doubles); byte-identical across re-runs of the same config.
std::string report_to_json(const SimReport& rep);

/// Flat CSV row. Column order is versioned and pinned by golden tests.
extern const int kCsvSchemaVersion;
std::string report_csv_header();
std::string report_csv_row(const SimReport& rep);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace nmpsim
