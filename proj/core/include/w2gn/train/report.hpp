#pragma once

#include <filesystem>
#include <string>

#include "w2gn/train/trainer.hpp"

namespace w2gn::train {

/// One JSON object per line; keys in a fixed order.
std::string to_json_line(const LogRecord& record);

/// Writes every record as a JSON line.
void write_log(const RunReport& report, const std::filesystem::path& path);

/// Summary fields of the report as a JSON document (no records).
std::string report_summary_json(const RunReport& report);

}  // namespace w2gn::train
