#include "w2gn/train/report.hpp"

#include <fmt/format.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "w2gn/errors.hpp"

namespace w2gn::train {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json record_json(const LogRecord& r) {
  ordered_json j;
  j["iteration"] = r.iteration;
  j["corr"] = r.corr;
  j["corr_std_error"] = r.corr_std_error;
  j["term_x"] = r.term_x;
  j["term_y"] = r.term_y;
  j["r_y"] = r.r_y;
  j["r_x"] = r.r_x;
  j["loss"] = r.loss;
  j["energy_forward"] = r.energy_forward;
  j["energy_inverse"] = r.energy_inverse;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace

std::string to_json_line(const LogRecord& record) { return record_json(record).dump(); }

void write_log(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("{}: cannot open for writing", path.string()));
  for (const auto& r : report.records) out << to_json_line(r) << '\n';
  if (!out) throw IoError(fmt::format("{}: write failed", path.string()));
}

std::string report_summary_json(const RunReport& report) {
  ordered_json j;
  j["method"] = report.method;
  j["iterations"] = report.iterations;
  j["pretrain_mse"] = report.pretrain_mse;
  if (!report.records.empty()) j["final"] = record_json(report.records.back());
  j["corr_reference"] = report.corr_reference ? ordered_json(*report.corr_reference) : ordered_json(nullptr);
  j["corr_gap"] = report.corr_gap ? ordered_json(*report.corr_gap) : ordered_json(nullptr);
  j["inversion_warnings"] = report.inversion_warnings;
  j["wall_seconds"] = report.wall_seconds;
  j["seconds_per_iteration"] = report.seconds_per_iteration;
  return j.dump(2);
}

}  // namespace w2gn::train
