#include "w2gn/data/scatter.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "w2gn/errors.hpp"

namespace w2gn::data {

void export_points(const SampleBatch& batch, const std::vector<std::string>& columns,
                   const std::filesystem::path& path) {
  if (columns.size() != batch.dim()) {
    throw ConfigError(fmt::format("{} column names for {}-dimensional points", columns.size(), batch.dim()));
  }
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("{}: cannot open for writing", path.string()));
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  fmt::memory_buffer line;
  for (Eigen::Index j = 0; j < batch.points.cols(); ++j) {
    line.clear();
    for (Eigen::Index i = 0; i < batch.points.rows(); ++i) {
      fmt::format_to(std::back_inserter(line), "{}{:.17g}", i ? "," : "", batch.points(i, j));
    }
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  if (!out) throw IoError(fmt::format("{}: write failed", path.string()));
}

void export_scatter(const SampleBatch& batch, const std::filesystem::path& path) {
  if (batch.dim() != 2) throw ConfigError(fmt::format("scatter export needs 2D points, got {}D", batch.dim()));
  export_points(batch, {"x", "y"}, path);
}

SampleBatch read_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("{}: cannot open", path.string()));
  std::string header;
  if (!std::getline(in, header)) throw IoError(fmt::format("{}: missing header", path.string()));
  const auto dim = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);
  std::vector<double> values;
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(fmt::format("{}:{}: not a number '{}'", path.string(), rows + 2, cell));
      }
      ++cols;
    }
    if (cols != dim) throw IoError(fmt::format("{}:{}: expected {} values", path.string(), rows + 2, dim));
    ++rows;
  }
  SampleBatch out{Eigen::MatrixXd(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows))};
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t i = 0; i < dim; ++i)
      out.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[j * dim + i];
  return out;
}

}  // namespace w2gn::data
