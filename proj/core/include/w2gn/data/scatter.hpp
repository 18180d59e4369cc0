#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "w2gn/data/sample_batch.hpp"

namespace w2gn::data {

/// Writes a 2D batch as "x,y" CSV, 17 significant digits per value.
void export_scatter(const SampleBatch& batch, const std::filesystem::path& path);

/// CSV with the given column names; one row per sample.
void export_points(const SampleBatch& batch, const std::vector<std::string>& columns,
                   const std::filesystem::path& path);

/// Reads a CSV written by export_scatter / export_points.
SampleBatch read_points(const std::filesystem::path& path);

}  // namespace w2gn::data
