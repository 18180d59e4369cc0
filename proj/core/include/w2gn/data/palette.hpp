#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <functional>

#include "w2gn/data/toy.hpp"

namespace w2gn::data {

/// RGB pixels scaled to [0, 1], one pixel per column in row-major image order.
struct PixelPalette {
  Eigen::MatrixXd pixels;  // 3 x (width * height)
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(pixels.cols()); }
};

using PointMap = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Reads an 8-bit RGB PNG or binary PPM (P6). Throws IoError naming the path.
PixelPalette load_palette(const std::filesystem::path& path);

/// Writes PNG or PPM depending on the extension (.png, .ppm). Values are
/// clamped to [0, 1] and rounded to 8 bits.
void save_palette(const PixelPalette& palette, const std::filesystem::path& path);

/// Maps every pixel in chunks and clamps the result to [0, 1].
PixelPalette apply_palette_map(const PointMap& map, const PixelPalette& palette, std::size_t chunk = 16384);

/// Uniform sampling with replacement from the palette's pixels.
class PaletteSampler final : public Sampler {
 public:
  explicit PaletteSampler(std::shared_ptr<const PixelPalette> palette);
  std::size_t dim() const override { return 3; }
  SampleBatch draw(std::size_t n, Rng& rng) const override;

 private:
  std::shared_ptr<const PixelPalette> palette_;
};

}  // namespace w2gn::data
