#include "w2gn/data/palette.hpp"

#include <fmt/format.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "w2gn/errors.hpp"

namespace w2gn::data {

namespace {

PixelPalette from_bytes(const std::vector<std::uint8_t>& rgb, std::size_t width, std::size_t height) {
  PixelPalette p;
  p.width = width;
  p.height = height;
  p.pixels.resize(3, static_cast<Eigen::Index>(width * height));
  for (std::size_t i = 0; i < width * height; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      p.pixels(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = rgb[3 * i + c] / 255.0;
    }
  }
  return p;
}

std::vector<std::uint8_t> to_bytes(const PixelPalette& p) {
  std::vector<std::uint8_t> rgb(3 * p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(p.pixels(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)), 0.0, 1.0);
      rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return rgb;
}

PixelPalette load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(fmt::format("{}: cannot read PNG ({})", path.string(), image.message));
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(fmt::format("{}: corrupt PNG ({})", path.string(), msg));
  }
  return from_bytes(buffer, image.width, image.height);
}

void skip_ppm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

PixelPalette load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("{}: cannot open", path.string()));
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw IoError(fmt::format("{}: not a binary PPM", path.string()));
  std::size_t width = 0, height = 0, maxval = 0;
  skip_ppm_space(in);
  in >> width;
  skip_ppm_space(in);
  in >> height;
  skip_ppm_space(in);
  in >> maxval;
  if (!in || width == 0 || height == 0) throw IoError(fmt::format("{}: malformed PPM header", path.string()));
  if (maxval != 255) throw IoError(fmt::format("{}: only 8-bit PPM is supported (maxval {})", path.string(), maxval));
  in.get();
  std::vector<std::uint8_t> rgb(3 * width * height);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(rgb.size())) {
    throw IoError(fmt::format("{}: truncated PPM pixel data", path.string()));
  }
  return from_bytes(rgb, width, height);
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

PixelPalette load_palette(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError(fmt::format("{}: cannot open", path.string()));
  unsigned char head[8] = {};
  probe.read(reinterpret_cast<char*>(head), 8);
  const auto got = probe.gcount();
  probe.close();
  if (got >= 8 && png_sig_cmp(head, 0, 8) == 0) return load_png(path);
  if (got >= 2 && head[0] == 'P' && head[1] == '6') return load_ppm(path);
  throw IoError(fmt::format("{}: unsupported image format (expected PNG or binary PPM)", path.string()));
}

void save_palette(const PixelPalette& palette, const std::filesystem::path& path) {
  if (palette.size() != palette.width * palette.height || palette.pixels.rows() != 3) {
    throw ConfigError("palette shape does not match its width and height");
  }
  const auto rgb = to_bytes(palette);
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(palette.width);
    image.height = static_cast<png_uint_32>(palette.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
      throw IoError(fmt::format("{}: cannot write PNG ({})", path.string(), image.message));
    }
  } else if (ext == ".ppm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("{}: cannot open for writing", path.string()));
    out << "P6\n" << palette.width << ' ' << palette.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out) throw IoError(fmt::format("{}: write failed", path.string()));
  } else {
    throw IoError(fmt::format("{}: unsupported output extension '{}'", path.string(), ext));
  }
}

PixelPalette apply_palette_map(const PointMap& map, const PixelPalette& palette, std::size_t chunk) {
  if (chunk == 0) throw ConfigError("chunk size must be positive");
  PixelPalette out;
  out.width = palette.width;
  out.height = palette.height;
  out.pixels.resize(3, palette.pixels.cols());
  const Eigen::Index n = palette.pixels.cols();
  for (Eigen::Index first = 0; first < n; first += static_cast<Eigen::Index>(chunk)) {
    const Eigen::Index m = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), n - first);
    const Eigen::MatrixXd mapped = map(palette.pixels.middleCols(first, m));
    if (mapped.rows() != 3 || mapped.cols() != m) throw ConfigError("palette map must return 3-vectors");
    out.pixels.middleCols(first, m) = mapped.cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

PaletteSampler::PaletteSampler(std::shared_ptr<const PixelPalette> palette) : palette_(std::move(palette)) {
  if (!palette_ || palette_->size() == 0) throw ConfigError("palette sampler needs a non-empty palette");
}

SampleBatch PaletteSampler::draw(std::size_t n, Rng& rng) const {
  if (n == 0) throw ConfigError("sample size must be >= 1");
  std::uniform_int_distribution<Eigen::Index> pick(0, palette_->pixels.cols() - 1);
  SampleBatch out{Eigen::MatrixXd(3, static_cast<Eigen::Index>(n))};
  for (Eigen::Index j = 0; j < out.points.cols(); ++j) out.points.col(j) = palette_->pixels.col(pick(rng));
  return out;
}

}  // namespace w2gn::data
