#include "w2gn/icnn/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "w2gn/errors.hpp"

namespace w2gn::icnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char magic[8] = {'W', '2', 'G', 'N', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::string& bytes, std::size_t count) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < count; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t end, const std::filesystem::path& path)
      : data_(data), end_(end), path_(path) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return end_ - pos_; }
  [[noreturn]] void fail(const std::string& why) const {
    throw IoError(fmt::format("{}: {}", path_.string(), why));
  }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) fail("truncated checkpoint");
  }
  const std::string& data_;
  std::size_t pos_ = 0;
  std::size_t end_;
  const std::filesystem::path& path_;
};

}  // namespace

const DenseICNN& Checkpoint::net(const std::string& name) const {
  for (const auto& [n, net] : nets) {
    if (n == name) return net;
  }
  throw ConfigError(fmt::format("checkpoint has no network named '{}'", name));
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  Writer w;
  w.bytes(magic, sizeof(magic));
  w.put<std::uint32_t>(checkpoint_version);
  w.put<std::uint64_t>(checkpoint.iteration);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.nets.size()));
  for (const auto& [name, net] : checkpoint.nets) {
    const auto& spec = net.spec();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint64_t>(spec.input_dim);
    w.put<std::uint64_t>(spec.rank);
    w.put<std::uint64_t>(spec.widths.size());
    for (std::size_t h : spec.widths) w.put<std::uint64_t>(h);
    w.put<double>(spec.beta);
    w.put<double>(spec.celu_alpha);
    w.put<std::uint64_t>(net.parameter_count());
    for (double p : net.parameters()) w.put<double>(p);
  }
  w.put<std::uint64_t>(fnv1a(w.str(), w.str().size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("{}: cannot open for writing", path.string()));
  out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
  if (!out) throw IoError(fmt::format("{}: write failed", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("{}: cannot open checkpoint", path.string()));
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof(magic) + sizeof(std::uint64_t) || std::memcmp(data.data(), magic, sizeof(magic)) != 0) {
    throw IoError(fmt::format("{}: not a w2gn checkpoint", path.string()));
  }
  const std::size_t body = data.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + body, sizeof(stored));

  Reader r(data, body, path);
  r.text(sizeof(magic));
  const auto version = r.get<std::uint32_t>();
  if (version != checkpoint_version) r.fail(fmt::format("unsupported checkpoint version {}", version));
  if (stored != fnv1a(data, body)) r.fail("checksum mismatch (truncated or corrupted checkpoint)");

  Checkpoint cp;
  cp.iteration = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text(r.get<std::uint32_t>());
    DenseICNNSpec spec;
    spec.input_dim = r.get<std::uint64_t>();
    spec.rank = r.get<std::uint64_t>();
    const auto widths = r.get<std::uint64_t>();
    if (widths > r.remaining() / sizeof(std::uint64_t)) r.fail("implausible layer count");
    spec.widths.resize(widths);
    for (auto& h : spec.widths) h = r.get<std::uint64_t>();
    spec.beta = r.get<double>();
    spec.celu_alpha = r.get<double>();
    try {
      spec.validate();
    } catch (const ConfigError& e) {
      r.fail(fmt::format("invalid network spec for '{}': {}", name, e.what()));
    }
    DenseICNN net(spec);
    const auto params = r.get<std::uint64_t>();
    if (params != net.parameter_count()) {
      r.fail(fmt::format("network '{}' stores {} parameters, its spec needs {}", name, params,
                         net.parameter_count()));
    }
    for (double& p : net.parameters()) p = r.get<double>();
    cp.nets.emplace_back(std::move(name), std::move(net));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after the last network");
  return cp;
}

}  // namespace w2gn::icnn
