#include "kvflow/snapshot.hpp"

#include "kvflow/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace kvflow {

namespace {

constexpr char kMagic[8] = {'K', 'V', 'S', 'N', 'A', 'P', '\0', '\0'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ValidationError("snapshot truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_snapshot(const Snapshot& s) {
  if (s.names.size() != s.fields.size()) throw ConfigError("snapshot names/fields mismatch");
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kSnapshotVersion);
  put(out, s.nx);
  put(out, s.ny);
  put(out, s.mx);
  put(out, s.my);
  put(out, s.lx);
  put(out, s.ly);
  put(out, s.t);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.names.size()));
  for (const std::string& n : s.names) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(n.size()));
    out += n;
  }
  for (const Grid& g : s.fields) {
    if (g.rows() != s.mx || g.cols() != s.my) throw ConfigError("snapshot field has wrong shape");
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) put(out, g(i, j));
    }
  }
  return out;
}

Snapshot decode_snapshot(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw ValidationError("not a snapshot file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw ValidationError("unsupported snapshot version " + std::to_string(version));
  }
  Snapshot s;
  s.nx = r.get<std::uint32_t>();
  s.ny = r.get<std::uint32_t>();
  s.mx = r.get<std::uint32_t>();
  s.my = r.get<std::uint32_t>();
  s.lx = r.get<double>();
  s.ly = r.get<double>();
  s.t = r.get<double>();
  const auto n = r.get<std::uint32_t>();
  // A name costs at least 4 bytes; reject absurd counts before allocating.
  if (n > r.remaining() / 4) throw ValidationError("snapshot field count inconsistent with size");
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto len = r.get<std::uint32_t>();
    s.names.push_back(r.take(len));
  }
  const std::uint64_t cells = std::uint64_t{s.mx} * s.my;
  if (cells * n * sizeof(double) != r.remaining()) {
    throw ValidationError("snapshot payload size does not match header");
  }
  for (std::uint32_t k = 0; k < n; ++k) {
    Grid g(s.mx, s.my);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = r.get<double>();
    }
    s.fields.push_back(std::move(g));
  }
  return s;
}

void write_snapshot(const std::string& path, const Snapshot& s) {
  const std::string bytes = encode_snapshot(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write snapshot '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing snapshot '" + path + "'");
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open snapshot '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace kvflow
