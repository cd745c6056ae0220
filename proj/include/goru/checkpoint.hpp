#ifndef GORU_CHECKPOINT_HPP
#define GORU_CHECKPOINT_HPP

#include "goru/train.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iosfwd>
#include <sstream>
#include <string>
#include <vector>

namespace goru {

/// One header line of a checkpoint: `name dim... width`.
struct CheckpointEntry {
  std::string name;
  std::vector<Eigen::Index> shape;
  int width = 0;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= std::size_t(d);
    return n;
  }
  std::string line() const;
  bool operator==(const CheckpointEntry&) const = default;
};

/// Header text lines, a blank line, then the raw little-endian payload in
/// header order.
std::vector<CheckpointEntry> read_checkpoint_header(std::istream& in);
void write_checkpoint_header(std::ostream& out, const std::vector<CheckpointEntry>& entries);
/// Scalar width (4 or 8) of the first entry of the checkpoint at `path`.
int checkpoint_scalar_width(const std::string& path);

namespace detail {

template <typename T>
auto entry_shape(const T& t) {
  std::vector<Eigen::Index> shape;
  if constexpr (T::ColsAtCompileTime == 1)
    shape = {t.rows()};
  else
    shape = {t.rows(), t.cols()};
  return shape;
}

template <typename S>
void write_le(std::ostream& out, const S* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), std::streamsize(n * sizeof(S)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      char buf[sizeof(S)];
      std::memcpy(buf, data + i, sizeof(S));
      for (std::size_t k = 0; k < sizeof(S) / 2; ++k) std::swap(buf[k], buf[sizeof(S) - 1 - k]);
      out.write(buf, sizeof(S));
    }
  }
}

template <typename S>
void read_le(std::istream& in, S* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), std::streamsize(n * sizeof(S)));
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < n; ++i) {
      char* p = reinterpret_cast<char*>(data + i);
      for (std::size_t k = 0; k < sizeof(S) / 2; ++k) std::swap(p[k], p[sizeof(S) - 1 - k]);
    }
  }
}

}  // namespace detail

template <typename S>
std::vector<CheckpointEntry> checkpoint_entries(const Model<S>& model) {
  std::vector<CheckpointEntry> entries;
  model.visit([&](const std::string& name, const auto& t) {
    entries.push_back({name, detail::entry_shape(t), int(sizeof(S))});
  });
  return entries;
}

template <typename S>
void save_checkpoint(const Model<S>& model, std::ostream& out) {
  write_checkpoint_header(out, checkpoint_entries(model));
  model.visit([&](const std::string&, const auto& t) {
    detail::write_le(out, t.data(), std::size_t(t.size()));
  });
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

template <typename S>
void save_checkpoint(const Model<S>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  save_checkpoint(model, out);
}

/// Loads weights into `model`, whose configuration fixes the expected
/// header. Any difference is reported with the first mismatching entry.
template <typename S>
void load_checkpoint(Model<S>& model, std::istream& in) {
  const auto expected = checkpoint_entries(model);
  const auto found = read_checkpoint_header(in);
  for (std::size_t k = 0; k < std::max(expected.size(), found.size()); ++k) {
    const std::string want = k < expected.size() ? expected[k].line() : "<none>";
    const std::string got = k < found.size() ? found[k].line() : "<none>";
    if (want != got)
      throw ConfigError("checkpoint does not match model at entry " + std::to_string(k) +
                        ": expected '" + want + "', found '" + got + "'");
  }
  model.visit([&](const std::string& name, auto& t) {
    detail::read_le(in, t.data(), std::size_t(t.size()));
    if (!in) throw ConfigError("checkpoint: payload truncated in '" + name + "'");
  });
  in.peek();
  if (!in.eof()) throw ConfigError("checkpoint: trailing bytes after payload");
}

template <typename S>
void load_checkpoint(Model<S>& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
  load_checkpoint(model, in);
}

}  // namespace goru

#endif  // GORU_CHECKPOINT_HPP
