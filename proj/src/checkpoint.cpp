#include "goru/checkpoint.hpp"

#include <istream>
#include <ostream>

namespace goru {

std::string CheckpointEntry::line() const {
  std::ostringstream os;
  os << name;
  for (auto d : shape) os << ' ' << d;
  os << ' ' << width;
  return os.str();
}

void write_checkpoint_header(std::ostream& out, const std::vector<CheckpointEntry>& entries) {
  for (const auto& e : entries) out << e.line() << '\n';
  out << '\n';
}

std::vector<CheckpointEntry> read_checkpoint_header(std::istream& in) {
  std::vector<CheckpointEntry> entries;
  std::string line;
  while (true) {
    if (!std::getline(in, line)) throw ConfigError("checkpoint: header not terminated");
    if (line.empty()) break;
    std::istringstream is(line);
    std::vector<std::string> fields;
    for (std::string f; is >> f;) fields.push_back(f);
    if (fields.size() < 3) throw ConfigError("checkpoint: malformed header line '" + line + "'");
    CheckpointEntry e;
    e.name = fields.front();
    try {
      for (std::size_t k = 1; k + 1 < fields.size(); ++k) e.shape.push_back(std::stoll(fields[k]));
      e.width = std::stoi(fields.back());
    } catch (const std::exception&) {
      throw ConfigError("checkpoint: malformed header line '" + line + "'");
    }
    if (e.width != 4 && e.width != 8)
      throw ConfigError("checkpoint: unsupported scalar width in '" + line + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

int checkpoint_scalar_width(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
  const auto entries = read_checkpoint_header(in);
  if (entries.empty()) throw ConfigError("checkpoint: no entries in '" + path + "'");
  return entries.front().width;
}

}  // namespace goru
