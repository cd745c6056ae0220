#include "goru/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace goru {

namespace {

constexpr const char* kHeader = "step,loss,accuracy,wallclock_s";

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_metrics(std::ostream& out, const std::vector<MetricRecord>& records,
                   const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << kHeader << '\n';
  for (const auto& r : records)
    out << r.step << ',' << number(r.loss) << ',' << number(r.accuracy) << ','
        << number(r.wallclock_s) << '\n';
  if (!out) throw std::runtime_error("metrics: write failed");
}

void write_metrics(const std::string& path, const std::vector<MetricRecord>& records,
                   const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("metrics: cannot open '" + path + "' for writing");
  write_metrics(out, records, comment);
  out.close();
  if (!out) throw std::runtime_error("metrics: write to '" + path + "' failed");
}

std::vector<MetricRecord> read_metrics(std::istream& in) {
  std::vector<MetricRecord> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      require(line == kHeader, "metrics: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::istringstream is(line);
    MetricRecord r;
    char c1 = 0, c2 = 0, c3 = 0;
    is >> r.step >> c1 >> r.loss >> c2 >> r.accuracy >> c3 >> r.wallclock_s;
    require(is && c1 == ',' && c2 == ',' && c3 == ',', "metrics: malformed row '" + line + "'");
    out.push_back(r);
  }
  require(header, "metrics: missing header");
  return out;
}

std::vector<MetricRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("metrics: cannot open '" + path + "'");
  return read_metrics(in);
}

}  // namespace goru
