#include "goru/dataset.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace goru {

using ordered_json = nlohmann::ordered_json;

std::string sample_to_json(const TaskSample& sample) {
  ordered_json j;
  j["input"] = sample.input;
  if (sample.heads == 1) {
    j["target"] = sample.target;
  } else {
    ordered_json rows = ordered_json::array();
    for (int t = 0; t < sample.steps(); ++t) {
      auto first = sample.target.begin() + std::ptrdiff_t(t) * sample.heads;
      rows.push_back(std::vector<int>(first, first + sample.heads));
    }
    j["target"] = std::move(rows);
  }
  j["mask"] = sample.mask;
  return j.dump();
}

TaskSample sample_from_json(const std::string& line, int heads) {
  require(heads >= 1, "dataset: heads must be >= 1");
  TaskSample s;
  s.heads = heads;
  try {
    const ordered_json j = ordered_json::parse(line);
    s.input = j.at("input").get<std::vector<int>>();
    s.mask = j.at("mask").get<std::vector<double>>();
    const auto& target = j.at("target");
    if (heads == 1) {
      s.target = target.get<std::vector<int>>();
    } else {
      for (const auto& row : target) {
        const auto counts = row.get<std::vector<int>>();
        require(int(counts.size()) == heads, "dataset: target row has the wrong width");
        s.target.insert(s.target.end(), counts.begin(), counts.end());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset: malformed record: ") + e.what());
  }
  require(s.input.size() == s.mask.size() &&
              s.target.size() == s.input.size() * std::size_t(heads),
          "dataset: input, target and mask lengths differ");
  return s;
}

void write_dataset(std::ostream& out, const std::vector<TaskSample>& samples) {
  for (const auto& s : samples) out << sample_to_json(s) << '\n';
  if (!out) throw std::runtime_error("dataset: write failed");
}

void write_dataset(const std::string& path, const std::vector<TaskSample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  write_dataset(out, samples);
}

std::vector<TaskSample> read_dataset(std::istream& in, int heads) {
  std::vector<TaskSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(sample_from_json(line, heads));
  }
  return out;
}

std::vector<TaskSample> read_dataset(const std::string& path, int heads) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset: cannot open '" + path + "'");
  return read_dataset(in, heads);
}

}  // namespace goru
