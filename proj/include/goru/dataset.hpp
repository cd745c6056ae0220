#ifndef GORU_DATASET_HPP
#define GORU_DATASET_HPP

#include "goru/tasks.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace goru {

// One sample per line as a JSON object with keys in the order input,
// target, mask. Paren targets are written as one array of per-type counts
// per step.

std::string sample_to_json(const TaskSample& sample);
/// `heads` is the number of count columns per step (1 except paren).
TaskSample sample_from_json(const std::string& line, int heads);

void write_dataset(std::ostream& out, const std::vector<TaskSample>& samples);
void write_dataset(const std::string& path, const std::vector<TaskSample>& samples);
std::vector<TaskSample> read_dataset(std::istream& in, int heads);
std::vector<TaskSample> read_dataset(const std::string& path, int heads);

}  // namespace goru

#endif  // GORU_DATASET_HPP
