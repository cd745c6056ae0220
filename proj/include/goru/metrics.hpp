#ifndef GORU_METRICS_HPP
#define GORU_METRICS_HPP

#include "goru/trainer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace goru {

/// CSV `step,loss,accuracy,wallclock_s`, one row per record. A non-empty
/// `comment` is written first as a `# ` line.
void write_metrics(std::ostream& out, const std::vector<MetricRecord>& records,
                   const std::string& comment = {});
void write_metrics(const std::string& path, const std::vector<MetricRecord>& records,
                   const std::string& comment = {});

/// Inverse of write_metrics; `#` lines are skipped.
std::vector<MetricRecord> read_metrics(std::istream& in);
std::vector<MetricRecord> read_metrics(const std::string& path);

}  // namespace goru

#endif  // GORU_METRICS_HPP
