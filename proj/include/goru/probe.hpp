#ifndef GORU_PROBE_HPP
#define GORU_PROBE_HPP

#include "goru/tasks.hpp"
#include "goru/train.hpp"

#include <vector>

namespace goru {

/// Share of entries of `z` strictly above `threshold`.
template <typename D>
double gate_fraction(const Eigen::MatrixBase<D>& z, double threshold = 0.7) {
  require(z.size() > 0, "gate_fraction: empty gate vector");
  using S = typename D::Scalar;
  return static_cast<double>((z.array() > static_cast<S>(threshold)).count()) /
         static_cast<double>(z.size());
}

struct GateProbeRow {
  int sample = 0;
  int step = 0;
  int token = 0;
  bool is_noise = false;
  double fraction = 0;
};

/// Runs the forward pass over `samples` recording the update gate and
/// reports, per (sample, step), the fraction of units with z > threshold.
template <typename S>
std::vector<GateProbeRow> probe_update_gate(const Model<S>& model, const TaskSpec& spec,
                                            const std::vector<TaskSample>& samples,
                                            double threshold = 0.7) {
  const CellConfig& c = model.config();
  if (!c.has_update_gate())
    throw ConfigError("probe-gates: model '" + to_string(c.kind) +
                      (c.kind == CellKind::goru ? " (update gate disabled)" : std::string()) +
                      "' has no update gate; use gru or goru");
  require(!samples.empty(), "probe-gates: no samples");
  for (const auto& s : samples) spec.check(s);
  const SequenceBatch batch = make_task_batch(spec, samples);
  BpttOptions opt;
  opt.compute_grads = false;
  opt.record_update_gate = true;
  const BpttResult<S> res =
      run_bptt(model, one_hot_inputs<S>(batch), batch.targets,
               CellState<S>::zeros(c, batch.batch()), opt);
  std::vector<GateProbeRow> rows;
  rows.reserve(std::size_t(batch.batch()) * std::size_t(batch.steps()));
  for (int b = 0; b < batch.batch(); ++b)
    for (int t = 0; t < batch.steps(); ++t) {
      GateProbeRow r;
      r.sample = b;
      r.step = t;
      r.token = batch.token(t, b);
      r.is_noise = spec.is_noise_input(r.token);
      r.fraction = gate_fraction(res.update_gate[t].row(b), threshold);
      rows.push_back(r);
    }
  return rows;
}

struct GateProbeSummary {
  double noise_mean = 0;
  double signal_mean = 0;
  long noise_steps = 0;
  long signal_steps = 0;
};

inline GateProbeSummary summarize(const std::vector<GateProbeRow>& rows) {
  GateProbeSummary s;
  for (const auto& r : rows) {
    if (r.is_noise) {
      s.noise_mean += r.fraction;
      ++s.noise_steps;
    } else {
      s.signal_mean += r.fraction;
      ++s.signal_steps;
    }
  }
  if (s.noise_steps) s.noise_mean /= double(s.noise_steps);
  if (s.signal_steps) s.signal_mean /= double(s.signal_steps);
  return s;
}

}  // namespace goru

#endif  // GORU_PROBE_HPP
