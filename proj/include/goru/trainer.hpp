#ifndef GORU_TRAINER_HPP
#define GORU_TRAINER_HPP

#include "goru/tasks.hpp"
#include "goru/train.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace goru {

enum class Precision { f32, f64 };

/// Everything needed to reproduce one training run.
struct RunConfig {
  TaskKind task = TaskKind::copy;
  CellKind model = CellKind::goru;
  int T = 50;
  int n = 8;
  int K = 10;
  int hidden = 128;
  int batch = 128;
  OptimizerKind optimizer = OptimizerKind::rmsprop;
  std::optional<double> lr;  // unset: 0.01 for denoise, 0.001 otherwise
  double decay = 0.9;
  long steps = 0;
  std::uint64_t seed = 0;
  std::optional<double> clip;
  Layout layout;
  bool no_reset = false;
  bool no_update = false;
  double gate_bias_init = 0.0;
  bool copy_random_offset = false;
  int paren_noise = 10;
  std::string corpus;
  std::string dataset;  // replay samples from a gen file instead of sampling
  int seq_len = 50;  // charlm truncation length
  int log_every = 20;
  bool record_wallclock = false;
  Precision precision = Precision::f64;
  std::string metrics_out;
  std::string checkpoint_out;

  double resolved_lr() const;
  /// Throws ConfigError on invalid combinations.
  void validate() const;
  /// One line, `key=value` pairs, in a fixed order.
  std::string describe() const;
};

TaskSpec task_spec(const RunConfig& config);
/// Cell configuration for an input vocabulary of `d_x` tokens.
CellConfig cell_config(const RunConfig& config, int d_x);

struct MetricRecord {
  long step = 0;
  double loss = 0;
  double accuracy = 0;
  double wallclock_s = 0;
};

template <typename S>
struct TrainResult {
  Model<S> model;
  std::vector<MetricRecord> metrics;
  int vocab = 0;  // input vocabulary (readout width for charlm)
};

using MetricCallback = std::function<void(const MetricRecord&)>;

/// Runs `config.steps` optimizer steps. Streams are derived from the seed:
/// fork(0) initializes the model, fork(1) generates training data. With
/// `config.dataset` set, batches cycle through the file's samples in order.
/// Synthetic tasks start every batch from a zero state; charlm carries the
/// final state of each chunk into the next one.
template <typename S>
TrainResult<S> train_loop(const RunConfig& config, const MetricCallback& on_record = {});

/// Fresh model exactly as train_loop would initialize it.
template <typename S>
Model<S> initial_model(const RunConfig& config, int vocab);

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
};

/// Mean loss / accuracy over `batches` batches drawn from `rng`.
template <typename S>
EvalResult evaluate(const Model<S>& model, const TaskSpec& spec, int batches, int batch, Prng rng);

/// Mean loss (nats) over the whole charlm stream of `corpus`, one pass,
/// with state carry-over.
template <typename S>
EvalResult evaluate_charlm(const Model<S>& model, const CharCorpus& corpus, int seq_len, int batch,
                           int max_chunks);

}  // namespace goru

#endif  // GORU_TRAINER_HPP
