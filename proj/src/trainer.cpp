#include "goru/trainer.hpp"

#include "goru/dataset.hpp"

#include <chrono>
#include <sstream>

namespace goru {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::rmsprop ? "rmsprop" : "adam";
}

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "rmsprop") return OptimizerKind::rmsprop;
  if (text == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + text + "'");
}

double RunConfig::resolved_lr() const {
  if (lr) return *lr;
  return task == TaskKind::denoise ? 0.01 : 0.001;
}

void RunConfig::validate() const {
  require(hidden >= 1, "--hidden must be >= 1");
  require(batch >= 1, "--batch must be >= 1");
  require(steps >= 0, "--steps must be >= 0");
  require(log_every >= 1, "log interval must be >= 1");
  require(resolved_lr() > 0, "--lr must be positive");
  require(decay >= 0 && decay < 1, "--decay must be in [0, 1)");
  require(!clip || *clip > 0, "--clip must be positive");
  require(model == CellKind::goru || (!no_reset && !no_update),
          "--no-reset-gate / --no-update-gate need --model goru");
  switch (task) {
    case TaskKind::copy:
      require(T >= 1 && K >= 1 && n >= 2, "copy task needs --t >= 1, --k >= 1, --n-data >= 2");
      break;
    case TaskKind::denoise:
      require(K >= 1 && n >= 2 && T >= K, "denoise task needs --k <= --t and --n-data >= 2");
      break;
    case TaskKind::paren:
      require(T >= 1, "paren task needs --t >= 1");
      require(paren_noise >= 1, "paren task needs at least one noise symbol");
      break;
    case TaskKind::charlm:
      require(!corpus.empty(), "charlm task needs --corpus");
      require(seq_len >= 1, "charlm needs a positive unroll length");
      require(dataset.empty(), "--dataset applies to synthetic tasks only");
      break;
  }
  CellConfig probe = cell_config(*this, 1);
  goru::validate(probe);
}

std::string RunConfig::describe() const {
  std::ostringstream os;
  os << "task=" << to_string(task) << " model=" << to_string(model) << " t=" << T
     << " n_data=" << n << " k=" << K << " hidden=" << hidden << " batch=" << batch
     << " optimizer=" << to_string(optimizer) << " lr=" << resolved_lr() << " decay=" << decay
     << " steps=" << steps << " seed=" << seed << " clip=" << (clip ? std::to_string(*clip) : "off")
     << " layout=" << to_string(layout) << " no_reset_gate=" << no_reset
     << " no_update_gate=" << no_update << " gate_bias_init=" << gate_bias_init
     << " precision=" << (precision == Precision::f32 ? "f32" : "f64");
  if (task == TaskKind::charlm) os << " corpus=" << corpus << " seq_len=" << seq_len;
  if (task == TaskKind::paren) os << " paren_noise=" << paren_noise;
  if (task == TaskKind::copy && copy_random_offset) os << " copy_random_offset=1";
  if (!dataset.empty()) os << " dataset=" << dataset;
  return os.str();
}

TaskSpec task_spec(const RunConfig& config) {
  TaskSpec spec;
  spec.kind = config.task;
  spec.T = config.T;
  spec.n = config.n;
  spec.K = config.K;
  spec.copy_random_offset = config.copy_random_offset;
  spec.paren.noise = config.paren_noise;
  return spec;
}

CellConfig cell_config(const RunConfig& config, int d_x) {
  CellConfig c;
  c.kind = config.model;
  c.d_x = d_x;
  c.d_h = config.hidden;
  c.disable_reset = config.no_reset;
  c.disable_update = config.no_update;
  c.layout = config.layout;
  c.gate_bias_init = config.gate_bias_init;
  return c;
}

template <typename S>
Model<S> initial_model(const RunConfig& config, int vocab) {
  Prng init = Prng(config.seed).fork(0);
  const CellConfig cc = cell_config(config, vocab);
  int heads = 1, classes = vocab;
  if (config.task != TaskKind::charlm) {
    const TaskSpec spec = task_spec(config);
    heads = spec.heads();
    classes = spec.classes();
  }
  // drawn in double so both precisions start from the same weights
  return model_init<double>(cc, heads, classes, init).template cast<S>();
}

template <typename S>
TrainResult<S> train_loop(const RunConfig& config, const MetricCallback& on_record) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  TrainResult<S> out;
  std::optional<CharCorpus> corpus;
  std::optional<CharLmStream> stream;
  TaskSpec spec;
  std::vector<TaskSample> replay;
  if (config.task == TaskKind::charlm) {
    corpus = CharCorpus::load(config.corpus);
    stream.emplace(*corpus, config.seq_len, config.batch);
    out.vocab = corpus->vocab();
  } else {
    spec = task_spec(config);
    out.vocab = spec.input_vocab();
    if (!config.dataset.empty()) {
      replay = read_dataset(config.dataset, spec.heads());
      require(!replay.empty(), "dataset '" + config.dataset + "' has no samples");
      for (const auto& s : replay) spec.check(s);
    }
  }
  out.model = initial_model<S>(config, out.vocab);
  Model<S>& model = out.model;

  OptimizerSettings os;
  os.kind = config.optimizer;
  os.lr = config.resolved_lr();
  os.decay = config.decay;
  Optimizer<S> optimizer(os);
  Prng data = Prng(config.seed).fork(1);

  CellState<S> carry;
  for (long step = 1; step <= config.steps; ++step) {
    SequenceBatch batch;
    CellState<S> init;
    if (stream) {
      CharLmStream::Chunk chunk = stream->next();
      batch = std::move(chunk.data);
      init = chunk.continues ? carry : CellState<S>::zeros(model.config(), config.batch);
    } else if (!replay.empty()) {
      std::vector<TaskSample> picked;
      for (int b = 0; b < config.batch; ++b)
        picked.push_back(replay[std::size_t((step - 1) * config.batch + b) % replay.size()]);
      batch = make_task_batch(spec, picked);
      init = CellState<S>::zeros(model.config(), config.batch);
    } else {
      batch = make_task_batch(spec, config.batch, data);
      init = CellState<S>::zeros(model.config(), config.batch);
    }
    BpttResult<S> res = run_bptt(model, one_hot_inputs<S>(batch), batch.targets, init);
    if (stream) carry = std::move(res.final_state);
    if (config.clip) clip_global_norm(res.grads, *config.clip);
    optimizer.step(model, res.grads);

    if (step % config.log_every == 0 || step == config.steps) {
      MetricRecord rec;
      rec.step = step;
      rec.loss = res.loss;
      rec.accuracy = res.accuracy();
      if (config.record_wallclock)
        rec.wallclock_s = std::chrono::duration<double>(clock::now() - start).count();
      out.metrics.push_back(rec);
      if (on_record) on_record(rec);
    }
  }
  return out;
}

template <typename S>
EvalResult evaluate(const Model<S>& model, const TaskSpec& spec, int batches, int batch, Prng rng) {
  require(batches >= 1, "evaluate: need at least one batch");
  EvalResult out;
  long correct = 0, counted = 0;
  BpttOptions opt;
  opt.compute_grads = false;
  for (int i = 0; i < batches; ++i) {
    SequenceBatch sb = make_task_batch(spec, batch, rng);
    BpttResult<S> r = run_bptt(model, one_hot_inputs<S>(sb), sb.targets,
                               CellState<S>::zeros(model.config(), batch), opt);
    out.loss += r.loss / batches;
    correct += r.correct;
    counted += r.counted;
  }
  out.accuracy = counted ? double(correct) / double(counted) : 0.0;
  return out;
}

template <typename S>
EvalResult evaluate_charlm(const Model<S>& model, const CharCorpus& corpus, int seq_len, int batch,
                           int max_chunks) {
  CharLmStream stream(corpus, seq_len, batch);
  const int chunks = std::min(max_chunks, stream.chunks_per_lane());
  require(chunks >= 1, "evaluate_charlm: nothing to evaluate");
  EvalResult out;
  long correct = 0, counted = 0;
  BpttOptions opt;
  opt.compute_grads = false;
  CellState<S> state = CellState<S>::zeros(model.config(), batch);
  for (int i = 0; i < chunks; ++i) {
    CharLmStream::Chunk chunk = stream.next();
    BpttResult<S> r =
        run_bptt(model, one_hot_inputs<S>(chunk.data), chunk.data.targets, state, opt);
    state = std::move(r.final_state);
    out.loss += r.loss / chunks;
    correct += r.correct;
    counted += r.counted;
  }
  out.accuracy = counted ? double(correct) / double(counted) : 0.0;
  return out;
}

template TrainResult<float> train_loop<float>(const RunConfig&, const MetricCallback&);
template TrainResult<double> train_loop<double>(const RunConfig&, const MetricCallback&);
template Model<float> initial_model<float>(const RunConfig&, int);
template Model<double> initial_model<double>(const RunConfig&, int);
template EvalResult evaluate<float>(const Model<float>&, const TaskSpec&, int, int, Prng);
template EvalResult evaluate<double>(const Model<double>&, const TaskSpec&, int, int, Prng);
template EvalResult evaluate_charlm<float>(const Model<float>&, const CharCorpus&, int, int, int);
template EvalResult evaluate_charlm<double>(const Model<double>&, const CharCorpus&, int, int, int);

}  // namespace goru
