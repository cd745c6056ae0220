#include "goru/cli.hpp"

#include "goru/checkpoint.hpp"
#include "goru/dataset.hpp"
#include "goru/gradcheck.hpp"
#include "goru/metrics.hpp"
#include "goru/probe.hpp"
#include "goru/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>

namespace goru {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Flags shared by train, gen and probe-gates. Enum-valued flags are kept as
// strings until resolve().
struct Flags {
  RunConfig cfg;
  std::string task = "copy";
  std::string model = "goru";
  std::string layout = "full";
  std::string optimizer = "rmsprop";
  std::string precision = "f64";
  double lr = 0.001;
  double clip = 1.0;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* clip_opt = nullptr;

  void resolve() {
    cfg.task = parse_task_kind(task);
    cfg.model = parse_cell_kind(model);
    cfg.layout = parse_layout(layout);
    cfg.optimizer = parse_optimizer_kind(optimizer);
    if (precision == "f32")
      cfg.precision = Precision::f32;
    else if (precision == "f64")
      cfg.precision = Precision::f64;
    else
      throw ConfigError("--precision must be f32 or f64");
    if (lr_opt && lr_opt->count()) cfg.lr = lr;
    if (clip_opt && clip_opt->count()) cfg.clip = clip;
  }
};

void add_task_flags(CLI::App* app, Flags& f) {
  app->add_option("--task", f.task, "copy | denoise | paren | charlm")->capture_default_str();
  app->add_option("--t", f.cfg.T, "copy delay, denoise noise span, or paren length")
      ->capture_default_str();
  app->add_option("--n-data", f.cfg.n, "data symbols (copy, denoise)")->capture_default_str();
  app->add_option("--k", f.cfg.K, "data steps to recall (copy, denoise)")->capture_default_str();
  app->add_option("--paren-noise", f.cfg.paren_noise, "noise symbols in the paren alphabet")
      ->capture_default_str();
  app->add_flag("--copy-random-offset", f.cfg.copy_random_offset,
                "copy: place the data block at a random position");
}

void add_model_flags(CLI::App* app, Flags& f) {
  app->add_option("--model", f.model, "vanilla | gru | lstm | eurnn | goru")->capture_default_str();
  app->add_option("--hidden", f.cfg.hidden, "hidden size d_h")->capture_default_str();
  app->add_option("--layout", f.layout, "rotation layout: full | fft | custom:L")
      ->capture_default_str();
  app->add_flag("--no-reset-gate", f.cfg.no_reset, "goru: fix r = 1");
  app->add_flag("--no-update-gate", f.cfg.no_update, "goru: fix z = 0");
  app->add_option("--gate-bias-init", f.cfg.gate_bias_init,
                  "initial gate bias (gru/goru b_z, b_r; lstm b_f)")
      ->capture_default_str();
}

template <typename S>
void train_with(const RunConfig& cfg, bool dump_config, std::ostream& out, std::ostream& err) {
  const bool csv_to_stdout = cfg.metrics_out.empty();
  std::ostream& log = csv_to_stdout ? err : out;
  auto progress = [&](const MetricRecord& r) {
    log << "step " << r.step << " loss " << fmt(r.loss) << " accuracy " << fmt(r.accuracy) << '\n';
  };
  const TrainResult<S> result = train_loop<S>(cfg, progress);
  const std::string comment = dump_config ? cfg.describe() : std::string();
  if (csv_to_stdout)
    write_metrics(out, result.metrics, comment);
  else
    write_metrics(cfg.metrics_out, result.metrics, comment);
  if (!cfg.checkpoint_out.empty()) save_checkpoint(result.model, cfg.checkpoint_out);
  if (!result.metrics.empty()) {
    const double loss = result.metrics.back().loss;
    log << "final loss " << fmt(loss);
    if (cfg.task == TaskKind::charlm) {
      log << " (" << fmt(loss / std::numbers::ln2) << " bpc, uniform "
          << fmt(std::log2(double(result.vocab))) << ")";
    } else {
      Prng rng = Prng(cfg.seed).fork(3);
      const double base = task_spec(cfg).baseline(rng);
      log << " (memoryless baseline " << fmt(base) << ", ratio " << fmt(loss / base) << ")";
    }
    log << '\n';
  }
}

int cmd_train(Flags& f, bool dump_config, bool wallclock, std::ostream& out, std::ostream& err) {
  f.resolve();
  f.cfg.record_wallclock = wallclock;
  f.cfg.validate();
  if (f.cfg.precision == Precision::f32)
    train_with<float>(f.cfg, dump_config, out, err);
  else
    train_with<double>(f.cfg, dump_config, out, err);
  return 0;
}

int cmd_gen(Flags& f, int count, const std::string& path, std::ostream& out) {
  f.resolve();
  require(f.cfg.task != TaskKind::charlm, "gen: charlm data comes from --corpus, not a generator");
  require(count >= 1, "gen: --count must be >= 1");
  RunConfig probe = f.cfg;
  probe.steps = 0;
  probe.validate();
  const TaskSpec spec = task_spec(f.cfg);
  // the training data stream, so `gen --seed s` emits what `train --seed s`
  // would draw first
  Prng rng = Prng(f.cfg.seed).fork(1);
  std::vector<TaskSample> samples;
  samples.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) samples.push_back(spec.sample(rng));
  if (path.empty())
    write_dataset(out, samples);
  else
    write_dataset(path, samples);
  return 0;
}

template <typename S>
void probe_with(const RunConfig& cfg, const std::string& checkpoint, int samples, double threshold,
                const std::string& path, std::ostream& out, std::ostream& err) {
  const TaskSpec spec = task_spec(cfg);
  Model<S> model = initial_model<S>(cfg, spec.input_vocab());
  load_checkpoint(model, checkpoint);
  Prng rng = Prng(cfg.seed).fork(2);
  std::vector<TaskSample> batch;
  for (int i = 0; i < samples; ++i) batch.push_back(spec.sample(rng));
  const auto rows = probe_update_gate(model, spec, batch, threshold);

  std::ofstream file;
  if (!path.empty()) {
    file.open(path);
    if (!file) throw std::runtime_error("probe-gates: cannot open '" + path + "' for writing");
  }
  std::ostream& csv = path.empty() ? out : file;
  csv << "sample,step,token,is_noise,fraction\n";
  for (const auto& r : rows)
    csv << r.sample << ',' << r.step << ',' << r.token << ',' << (r.is_noise ? 1 : 0) << ','
        << fmt(r.fraction) << '\n';
  if (!csv) throw std::runtime_error("probe-gates: write failed");
  const GateProbeSummary s = summarize(rows);
  std::ostream& log = path.empty() ? err : out;
  log << "mean fraction on noise steps " << fmt(s.noise_mean) << " (" << s.noise_steps
      << " steps), on other steps " << fmt(s.signal_mean) << " (" << s.signal_steps << " steps)\n";
}

int cmd_probe(Flags& f, const std::string& checkpoint, int samples, double threshold,
              const std::string& path, std::ostream& out, std::ostream& err) {
  f.resolve();
  require(f.cfg.task != TaskKind::charlm, "probe-gates: needs a synthetic task");
  require(samples >= 1, "probe-gates: --samples must be >= 1");
  require(threshold >= 0 && threshold <= 1, "probe-gates: --threshold must be in [0, 1]");
  RunConfig probe = f.cfg;
  probe.steps = 0;
  probe.validate();
  if (checkpoint_scalar_width(checkpoint) == 4)
    probe_with<float>(f.cfg, checkpoint, samples, threshold, path, out, err);
  else
    probe_with<double>(f.cfg, checkpoint, samples, threshold, path, out, err);
  return 0;
}

int cmd_params(Flags& f, int input_dim, std::ostream& out) {
  f.resolve();
  require(input_dim >= 1, "params: --input-dim must be >= 1");
  const CellConfig c = cell_config(f.cfg, input_dim);
  validate(c);
  const ParamCount n = param_count(c);
  out << "total " << n.total << '\n' << "hidden_to_hidden " << n.hidden_to_hidden << '\n';
  return 0;
}

int cmd_gradcheck(int instances, std::uint64_t seed, double tolerance, std::ostream& out) {
  require(instances >= 1, "gradcheck: --instances must be >= 1");
  GradcheckSuiteOptions o;
  o.instances = instances;
  o.seed = seed;
  std::map<CellKind, double> per_kind;
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(o)) {
    const bool pass = r.worst <= tolerance;
    ok = ok && pass;
    out << (pass ? "ok   " : "FAIL ") << r.label << ": worst relative error " << fmt(r.worst)
        << " (" << r.worst_param << ", " << r.instances << " instances)\n";
    per_kind[r.kind] = std::max(per_kind[r.kind], r.worst);
  }
  out << "worst per cell kind:";
  for (const auto& [kind, worst] : per_kind) out << ' ' << to_string(kind) << '=' << fmt(worst);
  out << '\n' << (ok ? "all checks passed" : "gradient check FAILED") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent-network lab: GORU, GRU, LSTM, vanilla and orthogonal RNNs", "goru"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);

  Flags train_flags;
  bool dump_config = false, wallclock = false;
  CLI::App* train = app.add_subcommand("train", "train one model and write metrics / checkpoint");
  add_task_flags(train, train_flags);
  add_model_flags(train, train_flags);
  RunConfig& tc = train_flags.cfg;
  train->add_option("--batch", tc.batch, "minibatch size")->capture_default_str();
  train->add_option("--optimizer", train_flags.optimizer, "rmsprop | adam")->capture_default_str();
  train_flags.lr_opt =
      train->add_option("--lr", train_flags.lr, "learning rate (default 0.01 denoise, else 0.001)");
  train->add_option("--decay", tc.decay, "rmsprop decay")->capture_default_str();
  train->add_option("--steps", tc.steps, "optimizer steps")->capture_default_str();
  train->add_option("--seed", tc.seed, "seed for init and data")->capture_default_str();
  train_flags.clip_opt = train->add_option("--clip", train_flags.clip, "global gradient-norm clip");
  train->add_option("--corpus", tc.corpus, "text file for --task charlm");
  train->add_option("--seq-len", tc.seq_len, "charlm truncation length")->capture_default_str();
  train->add_option("--dataset", tc.dataset, "replay samples written by gen");
  train->add_option("--metrics-out", tc.metrics_out, "metrics CSV path (default stdout)");
  train->add_option("--checkpoint-out", tc.checkpoint_out, "final checkpoint path");
  train->add_option("--precision", train_flags.precision, "f32 | f64")->capture_default_str();
  train->add_option("--log-every", tc.log_every, "metrics interval in steps")->capture_default_str();
  train->add_flag("--dump-config", dump_config, "echo the resolved config atop the metrics CSV");
  train->add_flag("--wallclock", wallclock, "record elapsed seconds (otherwise 0)");

  Flags gen_flags;
  int gen_count = 1;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen", "write task samples as JSON lines");
  add_task_flags(gen, gen_flags);
  gen->add_option("--count", gen_count, "number of samples")->capture_default_str();
  gen->add_option("--seed", gen_flags.cfg.seed, "seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output path (default stdout)");

  Flags probe_flags;
  probe_flags.task = "paren";
  std::string probe_checkpoint, probe_out;
  int probe_samples = 64;
  double probe_threshold = 0.7;
  CLI::App* probe = app.add_subcommand("probe-gates", "update-gate activation fractions per step");
  add_task_flags(probe, probe_flags);
  add_model_flags(probe, probe_flags);
  probe->add_option("--checkpoint", probe_checkpoint, "checkpoint written by train")->required();
  probe->add_option("--samples", probe_samples, "sequences to probe")->capture_default_str();
  probe->add_option("--threshold", probe_threshold, "activation threshold")->capture_default_str();
  probe->add_option("--seed", probe_flags.cfg.seed, "seed for the probe sequences")
      ->capture_default_str();
  probe->add_option("--out", probe_out, "CSV path (default stdout)");

  Flags params_flags;
  int input_dim = 1;
  CLI::App* params = app.add_subcommand("params", "print parameter counts of a cell");
  add_model_flags(params, params_flags);
  params->add_option("--input-dim", input_dim, "input dimension d_x")->capture_default_str();

  int gc_instances = 20;
  std::uint64_t gc_seed = GradcheckSuiteOptions{}.seed;
  double gc_tol = 1e-5;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every cell");
  gradcheck->add_option("--instances", gc_instances, "random instances per case")
      ->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "suite seed")->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tol, "maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == train) return cmd_train(train_flags, dump_config, wallclock, out, err);
    if (active == gen) return cmd_gen(gen_flags, gen_count, gen_out, out);
    if (active == probe)
      return cmd_probe(probe_flags, probe_checkpoint, probe_samples, probe_threshold, probe_out,
                       out, err);
    if (active == params) return cmd_params(params_flags, input_dim, out);
    return cmd_gradcheck(gc_instances, gc_seed, gc_tol, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"goru"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace goru
