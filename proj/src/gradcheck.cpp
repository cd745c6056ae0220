#include "goru/gradcheck.hpp"

#include "goru/quad.hpp"

namespace goru {

std::vector<GradcheckCase> gradcheck_cases(int d_x, int d_h) {
  std::vector<GradcheckCase> cases;
  auto add = [&](std::string label, CellKind kind, LayoutKind layout, bool no_reset,
                 bool no_update) {
    CellConfig c;
    c.kind = kind;
    c.d_x = d_x;
    c.d_h = d_h;
    c.layout.kind = layout;
    c.disable_reset = no_reset;
    c.disable_update = no_update;
    cases.push_back({std::move(label), c});
  };
  add("vanilla", CellKind::vanilla, LayoutKind::full, false, false);
  add("gru", CellKind::gru, LayoutKind::full, false, false);
  add("lstm", CellKind::lstm, LayoutKind::full, false, false);
  for (LayoutKind layout : {LayoutKind::full, LayoutKind::fft}) {
    const std::string suffix = layout == LayoutKind::full ? "/full" : "/fft";
    add("ortho_rnn" + suffix, CellKind::ortho_rnn, layout, false, false);
    add("goru" + suffix, CellKind::goru, layout, false, false);
    add("goru-no-reset" + suffix, CellKind::goru, layout, true, false);
    add("goru-no-update" + suffix, CellKind::goru, layout, false, true);
  }
  return cases;
}

namespace {

struct Instance {
  Model<double> model;
  std::vector<Mat<double>> inputs;
  Targets targets;
  CellState<double> initial;
};

Instance draw_instance(const CellConfig& config, const GradcheckSuiteOptions& o, Prng& rng) {
  Instance in;
  in.model = model_init<double>(config, 1, o.classes, rng);
  in.model.visit([&](const std::string& name, auto& t) {
    const auto dot = name.rfind('.');
    if (name.compare(dot + 1, 1, "b") == 0)
      t = rng_uniform<double>(rng, -0.5, 0.5, t.size());
  });
  for (int t = 0; t < o.steps; ++t)
    in.inputs.push_back(rng_uniform_matrix<double>(rng, -1.0, 1.0, o.batch, o.d_x));
  in.targets.steps = o.steps;
  in.targets.batch = o.batch;
  in.targets.heads = 1;
  for (int k = 0; k < o.steps * o.batch; ++k) {
    in.targets.labels.push_back(static_cast<int>(rng.below(std::uint64_t(o.classes))));
    in.targets.mask.push_back(1.0);
  }
  in.initial = CellState<double>::zeros(config, o.batch);
  in.initial.h = rng_uniform_matrix<double>(rng, -0.5, 0.5, o.batch, o.d_h);
  if (config.has_cell_memory())
    in.initial.c = rng_uniform_matrix<double>(rng, -0.5, 0.5, o.batch, o.d_h);
  return in;
}

// Smallest distance of any modReLU argument from either kink (v = 0 and
// |v| + b = 0) over the whole forward pass.
double kink_distance(const Instance& in) {
  const CellConfig& c = in.model.config();
  if (!c.has_rotation()) return INFINITY;
  const CellKernel<double> kernel(in.model.cell);
  CellState<double> state = in.initial, next;
  Tape<double> tape;
  double dist = INFINITY;
  const Vec<double>& b = in.model.cell.b_h;
  for (const auto& x : in.inputs) {
    kernel.forward(state, x, next, tape);
    for (Eigen::Index i = 0; i < tape.pre.rows(); ++i)
      for (Eigen::Index j = 0; j < tape.pre.cols(); ++j) {
        const double v = tape.pre(i, j);
        dist = std::min({dist, std::abs(v), std::abs(std::abs(v) + b[j])});
      }
    std::swap(state, next);
  }
  return dist;
}

// Mean sequence loss of `in` as a function of the flat parameter vector,
// evaluated with scalar type W.
template <typename W>
auto wide_loss(const Instance& in) {
  struct Eval {
    Model<W> probe;
    std::vector<Mat<W>> inputs;
    const Targets* targets;
    CellState<W> initial;
    W operator()(std::span<const double> p) {
      assign_flat(probe, p);
      return sequence_loss(probe, inputs, *targets, initial);
    }
  };
  Eval e{in.model.template cast<W>(), {}, &in.targets, {}};
  for (const auto& x : in.inputs) e.inputs.push_back(x.template cast<W>());
  e.initial.h = in.initial.h.template cast<W>();
  e.initial.c = in.initial.c.template cast<W>();
  return e;
}

}  // namespace

GradcheckCaseResult run_gradcheck_case(const GradcheckCase& c, const GradcheckSuiteOptions& options,
                                       std::uint64_t case_seed) {
  require(options.instances >= 1 && options.steps >= 1, "gradcheck: empty suite");
  GradcheckCaseResult result;
  result.label = c.label;
  result.kind = c.config.kind;
  Prng rng(case_seed);
  while (result.instances < options.instances) {
    Instance in = draw_instance(c.config, options, rng);
    if (kink_distance(in) < options.kink_margin) {
      require(++result.redraws < 1000, "gradcheck: cannot draw an instance away from kinks");
      continue;
    }
    ++result.instances;
    const BpttResult<double> bptt = run_bptt(in.model, in.inputs, in.targets, in.initial);
    const std::vector<double> analytic = flatten(bptt.grads);
    // The reference runs in extended precision at the same (double) parameter
    // values: in double, cancellation in f(p+e) - f(p-e) leaves an absolute
    // error near 1e-10, which swamps entries below 1e-5 given the 1e-8
    // denominator floor. Entries still near the floor are redone in binary128.
    const std::vector<double> point = flatten(in.model);
    std::vector<double> numeric = numeric_gradient(wide_loss<long double>(in), point, options.eps);
    result.entries += static_cast<long>(numeric.size());
    std::vector<double> scratch = point;
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      if (relative_error(analytic[k], numeric[k]) <= options.recheck_above) continue;
      numeric[k] = central_difference(wide_loss<Quad>(in), scratch, k, options.eps);
      ++result.rechecked;
    }
    const GradcheckReport r = compare_gradients(analytic, numeric);
    if (r.max_rel_error >= result.worst) {
      result.worst = r.max_rel_error;
      std::size_t k = 0;
      in.model.visit([&](const std::string& name, const auto& t) {
        if (r.worst_index >= k && r.worst_index < k + std::size_t(t.size())) result.worst_param = name;
        k += std::size_t(t.size());
      });
    }
  }
  return result;
}

std::vector<GradcheckCaseResult> run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  std::vector<GradcheckCaseResult> out;
  Prng root(options.seed);
  std::uint64_t tag = 0;
  for (const auto& c : gradcheck_cases(options.d_x, options.d_h))
    out.push_back(run_gradcheck_case(c, options, root.fork(tag++).seed()));
  return out;
}

}  // namespace goru
