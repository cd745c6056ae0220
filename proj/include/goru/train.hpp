#ifndef GORU_TRAIN_HPP
#define GORU_TRAIN_HPP

#include "goru/cells.hpp"

#include <cmath>
#include <map>
#include <span>
#include <type_traits>
#include <string>
#include <vector>

namespace goru {

/// Affine readout shared across time steps: logits = W_o h + b_o, laid out
/// as `heads` consecutive groups of `classes` logits (one softmax per head).
template <typename S>
struct OutputLayer {
  int heads = 1;
  int classes = 1;
  Mat<S> W_o;
  Vec<S> b_o;

  int width() const { return heads * classes; }
};

/// Recurrent cell plus readout. Also used as the gradient container.
template <typename S>
struct Model {
  CellParams<S> cell;
  OutputLayer<S> out;

  const CellConfig& config() const { return cell.config; }

  /// f(name, tensor) over every trainable tensor: cell first, then readout.
  template <typename F>
  void visit(F&& f) {
    cell.visit([&](std::string_view name, auto& t) { f("cell." + std::string(name), t); });
    f(std::string("out.W_o"), out.W_o);
    f(std::string("out.b_o"), out.b_o);
  }
  template <typename F>
  void visit(F&& f) const {
    cell.visit([&](std::string_view name, const auto& t) { f("cell." + std::string(name), t); });
    f(std::string("out.W_o"), out.W_o);
    f(std::string("out.b_o"), out.b_o);
  }

  Model zeros_like() const {
    Model m = *this;
    m.visit([](const std::string&, auto& t) { t.setZero(); });
    return m;
  }

  template <typename T>
  Model<T> cast() const {
    Model<T> m;
    m.cell = cell.template cast<T>();
    m.out.heads = out.heads;
    m.out.classes = out.classes;
    m.out.W_o = out.W_o.template cast<T>();
    m.out.b_o = out.b_o.template cast<T>();
    return m;
  }

  Eigen::Index size() const {
    Eigen::Index n = 0;
    visit([&](const std::string&, const auto& t) { n += t.size(); });
    return n;
  }
};

/// Cell drawn first, then readout (Xavier-uniform, zero bias).
template <typename S>
Model<S> model_init(const CellConfig& config, int heads, int classes, Prng& rng) {
  require(heads >= 1 && classes >= 1, "model_init: heads and classes must be >= 1");
  Model<S> m;
  m.cell = cell_init<S>(config, rng);
  m.out.heads = heads;
  m.out.classes = classes;
  m.out.W_o = detail::xavier<S>(rng, heads * classes, config.d_h);
  m.out.b_o = Vec<S>::Zero(heads * classes);
  return m;
}

// ---------------------------------------------------------------- losses

template <typename S>
struct LossGrad {
  double loss = 0;
  Vec<S> grad;
};

/// -log softmax(logits)[target] in nats, max-shifted.
template <typename S>
LossGrad<S> softmax_xent(const Vec<S>& logits, int target) {
  require(target >= 0 && target < logits.size(), "softmax_xent: target out of range");
  const S mx = logits.maxCoeff();
  Vec<S> e = (logits.array() - mx).exp().matrix();
  const S sum = e.sum();
  LossGrad<S> out;
  out.loss = static_cast<double>(std::log(sum) - (logits[target] - mx));
  out.grad = e / sum;
  out.grad[target] -= S(1);
  return out;
}

/// Mean squared error and its gradient 2 (pred - target) / n.
template <typename S>
LossGrad<S> mse(const Vec<S>& pred, const Vec<S>& target) {
  require(pred.size() == target.size() && pred.size() > 0, "mse: length mismatch");
  LossGrad<S> out;
  const Vec<S> d = pred - target;
  out.loss = static_cast<double>(d.squaredNorm()) / static_cast<double>(d.size());
  out.grad = S(2) * d / static_cast<S>(d.size());
  return out;
}

/// Loss accumulator: double, or S when S is wider.
template <typename S>
using LossScalar = std::conditional_t<(sizeof(S) > sizeof(double)), S, double>;

/// Per-step labels for a batch of sequences. Index order is
/// [step][sample][head]. `mask` weights the loss per (step, sample);
/// `scored` marks which (step, sample) positions count toward accuracy.
struct Targets {
  int steps = 0;
  int batch = 0;
  int heads = 1;
  std::vector<int> labels;
  std::vector<double> mask;
  std::vector<unsigned char> scored;

  int label(int t, int b, int h) const { return labels[(std::size_t(t) * batch + b) * heads + h]; }
  double weight(int t, int b) const { return mask[std::size_t(t) * batch + b]; }
  bool is_scored(int t, int b) const {
    return scored.empty() || scored[std::size_t(t) * batch + b] != 0;
  }
};

/// Softmax cross-entropy over every head of one step. Returns the loss
/// summed over samples (each sample's loss is the head mean times its mask
/// weight); `grad` receives d(sum * scale)/d logits.
template <typename S>
LossScalar<S> step_head_loss(const Mat<S>& logits, const Targets& targets, int t, int classes,
                             LossScalar<S> scale, Mat<S>& grad, long& correct, long& counted) {
  const int heads = targets.heads;
  const Eigen::Index batch = targets.batch;
  grad.resize(logits.rows(), logits.cols());
  Vec<S> weight(batch);
  for (int b = 0; b < batch; ++b) weight[b] = static_cast<S>(targets.weight(t, b) * scale / heads);
  LossScalar<S> total = 0;
  Vec<S> mx, sum;
  for (int h = 0; h < heads; ++h) {
    const auto block = logits.middleCols(h * classes, classes);
    auto gblock = grad.middleCols(h * classes, classes);
    mx = block.rowwise().maxCoeff();
    gblock = (block.colwise() - mx).array().exp().matrix();
    sum = gblock.rowwise().sum();
    for (int b = 0; b < batch; ++b) {
      const int y = targets.label(t, b, h);
      require(y >= 0 && y < classes, "loss: label out of range");
      if (targets.is_scored(t, b)) {
        Eigen::Index arg;
        block.row(b).maxCoeff(&arg);
        correct += (arg == y) ? 1 : 0;
        ++counted;
      }
      const double w = targets.weight(t, b);
      using std::log;
      if (w != 0.0) total += w * static_cast<LossScalar<S>>(log(sum[b]) - (block(b, y) - mx[b])) / heads;
    }
    const Vec<S> coef = (weight.array() / sum.array()).matrix();
    gblock = coef.asDiagonal() * gblock;
    for (int b = 0; b < batch; ++b) gblock(b, targets.label(t, b, h)) -= weight[b];
  }
  return total;
}

// ------------------------------------------------------------ optimizers

enum class OptimizerKind { rmsprop, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double lr = 0.001;
  double decay = 0.9;   // rmsprop
  double beta1 = 0.9;   // adam
  double beta2 = 0.999; // adam
  double eps = 1e-8;
};

template <typename S>
struct ParamRef {
  std::string name;
  std::span<S> value;
  std::span<const S> grad;
};

/// Pairs every tensor of `params` with its gradient, in visit order.
template <typename S>
std::vector<ParamRef<S>> param_refs(Model<S>& params, const Model<S>& grads) {
  std::vector<ParamRef<S>> refs;
  params.visit([&](const std::string& name, auto& t) {
    refs.push_back({name, std::span<S>(t.data(), std::size_t(t.size())), {}});
  });
  std::size_t k = 0;
  grads.visit([&](const std::string& name, const auto& t) {
    require(k < refs.size() && refs[k].name == name &&
                refs[k].value.size() == std::size_t(t.size()),
            "optimizer: gradient tree does not match parameters at '" + name + "'");
    refs[k++].grad = std::span<const S>(t.data(), std::size_t(t.size()));
  });
  require(k == refs.size(), "optimizer: gradient tree is missing tensors");
  return refs;
}

/// RMSProp:  ms <- decay ms + (1 - decay) g^2;  p <- p - lr g / sqrt(ms + eps)
/// Adam:     bias-corrected moments, p <- p - lr m_hat / (sqrt(v_hat) + eps)
/// Accumulators are keyed by tensor name, so the update does not depend on
/// the order in which tensors are presented.
template <typename S>
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings) : settings_(settings) {
    require(settings_.lr > 0, "optimizer: lr must be positive");
    require(settings_.decay >= 0 && settings_.decay < 1, "optimizer: decay must be in [0, 1)");
  }

  const OptimizerSettings& settings() const { return settings_; }
  long steps() const { return t_; }

  void step(std::span<ParamRef<S>> refs) {
    for (const auto& r : refs) {
      for (const S g : r.grad)
        if (!std::isfinite(static_cast<double>(g)))
          throw NumericError("non-finite gradient in parameter '" + r.name + "'");
    }
    ++t_;
    const S lr = static_cast<S>(settings_.lr);
    const S eps = static_cast<S>(settings_.eps);
    for (auto& r : refs) {
      Slots& slot = slots_[r.name];
      const std::size_t n = r.value.size();
      if (slot.first.size() != n) {
        slot.first.assign(n, S(0));
        slot.second.assign(n, S(0));
      }
      if (settings_.kind == OptimizerKind::rmsprop) {
        const S rho = static_cast<S>(settings_.decay);
        for (std::size_t i = 0; i < n; ++i) {
          const S g = r.grad[i];
          S& ms = slot.first[i];
          ms = rho * ms + (S(1) - rho) * g * g;
          r.value[i] -= lr * g / std::sqrt(ms + eps);
        }
      } else {
        const S b1 = static_cast<S>(settings_.beta1), b2 = static_cast<S>(settings_.beta2);
        const S c1 = static_cast<S>(1.0 - std::pow(settings_.beta1, double(t_)));
        const S c2 = static_cast<S>(1.0 - std::pow(settings_.beta2, double(t_)));
        for (std::size_t i = 0; i < n; ++i) {
          const S g = r.grad[i];
          S& m = slot.first[i];
          S& v = slot.second[i];
          m = b1 * m + (S(1) - b1) * g;
          v = b2 * v + (S(1) - b2) * g * g;
          r.value[i] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
        }
      }
    }
  }

  void step(Model<S>& params, const Model<S>& grads) {
    auto refs = param_refs(params, grads);
    step(std::span<ParamRef<S>>(refs));
  }

 private:
  using Slots = std::pair<std::vector<S>, std::vector<S>>;
  OptimizerSettings settings_;
  std::map<std::string, Slots> slots_;
  long t_ = 0;
};

template <typename S>
double global_norm(const Model<S>& grads) {
  double sq = 0;
  grads.visit([&](const std::string&, const auto& t) {
    sq += t.template cast<double>().squaredNorm();
  });
  return std::sqrt(sq);
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename S>
double clip_global_norm(Model<S>& grads, double max_norm) {
  require(max_norm > 0, "clip_global_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    grads.visit([&](const std::string&, auto& t) { t *= scale; });
  }
  return norm;
}

// ------------------------------------------------------------------ BPTT

struct BpttOptions {
  bool compute_grads = true;
  bool record_update_gate = false;
};

template <typename S>
struct BpttResult {
  LossScalar<S> loss = 0;  // mean over mask weight
  long correct = 0;       // argmax hits over scored (step, sample, head)
  long counted = 0;
  Model<S> grads;         // empty unless compute_grads
  CellState<S> final_state;
  std::vector<Mat<S>> update_gate;  // per step, batch x d_h

  double accuracy() const { return counted ? double(correct) / double(counted) : 0.0; }
};

/// Unrolls the cell over `inputs` (one batch x d_x matrix per step) from
/// `initial`, scores every step through the readout, and backpropagates
/// the mean masked loss through the whole unroll.
template <typename S>
BpttResult<S> run_bptt(const Model<S>& model, const std::vector<Mat<S>>& inputs,
                       const Targets& targets, const CellState<S>& initial,
                       const BpttOptions& options = {}) {
  const CellConfig& config = model.config();
  const int steps = static_cast<int>(inputs.size());
  require(steps == targets.steps, "run_bptt: input and target lengths differ");
  require(steps >= 1, "run_bptt: empty sequence");
  require(targets.heads == model.out.heads, "run_bptt: head count mismatch");
  const Eigen::Index batch = targets.batch;
  require(initial.h.rows() == batch, "run_bptt: initial state batch mismatch");
  if (options.record_update_gate)
    require(config.has_update_gate(), "run_bptt: model has no update gate to record");

  double mask_total = 0;
  for (double w : targets.mask) mask_total += w;
  require(mask_total > 0, "run_bptt: mask is empty");
  const LossScalar<S> scale = LossScalar<S>(1) / mask_total;

  const CellKernel<S> kernel(model.cell);
  const int classes = model.out.classes;
  std::vector<Tape<S>> tapes(options.compute_grads ? steps : 1);
  std::vector<Mat<S>> hidden(options.compute_grads ? steps : 0);
  std::vector<Mat<S>> dlogits(options.compute_grads ? steps : 0);

  BpttResult<S> res;
  CellState<S> state = initial;
  CellState<S> next;
  Mat<S> logits, grad;
  LossScalar<S> loss_sum = 0;
  for (int t = 0; t < steps; ++t) {
    require(inputs[t].rows() == batch, "run_bptt: input batch mismatch");
    Tape<S>& tape = tapes[options.compute_grads ? t : 0];
    kernel.forward(state, inputs[t], next, tape);
    if (options.record_update_gate) res.update_gate.push_back(tape.z);
    logits = next.h * model.out.W_o.transpose();
    logits.rowwise() += model.out.b_o.transpose();
    const LossScalar<S> step_loss =
        step_head_loss(logits, targets, t, classes, scale, grad, res.correct, res.counted);
    using std::isfinite;
    if (!isfinite(step_loss))
      throw NumericError("non-finite loss at time step " + std::to_string(t));
    loss_sum += step_loss;
    if (options.compute_grads) {
      hidden[t] = next.h;
      dlogits[t] = grad;
    }
    std::swap(state, next);
  }
  res.loss = loss_sum * scale;
  res.final_state = state;
  if (!options.compute_grads) return res;

  res.grads = model.zeros_like();
  Model<S>& g = res.grads;
  CellState<S> carry, prev;
  carry.h = Mat<S>::Zero(batch, config.d_h);
  for (int t = steps - 1; t >= 0; --t) {
    g.out.W_o.noalias() += dlogits[t].transpose() * hidden[t];
    g.out.b_o += dlogits[t].colwise().sum().transpose();
    carry.h.noalias() += dlogits[t] * model.out.W_o;
    kernel.backward(tapes[t], carry, g.cell, prev, nullptr);
    std::swap(carry, prev);
  }
  return res;
}

/// Loss only, no tapes kept.
template <typename S>
LossScalar<S> sequence_loss(const Model<S>& model, const std::vector<Mat<S>>& inputs,
                     const Targets& targets, const CellState<S>& initial) {
  BpttOptions opt;
  opt.compute_grads = false;
  return run_bptt(model, inputs, targets, initial, opt).loss;
}

}  // namespace goru

#endif  // GORU_TRAIN_HPP
