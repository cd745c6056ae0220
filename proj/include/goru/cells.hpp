#ifndef GORU_CELLS_HPP
#define GORU_CELLS_HPP

#include "goru/numcore.hpp"
#include "goru/rotation.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace goru {

enum class CellKind { vanilla, gru, lstm, ortho_rnn, goru };

std::string to_string(CellKind kind);
/// Accepts the canonical names plus "eurnn" / "ortho" for ortho_rnn.
CellKind parse_cell_kind(const std::string& text);

struct CellConfig {
  CellKind kind = CellKind::goru;
  int d_x = 1;
  int d_h = 1;
  bool disable_reset = false;   // goru only: r == 1
  bool disable_update = false;  // goru only: z == 0
  Layout layout;                // ortho_rnn / goru only
  double gate_bias_init = 0.0;

  bool has_rotation() const { return kind == CellKind::ortho_rnn || kind == CellKind::goru; }
  bool has_update_gate() const {
    return kind == CellKind::gru || (kind == CellKind::goru && !disable_update);
  }
  bool has_reset_gate() const {
    return kind == CellKind::gru || (kind == CellKind::goru && !disable_reset);
  }
  bool has_cell_memory() const { return kind == CellKind::lstm; }
};

/// Throws ConfigError on invalid combinations.
void validate(const CellConfig& config);

struct ParamCount {
  std::int64_t total = 0;
  std::int64_t hidden_to_hidden = 0;
};

/// Recurrent-cell parameters only (the readout is not included).
/// hidden_to_hidden counts weights on h -> h paths: W_h blocks, the hidden
/// columns of gate matrices, and rotation angles.
ParamCount param_count(const CellConfig& config);

/// All weights of one cell. Which members are populated depends on kind:
///   vanilla   W_h, W_x, b
///   gru       W_z, W_r (d_h x (d_h + d_x), acting on [h, x]), W_x, W_h, b_z, b_r, b_h
///   lstm      W_i, W_f, W_o, W_g (d_h x (d_h + d_x)), b_i, b_f, b_o, b_g
///   ortho_rnn U, W_x, b_h (modReLU bias)
///   goru      U, W_x, W_z, W_r (d_h x d_h), W_zx, W_rx (d_h x d_x), b_z, b_r, b_h
/// Ablated GORU gates leave their members empty.
template <typename S>
struct CellParams {
  CellConfig config;
  Mat<S> W_h, W_x, W_z, W_r, W_zx, W_rx, W_i, W_f, W_o, W_g;
  Vec<S> b, b_z, b_r, b_h, b_i, b_f, b_o, b_g;
  RotationPlan<S> U;

  /// Calls f(name, tensor) for every live tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  CellParams zeros_like() const {
    CellParams out = *this;
    out.visit([](std::string_view, auto& t) { t.setZero(); });
    return out;
  }

  template <typename T>
  CellParams<T> cast() const {
    CellParams<T> out;
    out.config = config;
    out.U = U.template cast<T>();
#define GORU_CAST_MEMBER(m) out.m = m.template cast<T>();
    GORU_CAST_MEMBER(W_h) GORU_CAST_MEMBER(W_x) GORU_CAST_MEMBER(W_z) GORU_CAST_MEMBER(W_r)
    GORU_CAST_MEMBER(W_zx) GORU_CAST_MEMBER(W_rx) GORU_CAST_MEMBER(W_i) GORU_CAST_MEMBER(W_f)
    GORU_CAST_MEMBER(W_o) GORU_CAST_MEMBER(W_g) GORU_CAST_MEMBER(b) GORU_CAST_MEMBER(b_z)
    GORU_CAST_MEMBER(b_r) GORU_CAST_MEMBER(b_h) GORU_CAST_MEMBER(b_i) GORU_CAST_MEMBER(b_f)
    GORU_CAST_MEMBER(b_o) GORU_CAST_MEMBER(b_g)
#undef GORU_CAST_MEMBER
    return out;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& p, F& f) {
    const CellConfig& c = p.config;
    switch (c.kind) {
      case CellKind::vanilla:
        f("W_h", p.W_h); f("W_x", p.W_x); f("b", p.b);
        break;
      case CellKind::gru:
        f("W_z", p.W_z); f("W_r", p.W_r); f("W_x", p.W_x); f("W_h", p.W_h);
        f("b_z", p.b_z); f("b_r", p.b_r); f("b_h", p.b_h);
        break;
      case CellKind::lstm:
        f("W_i", p.W_i); f("W_f", p.W_f); f("W_o", p.W_o); f("W_g", p.W_g);
        f("b_i", p.b_i); f("b_f", p.b_f); f("b_o", p.b_o); f("b_g", p.b_g);
        break;
      case CellKind::ortho_rnn:
        f("U.angles", p.U.angles); f("W_x", p.W_x); f("b_h", p.b_h);
        break;
      case CellKind::goru:
        f("U.angles", p.U.angles); f("W_x", p.W_x);
        if (!c.disable_update) { f("W_z", p.W_z); f("W_zx", p.W_zx); }
        if (!c.disable_reset) { f("W_r", p.W_r); f("W_rx", p.W_rx); }
        if (!c.disable_update) f("b_z", p.b_z);
        if (!c.disable_reset) f("b_r", p.b_r);
        f("b_h", p.b_h);
        break;
    }
  }
};

/// Batched hidden state: rows are samples, columns are units. `c` is the
/// LSTM cell memory and stays empty for other kinds.
template <typename S>
struct CellState {
  Mat<S> h;
  Mat<S> c;

  static CellState zeros(const CellConfig& config, Eigen::Index batch) {
    CellState s;
    s.h = Mat<S>::Zero(batch, config.d_h);
    if (config.has_cell_memory()) s.c = Mat<S>::Zero(batch, config.d_h);
    return s;
  }
};

/// Per-step cache for the backward pass.
template <typename S>
struct Tape {
  Mat<S> x, h, c;          // step inputs
  Mat<S> z, r;             // gate activations (gru / goru)
  Mat<S> u;                // U h (ortho / goru) or W_h h (gru)
  Mat<S> pre, cand;        // candidate pre-activation and activation
  Mat<S> i, f, o, g, tc;   // lstm gates and tanh(c')
  Mat<S> h_next;           // vanilla: tanh output
};

/// Dense init: Xavier-uniform, biases zero, gate biases gate_bias_init
/// (b_z, b_r for gru/goru; b_f for lstm); angles uniform in [-pi, pi).
template <typename S>
CellParams<S> cell_init(const CellConfig& config, Prng& rng);

namespace detail {

template <typename S>
Mat<S> xavier(Prng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return rng_uniform_matrix<S>(rng, -s, s, rows, cols);
}

template <typename S, typename D>
void add_bias_rows(Eigen::MatrixBase<D>& m, const Vec<S>& bias) {
  m.rowwise() += bias.transpose();
}

template <typename D>
void sigmoid_inplace(Eigen::MatrixBase<D>& m) {
  using S = typename D::Scalar;
  m = (S(1) / (S(1) + (-m.array()).exp())).matrix();
}

}  // namespace detail

template <typename S>
CellParams<S> cell_init(const CellConfig& config, Prng& rng) {
  validate(config);
  const int dh = config.d_h, dx = config.d_x;
  const S gb = static_cast<S>(config.gate_bias_init);
  CellParams<S> p;
  p.config = config;
  using detail::xavier;
  switch (config.kind) {
    case CellKind::vanilla:
      p.W_h = xavier<S>(rng, dh, dh);
      p.W_x = xavier<S>(rng, dh, dx);
      p.b = Vec<S>::Zero(dh);
      break;
    case CellKind::gru:
      p.W_z = xavier<S>(rng, dh, dh + dx);
      p.W_r = xavier<S>(rng, dh, dh + dx);
      p.W_x = xavier<S>(rng, dh, dx);
      p.W_h = xavier<S>(rng, dh, dh);
      p.b_z = Vec<S>::Constant(dh, gb);
      p.b_r = Vec<S>::Constant(dh, gb);
      p.b_h = Vec<S>::Zero(dh);
      break;
    case CellKind::lstm:
      p.W_i = xavier<S>(rng, dh, dh + dx);
      p.W_f = xavier<S>(rng, dh, dh + dx);
      p.W_o = xavier<S>(rng, dh, dh + dx);
      p.W_g = xavier<S>(rng, dh, dh + dx);
      p.b_i = Vec<S>::Zero(dh);
      p.b_f = Vec<S>::Constant(dh, gb);
      p.b_o = Vec<S>::Zero(dh);
      p.b_g = Vec<S>::Zero(dh);
      break;
    case CellKind::ortho_rnn:
      p.U = plan_new<S>(dh, config.layout, rng);
      p.W_x = xavier<S>(rng, dh, dx);
      p.b_h = Vec<S>::Zero(dh);
      break;
    case CellKind::goru:
      p.U = plan_new<S>(dh, config.layout, rng);
      p.W_x = xavier<S>(rng, dh, dx);
      if (!config.disable_update) {
        p.W_z = xavier<S>(rng, dh, dh);
        p.W_zx = xavier<S>(rng, dh, dx);
        p.b_z = Vec<S>::Constant(dh, gb);
      }
      if (!config.disable_reset) {
        p.W_r = xavier<S>(rng, dh, dh);
        p.W_rx = xavier<S>(rng, dh, dx);
        p.b_r = Vec<S>::Constant(dh, gb);
      }
      p.b_h = Vec<S>::Zero(dh);
      break;
  }
  return p;
}

/// Forward/backward evaluator bound to one parameter set. Construction
/// caches the rotation trig tables, so build one per parameter update and
/// reuse it across the time steps of a sequence.
template <typename S>
class CellKernel {
 public:
  explicit CellKernel(const CellParams<S>& params) : p_(params) {
    validate(p_.config);
    if (p_.config.has_rotation()) trig_ = RotationTrig<S>(p_.U);
  }

  const CellConfig& config() const { return p_.config; }

  void forward(const CellState<S>& state, const Mat<S>& x, CellState<S>& next,
               Tape<S>& tape) const {
    const CellConfig& c = p_.config;
    require(x.cols() == c.d_x && state.h.cols() == c.d_h && x.rows() == state.h.rows(),
            "cell_forward: shape mismatch");
    require(!c.has_cell_memory() || (state.c.rows() == state.h.rows() && state.c.cols() == c.d_h),
            "cell_forward: lstm state needs cell memory");
    const Mat<S>& H = state.h;
    tape.x = x;
    tape.h = H;
    const int dh = c.d_h, dx = c.d_x;
    switch (c.kind) {
      case CellKind::vanilla: {
        Mat<S> a = H * p_.W_h.transpose() + x * p_.W_x.transpose();
        detail::add_bias_rows(a, p_.b);
        tape.h_next = a.array().tanh().matrix();
        next.h = tape.h_next;
        break;
      }
      case CellKind::gru: {
        tape.z = H * p_.W_z.leftCols(dh).transpose() + x * p_.W_z.rightCols(dx).transpose();
        detail::add_bias_rows(tape.z, p_.b_z);
        detail::sigmoid_inplace(tape.z);
        tape.r = H * p_.W_r.leftCols(dh).transpose() + x * p_.W_r.rightCols(dx).transpose();
        detail::add_bias_rows(tape.r, p_.b_r);
        detail::sigmoid_inplace(tape.r);
        tape.u = H * p_.W_h.transpose();
        tape.pre = x * p_.W_x.transpose();
        tape.pre.array() += tape.r.array() * tape.u.array();
        detail::add_bias_rows(tape.pre, p_.b_h);
        tape.cand = tape.pre.array().tanh().matrix();
        next.h = (tape.z.array() * H.array() + (S(1) - tape.z.array()) * tape.cand.array()).matrix();
        break;
      }
      case CellKind::lstm: {
        auto gate = [&](const Mat<S>& W, const Vec<S>& bias) {
          Mat<S> a = H * W.leftCols(dh).transpose() + x * W.rightCols(dx).transpose();
          detail::add_bias_rows(a, bias);
          return a;
        };
        tape.c = state.c;
        tape.i = gate(p_.W_i, p_.b_i);
        detail::sigmoid_inplace(tape.i);
        tape.f = gate(p_.W_f, p_.b_f);
        detail::sigmoid_inplace(tape.f);
        tape.o = gate(p_.W_o, p_.b_o);
        detail::sigmoid_inplace(tape.o);
        tape.g = gate(p_.W_g, p_.b_g).array().tanh().matrix();
        next.c = (tape.f.array() * state.c.array() + tape.i.array() * tape.g.array()).matrix();
        tape.tc = next.c.array().tanh().matrix();
        next.h = (tape.o.array() * tape.tc.array()).matrix();
        break;
      }
      case CellKind::ortho_rnn: {
        tape.u = H;
        apply_inplace(p_.U, trig_, tape.u);
        tape.pre = tape.u + x * p_.W_x.transpose();
        tape.cand = modrelu(tape.pre, p_.b_h);
        next.h = tape.cand;
        break;
      }
      case CellKind::goru: {
        if (!c.disable_update) {
          tape.z = H * p_.W_z.transpose() + x * p_.W_zx.transpose();
          detail::add_bias_rows(tape.z, p_.b_z);
          detail::sigmoid_inplace(tape.z);
        }
        if (!c.disable_reset) {
          tape.r = H * p_.W_r.transpose() + x * p_.W_rx.transpose();
          detail::add_bias_rows(tape.r, p_.b_r);
          detail::sigmoid_inplace(tape.r);
        }
        tape.u = H;
        apply_inplace(p_.U, trig_, tape.u);
        tape.pre = x * p_.W_x.transpose();
        if (c.disable_reset)
          tape.pre += tape.u;
        else
          tape.pre.array() += tape.r.array() * tape.u.array();
        tape.cand = modrelu(tape.pre, p_.b_h);
        if (c.disable_update)
          next.h = tape.cand;
        else
          next.h =
              (tape.z.array() * H.array() + (S(1) - tape.z.array()) * tape.cand.array()).matrix();
        break;
      }
    }
  }

  /// Accumulates (+=) parameter gradients into `grads`; writes the gradient
  /// with respect to the previous state into `grad_prev` and, when non-null,
  /// the input gradient into `grad_x`. `grad_next.c` may be empty for lstm
  /// (treated as zero).
  void backward(const Tape<S>& tape, const CellState<S>& grad_next, CellParams<S>& grads,
                CellState<S>& grad_prev, Mat<S>* grad_x) const {
    const CellConfig& c = p_.config;
    const Mat<S>& G = grad_next.h;
    const Mat<S>& H = tape.h;
    const Mat<S>& X = tape.x;
    require(G.rows() == H.rows() && G.cols() == c.d_h, "cell_backward: tape/gradient mismatch");
    require(grads.config.kind == c.kind, "cell_backward: gradient container mismatch");
    const int dh = c.d_h, dx = c.d_x;
    Mat<S> dX = Mat<S>::Zero(X.rows(), dx);
    Mat<S> dH;
    switch (c.kind) {
      case CellKind::vanilla: {
        Mat<S> da = (G.array() * (S(1) - tape.h_next.array().square())).matrix();
        grads.W_h.noalias() += da.transpose() * H;
        grads.W_x.noalias() += da.transpose() * X;
        grads.b += da.colwise().sum().transpose();
        dH = da * p_.W_h;
        if (grad_x) dX.noalias() += da * p_.W_x;
        break;
      }
      case CellKind::gru: {
        Mat<S> dz = (G.array() * (H.array() - tape.cand.array())).matrix();
        Mat<S> dpre = (G.array() * (S(1) - tape.z.array()) *
                       (S(1) - tape.cand.array().square())).matrix();
        dH = (G.array() * tape.z.array()).matrix();
        grads.b_h += dpre.colwise().sum().transpose();
        grads.W_x.noalias() += dpre.transpose() * X;
        if (grad_x) dX.noalias() += dpre * p_.W_x;
        Mat<S> du = (dpre.array() * tape.r.array()).matrix();
        Mat<S> dr = (dpre.array() * tape.u.array()).matrix();
        grads.W_h.noalias() += du.transpose() * H;
        dH.noalias() += du * p_.W_h;
        Mat<S> daz = (dz.array() * tape.z.array() * (S(1) - tape.z.array())).matrix();
        Mat<S> dar = (dr.array() * tape.r.array() * (S(1) - tape.r.array())).matrix();
        concat_gate_backward(daz, H, X, p_.W_z, grads.W_z, grads.b_z, dH, dX, grad_x != nullptr);
        concat_gate_backward(dar, H, X, p_.W_r, grads.W_r, grads.b_r, dH, dX, grad_x != nullptr);
        break;
      }
      case CellKind::lstm: {
        Mat<S> dc = (G.array() * tape.o.array() * (S(1) - tape.tc.array().square())).matrix();
        if (grad_next.c.size() != 0) dc += grad_next.c;
        Mat<S> dao = (G.array() * tape.tc.array() * tape.o.array() * (S(1) - tape.o.array())).matrix();
        Mat<S> dai = (dc.array() * tape.g.array() * tape.i.array() * (S(1) - tape.i.array())).matrix();
        Mat<S> daf = (dc.array() * tape.c.array() * tape.f.array() * (S(1) - tape.f.array())).matrix();
        Mat<S> dag = (dc.array() * tape.i.array() * (S(1) - tape.g.array().square())).matrix();
        grad_prev.c = (dc.array() * tape.f.array()).matrix();
        dH = Mat<S>::Zero(H.rows(), dh);
        const bool gx = grad_x != nullptr;
        concat_gate_backward(dai, H, X, p_.W_i, grads.W_i, grads.b_i, dH, dX, gx);
        concat_gate_backward(daf, H, X, p_.W_f, grads.W_f, grads.b_f, dH, dX, gx);
        concat_gate_backward(dao, H, X, p_.W_o, grads.W_o, grads.b_o, dH, dX, gx);
        concat_gate_backward(dag, H, X, p_.W_g, grads.W_g, grads.b_g, dH, dX, gx);
        break;
      }
      case CellKind::ortho_rnn: {
        Mat<S> dpre(G.rows(), dh);
        modrelu_backward(tape.pre, G, dpre, grads.b_h);
        grads.W_x.noalias() += dpre.transpose() * X;
        if (grad_x) dX.noalias() += dpre * p_.W_x;
        Mat<S> y = tape.u;
        rotation_backward_from_output(p_.U, trig_, y, dpre, grads.U.angles);
        dH = std::move(dpre);
        break;
      }
      case CellKind::goru: {
        Mat<S> dcand;
        if (c.disable_update) {
          dcand = G;
          dH = Mat<S>::Zero(H.rows(), dh);
        } else {
          dcand = (G.array() * (S(1) - tape.z.array())).matrix();
          dH = (G.array() * tape.z.array()).matrix();
        }
        Mat<S> dpre(G.rows(), dh);
        modrelu_backward(tape.pre, dcand, dpre, grads.b_h);
        grads.W_x.noalias() += dpre.transpose() * X;
        if (grad_x) dX.noalias() += dpre * p_.W_x;
        Mat<S> du;
        if (c.disable_reset) {
          du = dpre;
        } else {
          du = (dpre.array() * tape.r.array()).matrix();
          Mat<S> dar = (dpre.array() * tape.u.array() * tape.r.array() *
                        (S(1) - tape.r.array())).matrix();
          split_gate_backward(dar, H, X, p_.W_r, p_.W_rx, grads.W_r, grads.W_rx, grads.b_r, dH, dX,
                              grad_x != nullptr);
        }
        if (!c.disable_update) {
          Mat<S> daz = (G.array() * (H.array() - tape.cand.array()) * tape.z.array() *
                        (S(1) - tape.z.array())).matrix();
          split_gate_backward(daz, H, X, p_.W_z, p_.W_zx, grads.W_z, grads.W_zx, grads.b_z, dH, dX,
                              grad_x != nullptr);
        }
        Mat<S> y = tape.u;
        rotation_backward_from_output(p_.U, trig_, y, du, grads.U.angles);
        dH += du;
        break;
      }
    }
    grad_prev.h = std::move(dH);
    if (grad_x) *grad_x = std::move(dX);
  }

 private:
  static void concat_gate_backward(const Mat<S>& da, const Mat<S>& H, const Mat<S>& X,
                                   const Mat<S>& W, Mat<S>& gW, Vec<S>& gb, Mat<S>& dH,
                                   Mat<S>& dX, bool want_x) {
    const Eigen::Index dh = H.cols(), dx = X.cols();
    gW.leftCols(dh).noalias() += da.transpose() * H;
    gW.rightCols(dx).noalias() += da.transpose() * X;
    gb += da.colwise().sum().transpose();
    dH.noalias() += da * W.leftCols(dh);
    if (want_x) dX.noalias() += da * W.rightCols(dx);
  }

  static void split_gate_backward(const Mat<S>& da, const Mat<S>& H, const Mat<S>& X,
                                  const Mat<S>& Wh, const Mat<S>& Wx, Mat<S>& gWh, Mat<S>& gWx,
                                  Vec<S>& gb, Mat<S>& dH, Mat<S>& dX, bool want_x) {
    gWh.noalias() += da.transpose() * H;
    gWx.noalias() += da.transpose() * X;
    gb += da.colwise().sum().transpose();
    dH.noalias() += da * Wh;
    if (want_x) dX.noalias() += da * Wx;
  }

  // dpre = upstream * d/dpre modrelu; bias gradient accumulated into gb.
  void modrelu_backward(const Mat<S>& pre, const Mat<S>& upstream, Mat<S>& dpre,
                        Vec<S>& gb) const {
    const Vec<S>& bias = p_.b_h;
    for (Eigen::Index j = 0; j < pre.cols(); ++j) {
      S acc = 0;
      const S bj = bias[j];
      for (Eigen::Index i = 0; i < pre.rows(); ++i) {
        const S v = pre(i, j);
        const S up = upstream(i, j);
        dpre(i, j) = up * modrelu_dv(v, bj);
        acc += up * modrelu_db(v, bj);
      }
      gb[j] += acc;
    }
  }

  const CellParams<S>& p_;
  RotationTrig<S> trig_;
};

/// One step for a single sample.
template <typename S>
struct StepResult {
  CellState<S> next;
  Tape<S> tape;
};

template <typename S, typename D>
StepResult<S> cell_forward(const CellParams<S>& params, const CellState<S>& state,
                           const Eigen::MatrixBase<D>& x) {
  StepResult<S> out;
  CellKernel<S>(params).forward(state, Mat<S>(x), out.next, out.tape);
  return out;
}

template <typename S>
struct CellGrad {
  CellParams<S> params;
  CellState<S> prev;
  Mat<S> x;
};

template <typename S>
CellGrad<S> cell_backward(const CellParams<S>& params, const Tape<S>& tape,
                          const CellState<S>& grad_next) {
  CellGrad<S> out;
  out.params = params.zeros_like();
  CellKernel<S>(params).backward(tape, grad_next, out.params, out.prev, &out.x);
  return out;
}

}  // namespace goru

#endif  // GORU_CELLS_HPP
