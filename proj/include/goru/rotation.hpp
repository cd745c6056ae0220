#ifndef GORU_ROTATION_HPP
#define GORU_ROTATION_HPP

#include "goru/numcore.hpp"

#include <numbers>
#include <string>
#include <vector>

namespace goru {

enum class LayoutKind { full, fft, custom };

/// Pairing structure of a rotation plan. `layers` is only read for custom:
/// the first `layers` layers of the full (alternating) pattern.
struct Layout {
  LayoutKind kind = LayoutKind::full;
  int layers = 0;

  bool operator==(const Layout&) const = default;
};

std::string to_string(const Layout& layout);
Layout parse_layout(const std::string& text);

struct RotationPair {
  int i;
  int j;
};

/// Orthogonal matrix U stored as layers of disjoint plane rotations. Each
/// pair (i, j) in a layer owns one angle; angles are stored layer by layer.
/// U = L_{last} * ... * L_1, i.e. layer 0 is applied first.
template <typename S>
struct RotationPlan {
  int dim = 0;
  Layout layout;
  std::vector<std::vector<RotationPair>> layers;
  Vec<S> angles;

  Eigen::Index num_angles() const { return angles.size(); }

  /// Same structure, angles set to zero (used as a gradient accumulator).
  RotationPlan zeros_like() const {
    RotationPlan out = *this;
    out.angles.setZero();
    return out;
  }

  template <typename T>
  RotationPlan<T> cast() const {
    RotationPlan<T> out;
    out.dim = dim;
    out.layout = layout;
    out.layers = layers;
    out.angles = angles.template cast<T>();
    return out;
  }
};

/// Pairing structure only; angles zero.
std::vector<std::vector<RotationPair>> make_pairing(int dim, const Layout& layout);

template <typename S>
RotationPlan<S> plan_structure(int dim, const Layout& layout) {
  RotationPlan<S> plan;
  plan.dim = dim;
  plan.layout = layout;
  plan.layers = make_pairing(dim, layout);
  Eigen::Index n = 0;
  for (const auto& layer : plan.layers) n += static_cast<Eigen::Index>(layer.size());
  plan.angles = Vec<S>::Zero(n);
  return plan;
}

/// New plan with angles drawn uniformly from [-pi, pi).
template <typename S>
RotationPlan<S> plan_new(int dim, const Layout& layout, Prng& rng) {
  RotationPlan<S> plan = plan_structure<S>(dim, layout);
  plan.angles = rng_uniform<S>(rng, -std::numbers::pi, std::numbers::pi, plan.angles.size());
  return plan;
}

/// Cached cos/sin of every angle.
template <typename S>
struct RotationTrig {
  Vec<S> cos;
  Vec<S> sin;

  RotationTrig() = default;
  explicit RotationTrig(const RotationPlan<S>& plan)
      : cos(plan.angles.array().cos().matrix()), sin(plan.angles.array().sin().matrix()) {}
};

namespace detail {

// Column kernels; callers pass distinct columns of a column-major matrix.
template <typename S>
inline void rotate_pair(S* __restrict a, S* __restrict b, Eigen::Index n, S c, S s) {
  for (Eigen::Index r = 0; r < n; ++r) {
    const S xa = a[r], xb = b[r];
    a[r] = c * xa - s * xb;
    b[r] = s * xa + c * xb;
  }
}

template <typename S>
inline S unrotate_pair_with_grad(S* __restrict ya, S* __restrict yb, S* __restrict ga,
                                 S* __restrict gb, Eigen::Index n, S c, S s) {
  // fixed lane-wise partial sums keep the reduction vectorizable and the
  // summation order independent of the compiler
  constexpr int lanes = 16;
  S part[lanes] = {};
  Eigen::Index r = 0;
  for (; r + lanes <= n; r += lanes) {
    for (int l = 0; l < lanes; ++l) {
      const S y0 = ya[r + l], y1 = yb[r + l], g0 = ga[r + l], g1 = gb[r + l];
      part[l] += g1 * y0 - g0 * y1;
      ya[r + l] = c * y0 + s * y1;
      yb[r + l] = -s * y0 + c * y1;
      ga[r + l] = c * g0 + s * g1;
      gb[r + l] = -s * g0 + c * g1;
    }
  }
  for (; r < n; ++r) {
    const S y0 = ya[r], y1 = yb[r], g0 = ga[r], g1 = gb[r];
    part[0] += g1 * y0 - g0 * y1;
    ya[r] = c * y0 + s * y1;
    yb[r] = -s * y0 + c * y1;
    ga[r] = c * g0 + s * g1;
    gb[r] = -s * g0 + c * g1;
  }
  S acc = 0;
  for (int l = 0; l < lanes; ++l) acc += part[l];
  return acc;
}

}  // namespace detail

/// Applies U in place to every row of `x` (rows = samples, cols = dim).
template <typename S, typename D>
void apply_inplace(const RotationPlan<S>& plan, const RotationTrig<S>& trig,
                   Eigen::MatrixBase<D>& x) {
  require(x.cols() == plan.dim, "rotation apply: dimension mismatch");
  Eigen::Index k = 0;
  for (const auto& layer : plan.layers) {
    for (const auto& p : layer) {
      const S c = trig.cos[k], s = trig.sin[k];
      ++k;
      detail::rotate_pair(&x.derived().coeffRef(0, p.i), &x.derived().coeffRef(0, p.j), x.rows(), c, s);
    }
  }
}

/// Applies U^T in place (the inverse).
template <typename S, typename D>
void apply_transpose_inplace(const RotationPlan<S>& plan, const RotationTrig<S>& trig,
                             Eigen::MatrixBase<D>& x) {
  require(x.cols() == plan.dim, "rotation apply: dimension mismatch");
  Eigen::Index k = plan.num_angles();
  for (auto layer = plan.layers.rbegin(); layer != plan.layers.rend(); ++layer) {
    k -= static_cast<Eigen::Index>(layer->size());
    Eigen::Index kk = k;
    for (const auto& p : *layer) {
      const S c = trig.cos[kk], s = trig.sin[kk];
      ++kk;
      detail::rotate_pair(&x.derived().coeffRef(0, p.i), &x.derived().coeffRef(0, p.j), x.rows(), c, -s);
    }
  }
}

/// U x for a single vector.
template <typename S, typename D>
Vec<S> apply(const RotationPlan<S>& plan, const Eigen::MatrixBase<D>& x) {
  require(x.cols() == 1 && x.size() == plan.dim, "rotation apply: dimension mismatch");
  Mat<S> row = x.transpose();
  apply_inplace(plan, RotationTrig<S>(plan), row);
  return row.transpose();
}

/// Dense U, built by rotating the rows of the identity: row r of I*U^T is
/// (U e_r)^T, so we apply U to each basis vector and transpose.
template <typename S>
Mat<S> to_dense(const RotationPlan<S>& plan) {
  Mat<S> basis = Mat<S>::Identity(plan.dim, plan.dim);
  apply_inplace(plan, RotationTrig<S>(plan), basis);
  return basis.transpose();
}

/// Reverse pass through U given its output `y` (rows = samples). On return
/// `y` has been unwound to the input x, `grad` holds U^T grad, and
/// per-angle gradients summed over rows are added to `grad_angles`.
///
/// For one rotation R(t), dR/dt x = J R x with J = [[0,-1],[1,0]], so the
/// angle gradient only needs the layer output: g_j * y_i - g_i * y_j.
template <typename S, typename DY, typename DG>
void rotation_backward_from_output(const RotationPlan<S>& plan, const RotationTrig<S>& trig,
                                   Eigen::MatrixBase<DY>& y, Eigen::MatrixBase<DG>& grad,
                                   Vec<S>& grad_angles) {
  require(y.cols() == plan.dim && grad.cols() == plan.dim && y.rows() == grad.rows(),
          "rotation backward: dimension mismatch");
  require(grad_angles.size() == plan.num_angles(), "rotation backward: angle count mismatch");
  Eigen::Index k = plan.num_angles();
  for (auto layer = plan.layers.rbegin(); layer != plan.layers.rend(); ++layer) {
    k -= static_cast<Eigen::Index>(layer->size());
    Eigen::Index kk = k;
    for (const auto& p : *layer) {
      const S c = trig.cos[kk], s = trig.sin[kk];
      grad_angles[kk] += detail::unrotate_pair_with_grad(
          &y.derived().coeffRef(0, p.i), &y.derived().coeffRef(0, p.j),
          &grad.derived().coeffRef(0, p.i), &grad.derived().coeffRef(0, p.j), y.rows(), c, s);
      ++kk;
    }
  }
}

template <typename S>
struct RotationGrad {
  Vec<S> grad_x;
  Vec<S> grad_angles;
};

/// Gradients of grad_y . (U x) with respect to x and every angle.
template <typename S, typename DX, typename DG>
RotationGrad<S> rotation_backward(const RotationPlan<S>& plan, const Eigen::MatrixBase<DX>& x,
                                  const Eigen::MatrixBase<DG>& grad_y) {
  require(x.cols() == 1 && grad_y.cols() == 1 && x.size() == plan.dim && grad_y.size() == plan.dim,
          "rotation backward: dimension mismatch");
  const RotationTrig<S> trig(plan);
  Mat<S> y = x.transpose();
  apply_inplace(plan, trig, y);
  Mat<S> g = grad_y.transpose();
  RotationGrad<S> out;
  out.grad_angles = Vec<S>::Zero(plan.num_angles());
  rotation_backward_from_output(plan, trig, y, g, out.grad_angles);
  out.grad_x = g.transpose();
  return out;
}

}  // namespace goru

#endif  // GORU_ROTATION_HPP
