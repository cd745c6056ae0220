#ifndef GORU_NUMCORE_HPP
#define GORU_NUMCORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace goru {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Thrown for shape mismatches and invalid configurations.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a run produces non-finite values.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

/// Seeded generator used for everything: MT19937-64 with the standard
/// seeding routine. Real and integer draws are derived from raw 64-bit
/// outputs by fixed formulas below (never through std:: distributions,
/// whose algorithms are implementation-defined), so the stream is identical
/// on every platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "Prng::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Independent stream derived from this generator's seed and a tag.
  Prng fork(std::uint64_t tag) const {
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Prng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

template <typename S = double>
Vec<S> rng_uniform(Prng& rng, double lo, double hi, Eigen::Index n) {
  require(lo < hi, "rng_uniform: lo must be < hi");
  Vec<S> out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = static_cast<S>(rng.uniform(lo, hi));
  return out;
}

template <typename S>
Mat<S> rng_uniform_matrix(Prng& rng, double lo, double hi, Eigen::Index rows,
                          Eigen::Index cols) {
  require(lo < hi, "rng_uniform: lo must be < hi");
  Mat<S> out(rows, cols);
  // row-major draw order so the stream does not depend on storage order
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = static_cast<S>(rng.uniform(lo, hi));
  return out;
}

/// W x + b
template <typename DW, typename DX, typename DB>
auto affine(const Eigen::MatrixBase<DW>& W, const Eigen::MatrixBase<DX>& x,
            const Eigen::MatrixBase<DB>& b) {
  require(W.cols() == x.rows() && W.rows() == b.rows() && x.cols() == 1 && b.cols() == 1,
          "affine: dimension mismatch");
  using S = typename DW::Scalar;
  Vec<S> out = W * x + b;
  return out;
}

enum class Activation { sigmoid, tanh, relu, modrelu };

// Elementwise activations on Eigen arrays / matrices. modReLU is the real
// specialization sign(v) * relu(|v| + b), zero at v == 0.

template <typename D>
auto sigmoid(const Eigen::MatrixBase<D>& v) {
  using S = typename D::Scalar;
  return (S(1) / (S(1) + (-v.array()).exp())).matrix();
}

template <typename D>
auto tanh(const Eigen::MatrixBase<D>& v) {
  return v.array().tanh().matrix();
}

template <typename D>
auto relu(const Eigen::MatrixBase<D>& v) {
  using S = typename D::Scalar;
  return v.array().max(S(0)).matrix();
}

template <typename S>
inline S modrelu_scalar(S v, S b) {
  using std::abs;
  if (v == S(0)) return S(0);
  const S mag = abs(v) + b;
  if (mag <= S(0)) return S(0);
  return v > S(0) ? mag : -mag;
}

/// d modrelu / dv: 1 on the active region, 0 elsewhere (including kinks).
template <typename S>
inline S modrelu_dv(S v, S b) {
  using std::abs;
  return (v != S(0) && abs(v) + b > S(0)) ? S(1) : S(0);
}

/// d modrelu / db: sign(v) on the active region.
template <typename S>
inline S modrelu_db(S v, S b) {
  using std::abs;
  if (v == S(0) || abs(v) + b <= S(0)) return S(0);
  return v > S(0) ? S(1) : S(-1);
}

/// modReLU applied to every row of a batch (rows = samples, cols = units).
template <typename D, typename DB>
auto modrelu(const Eigen::MatrixBase<D>& v, const Eigen::MatrixBase<DB>& bias) {
  using S = typename D::Scalar;
  require(bias.size() == v.cols(), "modrelu: bias length must match units");
  Mat<S> out(v.rows(), v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) out(i, j) = modrelu_scalar(v(i, j), bias(j));
  return out;
}

/// Vector-level entry: applies `kind` elementwise. `bias` is required for
/// modrelu and rejected otherwise.
template <typename S>
Vec<S> activation(Activation kind, const Vec<S>& v, const Vec<S>* bias = nullptr) {
  require((kind == Activation::modrelu) == (bias != nullptr),
          "activation: bias must be given iff kind is modrelu");
  switch (kind) {
    case Activation::sigmoid: return sigmoid(v);
    case Activation::tanh: return goru::tanh(v);
    case Activation::relu: return relu(v);
    case Activation::modrelu: {
      require(bias->size() == v.size(), "activation: modrelu bias length mismatch");
      Vec<S> out(v.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = modrelu_scalar(v[i], (*bias)[i]);
      return out;
    }
  }
  throw ConfigError("activation: unknown kind");
}

/// Derivative with respect to the input, elementwise. For modrelu this is
/// d/dv; use modrelu_db for the bias path.
template <typename S>
Vec<S> activation_derivative(Activation kind, const Vec<S>& v, const Vec<S>* bias = nullptr) {
  require((kind == Activation::modrelu) == (bias != nullptr),
          "activation_derivative: bias must be given iff kind is modrelu");
  switch (kind) {
    case Activation::sigmoid: {
      Vec<S> s = sigmoid(v);
      return (s.array() * (S(1) - s.array())).matrix();
    }
    case Activation::tanh: {
      Vec<S> t = goru::tanh(v);
      return (S(1) - t.array().square()).matrix();
    }
    case Activation::relu: return (v.array() > S(0)).template cast<S>().matrix();
    case Activation::modrelu: {
      Vec<S> out(v.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = modrelu_dv(v[i], (*bias)[i]);
      return out;
    }
  }
  throw ConfigError("activation_derivative: unknown kind");
}

template <typename D>
bool all_finite(const Eigen::MatrixBase<D>& m) {
  return m.allFinite();
}

}  // namespace goru

#endif  // GORU_NUMCORE_HPP
