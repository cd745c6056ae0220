#ifndef GORU_QUAD_HPP
#define GORU_QUAD_HPP

#include <Eigen/Core>
#include <quadmath.h>

#include <type_traits>

namespace goru {

/// IEEE binary128 scalar (GCC __float128, software-emulated). Slow; used
/// only to re-evaluate finite differences whose double/extended results sit
/// at the rounding floor.
class Quad {
 public:
  Quad() = default;
  template <typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
  Quad(T x) : v_(static_cast<__float128>(x)) {}

  static Quad raw(__float128 x) {
    Quad q;
    q.v_ = x;
    return q;
  }
  __float128 value() const { return v_; }

  explicit operator double() const { return static_cast<double>(v_); }
  explicit operator long double() const { return static_cast<long double>(v_); }
  explicit operator float() const { return static_cast<float>(v_); }

  Quad operator-() const { return raw(-v_); }
  Quad& operator+=(Quad o) { v_ += o.v_; return *this; }
  Quad& operator-=(Quad o) { v_ -= o.v_; return *this; }
  Quad& operator*=(Quad o) { v_ *= o.v_; return *this; }
  Quad& operator/=(Quad o) { v_ /= o.v_; return *this; }

  friend Quad operator+(Quad a, Quad b) { return raw(a.v_ + b.v_); }
  friend Quad operator-(Quad a, Quad b) { return raw(a.v_ - b.v_); }
  friend Quad operator*(Quad a, Quad b) { return raw(a.v_ * b.v_); }
  friend Quad operator/(Quad a, Quad b) { return raw(a.v_ / b.v_); }
  friend bool operator==(Quad a, Quad b) { return a.v_ == b.v_; }
  friend bool operator!=(Quad a, Quad b) { return a.v_ != b.v_; }
  friend bool operator<(Quad a, Quad b) { return a.v_ < b.v_; }
  friend bool operator<=(Quad a, Quad b) { return a.v_ <= b.v_; }
  friend bool operator>(Quad a, Quad b) { return a.v_ > b.v_; }
  friend bool operator>=(Quad a, Quad b) { return a.v_ >= b.v_; }

  friend Quad exp(Quad a) { return raw(expq(a.v_)); }
  friend Quad log(Quad a) { return raw(logq(a.v_)); }
  friend Quad tanh(Quad a) { return raw(tanhq(a.v_)); }
  friend Quad cos(Quad a) { return raw(cosq(a.v_)); }
  friend Quad sin(Quad a) { return raw(sinq(a.v_)); }
  friend Quad sqrt(Quad a) { return raw(sqrtq(a.v_)); }
  friend Quad abs(Quad a) { return raw(fabsq(a.v_)); }
  friend bool isfinite(Quad a) { return finiteq(a.v_) != 0; }
  friend bool isnan(Quad a) { return isnanq(a.v_) != 0; }
  friend bool isinf(Quad a) { return isinfq(a.v_) != 0; }

 private:
  __float128 v_ = 0;
};

}  // namespace goru

namespace Eigen {

template <>
struct NumTraits<goru::Quad> : GenericNumTraits<goru::Quad> {
  using Real = goru::Quad;
  using NonInteger = goru::Quad;
  using Nested = goru::Quad;
  using Literal = goru::Quad;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 10,
    MulCost = 20
  };
  static inline Real epsilon() { return Real::raw(FLT128_EPSILON); }
  static inline Real dummy_precision() { return Real(1e-30); }
  static inline Real highest() { return Real::raw(FLT128_MAX); }
  static inline Real lowest() { return Real::raw(-FLT128_MAX); }
  static inline int digits10() { return FLT128_DIG; }
};

}  // namespace Eigen

#endif  // GORU_QUAD_HPP
