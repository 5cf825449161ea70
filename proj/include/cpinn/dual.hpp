#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace cpinn::ad {

/// Largest number of independent seeds a Dual can carry. The per-point
/// residual code seeds one direction per network-output jet entry, so this
/// bounds (n_y + n_u + n_y) * channels for any problem we evaluate.
inline constexpr int kDualCapacity = 32;

/// First-order forward-mode number with a small fixed-capacity gradient.
///
/// Only the leading `size()` gradient slots are meaningful; the rest are kept
/// zero so that mixed-size arithmetic needs no special casing.
class Dual {
 public:
  constexpr Dual() = default;
  constexpr Dual(double value) : value_(value) {}  // NOLINT(google-explicit-constructor)

  /// Independent variable `index` of a space with `size` seeds.
  static Dual variable(double value, int index, int size) {
    if (size > kDualCapacity || index < 0 || index >= size) {
      throw std::out_of_range("Dual::variable: seed index out of range");
    }
    Dual d(value);
    d.size_ = size;
    d.grad_[static_cast<std::size_t>(index)] = 1.0;
    return d;
  }

  constexpr double value() const { return value_; }
  constexpr int size() const { return size_; }
  constexpr double grad(int i) const { return i < size_ ? grad_[static_cast<std::size_t>(i)] : 0.0; }

  Dual& operator+=(const Dual& o) {
    value_ += o.value_;
    widen(o.size_);
    for (int i = 0; i < o.size_; ++i) grad_[i] += o.grad_[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value_ -= o.value_;
    widen(o.size_);
    for (int i = 0; i < o.size_; ++i) grad_[i] -= o.grad_[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    const int n = std::max(size_, o.size_);
    for (int i = 0; i < n; ++i) grad_[i] = grad_[i] * o.value_ + value_ * o.grad_[i];
    size_ = n;
    value_ *= o.value_;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.value_;
    const double q = value_ * inv;
    const int n = std::max(size_, o.size_);
    for (int i = 0; i < n; ++i) grad_[i] = (grad_[i] - q * o.grad_[i]) * inv;
    size_ = n;
    value_ = q;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(Dual a) {
    a.value_ = -a.value_;
    for (int i = 0; i < a.size_; ++i) a.grad_[i] = -a.grad_[i];
    return a;
  }

  /// Applies the chain rule for a scalar function with value `fx` and slope `dfx`.
  Dual chain(double fx, double dfx) const {
    Dual r(*this);
    r.value_ = fx;
    for (int i = 0; i < r.size_; ++i) r.grad_[i] *= dfx;
    return r;
  }

 private:
  void widen(int n) { size_ = std::max(size_, n); }

  double value_ = 0.0;
  int size_ = 0;
  std::array<double, kDualCapacity> grad_{};
};

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value());
  return a.chain(e, e);
}
inline Dual sin(const Dual& a) { return a.chain(std::sin(a.value()), std::cos(a.value())); }
inline Dual cos(const Dual& a) { return a.chain(std::cos(a.value()), -std::sin(a.value())); }
inline Dual square(const Dual& a) { return a * a; }

}  // namespace cpinn::ad
