#pragma once

#include <cmath>

namespace w2gn::ad {

/// First-order forward-mode number: value plus directional derivative.
struct DualValue {
  double primal = 0.0;
  double tangent = 0.0;

  constexpr DualValue() = default;
  constexpr DualValue(double p, double t = 0.0) : primal(p), tangent(t) {}

  DualValue& operator+=(const DualValue& o) {
    primal += o.primal;
    tangent += o.tangent;
    return *this;
  }
  DualValue& operator-=(const DualValue& o) {
    primal -= o.primal;
    tangent -= o.tangent;
    return *this;
  }
};

inline DualValue operator+(DualValue a, const DualValue& b) { return a += b; }
inline DualValue operator-(DualValue a, const DualValue& b) { return a -= b; }
inline DualValue operator-(const DualValue& a) { return {-a.primal, -a.tangent}; }
inline DualValue operator*(const DualValue& a, const DualValue& b) {
  return {a.primal * b.primal, a.tangent * b.primal + a.primal * b.tangent};
}
inline DualValue operator*(const DualValue& a, double c) { return {a.primal * c, a.tangent * c}; }
inline DualValue operator*(double c, const DualValue& a) { return a * c; }

inline bool isfinite(const DualValue& a) { return std::isfinite(a.primal) && std::isfinite(a.tangent); }
inline double primal(const DualValue& a) { return a.primal; }
inline double primal(double a) { return a; }

// CELU(x) = x for x > 0, alpha * (exp(x / alpha) - 1) otherwise. C^1 everywhere;
// the second derivative jumps at 0 and takes the left-hand value there.
inline double celu(double x, double alpha) { return x > 0.0 ? x : alpha * std::expm1(x / alpha); }
inline double celu_d1(double x, double alpha) { return x > 0.0 ? 1.0 : std::exp(x / alpha); }
inline double celu_d2(double x, double alpha) { return x > 0.0 ? 0.0 : std::exp(x / alpha) / alpha; }

inline DualValue celu(const DualValue& x, double alpha) {
  return {celu(x.primal, alpha), celu_d1(x.primal, alpha) * x.tangent};
}
inline DualValue celu_d1(const DualValue& x, double alpha) {
  return {celu_d1(x.primal, alpha), celu_d2(x.primal, alpha) * x.tangent};
}

}  // namespace w2gn::ad
