#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace raretail {

/// Truncated univariate Taylor data in *derivative* convention:
/// derivs[j] = f^(j)(0). The Taylor coefficient of y^j is derivs[j] / j!.
/// Arithmetic truncates to the minimum order of its operands.
template <typename Scalar>
class Jet {
 public:
  Jet() = default;
  explicit Jet(std::vector<Scalar> derivs) : derivs_(std::move(derivs)) {
    if (derivs_.empty()) throw std::invalid_argument("Jet: needs at least the value at 0");
  }

  static Jet constant(Scalar c, int order) {
    std::vector<Scalar> d(static_cast<std::size_t>(order) + 1, Scalar(0));
    d[0] = c;
    return Jet(std::move(d));
  }

  int order() const { return static_cast<int>(derivs_.size()) - 1; }
  Scalar operator[](int j) const { return derivs_[static_cast<std::size_t>(j)]; }
  Scalar& operator[](int j) { return derivs_[static_cast<std::size_t>(j)]; }
  const std::vector<Scalar>& derivs() const { return derivs_; }

 private:
  std::vector<Scalar> derivs_;
};

namespace detail {
inline double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}
}  // namespace detail

/// Leibniz product: (ab)^(n) = sum_k C(n,k) a^(k) b^(n-k).
template <typename Scalar>
Jet<Scalar> jet_mul(const Jet<Scalar>& a, const Jet<Scalar>& b) {
  const int m = std::min(a.order(), b.order());
  std::vector<Scalar> d(static_cast<std::size_t>(m) + 1, Scalar(0));
  for (int n = 0; n <= m; ++n)
    for (int k = 0; k <= n; ++k)
      d[static_cast<std::size_t>(n)] += Scalar(detail::binom(n, k)) * a[k] * b[n - k];
  return Jet<Scalar>(std::move(d));
}

template <typename Scalar>
Jet<Scalar> jet_add(const Jet<Scalar>& a, const Jet<Scalar>& b) {
  const int m = std::min(a.order(), b.order());
  std::vector<Scalar> d(static_cast<std::size_t>(m) + 1);
  for (int n = 0; n <= m; ++n) d[static_cast<std::size_t>(n)] = a[n] + b[n];
  return Jet<Scalar>(std::move(d));
}

/// Reciprocal, solving (a * r) = 1 order by order. Requires a(0) != 0.
template <typename Scalar>
Jet<Scalar> jet_recip(const Jet<Scalar>& a) {
  if (a[0] == Scalar(0)) throw std::domain_error("jet_recip: zero constant term");
  const int m = a.order();
  std::vector<Scalar> r(static_cast<std::size_t>(m) + 1, Scalar(0));
  r[0] = Scalar(1) / a[0];
  for (int n = 1; n <= m; ++n) {
    Scalar s(0);
    for (int k = 1; k <= n; ++k)
      s += Scalar(detail::binom(n, k)) * a[k] * r[static_cast<std::size_t>(n - k)];
    r[static_cast<std::size_t>(n)] = -s / a[0];
  }
  return Jet<Scalar>(std::move(r));
}

/// d/dy: shifts the derivative array down by one and drops an order.
template <typename Scalar>
Jet<Scalar> jet_deriv(const Jet<Scalar>& a) {
  if (a.order() < 1) throw std::invalid_argument("jet_deriv: order-0 jet has no derivative data");
  std::vector<Scalar> d(static_cast<std::size_t>(a.order()), Scalar(0));
  for (int n = 1; n <= a.order(); ++n) d[static_cast<std::size_t>(n - 1)] = a[n];
  return Jet<Scalar>(std::move(d));
}

/// Coefficients c_k = (D_w^{k-1} q)(0) / w'(0), k = 1..K, where
/// D_w f = d/dy (f / dw/dy). Needs q.order >= K-1 and w.order >= K.
template <typename Scalar>
std::vector<Scalar> watson_coeffs(const Jet<Scalar>& q, const Jet<Scalar>& w, int K) {
  if (K < 1) throw std::invalid_argument("watson_coeffs: K must be positive");
  if (q.order() < K - 1 || w.order() < K)
    throw std::invalid_argument("watson_coeffs: insufficient jet order");
  const Jet<Scalar> wy = jet_deriv(w);
  if (!(wy[0] > Scalar(0))) throw std::domain_error("watson_coeffs: dw/dy(0) must be positive");
  std::vector<Scalar> c;
  c.reserve(static_cast<std::size_t>(K));
  Jet<Scalar> g = q;  // D_w^{k-1} q
  for (int k = 1; k <= K; ++k) {
    c.push_back(g[0] / wy[0]);
    if (k < K) g = jet_deriv(jet_mul(g, jet_recip(wy)));
  }
  return c;
}

/// Inputs for the explicit one-dimensional remainder bound: b is a lower
/// bound on h' over [0, T]; sup_DhL_f bounds |D_h^{L-1} f| there;
/// boundary_vals[k-1] = |(D_h^{k-1} f)(T)| for k = 1..L-1.
struct WatsonBoundInputs {
  double b = 1;
  double T = 1;
  double lambda = 1;
  double sup_DhL_f = 0;
  std::vector<double> boundary_vals;
};

/// |Rem_L| <= b^{-1} sup|D_h^{L-1}f| λ^{-L}
///          + b^{-1} e^{-λbT} sum_{k=1}^{L-1} λ^{-k} |(D_h^{k-1}f)(T)|.
inline double watson_remainder_bound(const WatsonBoundInputs& in, int L) {
  if (!(in.b > 0) || !(in.T > 0) || !(in.lambda > 0))
    throw std::invalid_argument("watson_remainder_bound: b, T, lambda must be positive");
  if (L < 1) throw std::invalid_argument("watson_remainder_bound: L must be positive");
  double bound = in.sup_DhL_f * std::pow(in.lambda, -L) / in.b;
  if (!in.boundary_vals.empty()) {
    double tail = 0;
    const int kmax = std::min<int>(L - 1, static_cast<int>(in.boundary_vals.size()));
    for (int k = 1; k <= kmax; ++k)
      tail += std::pow(in.lambda, -k) * std::abs(in.boundary_vals[static_cast<std::size_t>(k - 1)]);
    bound += std::exp(-in.lambda * in.b * in.T) * tail / in.b;
  }
  return bound;
}

/// Partial sum of the integration-by-parts expansion of
/// ∫_0^T f e^{-λh} dt = (1/h'(0)) sum_{k=1}^{L-1} (D_h^{k-1}f)(0) λ^{-k} + Rem_L,
/// paired with the bound above. Requires h(0) = 0 and h'(0) > 0.
template <typename Scalar>
std::pair<Scalar, double> watson_expand_1d(const Jet<Scalar>& f, const Jet<Scalar>& h,
                                           const WatsonBoundInputs& in, int L) {
  if (h[0] != Scalar(0)) throw std::domain_error("watson_expand_1d: h(0) must be 0");
  const std::vector<Scalar> c = watson_coeffs(f, h, std::max(1, L - 1));
  Scalar value(0);
  double p = 1.0 / in.lambda;
  for (int k = 1; k <= L - 1; ++k, p /= in.lambda) value += c[static_cast<std::size_t>(k - 1)] * Scalar(p);
  return {value, watson_remainder_bound(in, L)};
}

using Jetd = Jet<double>;

}  // namespace raretail
