#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "nlddd/error.hpp"
#include "nlddd/mesh.hpp"

namespace nlddd {

/// Quadrature on a triangle in barycentric coordinates. Weights sum to one, so
/// an integral is `area * sum(w_q f(x_q))`.
struct TriangleRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

namespace detail {

inline void add_orbit3(TriangleRule& rule, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  rule.points.push_back({b, a, a});
  rule.points.push_back({a, b, a});
  rule.points.push_back({a, a, b});
  rule.weights.insert(rule.weights.end(), 3, w);
}

// Gauss-Legendre nodes and weights on [0, 1].
inline void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace detail

/// Symmetric rules for degrees 1, 2, 4 and 5 (degree 3 uses the degree-4 rule,
/// which has positive weights). Higher degrees use a collapsed Gauss-Legendre
/// product rule.
inline TriangleRule triangle_rule(int degree) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 1");
  TriangleRule rule;
  rule.degree = degree;
  switch (degree) {
    case 1:
      rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      rule.weights.push_back(1.0);
      return rule;
    case 2:
      detail::add_orbit3(rule, 1.0 / 6.0, 1.0 / 3.0);
      return rule;
    case 3:
    case 4:
      detail::add_orbit3(rule, 0.445948490915965, 0.223381589678011);
      detail::add_orbit3(rule, 0.091576213509771, 0.109951743655322);
      return rule;
    case 5:
      rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      rule.weights.push_back(0.225);
      detail::add_orbit3(rule, 0.470142064105115, 0.132394152788506);
      detail::add_orbit3(rule, 0.101286507323456, 0.125939180544827);
      return rule;
    default:
      break;
  }
  // Duffy map (u, v) -> (u, v (1 - u)); the Jacobian adds one degree in u.
  const int n = (degree + 3) / 2;
  std::vector<double> x, w;
  detail::gauss_legendre01(n, x, w);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = x[i];
      const double v = x[j] * (1.0 - u);
      const double wt = w[i] * w[j] * (1.0 - u);
      rule.points.push_back({1.0 - u - v, u, v});
      rule.weights.push_back(wt);
      total += wt;
    }
  }
  for (auto& wt : rule.weights) wt /= total;
  return rule;
}

inline Point2 map_to_element(const Mesh& mesh, const Element& el, const std::array<double, 3>& bary) {
  const Point2& a = mesh.vertex(el.vertices[0]);
  const Point2& b = mesh.vertex(el.vertices[1]);
  const Point2& c = mesh.vertex(el.vertices[2]);
  return {bary[0] * a.x + bary[1] * b.x + bary[2] * c.x, bary[0] * a.y + bary[1] * b.y + bary[2] * c.y};
}

}  // namespace nlddd
