#include "henon/core.hpp"

#include <cmath>

namespace henon {

double escape_radius(const Params& prm) {
  const double s = 1.0 + prm.delta;
  return 1.1 * 0.5 * (s + std::sqrt(s * s + 4.0 * std::abs(prm.c)));
}

SaddleData saddle_at(const Params& prm, double x0) {
  SaddleData sd;
  sd.location = RealPoint(x0, -x0);
  // Df at (x0,-x0) is [[-2x0, delta],[-1,0]]; eigenvalues solve
  // lambda^2 + 2 x0 lambda + delta = 0.
  const double disc = x0 * x0 - prm.delta;
  if (disc <= 0.0)
    throw ComplexFixedPoints("saddle_at: fixed point is not a (real) saddle");
  const double r = std::sqrt(disc);
  double l1 = -x0 + r, l2 = -x0 - r;
  if (std::abs(l1) < std::abs(l2)) std::swap(l1, l2);
  sd.lambda_u = l1;
  sd.lambda_s = l2;
  // Eigenvector for lambda: second row of (Df - lambda I) gives v = (-lambda, 1).
  sd.eigvec_u = RealPoint(-sd.lambda_u, 1.0).normalized();
  sd.eigvec_s = RealPoint(-sd.lambda_s, 1.0).normalized();
  return sd;
}

std::pair<SaddleData, SaddleData> fixed_points(const Params& prm) {
  // x^2 + (1+delta) x - c = 0, y = -x.
  const double s = 1.0 + prm.delta;
  const double disc = s * s + 4.0 * prm.c;
  if (disc <= 0.0)
    throw ComplexFixedPoints("fixed_points: discriminant <= 0, no real fixed-point pair");
  const double r = std::sqrt(disc);
  const double x_alpha = 0.5 * (-s - r);
  const double x_beta = 0.5 * (-s + r);
  return {saddle_at(prm, x_alpha), saddle_at(prm, x_beta)};
}

double green_plus(const Params& prm, const PlanePoint& p, int depth, double radius) {
  if (depth < 1) throw std::invalid_argument("green_plus: depth >= 1 required");
  const double R = radius > 0.0 ? radius : escape_radius(prm);
  PlanePoint z = p;
  double scale = 1.0;
  for (int n = 0; n <= depth; ++n) {
    const double ax = std::abs(z.x());
    if (ax > R && ax >= std::abs(z.y())) {
      // escaped: iterate a few more times for the asymptotic 2^-n log|x_n|
      for (int k = 0; k < 60; ++k) {
        if (std::abs(z.x()) > 1e100) break;
        z = apply_map(prm, z);
        scale *= 0.5;
      }
      return scale * std::log(std::abs(z.x()));
    }
    if (n == depth) break;
    z = apply_map(prm, z);
    scale *= 0.5;
  }
  return 0.0;
}

double green_minus(const Params& prm, const PlanePoint& p, int depth, double radius) {
  if (depth < 1) throw std::invalid_argument("green_minus: depth >= 1 required");
  const double R = radius > 0.0 ? radius : escape_radius(prm);
  PlanePoint z = p;
  double scale = 1.0;
  for (int n = 0; n <= depth; ++n) {
    const double ay = std::abs(z.y());
    if (ay > R && ay >= std::abs(z.x())) {
      for (int k = 0; k < 60; ++k) {
        if (std::abs(z.y()) > 1e100) break;
        z = apply_inverse(prm, z);
        scale *= 0.5;
      }
      // phi- ~ y/delta, so the level at step n is 2^-n log|y_n/delta|
      return scale * std::log(std::abs(z.y()) / prm.delta);
    }
    if (n == depth) break;
    z = apply_inverse(prm, z);
    scale *= 0.5;
  }
  return 0.0;
}

Complex bottcher_plus(const Params& prm, const PlanePoint& p, int depth) {
  const double R = escape_radius(prm);
  if (!(std::abs(p.x()) > std::max(R, std::abs(p.y()))))
    throw BranchLoss("bottcher_plus: point outside the principal domain |x| > max(R,|y|)");
  // log phi+ = Log(-x0) + sum 2^{-k-1} Log(-x_{k+1}/x_k^2), each factor near 1.
  PlanePoint z = p;
  Complex logphi = std::log(-z.x());
  double w = 0.5;
  for (int k = 0; k < depth; ++k) {
    if (std::abs(z.x()) > 1e100) break;
    const PlanePoint zn = apply_map(prm, z);
    const Complex ratio = -zn.x() / (z.x() * z.x());
    if (!(std::abs(ratio - 1.0) < 0.9))
      throw BranchLoss("bottcher_plus: iterate left the principal domain");
    logphi += w * std::log(ratio);
    w *= 0.5;
    z = zn;
  }
  return std::exp(logphi);
}

}  // namespace henon
