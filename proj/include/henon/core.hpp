#pragma once

#include <complex>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>

namespace henon {

using Complex = std::complex<double>;
using PlanePoint = Eigen::Vector2cd;  // (x, y) in C^2; real points have zero imaginary parts
using RealPoint = Eigen::Vector2d;

struct ComplexFixedPoints : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BranchLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameter pair for f(x,y) = (c + delta*y - x^2, -x).
// delta is the Jacobian determinant of f on R^2; only the orientation-preserving
// family delta > 0 is admitted.
struct Params {
  double c;
  double delta;

  Params(double c_, double delta_) : c(c_), delta(delta_) {
    if (!(delta > 0.0))
      throw std::invalid_argument("Params: delta must be > 0 (orientation-preserving diffeomorphism)");
  }
};

// A saddle fixed point with eigen-data of the Jacobian there.
struct SaddleData {
  RealPoint location;
  double lambda_s = 0.0;  // |lambda_s| < 1
  double lambda_u = 0.0;  // |lambda_u| > 1
  RealPoint eigvec_s = RealPoint::Zero();  // unit length
  RealPoint eigvec_u = RealPoint::Zero();
};

inline PlanePoint apply_map(const Params& prm, const PlanePoint& p) {
  return PlanePoint(prm.c + prm.delta * p.y() - p.x() * p.x(), -p.x());
}

inline RealPoint apply_map(const Params& prm, const RealPoint& p) {
  return RealPoint(prm.c + prm.delta * p.y() - p.x() * p.x(), -p.x());
}

inline PlanePoint apply_inverse(const Params& prm, const PlanePoint& p) {
  return PlanePoint(-p.y(), (p.x() - prm.c + p.y() * p.y()) / prm.delta);
}

inline RealPoint apply_inverse(const Params& prm, const RealPoint& p) {
  return RealPoint(-p.y(), (p.x() - prm.c + p.y() * p.y()) / prm.delta);
}

inline RealPoint iterate(const Params& prm, RealPoint p, int n) {
  for (; n > 0; --n) p = apply_map(prm, p);
  for (; n < 0; ++n) p = apply_inverse(prm, p);
  return p;
}

inline Eigen::Matrix2d jacobian(const Params& prm, const RealPoint& p) {
  Eigen::Matrix2d j;
  j << -2.0 * p.x(), prm.delta, -1.0, 0.0;
  return j;
}

inline Eigen::Matrix2cd jacobian(const Params& prm, const PlanePoint& p) {
  Eigen::Matrix2cd j;
  j << -2.0 * p.x(), Complex(prm.delta, 0.0), Complex(-1.0, 0.0), Complex(0.0, 0.0);
  return j;
}

// Smallest R of the standard filtration such that |x| > max(R, |y|) forces
// monotone forward escape, times a 1.1 safety factor.
double escape_radius(const Params& prm);

// The two saddle fixed points, ordered (alpha, beta): alpha is the root
// x = (-(1+delta) - sqrt(D))/2 (the fixed point the classifier places in box B0),
// beta the other. Throws ComplexFixedPoints when the discriminant is <= 0.
std::pair<SaddleData, SaddleData> fixed_points(const Params& prm);

SaddleData saddle_at(const Params& prm, double x_fixed);

// Escape-rate Green function G+(p) = lim 2^-n log+ ||f^n p||.
// Returns 0 when the orbit stays bounded through `depth` iterations.
double green_plus(const Params& prm, const PlanePoint& p, int depth = 200, double radius = 0.0);

// Mirror under f^-1; normalization phi- ~ y/delta near infinity.
double green_minus(const Params& prm, const PlanePoint& p, int depth = 200, double radius = 0.0);

// Boettcher coordinate phi+ on |x| > max(R,|y|), normalized by -phi+ ~ x near
// infinity; the argument is tracked multiplicatively along the orbit and never
// re-principalized mid-chain. Throws BranchLoss if an iterate leaves the
// principal domain before the chain converges.
Complex bottcher_plus(const Params& prm, const PlanePoint& p, int depth = 64);

}  // namespace henon
