#pragma once

#include <functional>
#include <string>
#include <vector>

#include "henon/core.hpp"

namespace henon {

enum class ManifoldKind { Stable, Unstable };

struct ResonanceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RefinementBlowup : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptySlice : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Power-series parametrization psi(t) = sum a_k t^k of a local invariant
// manifold, solving f(psi(t)) = psi(lambda t) term by term (f^-1 for the
// stable side uses the same equation with |lambda| < 1).
struct LocalParam {
  SaddleData saddle;
  ManifoldKind kind = ManifoldKind::Unstable;
  std::vector<RealPoint> coeffs;  // a_0 = location, a_1 along the eigenvector
  double radius_of_validity = 1.0;

  double multiplier() const {
    return kind == ManifoldKind::Unstable ? saddle.lambda_u : saddle.lambda_s;
  }

  RealPoint eval(double t) const {
    RealPoint acc = RealPoint::Zero();
    for (size_t k = coeffs.size(); k-- > 0;) acc = coeffs[k] + t * acc;
    return acc;
  }

  PlanePoint eval(Complex t) const {
    PlanePoint acc = PlanePoint::Zero();
    for (size_t k = coeffs.size(); k-- > 0;)
      acc = PlanePoint(coeffs[k].x() + t * acc.x(), coeffs[k].y() + t * acc.y());
    return acc;
  }

  RealPoint eval_deriv(double t) const {
    RealPoint acc = RealPoint::Zero();
    for (size_t k = coeffs.size(); k-- > 1;) acc = double(k) * coeffs[k] + t * acc;
    return acc;
  }
};

// order >= 2; a1 is scaled so the series is well conditioned on |t| <= radius.
// orientation: +1/-1 picks the a1 direction along +/- the eigenvector.
LocalParam local_parametrization(const Params& prm, const SaddleData& saddle, ManifoldKind kind,
                                 int order = 20, int orientation = +1);

// Evaluates global manifold points: at(t) = f^{+/-n}(psi(t / lambda^n)) with n
// minimal so the series argument is inside the validity radius. Forward
// iteration re-contracts transverse error, so points stay on the manifold to
// machine precision even for large |t|.
class ArcSource {
 public:
  ArcSource(const Params& prm, LocalParam local) : prm_(prm), local_(std::move(local)) {}

  RealPoint at(double t) const;
  const LocalParam& local() const { return local_; }
  const Params& params() const { return prm_; }

 private:
  Params prm_;
  LocalParam local_;
};

struct ArcOptions {
  double h_min = 1e-6;
  double h_max = 1e-2;
  double angle_cap = 0.2;  // radians
  size_t max_points = 4000000;
};

// Adaptively refined polyline along a manifold; `t` is intrinsic and strictly
// increasing, `eval` (when set) reproduces exact points at any parameter.
struct ManifoldArc {
  ManifoldKind kind = ManifoldKind::Unstable;
  std::vector<double> t;
  std::vector<RealPoint> pts;
  std::string coding_tag;
  int degree_tag = 0;
  std::function<RealPoint(double)> eval;

  size_t size() const { return pts.size(); }
  bool empty() const { return pts.empty(); }
  double length() const;
  RealPoint front() const { return pts.front(); }
  RealPoint back() const { return pts.back(); }
};

// Covers n iterations of the fundamental domain: t in [-r lam^n, r lam^n]
// (mirrored range for the stable side under f^-1).
ManifoldArc grow_arc(const Params& prm, const LocalParam& local, int iterations,
                     const ArcOptions& opt = {});

// Grow only while `keep(point)` holds, with a short overshoot past the first
// exit on each side so clipped geometry stays intact.
ManifoldArc grow_arc_while(const Params& prm, const LocalParam& local,
                           const std::function<bool(const RealPoint&)>& keep, int max_iterations,
                           const ArcOptions& opt = {});

// Conjugation-invariant holomorphic disk, given as a parametrization of the
// closed disk |t| <= radius.
struct ComplexDisk {
  std::function<PlanePoint(Complex)> eval;
  double radius = 1.0;
};

// The single real arc of a conjugation-invariant disk (Theorem: a real disk
// meets the real slice in one smooth arc). Throws EmptySlice if the disk is
// not conjugation-invariant.
ManifoldArc real_slice(const ComplexDisk& disk, const ArcOptions& opt = {});

struct IntersectionRecord {
  RealPoint location = RealPoint::Zero();
  int multiplicity = 1;
  bool tangency_flag = false;
  double tangency_residual = 0.0;  // |min gap| near a quadratic close approach
  double t_on_a = 0.0;
  double t_on_b = 0.0;
};

// All transversal crossings plus quadratic-model classification of close
// approaches: gap discriminant > tol^2 gives two simple records, within tol^2
// one multiplicity-2 tangential record, below none. Arcs carrying an `eval`
// are resampled exactly near each approach.
std::vector<IntersectionRecord> intersect_arcs(const ManifoldArc& a, const ManifoldArc& b,
                                               double tol = 1e-7);

// Signed side of point p relative to the oriented polyline (positive = left
// of the direction of increasing t). Used for the left/right and above/below
// tests of the real box geometry.
double signed_side(const ManifoldArc& arc, const RealPoint& p);

// Distance from p to the polyline.
double arc_distance(const ManifoldArc& arc, const RealPoint& p);

// Apply f (or f^-1 for k<0) pointwise, preserving parameters; the child arc
// re-evaluates exactly through the parent's evaluator.
ManifoldArc map_arc(const Params& prm, const ManifoldArc& arc, int k = 1);

// Sub-arc over [t0,t1] (vertices copied, evaluator shared).
ManifoldArc sub_arc(const ManifoldArc& arc, double t0, double t1);

// Split into maximal pieces where `inside` holds, with endpoints refined onto
// the membership boundary via the evaluator when available.
std::vector<ManifoldArc> clip_arc(const ManifoldArc& arc,
                                  const std::function<bool(const RealPoint&)>& inside);

// Insert vertices until spacing/angle bounds hold on the whole polyline
// (requires `eval`).
void refine_arc(ManifoldArc& arc, const ArcOptions& opt);

}  // namespace henon
