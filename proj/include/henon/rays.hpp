#pragma once

#include "henon/classifier.hpp"

namespace henon {

struct NotHarmonic : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoRealComponent : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OffAxisCritical : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MultipleCriticalsInInterval : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StallWithoutLanding : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotLanded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BranchAmbiguity : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ClusterSpread : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Green field restricted to a conjugation-invariant disk, sampled over the
// upper half of the parameter rectangle [-r,r] x [0,r]. H is the harmonic
// conjugate (the argument of the Boettcher coordinate), anchored to 0 on the
// left real escape segment and flood-filled over the simply connected upper
// half minus the zero set.
struct DiskField {
  std::function<double(Complex)> g;  // exact evaluator (escape-rate or synthetic)
  std::function<PlanePoint(Complex)> param;
  double radius = 1.0;
  double lambda = 0.0;
  int nx = 0, ny = 0;
  double hx = 0, hy = 0;
  Eigen::ArrayXXd G;  // (ny, nx), row j at height ty = j*hy
  Eigen::ArrayXXd H;  // NaN where undefined (zero set)
  std::vector<std::pair<double, double>> zero_intervals;  // J cap real trace, in t

  double tx_of(int i) const { return -radius + hx * i; }
  double ty_of(int j) const { return hy * j; }
  bool in_grid(double tx, double ty) const {
    return tx >= -radius && tx <= radius && ty >= 0.0 && ty <= radius;
  }
  double bilinear(const Eigen::ArrayXXd& F, double tx, double ty) const;
  double G_at(double tx, double ty) const { return bilinear(G, tx, ty); }
  double H_at(double tx, double ty) const { return bilinear(H, tx, ty); }
  // gradient of G by central differences of the exact evaluator
  void grad(double tx, double ty, double* gx, double* gy) const;
};

// Samples G+ over the disk via the escape rate, checks conjugation symmetry
// and discrete harmonicity away from the zero set, and extracts the real
// zero intervals.
DiskField restrict_field(const Params& prm, const ComplexDisk& disk, int grid_n, double lambda);

// Field from an explicit harmonic function (synthetic testbeds).
DiskField field_from_function(const std::function<double(Complex)>& gfun, double radius,
                              int grid_n, double lambda);

struct CriticalPoint {
  double location = 0.0;  // real parameter coordinate
  int order = 2;
  double value = 0.0;  // G at the point
  std::pair<double, double> interval{0.0, 0.0};
};

// One simple critical point per proper complementary interval of the zero
// set; sign-winding over an off-axis grid guards against off-axis criticals.
std::vector<CriticalPoint> find_critical_points(const DiskField& field);

enum class LandingKind { NonExposed, Critical };

struct ExternalRay {
  double theta = 0.0;  // Arg(phi+) = pi * theta, 0 < theta < 1 on the upper half
  std::vector<Complex> path;
  double landing = 0.0;
  LandingKind landing_kind = LandingKind::NonExposed;
  bool g_monotone = true;
};

ExternalRay trace_ray(const DiskField& field, double theta);

// Landing coordinate of the theta ray (convenience wrapper).
double landing_of(const DiskField& field, double theta);

// Inverse of the monotone landing map by bisection: the angle whose ray lands
// at t_target.
double external_angle(const DiskField& field, double t_target, double tol = 1e-10);

// f^level of the local unstable disk of alpha; real trace is the grown
// unstable arc at parameter scale lambda_u^level.
ComplexDisk unstable_master_disk(const ThreeBoxSystem& sys, int level);

// Stable cylinder arc: the vertical arc of points whose forward a/b itinerary
// follows `word` and then stays on the a side. vertical_arc_for_angle pulls
// back the local stable arc of alpha along the binary digits of theta.
ManifoldArc stable_cylinder_arc(const ThreeBoxSystem& sys, const ABPartition& ab,
                                const std::vector<int>& word);
ManifoldArc vertical_arc_for_angle(const ThreeBoxSystem& sys, const ABPartition& ab, double theta,
                                   int depth);

struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return double(num) / double(den); }
};

// theta_j = binary value .d_j d_{j+1} ... with d = 1 on symbol b, as exact
// rationals from the eventually periodic tail.
std::vector<Rational> coding_to_angles(const Index& ab_seq, long j_lo, long j_hi);

struct RealizeResult {
  RealPoint point = RealPoint::Zero();
  double cluster_spread = 0.0;
  bool ok = false;
  std::string note;
};

// Constructive Lemma-7.5 realization at finite depth: push the stable
// cylinder arc of the word s_{-n..n} forward n steps and take the contracted
// image segment. Sequences in the identified star class are rejected.
RealizeResult realize_coding(const ThreeBoxSystem& sys, const ABPartition& ab, const Index& seq,
                             int depth);

struct ConjugacyReport {
  bool ok = false;
  int depth = 0;
  int words_realized = 0;
  int words_total = 0;
  int star_class_words = 0;
  double min_pair_separation = std::numeric_limits<double>::infinity();
  int near_star_checked = 0;
  std::vector<std::string> failures;
};

ConjugacyReport conjugacy_check(const ThreeBoxSystem& sys, const ABPartition& ab,
                                const RealPoint& star, int depth,
                                const ClassifierOptions& opt = {});

}  // namespace henon
