#pragma once

#include <memory>
#include <optional>

#include "henon/coding.hpp"

namespace henon {

struct SystemInvalid : std::runtime_error {
  std::string failed_check;
  SystemInvalid(const std::string& msg, std::string check)
      : std::runtime_error(msg), failed_check(std::move(check)) {}
};
struct ArcIncomplete : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PartitionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegreeViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoExpansion : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CertificateIncomplete : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Verdict { Horseshoe, FirstTangency, SubMaximal, Indeterminate };
std::string to_string(Verdict v);

struct ClassifierOptions {
  double kappa = 0.93;
  double complex_pad = 0.12;  // axis scale factor beyond the real half-widths
  double pad_z = 0.12;        // plane-unit padding of box clusters, sheared coordinate
  double pad_y = 0.22;        // plane-unit vertical padding
  int check_grid = 24;        // check_crossed sampling
  double im_thickness = 0.35;  // verified imaginary thickness, frame units
  int separation_grid = 32;
  int kcloud_target = 10000;
  int kcloud_depth = 14;      // verified bounded iterations each way (double precision bound)
  double kcloud_cell = 1e-9;
  double tangency_tol = 1e-3;  // intersect_arcs tol; residual threshold = tol^2
  int deep_iterations = 8;     // global manifold growth for degree/expansion checks
  unsigned seed = 1;
  bool validate = true;        // run crossed-map/separation/orientation checks
  ArcOptions arc;
  ArcOptions deep_arc{1e-6, 2e-2, 0.25, 6000000};
};

struct KCloud {
  std::vector<RealPoint> points;
  int depth = 0;    // verified forward and backward boundedness depth
  double cell = 0;  // final subdivision cell size
};

KCloud sample_k_cloud(const Params& prm, const ClassifierOptions& opt = {});

struct ThreeBoxSystem {
  Params params{1.0, 0.5};
  CrossedSystem crossed;  // boxes B0,B1,B2 with the 3-box graph and Henon edge maps
  BoxEmbedding overlap_01, overlap_12;
  SystemTolerances tolerances;
  SeparationReport separation;
  SaddleData alpha, beta;
  LocalParam wu_alpha, ws_alpha, ws_beta;
  ManifoldArc gamma0;        // local unstable of alpha across B0 (past coding all-0)
  ManifoldArc ws_loc_alpha;  // vertical stable arc through alpha in B0
  ManifoldArc ws2_arc;       // stable arc in B2 mapping into ws_loc_alpha
  ManifoldArc sigma;         // local stable arc of beta (the coding cut)
  ManifoldArc sigma_prime;   // second preimage branch of sigma, in B0 cap B1
  // families of unstable/stable strands inside the boxes, built by pushing
  // the local arcs through the transit chains (single parametric growth is
  // impossible: the excursions between box visits blow up quadratically)
  std::vector<ManifoldArc> wu_pieces, ws_pieces;
  KCloud cloud;
  std::vector<std::string> check_log;

  const BoxEmbedding& b(int i) const { return crossed.box(i); }
  unsigned boxes_containing(const RealPoint& p, double shrink = 1.0) const {
    unsigned m = 0;
    for (int i = 0; i < 3; ++i)
      if (crossed.box(i).contains(p, shrink)) m |= 1u << i;
    return m;
  }
};

// Builds and validates the candidate 3-box system; throws SystemInvalid with
// the first failed check.
ThreeBoxSystem build_three_box_system(const Params& prm, const ClassifierOptions& opt = {});

// Condition (*): B^r(0bar 1 **2** 0bar) nonempty. Extracts tau', tau'' (the
// sub-arcs of the degree-2 curve joining the left side of B2 to the stable
// arc) when true.
bool check_star_condition(const ThreeBoxSystem& sys, std::vector<ManifoldArc>* taus = nullptr);

// S = B^r(0bar 121 **2** 0bar): intersections of the two nested degree-2
// unstable arcs with the stable arc in B2. nus receives the fold arcs
// (inner first).
std::vector<IntersectionRecord> compute_S(const ThreeBoxSystem& sys,
                                          std::vector<ManifoldArc>* nus = nullptr,
                                          const ClassifierOptions& opt = {});

struct ClassificationResult {
  Verdict verdict = Verdict::Indeterminate;
  std::vector<IntersectionRecord> S_points;
  std::optional<RealPoint> star;  // mu' cap mu'' (in B1) when FirstTangency
  bool condition_star = false;
  double tangency_residual = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;
  double min_expansion_unstable = std::numeric_limits<double>::quiet_NaN();
  double min_expansion_stable = std::numeric_limits<double>::quiet_NaN();
  std::string invalid_reason;
  std::shared_ptr<const ThreeBoxSystem> system;  // null when Indeterminate
  std::vector<ManifoldArc> nu_arcs;   // inner, outer
  std::vector<ManifoldArc> tau_arcs;  // tau', tau''
};

ClassificationResult classify(const Params& prm, const ClassifierOptions& opt = {});

// Six-box a/b refinement of Lemma 5.5. Membership is decided through the
// backward box itinerary: side b holds where the previous box visit (one step
// back, or two for points of B2) was B2.
struct ABPartition {
  Params params{1.0, 0.5};
  BoxEmbedding b0, b1, b2;
  double shrink = 1.0;
  std::vector<ManifoldArc> nu_arcs;   // boundary arcs of the B2 split
  std::vector<ManifoldArc> tau_arcs;  // trimming arcs of B2'
  bool has_contact = false;
  RealPoint contact = RealPoint::Zero();

  // 0 = a, 1 = b, -1 = outside the partition
  int side(const RealPoint& p) const;
};

ABPartition build_ab_partition(const ThreeBoxSystem& sys, const std::vector<IntersectionRecord>& S,
                               const ClassifierOptions& opt = {});

struct EntropyReport {
  bool ok = false;
  int n_max = 0;
  std::vector<std::string> missing_words;            // unrealized itinerary words
  std::vector<int> periodic_counts;                  // index n-1 -> count found
  std::vector<std::pair<int, std::string>> failed;   // (n, word) Newton failures
  std::vector<RealPoint> periodic_points;            // all distinct points found
};

EntropyReport entropy_certificate(const ThreeBoxSystem& sys, const ABPartition& partition,
                                  int n_max, const ClassifierOptions& opt = {});

struct TrimComponent {
  int box = 0;
  bool plus_side = true;  // B_j^+ (unstable) or B_j^- (stable)
  int degree = 1;
  double t_lo = 0, t_hi = 0;
  ManifoldArc arc;
};

struct TrimReport {
  bool ok = false;
  int n = 0;
  int max_degree_unstable = 0;
  int max_degree_stable = 0;
  std::vector<TrimComponent> components;
  std::string violation;
};

TrimReport trim_and_check_degrees(const ThreeBoxSystem& sys,
                                  const std::vector<IntersectionRecord>& S, int n,
                                  const ClassifierOptions& opt = {});

struct ExpansionReport {
  bool ok = false;
  double min_ratio_unstable = std::numeric_limits<double>::quiet_NaN();
  double min_ratio_stable = std::numeric_limits<double>::quiet_NaN();
  double ratio_at_alpha = std::numeric_limits<double>::quiet_NaN();
  RealPoint worst = RealPoint::Zero();
  int samples_unstable = 0, samples_stable = 0;
};

// Poincare-metric expansion of f on unstable disk pieces inside the trimmed
// boxes, and of f^-1 on stable pieces.
ExpansionReport expansion_check(const ThreeBoxSystem& sys, const TrimReport& trim,
                                const ClassifierOptions& opt = {});

struct SweepRow {
  double c = 0, delta = 0;
  Verdict verdict = Verdict::Indeterminate;
  int s_count = 0;  // distinct points
  double tangency_residual = std::numeric_limits<double>::quiet_NaN();
  double eta = 0;
  double min_expansion = std::numeric_limits<double>::quiet_NaN();
};

SweepRow classify_row(double c, double delta, const ClassifierOptions& opt, bool lite);

// Bisection on the inner-fold crossing count; returns the located c* with
// bracket below `bracket`. The bracket endpoints must classify as Horseshoe
// (hi) and non-Horseshoe (lo).
double locate_first_tangency(double delta, double c_lo, double c_hi,
                             const ClassifierOptions& opt = {}, double bracket = 1e-10);

}  // namespace henon
