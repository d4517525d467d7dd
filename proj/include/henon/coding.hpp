#pragma once

#include <string>
#include <vector>

#include "henon/crossed_maps.hpp"

namespace henon {

struct SeparationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoMembership : std::runtime_error {
  long step = -1;
  NoMembership(const std::string& msg, long st) : std::runtime_error(msg), step(st) {}
};
struct AmbiguityBeyondN : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SystemTolerances {
  double eta = 0.0;      // separation constant
  double epsilon = 0.0;  // pseudo-orbit slack bound, epsilon < eta/2

  SystemTolerances() = default;
  SystemTolerances(double eta_, double eps_) : eta(eta_), epsilon(eps_) {
    if (!(epsilon < eta / 2.0))
      throw std::invalid_argument("SystemTolerances: epsilon < eta/2 required");
  }
};

struct PseudoOrbit {
  std::vector<RealPoint> points;
  double slack = 0.0;
};

double orbit_slack(const Params& prm, const std::vector<RealPoint>& points);

struct SeparationReport {
  bool ok = false;
  double eta = 0.0;
  std::string violated;  // names the failed condition when !ok
  int box_a = -1, box_b = -1, box_target = -1;
  RealPoint witness = RealPoint::Zero();
  double margin_21 = 0.0;  // neighborhood containment of the sampled K set
  double margin_22 = 0.0;  // coverage depth inside incoming images
  double margin_23 = 0.0;  // pairwise separation of images into a common target
};

// Largest eta for which (2.1) K-neighborhood containment, (2.2) coverage with
// boundary margin and (2.3) pairwise image separation hold on sampled grids.
SeparationReport verify_separation(const CrossedSystem& sys,
                                   const std::vector<RealPoint>& k_samples, int grid_n = 40);

struct CodingOptions {
  double membership_shrink = 1.0;  // frame-coordinate bound for phi_j B_j membership
  double boundary_margin = 1e-9;   // widens the bound to avoid float boundary flicker
};

// Backward-unique codings of a finite pseudo-orbit: one per valid terminal box
// choice, at most N in total. Throws NoMembership when a point lies in no box
// and AmbiguityBeyondN when backward propagation is not unique (separation
// violated).
std::vector<Index> code_pseudo_orbit(const CrossedSystem& sys, const PseudoOrbit& orbit,
                                     const SystemTolerances& tol, const CodingOptions& opt = {});

// Infinite-orbit semantics: codes a long finite truncation and reports the
// distinct stabilized prefixes (the last `tail_guard` symbols are discarded
// before deduplication).
std::vector<Index> code_orbit_prefix(const CrossedSystem& sys, const PseudoOrbit& orbit,
                                     const SystemTolerances& tol, int tail_guard,
                                     const CodingOptions& opt = {});

// True iff the orbit perturbed pointwise by <= perturbation_size, and the map
// perturbed by <= perturbation_size in c, both yield identical coding sets.
bool coding_stability(const CrossedSystem& sys, const Params& prm, const PseudoOrbit& orbit,
                      const SystemTolerances& tol, double perturbation_size,
                      unsigned seed = 7u);

// G <-> H alphabet translation for the 3-box system: 0 <-> 00, 1 <-> 01,
// 2 <-> 10, preserving the zero position. H words containing "11" have no G
// symbol and are rejected.
Index g_to_h(const Index& g_index);
Index h_to_g(const Index& h_index);

// Sequences over {a,b} are Index values with symbols 0 = a, 1 = b.
inline constexpr int kSymbolA = 0;
inline constexpr int kSymbolB = 1;

struct QuotientShiftPoint {
  Index seq;
  Index canonical_form;
  bool identified = false;  // true when seq lies in the identified orbit class
};

// Canonical representative modulo the identification
// a^inf b a b a^inf ~ a^inf b b b a^inf (shift-translated); the canonical form
// is the lexicographically smaller (bab-core) representative at the same
// absolute positions.
QuotientShiftPoint quotient_canonicalize(const Index& ab_seq);

Index shift_index(const Index& s, long k = 1);
bool same_sequence(const Index& a, const Index& b, long window = 64);

// Text form: "0^:1 2 1 2:0^" with "^" marking periodic tails and "*" marking
// the zero position.
std::string print_index(const Index& s);
Index parse_index(const std::string& text);

}  // namespace henon
