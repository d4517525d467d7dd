#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "henon/manifold.hpp"

namespace henon {

struct NotCrossed : std::runtime_error {
  std::string condition;
  PlanePoint witness = PlanePoint::Zero();
  NotCrossed(const std::string& msg, std::string cond, PlanePoint w)
      : std::runtime_error(msg), condition(std::move(cond)), witness(std::move(w)) {}
  explicit NotCrossed(const std::string& msg) : std::runtime_error(msg) {}
};
struct InconsistentDegree : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfiniteDegree : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DepthExceeded : std::runtime_error {
  double achieved_diameter = 0.0;
  DepthExceeded(const std::string& msg, double d) : std::runtime_error(msg), achieved_diameter(d) {}
};
struct DegreeNotOne : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InadmissiblePattern : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Affine embedding of the unit bidisk into C^2: (z,w) -> origin + z*H + w*V.
struct BoxEmbedding {
  int id = 0;
  PlanePoint origin = PlanePoint::Zero();
  PlanePoint h_axis = PlanePoint(1.0, 0.0);
  PlanePoint v_axis = PlanePoint(0.0, 1.0);
  double kappa = 0.9;

  PlanePoint to_plane(Complex z, Complex w) const {
    return origin + z * h_axis + w * v_axis;
  }
  RealPoint to_plane_real(double z, double w) const {
    const PlanePoint p = to_plane(Complex(z, 0), Complex(w, 0));
    return RealPoint(p.x().real(), p.y().real());
  }
  // Frame coordinates (z,w) of p, by solving the 2x2 system.
  std::pair<Complex, Complex> to_frame(const PlanePoint& p) const {
    const Complex a = h_axis.x(), b = v_axis.x(), c = h_axis.y(), d = v_axis.y();
    const Complex det = a * d - b * c;
    const PlanePoint q = p - origin;
    return {(d * q.x() - b * q.y()) / det, (a * q.y() - c * q.x()) / det};
  }
  std::pair<double, double> to_frame_real(const RealPoint& p) const {
    auto [z, w] = to_frame(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
    return {z.real(), w.real()};
  }
  bool contains(const PlanePoint& p, double shrink = 1.0) const {
    auto [z, w] = to_frame(p);
    return std::abs(z) <= shrink && std::abs(w) <= shrink;
  }
  bool contains(const RealPoint& p, double shrink = 1.0) const {
    auto [z, w] = to_frame_real(p);
    return std::abs(z) <= shrink && std::abs(w) <= shrink;
  }
};

struct TransitionGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  std::map<std::pair<int, int>, int> degrees;

  bool admissible(int i, int j) const { return degrees.count({i, j}) > 0; }
  int degree(int i, int j) const {
    auto it = degrees.find({i, j});
    if (it == degrees.end()) throw InadmissiblePattern("no edge " + std::to_string(i) + "->" + std::to_string(j));
    return it->second;
  }
  std::vector<int> predecessors(int j) const {
    std::vector<int> r;
    for (auto& e : edges)
      if (e.second == j) r.push_back(e.first);
    return r;
  }
  std::vector<int> successors(int i) const {
    std::vector<int> r;
    for (auto& e : edges)
      if (e.first == i) r.push_back(e.second);
    return r;
  }
};

// Admissible symbol sequence with a marked zero position. Infinite extents are
// stored as eventually periodic tails on either side.
struct Index {
  std::vector<int> symbols;     // core word, consecutive times
  long zero = 0;                // index into `symbols` carrying time 0
  std::vector<int> left_tail;   // period repeating to the left of the core (empty = finite)
  std::vector<int> right_tail;  // period repeating to the right

  bool finite() const { return left_tail.empty() && right_tail.empty(); }
  bool left_infinite() const { return !left_tail.empty(); }
  bool right_infinite() const { return !right_tail.empty(); }

  // Symbol at absolute time j (core position zero carries time 0).
  int at(long j) const {
    const long k = j + zero;
    if (k >= 0 && k < long(symbols.size())) return symbols[size_t(k)];
    if (k < 0) {
      if (left_tail.empty()) throw InadmissiblePattern("Index::at: before a finite index");
      const long m = long(left_tail.size());
      long r = ((k % m) + m) % m;
      return left_tail[size_t(r)];
    }
    if (right_tail.empty()) throw InadmissiblePattern("Index::at: past a finite index");
    const long m = long(right_tail.size());
    return right_tail[size_t((k - long(symbols.size())) % m)];
  }

  static Index finite_word(std::vector<int> w, long zero_pos = 0) {
    Index s;
    s.symbols = std::move(w);
    s.zero = zero_pos;
    return s;
  }
};

bool admissible(const TransitionGraph& g, const Index& s);

// degree of a finite index = product of the edge degrees along it
long index_degree(const TransitionGraph& g, const Index& s);

struct EdgeMap {
  std::function<PlanePoint(const PlanePoint&)> fwd;
  std::function<PlanePoint(const PlanePoint&)> inv;  // may be empty
};

struct CrossedSystem {
  std::vector<BoxEmbedding> boxes;
  TransitionGraph graph;
  std::map<std::pair<int, int>, EdgeMap> maps;

  const EdgeMap& map(int i, int j) const {
    auto it = maps.find({i, j});
    if (it == maps.end()) throw InadmissiblePattern("no map for edge");
    return it->second;
  }
  const BoxEmbedding& box(int i) const { return boxes.at(size_t(i)); }
};

struct CrossedCheckReport {
  bool ok = false;
  bool transit_nonempty = false;
  std::string violated;          // empty when ok
  PlanePoint witness = PlanePoint::Zero();
  double horizontal_footprint = 0.0;  // max |z| over sampled transit (condition iii)
  double reach_pos = 0.0, reach_neg = 0.0;  // per-side footprint (sign of Re z)
  double vertical_footprint = 0.0;    // max |w| over image of sampled transit
  double reach_w_pos = 0.0, reach_w_neg = 0.0;  // per-side image footprint (sign of Re w)
  double properness_margin = 1.0;     // min distance of interior transit boundary exits
};

// Samples the transit set B_{p,q} = source cap f^-1(target) on a grid_n^2 x
// grid_n^2 frame grid and verifies conditions (ii) [properness proxy] and
// (iii) [kappa footprints]. Condition (iv) is automatic for inclusions and
// (i) is recorded as a modeling assumption. The grid covers the conjugation
// symmetric slab |Im z|, |Im w| <= im_thickness (frame units): that is the
// complex thickening of the real box that the disk machinery lives in.
CrossedCheckReport check_crossed(const std::function<PlanePoint(const PlanePoint&)>& f,
                                 const BoxEmbedding& source, const BoxEmbedding& target,
                                 int grid_n = 32, double im_thickness = 0.35);

// Mapping degree over the base: preimage count of generic vertical fibers of
// the target along horizontal probe lines, all probes required to agree.
int degree(const std::function<PlanePoint(const PlanePoint&)>& f, const BoxEmbedding& source,
           const BoxEmbedding& target, int probe_count = 5, unsigned seed = 20240801u);

struct ComposedMap {
  int source = 0, target = 0;
  Index index;
  long degree = 1;
  std::function<PlanePoint(const PlanePoint&)> fwd;  // full composite
  // true iff the whole finite orbit stays in the boxes of the index
  std::function<bool(const PlanePoint&)> in_transit;
};

ComposedMap compose(const CrossedSystem& sys, const Index& s);

enum class DiskOrientation { Horizontal, Vertical };

struct MultiDisk {
  DiskOrientation orientation = DiskOrientation::Vertical;
  int box = 0;
  std::vector<ManifoldArc> components;   // real slices in plane coordinates
  std::vector<int> component_degrees;
  std::vector<RealPoint> points;         // bi-infinite indices only
  int total_degree() const {
    int d = 0;
    for (int k : component_degrees) d += k;
    return d;
  }
};

// B(s) = points of B_{s_0} admitting an orbit with itinerary s.
//  - right-infinite s: vertical multi-disk, pullback depth grows until the
//    fiber diameter falls below `resolution` (DepthExceeded otherwise);
//  - left-infinite s of degree 1: horizontal unstable disk;
//  - bi-infinite s: the finite intersection point set.
MultiDisk compute_B(const CrossedSystem& sys, const Index& s, double resolution = 1e-9);

// Unique fixed point of f_s for a periodic degree-1 index, with defect
// ||f_s p - p|| below `tol` (DegreeNotOne / convergence errors otherwise).
RealPoint periodic_fixed_point(const CrossedSystem& sys, const Index& s, double tol = 1e-10,
                               double* residual = nullptr);

}  // namespace henon
