#include "henon/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>
#include <random>
#include <set>
#include <sstream>

namespace henon {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Horseshoe: return "Horseshoe";
    case Verdict::FirstTangency: return "FirstTangency";
    case Verdict::SubMaximal: return "SubMaximal";
    default: return "Indeterminate";
  }
}

namespace {

bool bounded_orbit(const Params& prm, const RealPoint& p, int depth, double bound) {
  RealPoint q = p;
  for (int i = 0; i < depth; ++i) {
    q = apply_map(prm, q);
    if (!(q.cwiseAbs().maxCoeff() <= bound)) return false;
  }
  q = p;
  for (int i = 0; i < depth; ++i) {
    q = apply_inverse(prm, q);
    if (!(q.cwiseAbs().maxCoeff() <= bound)) return false;
  }
  return true;
}

ManifoldArc reversed(const ManifoldArc& arc) {
  ManifoldArc r;
  r.kind = arc.kind;
  r.coding_tag = arc.coding_tag;
  r.degree_tag = arc.degree_tag;
  r.t.reserve(arc.t.size());
  r.pts.reserve(arc.pts.size());
  for (size_t i = arc.pts.size(); i-- > 0;) {
    r.t.push_back(-arc.t[i]);
    r.pts.push_back(arc.pts[i]);
  }
  if (arc.eval) {
    auto parent = arc.eval;
    r.eval = [parent](double t) { return parent(-t); };
  }
  return r;
}

void orient_y_increasing(ManifoldArc& arc) {
  if (arc.pts.size() >= 2 && arc.pts.front().y() > arc.pts.back().y()) arc = reversed(arc);
}

double lsq_slope_x_of_y(const ManifoldArc& arc) {
  double sy = 0, sx = 0, syy = 0, sxy = 0;
  const double n = double(arc.pts.size());
  for (const auto& p : arc.pts) {
    sx += p.x();
    sy += p.y();
    syy += p.y() * p.y();
    sxy += p.x() * p.y();
  }
  const double var = syy - sy * sy / n;
  if (var < 1e-12) return 0.0;
  return (sxy - sx * sy / n) / var;
}

}  // namespace

KCloud sample_k_cloud(const Params& prm, const ClassifierOptions& opt) {
  const double r0 = escape_radius(prm) / 1.1;
  const double bound = 2.0 * r0 + 1.0;
  KCloud cloud;

  struct Cell {
    double x, y;
  };
  const double span = r0 + 0.3;
  const int n0 = 200;
  double cell = 2.0 * span / n0;
  std::vector<Cell> cells;
  {
    const Params& pr = prm;
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j < n0; ++j) {
        const Cell c{-span + (i + 0.5) * cell, -span + (j + 0.5) * cell};
        if (bounded_orbit(pr, RealPoint(c.x, c.y), 2, bound)) cells.push_back(c);
      }
  }
  std::mt19937_64 rng(opt.seed * 2654435761u + 17u);
  // Coarse subdivision: the bounded-both-ways band thins at rate |lambda_s|
  // per depth step, so depth must grow much slower than cells shrink or the
  // extreme corners of K die out of the sample.
  int depth = 1;
  const size_t cap = size_t(opt.kcloud_target) * 4;
  int level = 0;
  while (cell > 4e-7 && !cells.empty()) {
    ++level;
    if (level % 4 == 0) ++depth;
    depth = std::min(depth, 6);
    std::vector<Cell> next;
    next.reserve(cells.size() * 2);
    const double h = cell / 4.0;
    for (const auto& c : cells) {
      for (int dx : {-1, +1})
        for (int dy : {-1, +1}) {
          const Cell cc{c.x + dx * h, c.y + dy * h};
          if (bounded_orbit(prm, RealPoint(cc.x, cc.y), depth, bound)) next.push_back(cc);
        }
    }
    cell /= 2.0;
    if (next.size() > cap) {
      std::shuffle(next.begin(), next.end(), rng);
      next.resize(cap);
    }
    cells = std::move(next);
  }
  // Greedy polish: walk each point onto K by maximizing the two-sided escape
  // time over shrinking candidate stencils.
  auto escape_time = [&](const RealPoint& p, int cap_steps) {
    int tf = cap_steps, tb = cap_steps;
    RealPoint q = p;
    for (int i = 0; i < cap_steps; ++i) {
      q = apply_map(prm, q);
      if (!(q.cwiseAbs().maxCoeff() <= bound)) {
        tf = i;
        break;
      }
    }
    q = p;
    for (int i = 0; i < cap_steps; ++i) {
      q = apply_inverse(prm, q);
      if (!(q.cwiseAbs().maxCoeff() <= bound)) {
        tb = i;
        break;
      }
    }
    return std::min(tf, tb);
  };
  const int final_depth = opt.kcloud_depth;
  double contraction = 0.25;
  try {
    auto [a, b] = fixed_points(prm);
    contraction = std::min(0.6, std::max(std::abs(a.lambda_s), std::abs(b.lambda_s)));
  } catch (const ComplexFixedPoints&) {
  }
  if (cells.size() > size_t(opt.kcloud_target) * 5 / 2) {
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(size_t(opt.kcloud_target) * 5 / 2);
  }
  for (const auto& c : cells) {
    RealPoint p(c.x, c.y);
    int score = escape_time(p, final_depth + 2);
    for (int round = 0; round < 80 && score < final_depth + 2; ++round) {
      // the score-s plateau has width ~ contraction^s, so search at that scale
      const double step =
          std::max(opt.kcloud_cell * 0.25, 1.5 * std::pow(contraction, double(score)));
      RealPoint best = p;
      int best_score = score;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy) {
          if (!dx && !dy) continue;
          const RealPoint q = p + step * RealPoint(dx, dy);
          const int sc = escape_time(q, final_depth + 2);
          if (sc > best_score) {
            best_score = sc;
            best = q;
          }
        }
      if (best_score == score) {
        // plateau at this scale: probe other scales before giving up
        bool improved = false;
        for (double scale : {0.5, 2.0, 0.25, 4.0, 0.1}) {
          for (int dx = -1; dx <= 1 && !improved; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
              if (!dx && !dy) continue;
              const RealPoint q = p + scale * step * RealPoint(dx, dy);
              const int sc = escape_time(q, final_depth + 2);
              if (sc > score) {
                best = q;
                best_score = sc;
                improved = true;
                break;
              }
            }
          if (improved) break;
        }
        if (!improved) break;
      }
      p = best;
      score = best_score;
    }
    if (bounded_orbit(prm, p, final_depth, bound)) cloud.points.push_back(p);
  }
  try {
    auto [a, b] = fixed_points(prm);
    cloud.points.push_back(a.location);
    cloud.points.push_back(b.location);
  } catch (const ComplexFixedPoints&) {
  }
  std::sort(cloud.points.begin(), cloud.points.end(), [](const RealPoint& a, const RealPoint& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  if (cloud.points.size() > size_t(opt.kcloud_target)) {
    std::vector<RealPoint> keep;
    const double stride = double(cloud.points.size()) / opt.kcloud_target;
    for (int i = 0; i < opt.kcloud_target; ++i)
      keep.push_back(cloud.points[size_t(i * stride)]);
    cloud.points = std::move(keep);
  }
  cloud.depth = final_depth;
  cloud.cell = cell;
  return cloud;
}

namespace {

struct ShearFit {
  double z_lo = 0, z_hi = 0, y_lo = 0, y_hi = 0, shear = 0;
  void expand_point(const RealPoint& p) {
    const double z = p.x() - shear * p.y();
    z_lo = std::min(z_lo, z);
    z_hi = std::max(z_hi, z);
    y_lo = std::min(y_lo, p.y());
    y_hi = std::max(y_hi, p.y());
  }
  static ShearFit from_points(const std::vector<RealPoint>& pts, double shear) {
    ShearFit f;
    f.shear = shear;
    f.z_lo = f.y_lo = std::numeric_limits<double>::infinity();
    f.z_hi = f.y_hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : pts) f.expand_point(p);
    return f;
  }
  void expand_arc(const ManifoldArc& a) {
    for (const auto& p : a.pts) expand_point(p);
  }
};

BoxEmbedding make_box(int id, const ShearFit& f, double pad_z, double pad_y, double complex_pad,
                      double kappa, bool flip) {
  const double zc = 0.5 * (f.z_lo + f.z_hi), yc = 0.5 * (f.y_lo + f.y_hi);
  // the horizontal axis carries the complex headroom; inflating the vertical
  // axis widens the transit bands inside the empty padded regions
  const double hz = (0.5 * (f.z_hi - f.z_lo) + pad_z) * (1.0 + complex_pad);
  const double hy = (0.5 * (f.y_hi - f.y_lo) + pad_y) * 1.08;
  BoxEmbedding b;
  b.id = id;
  b.kappa = kappa;
  b.origin = PlanePoint(Complex(zc + f.shear * yc, 0), Complex(yc, 0));
  b.h_axis = PlanePoint(Complex(flip ? -hz : hz, 0), Complex(0, 0));
  b.v_axis = PlanePoint(Complex(f.shear * hy, 0), Complex(hy, 0));
  return b;
}

EdgeMap henon_edge(const Params& prm) {
  EdgeMap em;
  em.fwd = [prm](const PlanePoint& p) { return apply_map(prm, p); };
  em.inv = [prm](const PlanePoint& p) { return apply_inverse(prm, p); };
  return em;
}

// crossings of a polyline with the vertical plane line x = x0, restricted to
// |y| bounds; returns the crossing y values in arc order
std::vector<double> edge_crossings(const ManifoldArc& arc, double x0, double y_lo, double y_hi) {
  std::vector<double> ys;
  for (size_t i = 0; i + 1 < arc.pts.size(); ++i) {
    const double a = arc.pts[i].x() - x0, b = arc.pts[i + 1].x() - x0;
    if (a == 0.0 || a * b >= 0.0) continue;
    const double u = a / (a - b);
    const double y = arc.pts[i].y() + u * (arc.pts[i + 1].y() - arc.pts[i].y());
    if (y >= y_lo && y <= y_hi) ys.push_back(y);
  }
  return ys;
}

int probe_degree_z(const ManifoldArc& piece, const BoxEmbedding& bx) {
  // crossing count of frame-z along the piece against interior fibers
  std::vector<double> zs;
  zs.reserve(piece.pts.size());
  double zmin = 1e300, zmax = -1e300;
  for (const auto& p : piece.pts) {
    auto [z, w] = bx.to_frame_real(p);
    (void)w;
    zs.push_back(z);
    zmin = std::min(zmin, z);
    zmax = std::max(zmax, z);
  }
  if (zmax <= zmin) return 0;
  int deg = 0;
  for (double q : {0.35, 0.5, 0.65}) {
    const double zeta = zmin + q * (zmax - zmin);
    int c = 0;
    for (size_t i = 0; i + 1 < zs.size(); ++i)
      if ((zs[i] - zeta) * (zs[i + 1] - zeta) < 0.0) ++c;
    deg = std::max(deg, c);
  }
  return deg;
}

}  // namespace


namespace {

// Pushes the local unstable arc through the admissible transit chains and
// pulls the local stable arc back, collecting the strands of W^u(alpha) and
// W^s(alpha) inside the boxes generation by generation.
void build_strand_families(ThreeBoxSystem& sys, const ClassifierOptions& opt);

}  // namespace

ThreeBoxSystem build_three_box_system(const Params& prm, const ClassifierOptions& opt) {
  ThreeBoxSystem sys;
  sys.params = prm;

  try {
    auto [a, b] = fixed_points(prm);
    sys.alpha = a;
    sys.beta = b;
  } catch (const ComplexFixedPoints& e) {
    throw SystemInvalid(std::string("fixed points: ") + e.what(), "fixed-points");
  }
  const double r0 = escape_radius(prm) / 1.1;
  const double y_lim = r0 * 1.05 + 0.2;

  sys.cloud = sample_k_cloud(prm, opt);
  if (sys.cloud.points.size() < 200)
    throw SystemInvalid("K sampling too sparse: " + std::to_string(sys.cloud.points.size()) +
                            " points",
                        "k-cloud");
  double yk_lo = 1e300, yk_hi = -1e300, xk_lo = 1e300, xk_hi = -1e300;
  for (const auto& p : sys.cloud.points) {
    yk_lo = std::min(yk_lo, p.y());
    yk_hi = std::max(yk_hi, p.y());
    xk_lo = std::min(xk_lo, p.x());
    xk_hi = std::max(xk_hi, p.x());
  }

  // the coding cut: local stable arc of beta, clipped to the K slab so that
  // its bent tails outside the dynamical core cannot capture side tests
  sys.ws_beta = local_parametrization(prm, sys.beta, ManifoldKind::Stable, 20, +1);
  {
    auto keep = [&](const RealPoint& p) {
      return std::abs(p.x()) <= r0 + 0.8 && std::abs(p.y()) <= y_lim;
    };
    ManifoldArc grown = grow_arc_while(prm, sys.ws_beta, keep, 90, opt.arc);
    auto pieces = clip_arc(grown, [&](const RealPoint& p) {
      return p.y() >= yk_lo - 0.35 && p.y() <= yk_hi + 0.35 && std::abs(p.x()) <= r0 + 0.8;
    });
    sys.sigma = ManifoldArc{};
    for (auto& pc : pieces)
      if (pc.t.front() <= 0.0 && pc.t.back() >= 0.0) sys.sigma = pc;
    if (sys.sigma.empty() && !pieces.empty()) sys.sigma = pieces.front();
    orient_y_increasing(sys.sigma);
    if (sys.sigma.length() < 0.5)
      throw SystemInvalid("coding cut arc degenerate", "sigma");
  }

  // H itinerary side of the cut (0 left, 1 right), used to sort the cloud
  // into the three 2-block clusters
  auto hside = [&](const RealPoint& p) -> int {
    const double s = signed_side(sys.sigma, p);
    if (std::abs(s) < 1e-5) return -1;  // too close to the cut to call
    return s > 0.0 ? 0 : 1;
  };
  std::vector<RealPoint> cl[3];
  int anomalies = 0;
  for (const auto& p : sys.cloud.points) {
    const int h0 = hside(p);
    const int h1 = hside(apply_map(prm, p));
    if (h0 < 0 || h1 < 0) continue;
    if (h0 == 0 && h1 == 0) cl[0].push_back(p);
    else if (h0 == 0 && h1 == 1) cl[1].push_back(p);
    else if (h0 == 1 && h1 == 0) cl[2].push_back(p);
    else ++anomalies;
  }
  if (anomalies > int(sys.cloud.points.size() / 50))
    throw SystemInvalid("itinerary 11 occurs on the sampled K set (" + std::to_string(anomalies) +
                            " points): cut arc does not separate",
                        "h-coding");
  for (int j = 0; j < 3; ++j)
    if (cl[j].size() < 20)
      throw SystemInvalid("box cluster " + std::to_string(j) + " too small", "clusters");

  // local stable arc of alpha, clipped to the K slab like the cut
  sys.ws_alpha = local_parametrization(prm, sys.alpha, ManifoldKind::Stable, 20, +1);
  ManifoldArc ws_alpha_arc;
  {
    auto keep = [&](const RealPoint& p) {
      return std::abs(p.x()) <= r0 + 0.8 && std::abs(p.y()) <= y_lim;
    };
    ManifoldArc grown = grow_arc_while(prm, sys.ws_alpha, keep, 90, opt.arc);
    auto pieces = clip_arc(grown, [&](const RealPoint& p) {
      return p.y() >= yk_lo - 0.35 && p.y() <= yk_hi + 0.35 && std::abs(p.x()) <= r0 + 0.8;
    });
    for (auto& pc : pieces)
      if (pc.t.front() <= 0.0 && pc.t.back() >= 0.0) ws_alpha_arc = pc;
    if (ws_alpha_arc.empty() && !pieces.empty()) ws_alpha_arc = pieces.front();
    orient_y_increasing(ws_alpha_arc);
  }
  const double s0 = lsq_slope_x_of_y(ws_alpha_arc);
  const double s12 = lsq_slope_x_of_y(sys.sigma);

  // sigma' = the branch of f^-1(sigma) through the left cluster
  {
    ManifoldArc pre = map_arc(prm, sys.sigma, -1);
    const double x_split = 0.5 * (sys.alpha.location.x() + sys.beta.location.x());
    auto keep = [&](const RealPoint& p) {
      return p.x() < x_split && p.y() >= yk_lo - 0.35 && p.y() <= yk_hi + 0.35 &&
             std::abs(p.x()) <= r0 + 0.8;
    };
    auto pieces = clip_arc(pre, keep);
    if (pieces.empty()) throw SystemInvalid("sigma' branch not found", "sigma-prime");
    size_t best = 0;
    for (size_t i = 1; i < pieces.size(); ++i)
      if (pieces[i].length() > pieces[best].length()) best = i;
    sys.sigma_prime = pieces[best];
    orient_y_increasing(sys.sigma_prime);
  }

  const std::vector<double> pad_schedule = {1.0, 1.3, 0.75, 1.6, 0.55};
  std::string first_failure;
  std::string all_failures;
  for (double pad_mul : pad_schedule) {
    const double pz = opt.pad_z * pad_mul;
    const double py = opt.pad_y * pad_mul;
    sys.check_log.clear();

    // expansions by landmark arcs are clipped to the cluster y-hulls: the arc
    // ends outside the dynamical core swing wide in the sheared coordinate
    auto expand_clipped = [](ShearFit& f, const ManifoldArc& arc, double ylo, double yhi) {
      for (const auto& p : arc.pts)
        if (p.y() >= ylo && p.y() <= yhi) f.expand_point(p);
    };
    ShearFit f0 = ShearFit::from_points(cl[0], s0);
    f0.expand_point(sys.alpha.location);
    const double y0lo = f0.y_lo - 0.3, y0hi = f0.y_hi + 0.3;
    expand_clipped(f0, sys.sigma_prime, y0lo, y0hi);
    ShearFit f1 = ShearFit::from_points(cl[1], s12);
    f1.expand_point(sys.beta.location);
    ShearFit f2 = ShearFit::from_points(cl[2], s12);
    f2.expand_point(sys.beta.location);
    {
      const double ylo = std::min(f1.y_lo, f2.y_lo) - 0.3, yhi = std::max(f1.y_hi, f2.y_hi) + 0.3;
      expand_clipped(f1, sys.sigma_prime, ylo, yhi);
      expand_clipped(f1, sys.sigma, ylo, yhi);
      expand_clipped(f2, sys.sigma, ylo, yhi);
    }
    // B1 and B2 share the vertical extent so that their overlap is a bidisk
    // of full height
    const double y1 = std::min(f1.y_lo, f2.y_lo), y2 = std::max(f1.y_hi, f2.y_hi);
    f1.y_lo = f2.y_lo = y1;
    f1.y_hi = f2.y_hi = y2;

    CrossedSystem cs;
    cs.graph.n = 3;
    cs.graph.edges = {{0, 0}, {0, 1}, {1, 2}, {2, 0}, {2, 1}};
    cs.graph.degrees = {{{0, 0}, 1}, {{0, 1}, 1}, {{1, 2}, 2}, {{2, 0}, 1}, {{2, 1}, 1}};
    for (const auto& e : cs.graph.edges) cs.maps[e] = henon_edge(prm);

    // widen source boxes until every transit band sits inside kappa with
    // margin; the bands move as the boxes move, so iterate
    ShearFit* fits[3] = {&f0, &f1, &f2};
    for (int adjust = 0; adjust < 6; ++adjust) {
      cs.boxes = {make_box(0, f0, pz, py, opt.complex_pad, opt.kappa, false),
                  make_box(1, f1, pz, py, opt.complex_pad, opt.kappa, false),
                  make_box(2, f2, pz, py, opt.complex_pad, opt.kappa, true)};
      bool changed = false;
      for (const auto& e : cs.graph.edges) {
        const BoxEmbedding& bs = cs.boxes[size_t(e.first)];
        const BoxEmbedding& bt = cs.boxes[size_t(e.second)];
        const auto probe = check_crossed(cs.maps.at(e).fwd, bs, bt, 14, opt.im_thickness);
        const double limit = 0.97 * bs.kappa;
        const double half = bs.h_axis.norm();
        ShearFit& fit = *fits[size_t(e.first)];
        const bool flip = e.first == 2;
        const double zpos = probe.reach_pos, zneg = -probe.reach_neg;
        if (zpos > limit) {
          (flip ? fit.z_lo : fit.z_hi) += (flip ? -1.0 : 1.0) * (zpos - limit + 0.015) * half;
          changed = true;
        }
        if (zneg < -limit) {
          (flip ? fit.z_hi : fit.z_lo) += (flip ? -1.0 : 1.0) * (zneg + limit - 0.015) * half;
          changed = true;
        }
        // vertical image footprint: grow the target box height
        ShearFit& tfit = *fits[size_t(e.second)];
        const double vT = bt.v_axis.norm();
        if (probe.reach_w_pos > limit) {
          tfit.y_hi += (probe.reach_w_pos - limit + 0.015) * vT;
          changed = true;
        }
        if (probe.reach_w_neg > limit) {
          tfit.y_lo -= (probe.reach_w_neg - limit + 0.015) * vT;
          changed = true;
        }
      }
      // B1 and B2 keep a common vertical extent (their overlap must be a
      // full-height bidisk in both)
      f1.y_lo = f2.y_lo = std::min(f1.y_lo, f2.y_lo);
      f1.y_hi = f2.y_hi = std::max(f1.y_hi, f2.y_hi);
      // a widening that has swallowed a saddle can never validate; stop early
      if (cs.boxes[1].contains(sys.alpha.location, 1.01) ||
          cs.boxes[2].contains(sys.alpha.location, 1.01) ||
          cs.boxes[0].contains(sys.beta.location, 1.01))
        break;
      if (!changed) break;
    }
    cs.boxes = {make_box(0, f0, pz, py, opt.complex_pad, opt.kappa, false),
                make_box(1, f1, pz, py, opt.complex_pad, opt.kappa, false),
                make_box(2, f2, pz, py, opt.complex_pad, opt.kappa, true)};
    sys.crossed = cs;

    // overlap boxes: B12 is exact (shared shear); B01 hugs sigma'
    {
      ShearFit f12;
      f12.shear = s12;
      auto [z1lo, z1hi] = std::pair<double, double>(f1.z_lo - pz, f1.z_hi + pz);
      auto [z2lo, z2hi] = std::pair<double, double>(f2.z_lo - pz, f2.z_hi + pz);
      (void)z1lo;
      (void)z2hi;
      f12.z_lo = z2lo;
      f12.z_hi = z1hi;
      f12.y_lo = y1 - py;
      f12.y_hi = y2 + py;
      sys.overlap_12 = make_box(12, f12, 0.0, 0.0, opt.complex_pad, opt.kappa, false);
      const double s01 = lsq_slope_x_of_y(sys.sigma_prime);
      ShearFit f01;
      f01.shear = s01;
      f01.z_lo = f01.y_lo = std::numeric_limits<double>::infinity();
      f01.z_hi = f01.y_hi = -std::numeric_limits<double>::infinity();
      f01.expand_arc(sys.sigma_prime);
      f01.y_lo = std::max(f01.y_lo, std::max(f0.y_lo, y1));
      f01.y_hi = std::min(f01.y_hi, std::min(f0.y_hi, y2));
      sys.overlap_01 = make_box(1, f01, 0.6 * pz, 0.0, opt.complex_pad, opt.kappa, false);
      sys.overlap_01.id = 1;
    }

    // landmark arcs in the boxes
    sys.wu_alpha = local_parametrization(prm, sys.alpha, ManifoldKind::Unstable, 20,
                                         sys.alpha.eigvec_u.x() > 0 ? +1 : -1);
    {
      const BoxEmbedding& b0 = sys.b(0);
      auto keep0 = [&b0](const RealPoint& p) { return b0.contains(p, 1.05); };
      ManifoldArc g = grow_arc_while(prm, sys.wu_alpha, keep0, 60, opt.arc);
      auto pieces = clip_arc(g, [&b0](const RealPoint& p) { return b0.contains(p); });
      // component through alpha (t = 0)
      sys.gamma0 = ManifoldArc{};
      for (auto& pc : pieces)
        if (pc.t.front() <= 0.0 && pc.t.back() >= 0.0) sys.gamma0 = pc;
      if (sys.gamma0.empty() && !pieces.empty()) sys.gamma0 = pieces.front();
      sys.gamma0.kind = ManifoldKind::Unstable;
      sys.gamma0.coding_tag = "0^:*0";

      auto loc_pieces = clip_arc(ws_alpha_arc, [&b0](const RealPoint& p) { return b0.contains(p); });
      sys.ws_loc_alpha = ManifoldArc{};
      for (auto& pc : loc_pieces)
        if (pc.t.front() <= 0.0 && pc.t.back() >= 0.0) sys.ws_loc_alpha = pc;
      if (sys.ws_loc_alpha.empty() && !loc_pieces.empty()) sys.ws_loc_alpha = loc_pieces.front();
      orient_y_increasing(sys.ws_loc_alpha);
      sys.ws_loc_alpha.coding_tag = "*0:0^";
    }
    if (sys.gamma0.size() < 2 || sys.ws_loc_alpha.size() < 2) {
      first_failure = first_failure.empty() ? "landmark arcs missing in B0" : first_failure;
      continue;
    }

    // stable arc in B2: the f^-1 branch of the local stable arc of alpha
    {
      ManifoldArc pre = map_arc(prm, ws_alpha_arc, -1);
      const BoxEmbedding& b2 = sys.b(2);
      auto pieces = clip_arc(pre, [&b2](const RealPoint& p) { return b2.contains(p); });
      sys.ws2_arc = ManifoldArc{};
      double best_span = 0.0;
      for (auto& pc : pieces) {
        double wlo = 1e300, whi = -1e300;
        for (const auto& p : pc.pts) {
          auto [z, w] = b2.to_frame_real(p);
          (void)z;
          wlo = std::min(wlo, w);
          whi = std::max(whi, w);
        }
        const double span = whi - wlo;
        if (span > best_span) {
          best_span = span;
          sys.ws2_arc = pc;
        }
      }
      if (best_span < 1.2) {
        first_failure = first_failure.empty() ? "stable arc does not span B2" : first_failure;
        continue;
      }
      orient_y_increasing(sys.ws2_arc);
      sys.ws2_arc.coding_tag = "*2:0^";
    }

    if (!opt.validate) break;

    // saddle placement
    std::string fail;
    if (!sys.b(0).contains(sys.alpha.location, 0.995)) fail = "alpha not inside B0";
    if (fail.empty() && (sys.b(1).contains(sys.alpha.location) || sys.b(2).contains(sys.alpha.location)))
      fail = "alpha leaks into B1/B2";
    if (fail.empty() && !(sys.b(1).contains(sys.beta.location, 0.995) &&
                          sys.b(2).contains(sys.beta.location, 0.995)))
      fail = "beta not inside B1 cap B2";
    // B0 and B2 disjoint
    if (fail.empty()) {
      for (double z = -1.0; z <= 1.0 && fail.empty(); z += 0.125)
        for (double w = -1.0; w <= 1.0; w += 0.125)
          if (sys.b(2).contains(sys.b(0).to_plane_real(z, w))) {
            fail = "B0 and B2 intersect";
            break;
          }
    }

    // crossed-mapping checks and degrees
    if (fail.empty()) {
      for (const auto& e : cs.graph.edges) {
        const auto rep = check_crossed(sys.crossed.map(e.first, e.second).fwd, sys.b(e.first),
                                       sys.b(e.second), opt.check_grid, opt.im_thickness);
        std::ostringstream os;
        os << "edge " << e.first << "->" << e.second << ": h=" << rep.horizontal_footprint
           << " v=" << rep.vertical_footprint << (rep.ok ? " ok" : " FAIL " + rep.violated);
        sys.check_log.push_back(os.str());
        if (!rep.ok) {
          fail = "check_crossed " + std::to_string(e.first) + "->" + std::to_string(e.second) +
                 ": " + rep.violated;
          break;
        }
        int d = 0;
        try {
          d = degree(sys.crossed.map(e.first, e.second).fwd, sys.b(e.first), sys.b(e.second), 5,
                     opt.seed + 97u * unsigned(e.first) + 13u * unsigned(e.second));
        } catch (const InconsistentDegree& ex) {
          fail = std::string("degree ") + ex.what();
          break;
        }
        if (d != cs.graph.degree(e.first, e.second)) {
          fail = "edge " + std::to_string(e.first) + "->" + std::to_string(e.second) +
                 " degree " + std::to_string(d) + " != " +
                 std::to_string(cs.graph.degree(e.first, e.second));
          break;
        }
      }
    }

    // horizontal orientation of the degree-1 edges (Figure 5.1 signs)
    if (fail.empty()) {
      for (const auto& e : cs.graph.edges) {
        if (cs.graph.degree(e.first, e.second) != 1) continue;
        const BoxEmbedding& bs = sys.b(e.first);
        const BoxEmbedding& bt = sys.b(e.second);
        std::vector<double> ze, ye;
        double prev_z = 0.0;
        bool have = false, increasing = true;
        for (int i = -40; i <= 40; ++i) {
          const double z = 0.9 * i / 40.0;
          const PlanePoint q = apply_map(prm, PlanePoint(Complex(bs.to_plane_real(z, 0.0).x(), 0),
                                                     Complex(bs.to_plane_real(z, 0.0).y(), 0)));
          auto [zt, wt] = bt.to_frame(q);
          if (std::abs(zt) <= 1.0 && std::abs(wt) <= 1.0) {
            if (have && zt.real() <= prev_z) increasing = false;
            prev_z = zt.real();
            have = true;
          }
        }
        if (have && !increasing) {
          fail = "edge " + std::to_string(e.first) + "->" + std::to_string(e.second) +
                 " reverses horizontal orientation";
          break;
        }
      }
    }

    // fold geometry of f_{1,2} and the strip arrangement
    if (fail.empty()) {
      const BoxEmbedding& b1 = sys.b(1);
      const BoxEmbedding& b2 = sys.b(2);
      auto trans01 = [&](const RealPoint& p) {
        return sys.b(0).contains(p) && b1.contains(apply_map(prm, p));
      };
      auto g_pieces = clip_arc(sys.gamma0, trans01);
      if (g_pieces.empty()) {
        fail = "0->1 transit misses the local unstable arc";
      } else {
        ManifoldArc a1 = map_arc(prm, g_pieces.front(), +1);
        refine_arc(a1, opt.arc);
        ManifoldArc fold = map_arc(prm, a1, +1);
        refine_arc(fold, opt.arc);
        // plane-left edge of B2 and its vertical range
        double x_left = 1e300, x_right = -1e300, ylo = 1e300, yhi = -1e300;
        for (double w : {-1.0, 1.0})
          for (double z : {-1.0, 1.0}) {
            const RealPoint corner = b2.to_plane_real(z, w);
            x_left = std::min(x_left, corner.x());
            x_right = std::max(x_right, corner.x());
            ylo = std::min(ylo, corner.y());
            yhi = std::max(yhi, corner.y());
          }
        // use the sheared left edge: test crossings in frame coordinates
        std::vector<std::pair<double, double>> crossings;  // (t, y)
        for (size_t i = 0; i + 1 < fold.pts.size(); ++i) {
          auto [za, wa] = b2.to_frame_real(fold.pts[i]);
          auto [zb, wb] = b2.to_frame_real(fold.pts[i + 1]);
          // plane-left edge of the flipped B2 frame is z = +1
          const double a = za - 1.0, bq = zb - 1.0;
          if (a * bq < 0.0 && std::abs(wa) <= 1.0 && std::abs(wb) <= 1.0) {
            const double u = a / (a - bq);
            crossings.emplace_back(fold.t[i], fold.pts[i].y() +
                                                  u * (fold.pts[i + 1].y() - fold.pts[i].y()));
          }
        }
        double tip_x = -1e300;
        for (const auto& p : fold.pts) tip_x = std::max(tip_x, p.x());
        if (crossings.size() != 2) {
          fail = "fold arc crosses the B2 entry edge " + std::to_string(crossings.size()) +
                 " times (expected 2)";
        } else if (!(crossings[1].second < crossings[0].second)) {
          fail = "fold arc crossings not ordered (second not below first)";
        } else if (!(tip_x > x_right + 0.05)) {
          fail = "fold tip does not clear the right side of B2";
        }
        if (fail.empty()) {
          // strip arrangement in B0: the 0->1 transit lies right of the 0->0 transit
          auto mean_strip_z = [&](int target) {
            double sum = 0;
            int cnt = 0;
            for (int i = -60; i <= 60; ++i) {
              const double z = 0.95 * i / 60.0;
              for (double w : {-0.5, 0.0, 0.5}) {
                const RealPoint p = sys.b(0).to_plane_real(z, w);
                if (sys.b(target).contains(apply_map(prm, p))) {
                  sum += z;
                  ++cnt;
                }
              }
            }
            return cnt ? sum / cnt : std::numeric_limits<double>::quiet_NaN();
          };
          const double z00 = mean_strip_z(0), z01 = mean_strip_z(1);
          if (!(z00 < z01)) fail = "strip order: 0->1 transit not right of 0->0";
        }
        if (fail.empty()) {
          // images into B0 from 0 (top) and from 2 (bottom)
          auto mean_image_y = [&](int src) {
            double sum = 0;
            int cnt = 0;
            const BoxEmbedding& bs = sys.b(src);
            for (int i = -40; i <= 40; ++i)
              for (int j = -2; j <= 2; ++j) {
                const RealPoint p = bs.to_plane_real(0.95 * i / 40.0, j / 2.5);
                const RealPoint q = apply_map(prm, p);
                if (sys.b(0).contains(q)) {
                  sum += q.y();
                  ++cnt;
                }
              }
            return cnt ? sum / cnt : std::numeric_limits<double>::quiet_NaN();
          };
          const double yi0 = mean_image_y(0), yi2 = mean_image_y(2);
          if (!(yi0 > yi2)) fail = "image order: f(B0) not above f(B2) inside B0";
        }
      }
    }

    // separation constants
    if (fail.empty()) {
      sys.separation = verify_separation(sys.crossed, sys.cloud.points, opt.separation_grid);
      if (!sys.separation.ok) {
        fail = "separation " + sys.separation.violated;
      } else {
        sys.tolerances = SystemTolerances(sys.separation.eta, sys.separation.eta / 4.0);
      }
    }

    if (fail.empty()) {
      build_strand_families(sys, opt);
      sys.check_log.push_back("pads x" + std::to_string(pad_mul) + " ok; eta=" +
                              std::to_string(sys.separation.eta));
      return sys;
    }
    if (first_failure.empty()) first_failure = fail;
    all_failures += " [pads x" + std::to_string(pad_mul) + ": " + fail + "]";
  }

  if (!opt.validate) {
    build_strand_families(sys, opt);
    sys.tolerances = SystemTolerances(1e-3, 1e-4);
    return sys;
  }
  throw SystemInvalid(all_failures.empty() ? "box construction failed" : all_failures,
                      "validation");
}


namespace {

void build_strand_families(ThreeBoxSystem& sys, const ClassifierOptions& opt) {
  const Params& prm = sys.params;
  ArcOptions aopt = opt.deep_arc;

  // unstable side: forward pushes along the graph edges
  std::vector<ManifoldArc> cur;
  for (int j = 0; j < 3; ++j) {
    auto pieces = clip_arc(sys.gamma0, [&](const RealPoint& p) { return sys.b(j).contains(p); });
    for (auto& pc : pieces)
      if (pc.length() > 1e-3) {
        pc.degree_tag = j;
        cur.push_back(pc);
      }
  }
  sys.wu_pieces = cur;
  for (int gen = 1; gen <= opt.deep_iterations; ++gen) {
    std::vector<ManifoldArc> next;
    for (const auto& piece : cur) {
      const int i = piece.degree_tag;
      for (int j : sys.crossed.graph.successors(i)) {
        auto transits = clip_arc(piece, [&](const RealPoint& p) {
          return sys.b(i).contains(p) && sys.b(j).contains(apply_map(prm, p));
        });
        for (auto& tr : transits) {
          if (tr.length() < 1e-5) continue;
          ManifoldArc img = map_arc(prm, tr, +1);
          refine_arc(img, aopt);
          img.degree_tag = j;
          img.coding_tag = piece.coding_tag + std::to_string(j);
          if (img.length() > 1e-3) next.push_back(std::move(img));
        }
      }
    }
    for (const auto& a : next) sys.wu_pieces.push_back(a);
    cur = std::move(next);
    if (cur.empty() || sys.wu_pieces.size() > 4000) break;
  }

  // stable side: backward pulls
  std::vector<ManifoldArc> scur;
  ManifoldArc seed = sys.ws_loc_alpha;
  seed.degree_tag = 0;
  scur.push_back(seed);
  if (!sys.ws2_arc.empty()) {
    ManifoldArc s2 = sys.ws2_arc;
    s2.degree_tag = 2;
    scur.push_back(s2);
  }
  sys.ws_pieces = scur;
  for (int gen = 1; gen <= opt.deep_iterations; ++gen) {
    std::vector<ManifoldArc> next;
    for (const auto& piece : scur) {
      const int j = piece.degree_tag;
      ManifoldArc pre = map_arc(prm, piece, -1);
      for (int i : sys.crossed.graph.predecessors(j)) {
        auto pieces2 = clip_arc(pre, [&](const RealPoint& p) { return sys.b(i).contains(p); });
        for (auto& pc : pieces2) {
          if (pc.length() < 1e-5) continue;
          refine_arc(pc, aopt);
          pc.degree_tag = i;
          pc.coding_tag = std::to_string(i) + piece.coding_tag;
          if (pc.length() > 1e-3) next.push_back(std::move(pc));
        }
      }
    }
    for (const auto& a : next) sys.ws_pieces.push_back(a);
    scur = std::move(next);
    if (scur.empty() || sys.ws_pieces.size() > 4000) break;
  }
}

}  // namespace

}  // namespace henon

namespace henon {

namespace {

// the first two stages of the S pipeline: the degree-2 curve B^r(0bar 1 **2**)
// as an unclipped fold arc (empty when the 0->1 transit misses gamma0)
std::vector<ManifoldArc> first_fold(const ThreeBoxSystem& sys, const ClassifierOptions& opt) {
  const Params& prm = sys.params;
  auto trans01 = [&](const RealPoint& p) {
    return sys.b(0).contains(p) && sys.b(1).contains(apply_map(prm, p));
  };
  std::vector<ManifoldArc> folds;
  for (auto& g : clip_arc(sys.gamma0, trans01)) {
    if (g.length() < 1e-6) continue;
    ManifoldArc a1 = map_arc(prm, g, +1);
    refine_arc(a1, opt.arc);
    ManifoldArc f = map_arc(prm, a1, +1);
    refine_arc(f, opt.arc);
    f.kind = ManifoldKind::Unstable;
    f.coding_tag = "0^:1 *2";
    f.degree_tag = 2;
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<ManifoldArc> nested_folds(const ThreeBoxSystem& sys, const ClassifierOptions& opt) {
  const Params& prm = sys.params;
  auto trans21 = [&](const RealPoint& p) {
    return sys.b(2).contains(p) && sys.b(1).contains(apply_map(prm, p));
  };
  std::vector<ManifoldArc> nu;
  for (auto& fold : first_fold(sys, opt)) {
    for (auto& piece : clip_arc(fold, trans21)) {
      if (piece.length() < 1e-6) continue;
      ManifoldArc a3 = map_arc(prm, piece, +1);
      refine_arc(a3, opt.arc);
      ManifoldArc f4 = map_arc(prm, a3, +1);
      refine_arc(f4, opt.arc);
      f4.kind = ManifoldKind::Unstable;
      f4.coding_tag = "0^:1 2 1 *2";
      f4.degree_tag = 2;
      nu.push_back(std::move(f4));
    }
  }
  // inner arc first (smaller reach toward the fold tips)
  std::sort(nu.begin(), nu.end(), [](const ManifoldArc& a, const ManifoldArc& b) {
    double ma = -1e300, mb = -1e300;
    for (const auto& p : a.pts) ma = std::max(ma, p.x());
    for (const auto& p : b.pts) mb = std::max(mb, p.x());
    return ma < mb;
  });
  return nu;
}

int distinct_points(const std::vector<IntersectionRecord>& recs) { return int(recs.size()); }

int total_multiplicity(const std::vector<IntersectionRecord>& recs) {
  int m = 0;
  for (const auto& r : recs) m += r.multiplicity;
  return m;
}

}  // namespace

bool check_star_condition(const ThreeBoxSystem& sys, std::vector<ManifoldArc>* taus) {
  ClassifierOptions opt;
  bool star = false;
  std::vector<std::pair<double, ManifoldArc>> found;  // (mean y, tau)
  for (auto& fold : first_fold(sys, opt)) {
    for (auto& branch : clip_arc(fold, [&](const RealPoint& p) { return sys.b(2).contains(p); })) {
      auto recs = intersect_arcs(branch, sys.ws2_arc, opt.tangency_tol);
      if (recs.empty()) continue;
      star = true;
      if (taus) {
        // sub-arc from the B2 entry side to the first stable crossing
        double t_entry = branch.t.front();
        auto [z_front, w_front] = sys.b(2).to_frame_real(branch.pts.front());
        auto [z_back, w_back] = sys.b(2).to_frame_real(branch.pts.back());
        (void)w_front;
        (void)w_back;
        if (std::abs(z_back - 1.0) < std::abs(z_front - 1.0)) t_entry = branch.t.back();
        double t_cross = recs.front().t_on_a;
        for (const auto& r : recs)
          if (std::abs(r.t_on_a - t_entry) < std::abs(t_cross - t_entry)) t_cross = r.t_on_a;
        ManifoldArc tau = sub_arc(branch, std::min(t_entry, t_cross), std::max(t_entry, t_cross));
        double ymean = 0;
        for (const auto& p : tau.pts) ymean += p.y();
        if (!tau.pts.empty()) ymean /= double(tau.pts.size());
        found.emplace_back(ymean, std::move(tau));
      }
    }
  }
  if (taus) {
    std::sort(found.begin(), found.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    taus->clear();
    for (auto& f : found) taus->push_back(std::move(f.second));  // tau' (upper) first
  }
  return star;
}

std::vector<IntersectionRecord> compute_S(const ThreeBoxSystem& sys,
                                          std::vector<ManifoldArc>* nus,
                                          const ClassifierOptions& opt) {
  auto nu = nested_folds(sys, opt);
  std::vector<IntersectionRecord> out;
  for (auto& arc : nu) {
    for (auto& rec : intersect_arcs(arc, sys.ws2_arc, opt.tangency_tol)) {
      if (!sys.b(2).contains(rec.location, 1.1)) continue;
      out.push_back(rec);
    }
  }
  // deduplicate across arcs
  std::sort(out.begin(), out.end(), [](const IntersectionRecord& a, const IntersectionRecord& b) {
    return a.location.y() < b.location.y();
  });
  std::vector<IntersectionRecord> dedup;
  for (auto& r : out) {
    if (!dedup.empty() && (dedup.back().location - r.location).norm() < 1e-9) continue;
    dedup.push_back(r);
  }
  if (total_multiplicity(dedup) > 4)
    throw DegreeViolation("compute_S: more than 4 intersections counting multiplicity");
  if (nus) *nus = std::move(nu);
  return dedup;
}

ClassificationResult classify(const Params& prm, const ClassifierOptions& opt) {
  ClassificationResult res;
  std::shared_ptr<ThreeBoxSystem> sys;
  try {
    sys = std::make_shared<ThreeBoxSystem>(build_three_box_system(prm, opt));
  } catch (const SystemInvalid& e) {
    res.invalid_reason = e.what();
    return res;
  }
  res.system = sys;
  res.eta = sys->separation.eta;
  try {
    res.condition_star = check_star_condition(*sys, &res.tau_arcs);
    res.S_points = compute_S(*sys, &res.nu_arcs, opt);
  } catch (const std::exception& e) {
    res.invalid_reason = std::string("S computation: ") + e.what();
    return res;
  }
  const int npts = distinct_points(res.S_points);
  int tangential = 0;
  double min_resid = std::numeric_limits<double>::infinity();
  for (const auto& r : res.S_points) {
    if (r.multiplicity == 2 && r.tangency_flag) ++tangential;
    if (r.tangency_residual > 0.0) min_resid = std::min(min_resid, r.tangency_residual);
  }
  if (npts >= 1 && !res.condition_star) {
    res.invalid_reason = "S nonempty but condition (*) failed";
    return res;
  }
  if (npts == 4 && tangential == 0) res.verdict = Verdict::Horseshoe;
  else if (npts == 3 && tangential == 1) res.verdict = Verdict::FirstTangency;
  else if (npts <= 2) res.verdict = Verdict::SubMaximal;
  else {
    res.invalid_reason = "anomalous S structure: " + std::to_string(npts) + " points, " +
                         std::to_string(tangential) + " tangential";
    return res;
  }
  if (res.verdict == Verdict::FirstTangency) {
    for (const auto& r : res.S_points)
      if (r.tangency_flag) {
        res.star = apply_inverse(prm, r.location);
        res.tangency_residual = r.tangency_residual;
      }
  } else if (std::isfinite(min_resid)) {
    res.tangency_residual = min_resid;
  }
  if (opt.validate && res.verdict == Verdict::Horseshoe) {
    try {
      TrimReport trim = trim_and_check_degrees(*sys, res.S_points, 6, opt);
      ExpansionReport exp = expansion_check(*sys, trim, opt);
      res.min_expansion_unstable = exp.min_ratio_unstable;
      res.min_expansion_stable = exp.min_ratio_stable;
    } catch (const std::exception& e) {
      // keep the Theorem-1 verdict; expansion diagnostics stay NaN
      (void)e;
    }
  }
  return res;
}

int ABPartition::side(const RealPoint& p) const {
  const RealPoint q = apply_inverse(params, p);
  if (b2.contains(q, shrink)) return 1;
  if (b0.contains(q, shrink)) return 0;
  if (b1.contains(q, shrink)) {
    const RealPoint r = apply_inverse(params, q);
    if (b2.contains(r, shrink)) return 1;
    if (b0.contains(r, shrink) || b1.contains(r, shrink)) return 0;
    return -1;
  }
  return -1;
}

ABPartition build_ab_partition(const ThreeBoxSystem& sys, const std::vector<IntersectionRecord>& S,
                               const ClassifierOptions& opt) {
  if (distinct_points(S) < 3)
    throw PartitionFailure("build_ab_partition: requires |S| >= 3");
  ABPartition ab;
  ab.params = sys.params;
  ab.b0 = sys.b(0);
  ab.b1 = sys.b(1);
  ab.b2 = sys.b(2);
  ab.shrink = 1.005;
  compute_S(sys, &ab.nu_arcs, opt);
  check_star_condition(sys, &ab.tau_arcs);
  for (const auto& r : S)
    if (r.tangency_flag) {
      ab.has_contact = true;
      ab.contact = r.location;
    }
  // the two halves live in disjoint preimage boxes, so for j = 0,1 the sets
  // are disjoint as long as B0 and B2 are
  for (double z = -1.0; z <= 1.0; z += 0.2)
    for (double w = -1.0; w <= 1.0; w += 0.2)
      if (ab.b2.contains(ab.b0.to_plane_real(z, w)))
        throw PartitionFailure("build_ab_partition: B0 and B2 overlap");
  if (ab.side(sys.alpha.location) != 0)
    throw PartitionFailure("build_ab_partition: alpha not on the a side");
  if (ab.side(sys.beta.location) != 1)
    throw PartitionFailure("build_ab_partition: beta not on the b side");
  int misses = 0;
  RealPoint witness = RealPoint::Zero();
  for (const auto& p : sys.cloud.points)
    if (ab.side(p) < 0) {
      ++misses;
      witness = p;
    }
  if (misses > 0) {
    std::ostringstream os;
    os << "build_ab_partition: " << misses << " sampled K points uncovered, witness ("
       << witness.x() << "," << witness.y() << ")";
    throw PartitionFailure(os.str());
  }
  return ab;
}

namespace {

std::string word_of(const std::vector<int>& digits) {
  std::string w;
  for (int d : digits) w.push_back(d == kSymbolB ? 'b' : 'a');
  return w;
}

}  // namespace

EntropyReport entropy_certificate(const ThreeBoxSystem& sys, const ABPartition& partition,
                                  int n_max, const ClassifierOptions& opt) {
  EntropyReport rep;
  rep.n_max = n_max;
  const Params& prm = sys.params;
  const double bound = 2.0 * escape_radius(prm);

  auto digits_fwd = [&](const RealPoint& p, int n) -> std::vector<int> {
    std::vector<int> d;
    RealPoint q = p;
    for (int j = 0; j < n; ++j) {
      const int s = partition.side(q);
      if (s < 0) return {};
      d.push_back(s);
      q = apply_map(prm, q);
    }
    return d;
  };

  // Newton on f^n - id with the chained exact Jacobian
  auto newton_fix = [&](RealPoint p, int n, RealPoint* out) -> bool {
    for (int it = 0; it < 60; ++it) {
      Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
      RealPoint q = p;
      for (int k = 0; k < n; ++k) {
        J = jacobian(prm, q) * J;
        q = apply_map(prm, q);
        if (!(q.cwiseAbs().maxCoeff() <= bound)) return false;
      }
      const RealPoint g = q - p;
      if (g.norm() < 1e-12) break;
      Eigen::Matrix2d A = J - Eigen::Matrix2d::Identity();
      const RealPoint step = A.fullPivLu().solve(-g);
      if (!step.allFinite()) return false;
      p += step.norm() > 1.0 ? RealPoint(step / step.norm()) : step;
    }
    // verify
    Eigen::Matrix2d J;
    RealPoint q = p;
    for (int k = 0; k < n; ++k) q = apply_map(prm, q);
    (void)J;
    if ((q - p).norm() > 1e-10) return false;
    *out = p;
    return true;
  };

  std::set<std::string> cloud_words;
  {
    const int reliable = 7;
    for (size_t i = 0; i < sys.cloud.points.size(); i += 3) {
      auto d = digits_fwd(sys.cloud.points[i], std::min(n_max, reliable));
      if (!d.empty()) cloud_words.insert(word_of(d));
    }
  }

  for (int n = 1; n <= n_max; ++n) {
    std::map<std::string, RealPoint> roots;
    auto try_seed = [&](const RealPoint& seed) {
      RealPoint p;
      if (!newton_fix(seed, n, &p)) return;
      if (!sys.b(0).contains(p, 1.02) && !sys.b(1).contains(p, 1.02) && !sys.b(2).contains(p, 1.02))
        return;
      const auto d = digits_fwd(p, n);
      if (int(d.size()) != n) return;
      const std::string w = word_of(d);
      auto it = roots.find(w);
      if (it == roots.end()) roots.emplace(w, p);
    };
    const size_t stride = std::max<size_t>(1, sys.cloud.points.size() / 2500);
    for (size_t i = 0; i < sys.cloud.points.size(); i += stride) try_seed(sys.cloud.points[i]);
    // targeted retries for missing words: seed from cloud points whose
    // forward digits match the cyclic word
    const long want = 1L << n;
    if (long(roots.size()) < want) {
      const int match_len = std::min(7, std::max(n, 3));
      std::map<std::string, std::vector<RealPoint>> by_prefix;
      for (size_t i = 0; i < sys.cloud.points.size(); ++i) {
        auto d = digits_fwd(sys.cloud.points[i], match_len);
        if (!d.empty()) by_prefix[word_of(d)].push_back(sys.cloud.points[i]);
      }
      for (long code = 0; code < want && long(roots.size()) < want; ++code) {
        std::vector<int> w(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) w[size_t(k)] = (code >> k) & 1;
        const std::string ws = word_of(w);
        if (roots.count(ws)) continue;
        std::vector<int> cyc;
        for (int k = 0; k < match_len; ++k) cyc.push_back(w[size_t(k % n)]);
        auto it = by_prefix.find(word_of(cyc));
        if (it == by_prefix.end()) continue;
        for (size_t si = 0; si < it->second.size() && si < 40; ++si) {
          try_seed(it->second[si]);
          if (roots.count(ws)) break;
        }
        if (!roots.count(ws)) rep.failed.emplace_back(n, ws);
      }
    }
    rep.periodic_counts.push_back(int(roots.size()));
    if (n == n_max) {
      for (long code = 0; code < want; ++code) {
        std::vector<int> w(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) w[size_t(k)] = (code >> k) & 1;
        if (!roots.count(word_of(w))) rep.missing_words.push_back(word_of(w));
      }
    }
    for (auto& kv : roots) rep.periodic_points.push_back(kv.second);
  }
  rep.ok = true;
  for (int n = 1; n <= n_max; ++n)
    if (rep.periodic_counts[size_t(n - 1)] != (1 << n)) rep.ok = false;
  if (!rep.missing_words.empty()) rep.ok = false;
  return rep;
}

namespace {

struct TrimMembership {
  const ThreeBoxSystem* sys;
  int n;

  bool b0plus(const RealPoint& p) const {
    if (!sys->b(0).contains(p)) return false;
    RealPoint q = p;
    for (int k = 1; k <= n; ++k) {
      q = apply_map(sys->params, q);
      if (sys->b(1).contains(q)) return true;  // pattern 0^{k-1} 1
      if (!sys->b(0).contains(q)) return false;
    }
    return true;  // pattern 0^n
  }
  bool b1plus(const RealPoint& p) const { return sys->b(1).contains(p); }
  bool b2plus(const RealPoint& p) const {
    return sys->b(2).contains(p) && b0plus(apply_map(sys->params, p));
  }
  bool plus(int j, const RealPoint& p) const {
    return j == 0 ? b0plus(p) : (j == 1 ? b1plus(p) : b2plus(p));
  }

  bool b0minus(const RealPoint& p) const {
    if (!sys->b(0).contains(p)) return false;
    RealPoint q = p;
    for (int k = 1; k <= n; ++k) {
      q = apply_inverse(sys->params, q);
      if (sys->b(1).contains(q)) return true;  // pattern 1 0^{k-1} **0**
      if (!sys->b(0).contains(q)) return false;
    }
    return true;
  }
  bool b1minus(const RealPoint& p) const {
    return sys->b(1).contains(apply_inverse(sys->params, p));
  }
  bool b2minus(const RealPoint& p) const { return sys->b(2).contains(p); }
  bool minus(int j, const RealPoint& p) const {
    return j == 0 ? b0minus(p) : (j == 1 ? b1minus(p) : b2minus(p));
  }
};

int probe_degree_w(const ManifoldArc& piece, const BoxEmbedding& bx) {
  std::vector<double> wsv;
  double wmin = 1e300, wmax = -1e300;
  for (const auto& p : piece.pts) {
    auto [z, w] = bx.to_frame_real(p);
    (void)z;
    wsv.push_back(w);
    wmin = std::min(wmin, w);
    wmax = std::max(wmax, w);
  }
  if (wmax <= wmin) return 0;
  int deg = 0;
  for (double q : {0.35, 0.5, 0.65}) {
    const double c = wmin + q * (wmax - wmin);
    int cnt = 0;
    for (size_t i = 0; i + 1 < wsv.size(); ++i)
      if ((wsv[i] - c) * (wsv[i + 1] - c) < 0.0) ++cnt;
    deg = std::max(deg, cnt);
  }
  return deg;
}

}  // namespace

TrimReport trim_and_check_degrees(const ThreeBoxSystem& sys,
                                  const std::vector<IntersectionRecord>& S, int n,
                                  const ClassifierOptions& opt) {
  (void)opt;
  TrimReport rep;
  rep.n = n;
  const int s_count = distinct_points(S);
  TrimMembership tm{&sys, n};
  const double min_len = 5.0 * 2e-2;

  for (int j = 0; j < 3; ++j) {
    for (const auto& strand : sys.wu_pieces) {
      auto pieces = clip_arc(strand, [&](const RealPoint& p) { return tm.plus(j, p); });
      for (auto& pc : pieces) {
        if (pc.length() < min_len) continue;
        TrimComponent comp;
        comp.box = j;
        comp.plus_side = true;
        comp.degree = std::max(1, probe_degree_z(pc, sys.b(j)));
        comp.t_lo = pc.t.front();
        comp.t_hi = pc.t.back();
        comp.arc = pc;
        rep.max_degree_unstable = std::max(rep.max_degree_unstable, comp.degree);
        rep.components.push_back(std::move(comp));
      }
    }
    for (const auto& strand : sys.ws_pieces) {
      auto pieces = clip_arc(strand, [&](const RealPoint& p) { return tm.minus(j, p); });
      for (auto& pc : pieces) {
        if (pc.length() < min_len) continue;
        TrimComponent comp;
        comp.box = j;
        comp.plus_side = false;
        comp.degree = std::max(1, probe_degree_w(pc, sys.b(j)));
        comp.t_lo = pc.t.front();
        comp.t_hi = pc.t.back();
        comp.arc = pc;
        rep.max_degree_stable = std::max(rep.max_degree_stable, comp.degree);
        rep.components.push_back(std::move(comp));
      }
    }
  }

  if (s_count == 4 && (rep.max_degree_unstable > 1 || rep.max_degree_stable > 1)) {
    rep.violation = "degree > 1 component with |S| = 4";
    throw DegreeViolation("trim_and_check_degrees: " + rep.violation);
  }
  if (s_count == 3 && (rep.max_degree_unstable > 2 || rep.max_degree_stable > 2)) {
    rep.violation = "degree > 2 component with |S| = 3";
    throw DegreeViolation("trim_and_check_degrees: " + rep.violation);
  }
  rep.ok = true;
  return rep;
}

ExpansionReport expansion_check(const ThreeBoxSystem& sys, const TrimReport& trim,
                                const ClassifierOptions& opt) {
  (void)opt;
  ExpansionReport rep;
  const Params& prm = sys.params;
  TrimMembership tm{&sys, trim.n};

  auto frame_component = [](const BoxEmbedding& bx, const RealPoint& v, bool horizontal) {
    // linear part of to_frame applied to a real tangent vector
    const Complex a = bx.h_axis.x(), b = bx.v_axis.x(), c = bx.h_axis.y(), d = bx.v_axis.y();
    const Complex det = a * d - b * c;
    const Complex vx(v.x(), 0), vy(v.y(), 0);
    const Complex z = (d * vx - b * vy) / det;
    const Complex w = (a * vy - c * vx) / det;
    return horizontal ? z.real() : w.real();
  };

  // fiber interval of the trimmed cylinder through p, along frame-z (unstable)
  // or frame-w (stable)
  auto fiber_interval = [&](int j, const RealPoint& p, bool plus_side, double* lo, double* hi) {
    const BoxEmbedding& bx = sys.b(j);
    auto [z0, w0] = bx.to_frame_real(p);
    auto member = [&](double s) {
      const RealPoint q = plus_side ? bx.to_plane_real(s, w0) : bx.to_plane_real(z0, s);
      return plus_side ? tm.plus(j, q) : tm.minus(j, q);
    };
    const double start = plus_side ? z0 : w0;
    if (!member(start)) return false;
    for (int dir : {-1, +1}) {
      double in = start, out = start + dir * 1e-4;
      while (std::abs(out) <= 1.5 && member(out)) {
        in = out;
        out = start + (out - start) * 2.0;
      }
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (in + out);
        if (member(mid)) in = mid;
        else out = mid;
      }
      (dir < 0 ? *lo : *hi) = in;
    }
    return *hi > *lo;
  };

  auto poincare = [&](int j, const RealPoint& p, const RealPoint& v, bool plus_side,
                      double* rho) {
    double lo, hi;
    if (!fiber_interval(j, p, plus_side, &lo, &hi)) return false;
    const BoxEmbedding& bx = sys.b(j);
    auto [z0, w0] = bx.to_frame_real(p);
    const double s0 = plus_side ? z0 : w0;
    const double r = 0.5 * (hi - lo), c = 0.5 * (hi + lo);
    if (!(r > 1e-12) || std::abs(s0 - c) > 0.97 * r) return false;
    const double vc = std::abs(frame_component(bx, v, plus_side));
    *rho = 2.0 * vc * r / (r * r - (s0 - c) * (s0 - c));
    return *rho > 0.0 && std::isfinite(*rho);
  };

  auto find_plus_box = [&](const RealPoint& p) {
    for (int j = 0; j < 3; ++j)
      if (tm.plus(j, p)) return j;
    return -1;
  };
  auto find_minus_box = [&](const RealPoint& p) {
    for (int j = 0; j < 3; ++j)
      if (tm.minus(j, p)) return j;
    return -1;
  };

  double min_u = std::numeric_limits<double>::infinity();
  double min_s = std::numeric_limits<double>::infinity();

  for (const auto& comp : trim.components) {
    if (comp.degree != 1) continue;
    const ManifoldArc& deep = comp.arc;
    if (!deep.eval) continue;
    for (int q = 1; q <= 7; ++q) {
      const double t = comp.t_lo + (comp.t_hi - comp.t_lo) * q / 8.0;
      const RealPoint p = deep.eval(t);
      const double h = std::max(1e-9, (comp.t_hi - comp.t_lo) * 1e-5);
      const RealPoint v = (deep.eval(t + h) - deep.eval(t - h)) / (2.0 * h);
      if (!(v.norm() > 0.0)) continue;
      double rho_p;
      if (!poincare(comp.box, p, v, comp.plus_side, &rho_p)) continue;
      if (comp.plus_side) {
        const RealPoint fp = apply_map(prm, p);
        const RealPoint fv = jacobian(prm, p) * v;
        const int j2 = find_plus_box(fp);
        if (j2 < 0) continue;
        double rho_q;
        if (!poincare(j2, fp, fv, true, &rho_q)) continue;
        const double ratio = rho_q / rho_p;
        ++rep.samples_unstable;
        if (ratio < min_u) {
          min_u = ratio;
          if (ratio <= 1.0) rep.worst = p;
        }
      } else {
        const RealPoint fp = apply_inverse(prm, p);
        const RealPoint fv = jacobian(prm, fp).inverse() * v;
        const int j2 = find_minus_box(fp);
        if (j2 < 0) continue;
        double rho_q;
        if (!poincare(j2, fp, fv, false, &rho_q)) continue;
        const double ratio = rho_q / rho_p;
        ++rep.samples_stable;
        if (ratio < min_s) {
          min_s = ratio;
          if (ratio <= 1.0) rep.worst = p;
        }
      }
    }
  }

  // diagnostic at the saddle
  {
    const RealPoint p = sys.alpha.location;
    const RealPoint v = sys.alpha.eigvec_u;
    double rho_p, rho_q;
    if (poincare(0, p, v, true, &rho_p) &&
        poincare(0, apply_map(prm, p), jacobian(prm, p) * v, true, &rho_q))
      rep.ratio_at_alpha = rho_q / rho_p;
  }

  rep.min_ratio_unstable = min_u;
  rep.min_ratio_stable = min_s;
  rep.ok = rep.samples_unstable > 0 && rep.samples_stable > 0 && min_u > 1.0 && min_s > 1.0;
  if (!rep.ok && rep.samples_unstable > 0 && min_u <= 1.0)
    throw NoExpansion("expansion_check: unstable ratio " + std::to_string(min_u));
  if (!rep.ok && rep.samples_stable > 0 && min_s <= 1.0)
    throw NoExpansion("expansion_check: stable ratio " + std::to_string(min_s));
  return rep;
}

SweepRow classify_row(double c, double delta, const ClassifierOptions& opt, bool lite) {
  SweepRow row;
  row.c = c;
  row.delta = delta;
  ClassifierOptions o = opt;
  if (lite) o.check_grid = std::max(12, opt.check_grid / 2);
  ClassificationResult res = classify(Params(c, delta), o);
  row.verdict = res.verdict;
  row.s_count = int(res.S_points.size());
  row.tangency_residual = res.tangency_residual;
  row.eta = res.eta;
  row.min_expansion = std::min(res.min_expansion_unstable, res.min_expansion_stable);
  return row;
}

double locate_first_tangency(double delta, double c_lo, double c_hi, const ClassifierOptions& opt,
                             double bracket) {
  ClassifierOptions fast = opt;
  fast.validate = false;
  auto crossings4 = [&](double c) {
    const ThreeBoxSystem sys = build_three_box_system(Params(c, delta), fast);
    std::vector<ManifoldArc> nus;
    const auto recs = compute_S(sys, &nus, fast);
    return total_multiplicity(recs) >= 4 && int(recs.size()) == 4;
  };
  if (!crossings4(c_hi))
    throw std::invalid_argument("locate_first_tangency: upper endpoint is not a 4-point parameter");
  if (crossings4(c_lo))
    throw std::invalid_argument("locate_first_tangency: lower endpoint still has 4 points");
  double a = c_lo, b = c_hi;
  while (b - a > bracket) {
    const double mid = 0.5 * (a + b);
    if (crossings4(mid)) b = mid;
    else a = mid;
  }
  return 0.5 * (a + b);
}

}  // namespace henon
