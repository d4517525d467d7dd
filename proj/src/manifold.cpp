#include "henon/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>

#include <Eigen/Dense>

namespace henon {

namespace {

double power_int(double base, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= base;
  return r;
}

}  // namespace

LocalParam local_parametrization(const Params& prm, const SaddleData& saddle, ManifoldKind kind,
                                 int order, int orientation) {
  if (order < 2) throw std::invalid_argument("local_parametrization: order >= 2 required");
  const double lambda = kind == ManifoldKind::Unstable ? saddle.lambda_u : saddle.lambda_s;
  const RealPoint v = kind == ManifoldKind::Unstable ? saddle.eigvec_u : saddle.eigvec_s;
  const double x0 = saddle.location.x();

  auto solve = [&](double eps) {
    std::vector<RealPoint> a(size_t(order) + 1, RealPoint::Zero());
    a[0] = saddle.location;
    a[1] = eps * double(orientation) * v;
    for (int k = 2; k <= order; ++k) {
      double sk = 0.0;  // interior of the x-convolution
      for (int i = 1; i < k; ++i) sk += a[size_t(i)].x() * a[size_t(k - i)].x();
      const double lk = power_int(lambda, k);
      const double denom = lk + 2.0 * x0 + prm.delta / lk;
      if (std::abs(denom) < 1e-12)
        throw ResonanceFailure("local_parametrization: resonant multiplier lambda^k");
      a[size_t(k)].x() = -sk / denom;
      a[size_t(k)].y() = -a[size_t(k)].x() / lk;
    }
    return a;
  };

  // First pass fixes the natural coefficient growth, second pass rescales the
  // series so it is balanced on |t| <= 1.
  auto a = solve(1.0);
  double rho = 0.0;
  for (int k = 2; k <= order; ++k) {
    const double m = a[size_t(k)].cwiseAbs().maxCoeff();
    if (m > 0.0) rho = std::max(rho, std::pow(m, 1.0 / k));
  }
  const double s = rho > 0.0 ? 0.75 / rho : 1.0;
  a = solve(s);

  LocalParam lp;
  lp.saddle = saddle;
  lp.kind = kind;
  lp.coeffs = std::move(a);
  lp.radius_of_validity = 1.0;

  // Shrink the validity radius until the conjugacy residual passes.
  const double scale = 1.0 + saddle.location.norm();
  const int steps = kind == ManifoldKind::Unstable ? +1 : -1;
  auto residual_at = [&](double r) {
    double worst = 0.0;
    for (int i = -24; i <= 24; ++i) {
      const double t = r * double(i) / 24.0;
      const RealPoint lhs = steps > 0 ? apply_map(prm, lp.eval(t)) : apply_inverse(prm, lp.eval(t));
      const RealPoint rhs = steps > 0 ? lp.eval(lambda * t) : lp.eval(t / lambda);
      worst = std::max(worst, (lhs - rhs).norm());
    }
    for (int i = 0; i < 16; ++i) {
      const Complex t = r * std::polar(1.0, 2.0 * M_PI * i / 16.0);
      const PlanePoint lhs = steps > 0 ? apply_map(prm, lp.eval(t)) : apply_inverse(prm, lp.eval(t));
      const PlanePoint rhs = steps > 0 ? lp.eval(lambda * t) : lp.eval(t / lambda);
      worst = std::max(worst, (lhs - rhs).norm());
    }
    return worst;
  };
  while (lp.radius_of_validity > 0.05 && residual_at(lp.radius_of_validity) > 1e-10 * scale)
    lp.radius_of_validity *= 0.8;
  return lp;
}

RealPoint ArcSource::at(double t) const {
  const double lambda = local_.multiplier();
  const double alam = std::abs(lambda);
  const double rfit = 0.9 * local_.radius_of_validity;
  int n = 0;
  double arg = t;
  if (local_.kind == ManifoldKind::Unstable) {
    while (std::abs(arg) > rfit) {
      arg /= lambda;
      ++n;
      if (n > 4000) throw RefinementBlowup("ArcSource: parameter out of range");
    }
    RealPoint p = local_.eval(arg);
    for (int i = 0; i < n; ++i) p = apply_map(prm_, p);
    return p;
  }
  (void)alam;
  while (std::abs(arg) > rfit) {
    arg *= lambda;
    ++n;
    if (n > 4000) throw RefinementBlowup("ArcSource: parameter out of range");
  }
  RealPoint p = local_.eval(arg);
  for (int i = 0; i < n; ++i) p = apply_inverse(prm_, p);
  return p;
}

double ManifoldArc::length() const {
  double l = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) l += (pts[i] - pts[i - 1]).norm();
  return l;
}

namespace {

// Marches one direction (sign = +/-1) from t=0 to |t|=t_max adaptively.
void march(const std::function<RealPoint(double)>& at, double t_max, int sign,
           const ArcOptions& opt, const std::function<bool(const RealPoint&)>* keep,
           std::vector<double>& ts, std::vector<RealPoint>& ps) {
  double t = 0.0;
  RealPoint p = at(0.0);
  ts.push_back(0.0);
  ps.push_back(p);
  double dt = t_max / 4096.0;
  RealPoint prev_dir = RealPoint::Zero();
  bool have_dir = false;
  double outside_len = 0.0;
  const double overshoot = 30.0 * opt.h_max;
  while (std::abs(t) < t_max) {
    double step = std::min(dt, t_max - std::abs(t));
    RealPoint q;
    double spacing;
    for (;;) {
      q = at(t + sign * step);
      spacing = (q - p).norm();
      bool ok = spacing <= opt.h_max;
      if (ok && have_dir && spacing > opt.h_min) {
        const RealPoint dir = (q - p) / spacing;
        const double dot = std::clamp(prev_dir.dot(dir), -1.0, 1.0);
        ok = std::acos(dot) <= opt.angle_cap;
      }
      if (ok || spacing < opt.h_min) break;
      step *= 0.5;
      if (step < 1e-300) break;
    }
    t += sign * step;
    if (spacing > opt.h_min) {
      prev_dir = (q - p) / spacing;
      have_dir = true;
    }
    p = q;
    ts.push_back(t);
    ps.push_back(p);
    if (ps.size() > opt.max_points)
      throw RefinementBlowup("grow_arc: refinement budget exceeded, arc length so far " +
                             std::to_string(t));
    if (keep && !(*keep)(p)) {
      outside_len += spacing;
      if (outside_len > overshoot) break;
    } else {
      outside_len = 0.0;
    }
    if (spacing < 0.3 * opt.h_max) dt = step * 1.7;
    else dt = step;
  }
}

ManifoldArc assemble(const Params& prm, const LocalParam& local, double t_max,
                     const std::function<bool(const RealPoint&)>* keep, const ArcOptions& opt) {
  auto src = std::make_shared<ArcSource>(prm, local);
  // default clip region: anything past the fold-tip reach escapes for good
  std::function<bool(const RealPoint&)> default_keep;
  if (!keep) {
    const double R = escape_radius(prm);
    if (local.kind == ManifoldKind::Unstable) {
      const double xr = std::abs(prm.c) + prm.delta * R * 1.3 + 2.0, yr = 1.3 * R + 2.0;
      default_keep = [xr, yr](const RealPoint& p) {
        return std::abs(p.x()) <= xr && std::abs(p.y()) <= yr;
      };
    } else {
      const double xr = 1.3 * R + 2.0;
      const double yr = (xr * xr + std::abs(prm.c) + xr) / prm.delta + 2.0;
      default_keep = [xr, yr](const RealPoint& p) {
        return std::abs(p.x()) <= xr && std::abs(p.y()) <= yr;
      };
    }
    keep = &default_keep;
  }
  std::vector<double> tp, tn;
  std::vector<RealPoint> pp, pn;
  march([&](double t) { return src->at(t); }, t_max, +1, opt, keep, tp, pp);
  march([&](double t) { return src->at(t); }, t_max, -1, opt, keep, tn, pn);
  ManifoldArc arc;
  arc.kind = local.kind;
  arc.t.reserve(tp.size() + tn.size());
  arc.pts.reserve(tp.size() + tn.size());
  for (size_t i = tn.size(); i-- > 1;) {
    arc.t.push_back(tn[i]);
    arc.pts.push_back(pn[i]);
  }
  for (size_t i = 0; i < tp.size(); ++i) {
    arc.t.push_back(tp[i]);
    arc.pts.push_back(pp[i]);
  }
  arc.eval = [src](double t) { return src->at(t); };
  return arc;
}

}  // namespace

ManifoldArc grow_arc(const Params& prm, const LocalParam& local, int iterations,
                     const ArcOptions& opt) {
  if (iterations < 0) throw std::invalid_argument("grow_arc: iterations >= 0");
  const double alam = std::abs(local.multiplier());
  const double factor = local.kind == ManifoldKind::Unstable ? alam : 1.0 / alam;
  const double t_max = local.radius_of_validity * std::pow(factor, iterations);
  return assemble(prm, local, t_max, nullptr, opt);
}

ManifoldArc grow_arc_while(const Params& prm, const LocalParam& local,
                           const std::function<bool(const RealPoint&)>& keep, int max_iterations,
                           const ArcOptions& opt) {
  const double alam = std::abs(local.multiplier());
  const double factor = local.kind == ManifoldKind::Unstable ? alam : 1.0 / alam;
  const double t_max = local.radius_of_validity * std::pow(factor, max_iterations);
  return assemble(prm, local, t_max, &keep, opt);
}

ManifoldArc real_slice(const ComplexDisk& disk, const ArcOptions& opt) {
  const double r = disk.radius;
  double scale = 1e-9;
  for (int i = 0; i < 12; ++i) {
    const Complex t = r * std::polar(1.0, 2.0 * M_PI * (i + 0.3) / 12.0);
    const PlanePoint a = disk.eval(t);
    const PlanePoint b = disk.eval(std::conj(t));
    scale = std::max(scale, a.norm());
    if ((PlanePoint(std::conj(b.x()), std::conj(b.y())) - a).norm() > 1e-8 * std::max(1.0, a.norm()))
      throw EmptySlice("real_slice: disk is not conjugation-invariant");
  }
  auto at = [&disk](double t) {
    const PlanePoint p = disk.eval(Complex(t, 0.0));
    return RealPoint(p.x().real(), p.y().real());
  };
  std::vector<double> tp, tn;
  std::vector<RealPoint> pp, pn;
  march(at, r, +1, opt, nullptr, tp, pp);
  march(at, r, -1, opt, nullptr, tn, pn);
  ManifoldArc arc;
  for (size_t i = tn.size(); i-- > 1;) {
    arc.t.push_back(tn[i]);
    arc.pts.push_back(pn[i]);
  }
  for (size_t i = 0; i < tp.size(); ++i) {
    arc.t.push_back(tp[i]);
    arc.pts.push_back(pp[i]);
  }
  arc.eval = at;
  return arc;
}

namespace {

double seg_distance(const RealPoint& a0, const RealPoint& a1, const RealPoint& p, double* u_out) {
  const RealPoint d = a1 - a0;
  const double len2 = d.squaredNorm();
  double u = len2 > 0.0 ? std::clamp((p - a0).dot(d) / len2, 0.0, 1.0) : 0.0;
  if (u_out) *u_out = u;
  return (a0 + u * d - p).norm();
}

struct SegmentGrid {
  const ManifoldArc* arc;
  double cell;
  RealPoint lo;
  int nx = 0, ny = 0;
  std::vector<std::vector<int>> bins;

  explicit SegmentGrid(const ManifoldArc& a, double cell_hint) : arc(&a) {
    RealPoint mn = a.pts.front(), mx = a.pts.front();
    double hmax = 0.0;
    for (size_t i = 0; i < a.pts.size(); ++i) {
      mn = mn.cwiseMin(a.pts[i]);
      mx = mx.cwiseMax(a.pts[i]);
      if (i) hmax = std::max(hmax, (a.pts[i] - a.pts[i - 1]).norm());
    }
    cell = std::max(cell_hint, hmax * 1.5);
    lo = mn - RealPoint(cell, cell);
    nx = int((mx.x() - lo.x()) / cell) + 3;
    ny = int((mx.y() - lo.y()) / cell) + 3;
    nx = std::max(nx, 1);
    ny = std::max(ny, 1);
    bins.resize(size_t(nx) * size_t(ny));
    for (size_t i = 0; i + 1 < a.pts.size(); ++i) insert_segment(int(i));
  }

  void insert_segment(int i) {
    const RealPoint& p = arc->pts[size_t(i)];
    const RealPoint& q = arc->pts[size_t(i) + 1];
    int x0 = int((std::min(p.x(), q.x()) - lo.x()) / cell);
    int x1 = int((std::max(p.x(), q.x()) - lo.x()) / cell);
    int y0 = int((std::min(p.y(), q.y()) - lo.y()) / cell);
    int y1 = int((std::max(p.y(), q.y()) - lo.y()) / cell);
    x0 = std::clamp(x0, 0, nx - 1); x1 = std::clamp(x1, 0, nx - 1);
    y0 = std::clamp(y0, 0, ny - 1); y1 = std::clamp(y1, 0, ny - 1);
    for (int x = x0; x <= x1; ++x)
      for (int y = y0; y <= y1; ++y) bins[size_t(y) * size_t(nx) + size_t(x)].push_back(i);
  }

  template <class F>
  void for_near(const RealPoint& p, double radius, F&& f) const {
    int x0 = std::clamp(int((p.x() - radius - lo.x()) / cell), 0, nx - 1);
    int x1 = std::clamp(int((p.x() + radius - lo.x()) / cell), 0, nx - 1);
    int y0 = std::clamp(int((p.y() - radius - lo.y()) / cell), 0, ny - 1);
    int y1 = std::clamp(int((p.y() + radius - lo.y()) / cell), 0, ny - 1);
    for (int x = x0; x <= x1; ++x)
      for (int y = y0; y <= y1; ++y)
        for (int i : bins[size_t(y) * size_t(nx) + size_t(x)]) f(i);
  }
};

// Nearest point on arc; returns segment index, clamped parameter and distance.
bool nearest_on_arc(const ManifoldArc& arc, const SegmentGrid& grid, const RealPoint& p,
                    double search, int* seg, double* u, double* dist) {
  double best = std::numeric_limits<double>::infinity();
  int bi = -1;
  double bu = 0.0;
  grid.for_near(p, search, [&](int i) {
    double uu;
    const double d = seg_distance(arc.pts[size_t(i)], arc.pts[size_t(i) + 1], p, &uu);
    if (d < best) {
      best = d;
      bi = i;
      bu = uu;
    }
  });
  if (bi < 0) return false;
  *seg = bi;
  *u = bu;
  *dist = best;
  return true;
}

double signed_gap(const ManifoldArc& b, const SegmentGrid& gb, const RealPoint& p, double search,
                  bool* found) {
  int seg;
  double u, d;
  if (!nearest_on_arc(b, gb, p, search, &seg, &u, &d)) {
    if (found) *found = false;
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (found) *found = true;
  const RealPoint dir = b.pts[size_t(seg) + 1] - b.pts[size_t(seg)];
  const RealPoint foot = b.pts[size_t(seg)] + u * dir;
  const RealPoint off = p - foot;
  const double cross = dir.x() * off.y() - dir.y() * off.x();
  return cross >= 0.0 ? d : -d;
}

struct Approach {
  double t_lo, t_hi;  // window on arc a
};

}  // namespace

double signed_side(const ManifoldArc& arc, const RealPoint& p) {
  double best = std::numeric_limits<double>::infinity();
  double sign = 0.0;
  for (size_t i = 0; i + 1 < arc.pts.size(); ++i) {
    double u;
    const double d = seg_distance(arc.pts[i], arc.pts[i + 1], p, &u);
    if (d < best) {
      best = d;
      const RealPoint dir = arc.pts[i + 1] - arc.pts[i];
      const RealPoint off = p - (arc.pts[i] + u * dir);
      const double cross = dir.x() * off.y() - dir.y() * off.x();
      sign = cross >= 0.0 ? d : -d;
    }
  }
  return sign;
}

double arc_distance(const ManifoldArc& arc, const RealPoint& p) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < arc.pts.size(); ++i)
    best = std::min(best, seg_distance(arc.pts[i], arc.pts[i + 1], p, nullptr));
  return best;
}

std::vector<IntersectionRecord> intersect_arcs(const ManifoldArc& a, const ManifoldArc& b,
                                               double tol) {
  std::vector<IntersectionRecord> out;
  if (a.size() < 2 || b.size() < 2) return out;
  SegmentGrid gb(b, 0.0);

  // Coarse pass: windows on `a` where the arcs come close.
  double ha = 0.0;
  for (size_t i = 1; i < a.pts.size(); ++i) ha = std::max(ha, (a.pts[i] - a.pts[i - 1]).norm());
  double hb = 0.0;
  for (size_t i = 1; i < b.pts.size(); ++i) hb = std::max(hb, (b.pts[i] - b.pts[i - 1]).norm());
  const double band = 3.0 * (ha + hb);

  std::vector<Approach> windows;
  bool in_window = false;
  double w_lo = 0.0, w_hi = 0.0;
  for (size_t i = 0; i < a.pts.size(); ++i) {
    bool found = false;
    signed_gap(b, gb, a.pts[i], band, &found);
    if (found) {
      if (!in_window) {
        w_lo = a.t[i > 0 ? i - 1 : 0];
        in_window = true;
      }
      w_hi = a.t[std::min(i + 1, a.t.size() - 1)];
    } else if (in_window) {
      windows.push_back({w_lo, w_hi});
      in_window = false;
    }
  }
  if (in_window) windows.push_back({w_lo, w_hi});

  auto eval_a = [&](double t) -> RealPoint {
    if (a.eval) return a.eval(t);
    const auto it = std::lower_bound(a.t.begin(), a.t.end(), t);
    size_t i = size_t(std::distance(a.t.begin(), it));
    if (i == 0) return a.pts.front();
    if (i >= a.t.size()) return a.pts.back();
    const double u = (t - a.t[i - 1]) / (a.t[i] - a.t[i - 1]);
    return a.pts[i - 1] + u * (a.pts[i] - a.pts[i - 1]);
  };

  for (const auto& w : windows) {
    // Dense gap profile across the window; subdivide further while the
    // sampled profile is rough relative to tol.
    const int N = 257;
    std::vector<double> ts(N), gs(N);
    std::vector<RealPoint> ps(N);
    for (int i = 0; i < N; ++i) {
      ts[size_t(i)] = w.t_lo + (w.t_hi - w.t_lo) * double(i) / double(N - 1);
      ps[size_t(i)] = eval_a(ts[size_t(i)]);
      bool found;
      gs[size_t(i)] = signed_gap(b, gb, ps[size_t(i)], band * 2.0, &found);
      if (!found) gs[size_t(i)] = std::numeric_limits<double>::quiet_NaN();
    }
    auto gap_at = [&](double t) {
      bool found;
      const double g = signed_gap(b, gb, eval_a(t), band * 2.0, &found);
      return found ? g : std::numeric_limits<double>::quiet_NaN();
    };

    // Roots by bisection on sign changes.
    std::vector<std::pair<double, double>> roots;  // (t, local slope scale)
    for (int i = 0; i + 1 < N; ++i) {
      const double g0 = gs[size_t(i)], g1 = gs[size_t(i) + 1];
      if (std::isnan(g0) || std::isnan(g1)) continue;
      if (g0 == 0.0) {
        roots.emplace_back(ts[size_t(i)], 0.0);
        continue;
      }
      if (g0 * g1 < 0.0) {
        double lo = ts[size_t(i)], hi = ts[size_t(i) + 1], glo = g0;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double gm = gap_at(mid);
          if (std::isnan(gm)) break;
          if ((gm < 0.0) == (glo < 0.0)) {
            lo = mid;
            glo = gm;
          } else {
            hi = mid;
          }
          if (hi - lo < 1e-15 * (1.0 + std::abs(hi))) break;
        }
        roots.emplace_back(0.5 * (lo + hi), 0.0);
      }
    }

    // Local minima of |g| with no sign change nearby (tangency candidates).
    std::vector<double> minima;
    for (int i = 1; i + 1 < N; ++i) {
      const double g0 = gs[size_t(i) - 1], g1 = gs[size_t(i)], g2 = gs[size_t(i) + 1];
      if (std::isnan(g0) || std::isnan(g1) || std::isnan(g2)) continue;
      if (std::abs(g1) <= std::abs(g0) && std::abs(g1) <= std::abs(g2) &&
          g0 * g1 > 0.0 && g1 * g2 > 0.0)
        minima.push_back(ts[size_t(i)]);
    }

    const double glue = 4.0 * tol;
    std::vector<bool> consumed(roots.size(), false);

    auto classify_pair = [&](double t_center) {
      // Quadratic model of the gap around t_center.
      const double half = std::max((w.t_hi - w.t_lo) / double(N - 1) * 6.0, glue);
      Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
      Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
      for (int i = -8; i <= 8; ++i) {
        const double dt = half * double(i) / 8.0;
        const double g = gap_at(t_center + dt);
        if (std::isnan(g)) continue;
        const Eigen::Vector3d row(dt * dt, dt, 1.0);
        M += row * row.transpose();
        rhs += row * g;
      }
      const Eigen::Vector3d abc = M.ldlt().solve(rhs);
      const double A = abc[0], B = abc[1], C = abc[2];
      if (std::abs(A) < 1e-14) return;  // effectively straight: roots handled individually
      const double t_min = t_center - B / (2.0 * A);
      const double g_min = gap_at(t_min);
      const double gm = std::isnan(g_min) ? C - B * B / (4.0 * A) : g_min;
      const double d = -gm / A;  // squared half-separation of the root pair
      IntersectionRecord rec;
      rec.t_on_a = t_min;
      rec.location = eval_a(t_min);
      rec.tangency_residual = std::abs(gm);
      if (d > tol * tol) {
        const double sep = std::sqrt(d);
        for (int sgn : {-1, +1}) {
          IntersectionRecord r2;
          double tr = t_min + sgn * sep;
          // polish the root on the true gap
          double lo = tr - sep * 0.9, hi = tr + sep * 0.9;
          double glo = gap_at(lo), ghi = gap_at(hi);
          if (!std::isnan(glo) && !std::isnan(ghi) && glo * ghi < 0.0) {
            for (int it = 0; it < 60; ++it) {
              const double mid = 0.5 * (lo + hi);
              const double gm2 = gap_at(mid);
              if (std::isnan(gm2)) break;
              if ((gm2 < 0.0) == (glo < 0.0)) {
                lo = mid;
                glo = gm2;
              } else
                hi = mid;
            }
            tr = 0.5 * (lo + hi);
          }
          r2.t_on_a = tr;
          r2.location = eval_a(tr);
          r2.multiplicity = 1;
          r2.tangency_residual = std::abs(gm);
          out.push_back(r2);
        }
      } else if (d >= -tol * tol || std::abs(gm) <= tol * tol) {
        rec.multiplicity = 2;
        rec.tangency_flag = true;
        out.push_back(rec);
      }
      // d < -tol^2: no intersection from this approach
    };

    // Glue adjacent root pairs into quadratic approaches.
    for (size_t i = 0; i < roots.size(); ++i) {
      if (consumed[i]) continue;
      if (i + 1 < roots.size() && !consumed[i + 1] &&
          std::abs(roots[i + 1].first - roots[i].first) < glue) {
        consumed[i] = consumed[i + 1] = true;
        classify_pair(0.5 * (roots[i].first + roots[i + 1].first));
        continue;
      }
      consumed[i] = true;
      // a root where the gap touches without changing sign is a tangency
      const double probe = std::max(glue, (w.t_hi - w.t_lo) / double(N - 1));
      const double gl = gap_at(roots[i].first - probe);
      const double gr2 = gap_at(roots[i].first + probe);
      if (!std::isnan(gl) && !std::isnan(gr2) && gl * gr2 > 0.0) {
        classify_pair(roots[i].first);
        continue;
      }
      IntersectionRecord rec;
      rec.t_on_a = roots[i].first;
      rec.location = eval_a(roots[i].first);
      rec.multiplicity = 1;
      out.push_back(rec);
    }
    for (double tm : minima) {
      const double gm = gap_at(tm);
      if (std::isnan(gm) || std::abs(gm) > band) continue;
      bool near_root = false;
      for (auto& r : roots)
        if (std::abs(r.first - tm) < glue) near_root = true;
      if (!near_root) classify_pair(tm);
    }
  }

  // Deduplicate records produced by overlapping windows.
  std::sort(out.begin(), out.end(),
            [](const IntersectionRecord& x, const IntersectionRecord& y) { return x.t_on_a < y.t_on_a; });
  std::vector<IntersectionRecord> dedup;
  for (auto& r : out) {
    if (!dedup.empty() && (dedup.back().location - r.location).norm() < 1e-10 &&
        dedup.back().multiplicity == r.multiplicity)
      continue;
    dedup.push_back(r);
  }
  return dedup;
}

ManifoldArc map_arc(const Params& prm, const ManifoldArc& arc, int k) {
  ManifoldArc r;
  r.kind = arc.kind;
  r.t = arc.t;
  r.pts.reserve(arc.pts.size());
  for (const auto& p : arc.pts) r.pts.push_back(iterate(prm, p, k));
  if (arc.eval) {
    auto parent = arc.eval;
    Params pc = prm;
    r.eval = [parent, pc, k](double t) { return iterate(pc, parent(t), k); };
  }
  return r;
}

ManifoldArc sub_arc(const ManifoldArc& arc, double t0, double t1) {
  ManifoldArc r;
  r.kind = arc.kind;
  r.coding_tag = arc.coding_tag;
  r.degree_tag = arc.degree_tag;
  r.eval = arc.eval;
  for (size_t i = 0; i < arc.t.size(); ++i)
    if (arc.t[i] >= t0 && arc.t[i] <= t1) {
      r.t.push_back(arc.t[i]);
      r.pts.push_back(arc.pts[i]);
    }
  return r;
}

std::vector<ManifoldArc> clip_arc(const ManifoldArc& arc,
                                  const std::function<bool(const RealPoint&)>& inside) {
  std::vector<ManifoldArc> pieces;
  ManifoldArc cur;
  cur.kind = arc.kind;
  cur.eval = arc.eval;
  auto boundary_t = [&](double t_in, double t_out) {
    if (!arc.eval) return 0.5 * (t_in + t_out);
    double lo = t_in, hi = t_out;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (inside(arc.eval(mid))) lo = mid;
      else hi = mid;
    }
    return lo;
  };
  for (size_t i = 0; i < arc.pts.size(); ++i) {
    const bool in = inside(arc.pts[i]);
    if (in) {
      if (cur.pts.empty() && i > 0) {
        const double tb = boundary_t(arc.t[i], arc.t[i - 1]);
        cur.t.push_back(tb);
        cur.pts.push_back(arc.eval ? arc.eval(tb) : arc.pts[i]);
      }
      cur.t.push_back(arc.t[i]);
      cur.pts.push_back(arc.pts[i]);
    } else if (!cur.pts.empty()) {
      const double tb = boundary_t(arc.t[i - 1], arc.t[i]);
      cur.t.push_back(tb);
      cur.pts.push_back(arc.eval ? arc.eval(tb) : arc.pts[i - 1]);
      if (cur.pts.size() >= 2) pieces.push_back(cur);
      cur.t.clear();
      cur.pts.clear();
    }
  }
  if (cur.pts.size() >= 2) pieces.push_back(cur);
  return pieces;
}

void refine_arc(ManifoldArc& arc, const ArcOptions& opt) {
  if (!arc.eval) return;
  for (int pass = 0; pass < 40; ++pass) {
    std::vector<double> nt;
    std::vector<RealPoint> np;
    bool changed = false;
    for (size_t i = 0; i < arc.pts.size(); ++i) {
      if (i > 0) {
        const double sp = (arc.pts[i] - arc.pts[i - 1]).norm();
        if (sp > opt.h_max && arc.t[i] - arc.t[i - 1] > 1e-15) {
          const double tm = 0.5 * (arc.t[i] + arc.t[i - 1]);
          nt.push_back(tm);
          np.push_back(arc.eval(tm));
          changed = true;
        }
      }
      nt.push_back(arc.t[i]);
      np.push_back(arc.pts[i]);
    }
    arc.t = std::move(nt);
    arc.pts = std::move(np);
    if (arc.pts.size() > opt.max_points) throw RefinementBlowup("refine_arc: budget exceeded");
    if (!changed) break;
  }
}

}  // namespace henon
