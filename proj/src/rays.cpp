#include "henon/rays.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include <Eigen/Dense>
#include <numeric>
#include <sstream>

namespace henon {

double DiskField::bilinear(const Eigen::ArrayXXd& F, double tx, double ty) const {
  const double fi = (tx + radius) / hx;
  const double fj = ty / hy;
  int i = std::clamp(int(std::floor(fi)), 0, nx - 2);
  int j = std::clamp(int(std::floor(fj)), 0, ny - 2);
  const double u = std::clamp(fi - i, 0.0, 1.0);
  const double v = std::clamp(fj - j, 0.0, 1.0);
  const double a = F(j, i), b = F(j, i + 1), c = F(j + 1, i), d = F(j + 1, i + 1);
  return (1 - u) * (1 - v) * a + u * (1 - v) * b + (1 - u) * v * c + u * v * d;
}

void DiskField::grad(double tx, double ty, double* gx, double* gy) const {
  const double h = 0.5 * std::min(hx, hy);
  *gx = (g(Complex(tx + h, ty)) - g(Complex(tx - h, ty))) / (2 * h);
  *gy = ty >= h ? (g(Complex(tx, ty + h)) - g(Complex(tx, ty - h))) / (2 * h)
                : (g(Complex(tx, ty + h)) - g(Complex(tx, std::max(0.0, ty)))) /
                      (h + std::min(ty, h));
}

namespace {

DiskField build_field(std::function<double(Complex)> gfun,
                      std::function<PlanePoint(Complex)> param, double radius, int grid_n,
                      double lambda) {
  DiskField f;
  f.g = std::move(gfun);
  f.param = std::move(param);
  f.radius = radius;
  f.lambda = lambda;
  f.nx = grid_n;
  f.ny = grid_n / 2 + 2;
  f.hx = 2.0 * radius / (f.nx - 1);
  f.hy = radius / (f.ny - 1);
  f.G.resize(f.ny, f.nx);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) f.G(j, i) = f.g(Complex(f.tx_of(i), f.ty_of(j)));

  const double floor_g = std::max(1e-11, lambda * 1e-5);

  // real zero intervals, endpoints refined on the exact evaluator
  {
    bool in = false;
    double start = 0.0;
    auto is_zero = [&](double tx) { return f.g(Complex(tx, 0.0)) < floor_g; };
    for (int i = 0; i < f.nx; ++i) {
      const bool z = f.G(0, i) < floor_g;
      if (z && !in) {
        double lo = f.tx_of(std::max(0, i - 1)), hi = f.tx_of(i);
        for (int it = 0; it < 50 && !is_zero(lo); ++it) {
          const double mid = 0.5 * (lo + hi);
          if (is_zero(mid)) hi = mid;
          else lo = mid;
        }
        start = 0.5 * (lo + hi);
        in = true;
      } else if (!z && in) {
        double lo = f.tx_of(i - 1), hi = f.tx_of(i);
        for (int it = 0; it < 50; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (is_zero(mid)) lo = mid;
          else hi = mid;
        }
        f.zero_intervals.emplace_back(start, 0.5 * (lo + hi));
        in = false;
      }
    }
    if (in) f.zero_intervals.emplace_back(start, f.tx_of(f.nx - 1));
  }
  if (f.zero_intervals.empty())
    throw NoRealComponent("restrict_field: no zero set on the real trace");

  // harmonic conjugate by flood fill over the upper half minus the zero band
  f.H.resize(f.ny, f.nx);
  f.H.setConstant(std::numeric_limits<double>::quiet_NaN());
  Eigen::ArrayXXd Gx(f.ny, f.nx), Gy(f.ny, f.nx);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      const int il = std::max(0, i - 1), ir = std::min(f.nx - 1, i + 1);
      Gx(j, i) = (f.G(j, ir) - f.G(j, il)) / ((ir - il) * f.hx);
      if (j == 0) {
        Gy(j, i) = 0.0;  // conjugation symmetry: G even in ty
      } else {
        const int jt = std::min(f.ny - 1, j + 1);
        Gy(j, i) = (f.G(jt, i) - f.G(j - 1, i)) / ((jt - (j - 1)) * f.hy);
      }
    }
  auto valid = [&](int j, int i) { return f.G(j, i) > floor_g; };
  if (!valid(0, 0))
    throw NoRealComponent("restrict_field: left edge of the trace is not in the escape region");
  std::deque<std::pair<int, int>> queue;
  f.H(0, 0) = 0.0;
  queue.emplace_back(0, 0);
  while (!queue.empty()) {
    auto [j, i] = queue.front();
    queue.pop_front();
    const int dj[4] = {0, 0, 1, -1};
    const int di[4] = {1, -1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const int jn = j + dj[k], in = i + di[k];
      if (jn < 0 || jn >= f.ny || in < 0 || in >= f.nx) continue;
      if (!valid(jn, in) || !std::isnan(f.H(jn, in))) continue;
      double dH = 0.0;
      if (dj[k] == 0) dH = -0.5 * (Gy(j, i) + Gy(jn, in)) * (di[k] * f.hx);
      else dH = 0.5 * (Gx(j, i) + Gx(jn, in)) * (dj[k] * f.hy);
      f.H(jn, in) = f.H(j, i) + dH;
      queue.emplace_back(jn, in);
    }
  }
  return f;
}

double harmonic_residual(const DiskField& f) {
  const double floor_g = std::max(1e-11, f.lambda * 1e-5);
  Eigen::ArrayXXi zero_band = Eigen::ArrayXXi::Zero(f.ny, f.nx);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i)
      if (f.G(j, i) <= floor_g)
        for (int dj = -2; dj <= 2; ++dj)
          for (int di = -2; di <= 2; ++di) {
            const int jj = j + dj, ii = i + di;
            if (jj >= 0 && jj < f.ny && ii >= 0 && ii < f.nx) zero_band(jj, ii) = 1;
          }
  double worst = 0.0;
  for (int j = 1; j + 1 < f.ny; ++j)
    for (int i = 1; i + 1 < f.nx; ++i) {
      if (zero_band(j, i)) continue;
      const double lap =
          f.G(j, i + 1) + f.G(j, i - 1) + f.G(j + 1, i) + f.G(j - 1, i) - 4.0 * f.G(j, i);
      double rng = 0.0;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di)
          rng = std::max(rng, std::abs(f.G(j + dj, i + di) - f.G(j, i)));
      if (rng > 1e-14) worst = std::max(worst, std::abs(lap) / (4.0 * rng + 1e-300));
    }
  return worst;
}

}  // namespace

DiskField restrict_field(const Params& prm, const ComplexDisk& disk, int grid_n, double lambda) {
  auto eval = disk.eval;
  auto gfun = [prm, eval](Complex t) { return green_plus(prm, eval(t)); };
  // conjugation symmetry of the parametrized field
  for (int k = 1; k <= 6; ++k) {
    const Complex t = disk.radius * std::polar(0.15 * k, 0.4 + 0.3 * k);
    if (std::abs(gfun(t) - gfun(std::conj(t))) > 1e-9 * (1.0 + std::abs(gfun(t))))
      throw EmptySlice("restrict_field: field is not conjugation-symmetric");
  }
  DiskField f = build_field(gfun, disk.eval, disk.radius, grid_n, lambda);
  const double res = harmonic_residual(f);
  if (res > 1e-2)
    throw NotHarmonic("restrict_field: discrete Laplacian residual " + std::to_string(res));
  return f;
}

DiskField field_from_function(const std::function<double(Complex)>& gfun, double radius,
                              int grid_n, double lambda) {
  auto param = [](Complex t) { return PlanePoint(t, Complex(0, 0)); };
  return build_field(gfun, param, radius, grid_n, lambda);
}

std::vector<CriticalPoint> find_critical_points(const DiskField& field) {
  std::vector<CriticalPoint> out;
  // off-axis guard: Poincare index of grad G over coarse blocks
  {
    const int step = 4;
    for (int j = 2; j + step + 1 < field.ny; j += step)
      for (int i = 2; i + step + 1 < field.nx; i += step) {
        bool near_zero = false;
        for (int dj = 0; dj <= step && !near_zero; ++dj)
          for (int di = 0; di <= step; ++di)
            if (field.G(j + dj, i + di) < std::max(1e-9, field.lambda * 1e-4)) {
              near_zero = true;
              break;
            }
        if (near_zero || field.ty_of(j) < 2.5 * field.hy) continue;
        // walk the block boundary accumulating the gradient angle
        std::vector<std::pair<double, double>> loop;
        for (int k = 0; k <= step; ++k) loop.emplace_back(field.tx_of(i + k), field.ty_of(j));
        for (int k = 1; k <= step; ++k) loop.emplace_back(field.tx_of(i + step), field.ty_of(j + k));
        for (int k = 1; k <= step; ++k)
          loop.emplace_back(field.tx_of(i + step - k), field.ty_of(j + step));
        for (int k = 1; k < step; ++k)
          loop.emplace_back(field.tx_of(i), field.ty_of(j + step - k));
        loop.push_back(loop.front());
        double total = 0.0, prev = 0.0;
        bool first = true, degenerate = false;
        for (auto& [tx, ty] : loop) {
          double gx, gy;
          field.grad(tx, ty, &gx, &gy);
          const double n = std::hypot(gx, gy);
          if (n < 1e-13) {
            degenerate = true;
            break;
          }
          const double a = std::atan2(gy, gx);
          if (!first) {
            double d = a - prev;
            while (d > M_PI) d -= 2 * M_PI;
            while (d < -M_PI) d += 2 * M_PI;
            total += d;
          }
          prev = a;
          first = false;
        }
        if (!degenerate && std::abs(total) > M_PI)
          throw OffAxisCritical("find_critical_points: gradient winding off the real axis");
      }
  }

  // one critical point per proper complementary interval
  for (size_t k = 0; k + 1 < field.zero_intervals.size(); ++k) {
    const double a = field.zero_intervals[k].second;
    const double b = field.zero_intervals[k + 1].first;
    if (b - a < 3.0 * field.hx) continue;  // unresolved gap at this grid
    auto gr = [&](double x) { return field.g(Complex(x, 0.0)); };
    // count distinct coarse maxima
    const int m = 64;
    int maxima = 0;
    double best_x = a;
    double best_v = -1.0;
    double prev2 = gr(a), prev1 = gr(a + (b - a) / m);
    for (int i = 2; i <= m; ++i) {
      const double x = a + (b - a) * i / m;
      const double v = gr(x);
      if (prev1 > prev2 + 1e-14 && prev1 > v + 1e-14) {
        ++maxima;
        if (prev1 > best_v) {
          best_v = prev1;
          best_x = a + (b - a) * (i - 1) / m;
        }
      }
      prev2 = prev1;
      prev1 = v;
    }
    if (maxima > 1) {
      // re-examine with a prominence filter before declaring a violation
      int prominent = 0;
      double window = (b - a) / m;
      prev2 = gr(a);
      prev1 = gr(a + window);
      for (int i = 2; i <= m; ++i) {
        const double x = a + (b - a) * i / m;
        const double v = gr(x);
        if (prev1 > prev2 * (1 + 1e-6) && prev1 > v * (1 + 1e-6)) ++prominent;
        prev2 = prev1;
        prev1 = v;
      }
      if (prominent > 1)
        throw MultipleCriticalsInInterval("find_critical_points: interval [" + std::to_string(a) +
                                          "," + std::to_string(b) + "]");
    }
    if (maxima == 0) continue;
    // golden-section refinement of the maximum
    double lo = std::max(a, best_x - (b - a) / m), hi = std::min(b, best_x + (b - a) / m);
    const double gr_ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr_ratio * (hi - lo), x2 = lo + gr_ratio * (hi - lo);
    double f1 = gr(x1), f2 = gr(x2);
    for (int it = 0; it < 90; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr_ratio * (hi - lo);
        f2 = gr(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr_ratio * (hi - lo);
        f1 = gr(x1);
      }
      if (hi - lo < 1e-13 * (1 + std::abs(lo))) break;
    }
    CriticalPoint cp;
    cp.location = 0.5 * (lo + hi);
    cp.value = gr(cp.location);
    cp.interval = {a, b};
    // order fit: G(x0 + s) - G(x0) ~ -|c| s^m against m = 2,3,4
    {
      const double h0 = std::min((b - a) / 24.0, 0.02 * field.radius);
      double best_res = std::numeric_limits<double>::infinity();
      int best_m = 2;
      for (int mm = 2; mm <= 4; ++mm) {
        double num = 0, den = 0;
        for (int s = 1; s <= 6; ++s)
          for (int sgn : {-1, +1}) {
            const double off = sgn * s * h0 / 6.0;
            const double d = cp.value - gr(cp.location + off);
            const double basis = std::pow(std::abs(off), mm);
            num += d * basis;
            den += basis * basis;
          }
        const double c = den > 0 ? num / den : 0.0;
        double res = 0;
        for (int s = 1; s <= 6; ++s)
          for (int sgn : {-1, +1}) {
            const double off = sgn * s * h0 / 6.0;
            const double d = cp.value - gr(cp.location + off);
            res += std::pow(d - c * std::pow(std::abs(off), mm), 2);
          }
        if (res < best_res) {
          best_res = res;
          best_m = mm;
        }
      }
      cp.order = best_m;
    }
    out.push_back(cp);
  }
  return out;
}

ExternalRay trace_ray(const DiskField& field, double theta) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("trace_ray: theta must lie in (0,1)");
  const double target_h = M_PI * theta;
  ExternalRay ray;
  ray.theta = theta;

  // start on the lambda level line at matching H
  double best = std::numeric_limits<double>::infinity();
  double sx = 0, sy = 0;
  for (int i = 0; i < field.nx; ++i)
    for (int j = 1; j + 1 < field.ny; ++j) {
      const double g0 = field.G(j, i), g1 = field.G(j + 1, i);
      if ((g0 - field.lambda) * (g1 - field.lambda) >= 0.0) continue;
      if (std::isnan(field.H(j, i)) || std::isnan(field.H(j + 1, i))) continue;
      const double u = (field.lambda - g0) / (g1 - g0);
      const double hval = field.H(j, i) + u * (field.H(j + 1, i) - field.H(j, i));
      const double d = std::abs(hval - target_h);
      if (d < best) {
        best = d;
        sx = field.tx_of(i);
        sy = field.ty_of(j) + u * field.hy;
      }
    }
  if (!std::isfinite(best)) throw NotLanded("trace_ray: no start point on the level line");

  // Newton onto (G = lambda, H = pi theta) using the Cauchy-Riemann structure
  double px = sx, py = sy;
  for (int it = 0; it < 12; ++it) {
    double gx, gy;
    field.grad(px, py, &gx, &gy);
    const double n2 = gx * gx + gy * gy;
    if (n2 < 1e-26) break;
    const double dg = field.g(Complex(px, py)) - field.lambda;
    const double hv = field.H_at(px, py);
    if (std::isnan(hv)) break;
    const double dh = hv - target_h;
    // [gx gy; -gy gx] [dx dy]^T = -[dg dh]^T
    const double dx = (-dg * gx + dh * gy) / n2;
    const double dy = (-dg * gy - dh * gx) / n2;
    px += dx;
    py += dy;
    py = std::max(py, field.hy * 0.5);
    if (std::hypot(dx, dy) < 1e-14) break;
  }

  const double g_land = std::max(1e-11, field.lambda * 1e-6);
  const double band = 1.4 * field.hy;
  double g_cur = field.g(Complex(px, py));
  ray.path.emplace_back(px, py);
  const int max_steps = 200000;
  double step_cap = 0.5 * std::min(field.hx, field.hy);
  bool critical_stall = false;
  for (int it = 0; it < max_steps; ++it) {
    if (py <= band || g_cur <= g_land) break;
    double gx, gy;
    field.grad(px, py, &gx, &gy);
    const double gn = std::hypot(gx, gy);
    if (gn < 1e-13) {
      critical_stall = true;
      break;
    }
    double step = std::min(step_cap, std::max(0.05 * g_cur / gn, 1e-12 / gn));
    double nx_ = px, ny_ = py, ng = g_cur;
    bool advanced = false;
    for (int halve = 0; halve < 40; ++halve) {
      double qx = px - step * gx / gn;
      double qy = py - step * gy / gn;
      // corrector: hold Arg(phi+) = pi theta along the gradient curve
      double hx2, hy2;
      field.grad(qx, qy, &hx2, &hy2);
      const double hn2 = hx2 * hx2 + hy2 * hy2;
      const double hv = field.H_at(qx, std::max(qy, 0.0));
      if (!std::isnan(hv) && hn2 > 1e-26 && qy > band) {
        const double dh = target_h - hv;
        double cx = dh * (-hy2) / hn2;
        double cy = dh * (hx2) / hn2;
        const double cn = std::hypot(cx, cy);
        if (cn > step) {
          cx *= step / cn;
          cy *= step / cn;
        }
        qx += cx;
        qy += cy;
      }
      qy = std::max(qy, 0.0);
      const double qg = field.g(Complex(qx, qy));
      if (qg < g_cur || qy <= band) {
        nx_ = qx;
        ny_ = qy;
        ng = qg;
        advanced = true;
        break;
      }
      step *= 0.5;
    }
    if (!advanced) {
      critical_stall = true;
      break;
    }
    if (ng >= g_cur && ny_ > band) ray.g_monotone = false;
    px = nx_;
    py = ny_;
    g_cur = ng;
    if (ray.path.size() < 60000) ray.path.emplace_back(px, py);
  }

  ray.landing = px;
  // classify the landing
  bool on_zero = false;
  const double margin = 1.5 * field.hx;
  for (auto& iv : field.zero_intervals)
    if (px >= iv.first - margin && px <= iv.second + margin) on_zero = true;
  if (critical_stall && !on_zero) {
    ray.landing_kind = LandingKind::Critical;
    if (g_cur > 100.0 * std::max(field.lambda * 1e-4, 1e-9) && py > 4.0 * band)
      throw StallWithoutLanding("trace_ray: stalled at G = " + std::to_string(g_cur));
  } else {
    ray.landing_kind = on_zero ? LandingKind::NonExposed : LandingKind::Critical;
  }
  return ray;
}

double landing_of(const DiskField& field, double theta) { return trace_ray(field, theta).landing; }

double external_angle(const DiskField& field, double t_target, double tol) {
  double lo = 1e-4, hi = 1.0 - 1e-4;
  double llo = landing_of(field, lo), lhi = landing_of(field, hi);
  const bool increasing = lhi > llo;
  if ((t_target < std::min(llo, lhi) - 1e-6) || (t_target > std::max(llo, lhi) + 1e-6))
    throw NotLanded("external_angle: target outside the landing range [" + std::to_string(llo) +
                    "," + std::to_string(lhi) + "]");
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double lm = landing_of(field, mid);
    if (std::abs(lm - t_target) < tol) return mid;
    if ((lm < t_target) == increasing) lo = mid;
    else hi = mid;
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

ComplexDisk unstable_master_disk(const ThreeBoxSystem& sys, int level) {
  const LocalParam local = sys.wu_alpha;
  const double r = 0.9 * local.radius_of_validity;
  const Params prm = sys.params;
  ComplexDisk d;
  d.radius = 1.0;
  d.eval = [local, prm, r, level](Complex t) {
    PlanePoint p = local.eval(t * r);
    for (int i = 0; i < level; ++i) p = apply_map(prm, p);
    return p;
  };
  return d;
}

namespace {

ManifoldArc base_stable_arc(const ThreeBoxSystem& sys) {
  const double r0 = escape_radius(sys.params) / 1.1;
  auto keep = [r0](const RealPoint& p) {
    return std::abs(p.x()) <= r0 * 1.1 + 0.3 && std::abs(p.y()) <= r0 * 1.1 + 0.3;
  };
  ManifoldArc a = grow_arc_while(sys.params, sys.ws_alpha, keep, 90, ArcOptions{});
  return a;
}

double y_span(const ManifoldArc& a) {
  double lo = 1e300, hi = -1e300;
  for (const auto& p : a.pts) {
    lo = std::min(lo, p.y());
    hi = std::max(hi, p.y());
  }
  return hi - lo;
}

}  // namespace

ManifoldArc stable_cylinder_arc(const ThreeBoxSystem& sys, const ABPartition& ab,
                                const std::vector<int>& word) {
  const double r0 = escape_radius(sys.params) / 1.1;
  auto slab = [r0](const RealPoint& p) {
    return std::abs(p.x()) <= r0 * 1.1 + 0.3 && std::abs(p.y()) <= r0 * 1.1 + 0.3;
  };
  ManifoldArc arc = base_stable_arc(sys);
  const double span0 = y_span(arc);
  ArcOptions opt;
  for (size_t k = word.size(); k-- > 0;) {
    ManifoldArc pre = map_arc(sys.params, arc, -1);
    auto pieces = clip_arc(pre, slab);
    std::vector<ManifoldArc> candidates;
    for (auto& pc : pieces) {
      if (y_span(pc) < 0.45 * span0) continue;
      // majority a/b side of the piece
      int votes_b = 0, votes = 0;
      for (int q = 1; q <= 9; ++q) {
        const size_t idx = pc.pts.size() * size_t(q) / 10;
        const int s = ab.side(pc.pts[idx]);
        if (s >= 0) {
          ++votes;
          votes_b += s;
        }
      }
      if (votes == 0) continue;
      const int side = votes_b * 2 > votes ? 1 : 0;
      if (side == word[k]) candidates.push_back(pc);
    }
    if (candidates.empty())
      throw BranchAmbiguity("stable_cylinder_arc: no branch for digit " + std::to_string(word[k]) +
                            " at depth " + std::to_string(word.size() - k));
    if (candidates.size() > 1) {
      // keep the tallest; genuinely split branches signal a tangency angle
      std::sort(candidates.begin(), candidates.end(),
                [](const ManifoldArc& a, const ManifoldArc& b) { return y_span(a) > y_span(b); });
      if (y_span(candidates[1]) > 0.8 * y_span(candidates[0]))
        throw BranchAmbiguity("stable_cylinder_arc: two comparable branches for one digit");
    }
    arc = candidates.front();
    refine_arc(arc, opt);
  }
  return arc;
}

ManifoldArc vertical_arc_for_angle(const ThreeBoxSystem& sys, const ABPartition& ab, double theta,
                                   int depth) {
  if (theta < 0.0 || theta > 1.0)
    throw std::invalid_argument("vertical_arc_for_angle: theta in [0,1]");
  std::vector<int> word;
  double x = theta;
  for (int k = 0; k < depth; ++k) {
    x *= 2.0;
    const int d = x >= 1.0 ? 1 : 0;
    x -= d;
    word.push_back(d);
  }
  return stable_cylinder_arc(sys, ab, word);
}

std::vector<Rational> coding_to_angles(const Index& seq, long j_lo, long j_hi) {
  std::vector<Rational> out;
  auto digit = [&](long j) { return seq.at(j) == kSymbolB ? 1 : 0; };
  for (long j = j_lo; j <= j_hi; ++j) {
    // finite prefix to the end of the core, then the periodic tail
    const long core_end = long(seq.symbols.size()) - seq.zero;  // first time past the core
    Rational r;
    if (seq.right_tail.empty()) {
      long m = core_end - j;
      if (m <= 0) {
        out.push_back({0, 1});
        continue;
      }
      m = std::min(m, 60L);
      long long p = 0;
      for (long k = 0; k < m; ++k) p = (p << 1) | digit(j + k);
      long long den = 1LL << m;
      const long long g = std::gcd(p, den);
      out.push_back({p / (g ? g : 1), den / (g ? g : 1)});
      continue;
    }
    const long m = std::max(0L, core_end - j);
    if (m > 50) throw std::invalid_argument("coding_to_angles: preperiod too long");
    const long L = long(seq.right_tail.size());
    long long p = 0;
    for (long k = 0; k < m; ++k) p = (p << 1) | digit(j + k);
    long long q = 0;
    for (long k = 0; k < L; ++k) q = (q << 1) | digit(core_end + k);
    // theta = p / 2^m + q / (2^m (2^L - 1))
    const long long denL = (1LL << L) - 1;
    long long num = p * denL + q;
    long long den = (1LL << m) * denL;
    const long long g = std::gcd(num, den);
    if (g) {
      num /= g;
      den /= g;
    }
    r.num = num;
    r.den = den;
    out.push_back(r);
  }
  return out;
}

RealizeResult realize_coding(const ThreeBoxSystem& sys, const ABPartition& ab, const Index& seq,
                             int depth) {
  if (quotient_canonicalize(seq).identified)
    throw std::invalid_argument("realize_coding: sequence lies in the identified star class");
  const int n = depth;
  std::vector<int> word;
  for (long j = -n; j <= n; ++j) {
    const int s = seq.at(j);
    if (s != kSymbolA && s != kSymbolB)
      throw std::invalid_argument("realize_coding: symbols must be a/b");
    word.push_back(s);
  }
  ManifoldArc arc = stable_cylinder_arc(sys, ab, word);
  const double r0 = escape_radius(sys.params) / 1.1;
  auto slab = [r0](const RealPoint& p) {
    return std::abs(p.x()) <= r0 * 1.1 + 0.3 && std::abs(p.y()) <= r0 * 1.1 + 0.3;
  };
  ArcOptions opt;
  for (int stepi = 1; stepi <= n; ++stepi) {
    ManifoldArc img = map_arc(sys.params, arc, +1);
    auto pieces = clip_arc(img, slab);
    if (pieces.empty()) {
      RealizeResult r;
      r.note = "image left the slab at step " + std::to_string(stepi);
      return r;
    }
    const int want = seq.at(-n + stepi);
    size_t best = pieces.size();
    double best_len = 0.0;
    for (size_t i = 0; i < pieces.size(); ++i) {
      int votes_b = 0, votes = 0;
      for (int q = 1; q <= 7; ++q) {
        const int s = ab.side(pieces[i].pts[pieces[i].pts.size() * size_t(q) / 8]);
        if (s >= 0) {
          ++votes;
          votes_b += s;
        }
      }
      const int side = votes > 0 && votes_b * 2 > votes ? 1 : 0;
      if (votes > 0 && side == want && pieces[i].length() > best_len) {
        best = i;
        best_len = pieces[i].length();
      }
    }
    if (best == pieces.size()) {
      // fall back to the longest piece
      for (size_t i = 0; i < pieces.size(); ++i)
        if (pieces[i].length() > best_len) {
          best = i;
          best_len = pieces[i].length();
        }
    }
    arc = pieces[best];
    refine_arc(arc, opt);
  }
  RealizeResult res;
  res.cluster_spread = arc.length();
  if (res.cluster_spread > 1e-3)
    throw henon::ClusterSpread("realize_coding: image segment has length " +
                               std::to_string(res.cluster_spread));
  const double tm = 0.5 * (arc.t.front() + arc.t.back());
  res.point = arc.eval ? arc.eval(tm) : arc.pts[arc.pts.size() / 2];
  // forward replay of the non-negative digits
  res.ok = true;
  RealPoint q = res.point;
  for (long j = 0; j <= n; ++j) {
    const int s = ab.side(q);
    if (s != seq.at(j)) {
      res.ok = false;
      res.note = "forward replay mismatch at step " + std::to_string(j);
      break;
    }
    q = apply_map(sys.params, q);
  }
  return res;
}

ConjugacyReport conjugacy_check(const ThreeBoxSystem& sys, const ABPartition& ab,
                                const RealPoint& star, int depth, const ClassifierOptions& opt) {
  ConjugacyReport rep;
  rep.depth = depth;
  rep.words_total = 1 << depth;

  std::vector<std::pair<std::string, RealPoint>> realized;
  for (long code = 0; code < (1L << depth); ++code) {
    Index seq;
    seq.left_tail = {kSymbolA};
    seq.right_tail = {kSymbolA};
    seq.zero = 0;
    std::string wname;
    for (int k = 0; k < depth; ++k) {
      const int d = (code >> k) & 1;
      seq.symbols.push_back(d);
      wname.push_back(d ? 'b' : 'a');
    }
    const auto canon = quotient_canonicalize(seq);
    if (canon.identified) {
      // the star orbit itself realizes these cylinders
      ++rep.star_class_words;
      ++rep.words_realized;
      continue;
    }
    try {
      const auto r = realize_coding(sys, ab, seq, depth);
      if (r.ok) {
        ++rep.words_realized;
        realized.emplace_back(wname, r.point);
      } else {
        rep.failures.push_back("word " + wname + ": " + r.note);
      }
    } catch (const std::exception& e) {
      rep.failures.push_back("word " + wname + ": " + e.what());
    }
  }

  for (size_t i = 0; i < realized.size(); ++i)
    for (size_t j = i + 1; j < realized.size(); ++j) {
      const double d = (realized[i].second - realized[j].second).norm();
      rep.min_pair_separation = std::min(rep.min_pair_separation, d);
      if (d < 1e-8)
        rep.failures.push_back("words " + realized[i].first + " and " + realized[j].first +
                               " realized at the same point");
    }

  // continuity at the star point: nearby bounded points carry codings in the
  // cylinder a^N b ? b a^N
  {
    const Params& prm = sys.params;
    const double bound = 2.0 * escape_radius(prm);
    std::vector<RealPoint> near;
    std::mt19937_64 rng(opt.seed + 5);
    const int grid = 60;
    double cellr = 4e-4;
    std::vector<RealPoint> cells;
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j)
        cells.emplace_back(star.x() + cellr * (2.0 * i / (grid - 1) - 1.0),
                           star.y() + cellr * (2.0 * j / (grid - 1) - 1.0));
    for (int level = 0; level < 22 && !cells.empty(); ++level) {
      std::vector<RealPoint> nxt;
      cellr /= 2.0;
      for (const auto& c : cells)
        for (int dx : {-1, 1})
          for (int dy : {-1, 1}) {
            const RealPoint p = c + 0.5 * cellr * RealPoint(dx, dy);
            RealPoint q = p;
            bool okb = true;
            for (int k = 0; k < std::min(14, 2 + level / 2); ++k) {
              q = apply_map(prm, q);
              if (!(q.cwiseAbs().maxCoeff() <= bound)) {
                okb = false;
                break;
              }
            }
            q = p;
            for (int k = 0; okb && k < std::min(14, 2 + level / 2); ++k) {
              q = apply_inverse(prm, q);
              if (!(q.cwiseAbs().maxCoeff() <= bound)) okb = false;
            }
            if (okb) nxt.push_back(p);
          }
      if (nxt.size() > 600) {
        std::shuffle(nxt.begin(), nxt.end(), rng);
        nxt.resize(600);
      }
      cells = std::move(nxt);
    }
    for (const auto& p : cells)
      if ((p - star).norm() < 1e-4) near.push_back(p);
    const int N = 3;
    for (size_t i = 0; i < near.size() && rep.near_star_checked < 25; ++i) {
      const RealPoint& p = near[i];
      bool pattern = true;
      for (long j = -(N + 1); j <= N + 1; ++j) {
        const int s = ab.side(iterate(prm, p, int(j)));
        if (j == 0) continue;  // the ambiguous slot
        const bool want_b = (j == 1 || j == -1);
        if (s < 0 || (want_b && s != kSymbolB) || (!want_b && s != kSymbolA)) {
          pattern = false;
          break;
        }
      }
      ++rep.near_star_checked;
      if (!pattern)
        rep.failures.push_back("near-star point (" + std::to_string(p.x()) + "," +
                               std::to_string(p.y()) + ") leaves the star cylinder");
    }
  }

  rep.ok = rep.failures.empty() && rep.words_realized == rep.words_total;
  return rep;
}

}  // namespace henon
