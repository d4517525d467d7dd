#include "henon/crossed_maps.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace henon {

bool admissible(const TransitionGraph& g, const Index& s) {
  auto ok_pair = [&](int a, int b) { return g.admissible(a, b); };
  for (size_t i = 0; i + 1 < s.symbols.size(); ++i)
    if (!ok_pair(s.symbols[i], s.symbols[i + 1])) return false;
  if (!s.left_tail.empty()) {
    for (size_t i = 0; i + 1 < s.left_tail.size(); ++i)
      if (!ok_pair(s.left_tail[i], s.left_tail[i + 1])) return false;
    if (!ok_pair(s.left_tail.back(), s.left_tail.front())) return false;  // tail is a cycle
    if (!s.symbols.empty() && !ok_pair(s.left_tail.back(), s.symbols.front())) return false;
  }
  if (!s.right_tail.empty()) {
    for (size_t i = 0; i + 1 < s.right_tail.size(); ++i)
      if (!ok_pair(s.right_tail[i], s.right_tail[i + 1])) return false;
    if (!ok_pair(s.right_tail.back(), s.right_tail.front())) return false;
    if (!s.symbols.empty() && !ok_pair(s.symbols.back(), s.right_tail.front())) return false;
  }
  return true;
}

long index_degree(const TransitionGraph& g, const Index& s) {
  long d = 1;
  for (size_t i = 0; i + 1 < s.symbols.size(); ++i) d *= g.degree(s.symbols[i], s.symbols[i + 1]);
  return d;
}

CrossedCheckReport check_crossed(const std::function<PlanePoint(const PlanePoint&)>& f,
                                 const BoxEmbedding& source, const BoxEmbedding& target,
                                 int grid_n, double im_thickness) {
  if (grid_n < 8) throw std::invalid_argument("check_crossed: grid_n >= 8");
  CrossedCheckReport rep;
  const int n = grid_n;
  const double im = std::min(1.0, std::max(1e-6, im_thickness));
  const int nim = std::max(3, int(std::ceil(n * im)));
  // complex z-grid over the slab [-1,1] x [-im, im], clipped to the disk
  std::vector<Complex> zs;
  zs.reserve(size_t(n) * size_t(nim));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < nim; ++b) {
      const Complex z(-1.0 + 2.0 * a / (n - 1), -im + 2.0 * im * b / (nim - 1));
      zs.push_back(z);
    }
  const size_t m = zs.size();
  // transit flag per (z,w) pair; 0 = outside source disk, 1 = in source not transit, 2 = transit
  std::vector<uint8_t> flag(m * m, 0);
  std::vector<Complex> img_z(m * m), img_w(m * m);
  double worst_h = 0.0, worst_v = 0.0;
  PlanePoint worst_h_pt = PlanePoint::Zero(), worst_v_pt = PlanePoint::Zero();
  for (size_t iz = 0; iz < m; ++iz) {
    if (std::abs(zs[iz]) > 1.0) continue;
    for (size_t iw = 0; iw < m; ++iw) {
      if (std::abs(zs[iw]) > 1.0) continue;
      const size_t k = iz * m + iw;
      const PlanePoint p = source.to_plane(zs[iz], zs[iw]);
      const PlanePoint q = f(p);
      auto [zt, wt] = target.to_frame(q);
      img_z[k] = zt;
      img_w[k] = wt;
      if (std::abs(zt) <= 1.0 && std::abs(wt) <= 1.0) {
        flag[k] = 2;
        rep.transit_nonempty = true;
        if (zs[iz].real() > 0.0) rep.reach_pos = std::max(rep.reach_pos, std::abs(zs[iz]));
        else rep.reach_neg = std::max(rep.reach_neg, std::abs(zs[iz]));
        if (std::abs(zs[iz]) > worst_h) {
          worst_h = std::abs(zs[iz]);
          worst_h_pt = p;
        }
        if (wt.real() > 0.0) rep.reach_w_pos = std::max(rep.reach_w_pos, std::abs(wt));
        else rep.reach_w_neg = std::max(rep.reach_w_neg, std::abs(wt));
        if (std::abs(wt) > worst_v) {
          worst_v = std::abs(wt);
          worst_v_pt = p;
        }
      } else {
        flag[k] = 1;
      }
    }
  }
  rep.horizontal_footprint = worst_h;
  rep.vertical_footprint = worst_v;

  // properness proxy: transit boundary may exit only through |z_target| = 1
  // (horizontal) or out of the source bidisk; a neighbor inside the source
  // whose image leaves the target vertically while |z_target| <= 1 is a leak.
  double proper_margin = 1.0;
  PlanePoint leak_witness = PlanePoint::Zero();
  bool leak = false;
  auto at = [&](size_t iz, size_t iw) { return flag[iz * m + iw]; };
  const size_t stride_w = 1, stride_z = m;
  (void)stride_w;
  (void)stride_z;
  for (size_t iz = 0; iz < m; ++iz)
    for (size_t iw = 0; iw < m; ++iw) {
      if (at(iz, iw) != 2) continue;
      const size_t neigh[4][2] = {{iz + 1, iw}, {iz - 1, iw}, {iz, iw + 1}, {iz, iw - 1}};
      for (auto& nb : neigh) {
        if (nb[0] >= m || nb[1] >= m) continue;
        const size_t kn = nb[0] * m + nb[1];
        if (flag[kn] != 1) continue;  // outside-domain or transit: fine
        const double azt = std::abs(img_z[kn]);
        const double awt = std::abs(img_w[kn]);
        if (awt > 1.0 && azt <= 1.0) {
          // vertical leak adjacent to the transit set
          leak = true;
          leak_witness = source.to_plane(zs[nb[0]], zs[nb[1]]);
        } else if (azt > 1.0) {
          proper_margin = std::min(proper_margin, azt - 1.0);
        }
      }
    }
  rep.properness_margin = proper_margin;

  if (!rep.transit_nonempty) {
    rep.violated = "empty transit set";
    return rep;
  }
  if (worst_h > source.kappa) {
    rep.violated = "(iii) horizontal footprint exceeds kappa";
    rep.witness = worst_h_pt;
    return rep;
  }
  if (worst_v > target.kappa) {
    rep.violated = "(iii) vertical footprint exceeds kappa";
    rep.witness = worst_v_pt;
    return rep;
  }
  if (leak) {
    rep.violated = "(ii) properness: image exits target vertically inside the source";
    rep.witness = leak_witness;
    return rep;
  }
  rep.ok = true;
  return rep;
}

int degree(const std::function<PlanePoint(const PlanePoint&)>& f, const BoxEmbedding& source,
           const BoxEmbedding& target, int probe_count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uw(-0.55, 0.55), uz(-0.7, 0.7);
  int agreed = -1;
  const int M = 8192;
  for (int probe = 0; probe < probe_count; ++probe) {
    const double w0 = uw(rng);
    const double z0 = uz(rng);
    int crossings = 0;
    double gprev = 0.0;
    bool valid_prev = false;
    for (int i = 0; i <= M; ++i) {
      const double z = -1.0 + 2.0 * i / M;
      const PlanePoint q = f(source.to_plane(Complex(z, 0), Complex(w0, 0)));
      auto [zt, wt] = target.to_frame(q);
      const bool in = std::abs(wt) <= 1.0 && std::abs(zt) <= 1.0;
      if (in) {
        const double g = zt.real() - z0;
        if (valid_prev && gprev * g < 0.0) ++crossings;
        gprev = g;
        valid_prev = true;
      } else {
        valid_prev = false;
      }
    }
    if (agreed < 0) agreed = crossings;
    else if (agreed != crossings)
      throw InconsistentDegree("degree: probes disagree (" + std::to_string(agreed) + " vs " +
                               std::to_string(crossings) + ")");
  }
  return agreed;
}

ComposedMap compose(const CrossedSystem& sys, const Index& s) {
  if (!s.finite()) throw InadmissiblePattern("compose: finite index required");
  if (s.symbols.size() < 2) {
    // singleton: the edge map itself requires two symbols; a single symbol is identity
    ComposedMap cm;
    cm.index = s;
    cm.source = cm.target = s.symbols.empty() ? 0 : s.symbols.front();
    cm.degree = 1;
    cm.fwd = [](const PlanePoint& p) { return p; };
    auto box = sys.box(cm.source);
    cm.in_transit = [box](const PlanePoint& p) { return box.contains(p); };
    return cm;
  }
  if (!admissible(sys.graph, s)) throw InadmissiblePattern("compose: index not admissible");
  auto chain = std::make_shared<std::vector<std::function<PlanePoint(const PlanePoint&)>>>();
  for (size_t i = 0; i + 1 < s.symbols.size(); ++i)
    chain->push_back(sys.map(s.symbols[i], s.symbols[i + 1]).fwd);
  ComposedMap cm;
  cm.index = s;
  cm.source = s.symbols.front();
  cm.target = s.symbols.back();
  cm.degree = index_degree(sys.graph, s);
  cm.fwd = [chain](const PlanePoint& p) {
    PlanePoint q = p;
    for (auto& g : *chain) q = g(q);
    return q;
  };
  auto boxes = std::make_shared<std::vector<BoxEmbedding>>();
  for (int sym : s.symbols) boxes->push_back(sys.box(sym));
  cm.in_transit = [chain, boxes](const PlanePoint& p) {
    PlanePoint q = p;
    if (!(*boxes)[0].contains(q)) return false;
    for (size_t i = 0; i < chain->size(); ++i) {
      q = (*chain)[i](q);
      if (!(*boxes)[i + 1].contains(q)) return false;
    }
    return true;
  };
  return cm;
}

namespace {

// z-intervals on the fiber {(z,w0)} whose truncated orbit follows `word`.
std::vector<std::pair<double, double>> fiber_intervals(const CrossedSystem& sys,
                                                       const std::vector<int>& word, double w0,
                                                       int zsamples) {
  auto follows = [&](double z) {
    PlanePoint p = sys.box(word[0]).to_plane(Complex(z, 0), Complex(w0, 0));
    for (size_t j = 0; j + 1 < word.size(); ++j) {
      p = sys.map(word[j], word[j + 1]).fwd(p);
      if (!sys.box(word[j + 1]).contains(p)) return false;
    }
    return true;
  };
  std::vector<std::pair<double, double>> iv;
  bool prev = false;
  double start = -1.0;
  for (int i = 0; i <= zsamples; ++i) {
    const double z = -1.0 + 2.0 * i / zsamples;
    const bool in = follows(z);
    if (in && !prev) start = z;
    if (!in && prev) {
      // refine endpoints
      double lo = start - 2.0 / zsamples, hi = start;
      if (lo < -1.0) lo = -1.0;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (follows(mid)) hi = mid;
        else lo = mid;
      }
      const double a = hi;
      lo = z - 2.0 / zsamples;
      hi = z;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (follows(mid)) lo = mid;
        else hi = mid;
      }
      iv.emplace_back(a, lo);
      prev = false;
    } else {
      prev = in;
    }
  }
  if (prev) iv.emplace_back(start, 1.0);
  return iv;
}

}  // namespace

MultiDisk compute_B(const CrossedSystem& sys, const Index& s, double resolution) {
  if (!admissible(sys.graph, s)) throw InadmissiblePattern("compute_B: index not admissible");

  if (s.right_infinite() && !s.left_infinite()) {
    // vertical multi-disk: pull back fibers through the composed maps
    for (size_t i = 0; i < s.right_tail.size(); ++i) {
      const int a = s.right_tail[i];
      const int b = s.right_tail[(i + 1) % s.right_tail.size()];
      if (sys.graph.degree(a, b) > 1)
        throw InfiniteDegree("compute_B: periodic tail repeats a degree>1 edge");
    }
    std::vector<int> base(s.symbols.begin() + s.zero, s.symbols.end());
    if (base.empty()) base.push_back(s.right_tail.front());
    MultiDisk md;
    md.orientation = DiskOrientation::Vertical;
    md.box = base.front();

    int repeats = 2;
    double diam = 1.0;
    std::vector<std::vector<std::pair<double, double>>> fibers;
    const int nbase = 65;
    std::vector<double> wgrid(nbase);
    for (int k = 0; k < nbase; ++k) wgrid[size_t(k)] = std::cos(M_PI * k / (nbase - 1));
    for (; repeats <= 4096; repeats *= 2) {
      std::vector<int> word = base;
      for (int r = 0; r < repeats; ++r)
        word.insert(word.end(), s.right_tail.begin(), s.right_tail.end());
      fibers.assign(size_t(nbase), {});
      diam = 0.0;
      for (int k = 0; k < nbase; ++k) {
        fibers[size_t(k)] = fiber_intervals(sys, word, wgrid[size_t(k)], 4096);
        for (auto& iv : fibers[size_t(k)]) diam = std::max(diam, iv.second - iv.first);
      }
      if (diam < resolution) break;
    }
    if (diam >= resolution)
      throw DepthExceeded("compute_B: fiber diameter did not reach resolution", diam);

    // cluster fiber roots into components by continuity in w
    size_t ncomp = 0;
    for (auto& f : fibers) ncomp = std::max(ncomp, f.size());
    std::vector<ManifoldArc> comps(ncomp);
    const BoxEmbedding& bx = sys.box(md.box);
    for (int k = nbase - 1; k >= 0; --k) {  // increasing w
      auto& f = fibers[size_t(k)];
      std::vector<double> roots;
      for (auto& iv : f) roots.push_back(0.5 * (iv.first + iv.second));
      std::sort(roots.begin(), roots.end());
      for (size_t c = 0; c < roots.size() && c < ncomp; ++c) {
        comps[c].t.push_back(wgrid[size_t(k)]);
        comps[c].pts.push_back(bx.to_plane_real(roots[c], wgrid[size_t(k)]));
      }
    }
    for (auto& c : comps) {
      if (c.pts.size() < 2) continue;
      c.kind = ManifoldKind::Stable;
      md.components.push_back(std::move(c));
      md.component_degrees.push_back(1);
    }
    return md;
  }

  if (s.left_infinite() && !s.right_infinite()) {
    // horizontal disk: local unstable manifold of the tail's periodic orbit,
    // pushed through the finite prefix
    Index tail_idx;
    tail_idx.symbols = s.left_tail;
    tail_idx.symbols.push_back(s.left_tail.front());
    if (index_degree(sys.graph, tail_idx) != 1)
      throw InfiniteDegree("compute_B: left tail must have degree 1");
    double res = 0.0;
    const RealPoint pper = periodic_fixed_point(sys, tail_idx, 1e-10, &res);
    ComposedMap ftail = compose(sys, tail_idx);
    // numeric Jacobian of the tail map
    const double h = 1e-7;
    auto F = [&](const RealPoint& p) {
      const PlanePoint q = ftail.fwd(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
      return RealPoint(q.x().real(), q.y().real());
    };
    Eigen::Matrix2d J;
    J.col(0) = (F(pper + RealPoint(h, 0)) - F(pper - RealPoint(h, 0))) / (2 * h);
    J.col(1) = (F(pper + RealPoint(0, h)) - F(pper - RealPoint(0, h))) / (2 * h);
    Eigen::EigenSolver<Eigen::Matrix2d> es(J);
    int iu = std::abs(es.eigenvalues()[0]) > std::abs(es.eigenvalues()[1]) ? 0 : 1;
    const double lam = es.eigenvalues()[iu].real();
    RealPoint vu(es.eigenvectors().col(iu)[0].real(), es.eigenvectors().col(iu)[1].real());
    vu.normalize();

    // linear local segment, expanded by iterating the tail map
    const double eps = 1e-7;
    auto at = [=](double t) {
      int n = 0;
      double arg = t;
      while (std::abs(arg) > eps) {
        arg /= lam;
        ++n;
        if (n > 600) throw RefinementBlowup("compute_B: parameter out of range");
      }
      RealPoint p = pper + arg * vu;
      for (int i = 0; i < n; ++i) p = F(p);
      return p;
    };
    const BoxEmbedding& bx0 = sys.box(tail_idx.symbols.front());
    ManifoldArc arc;
    arc.kind = ManifoldKind::Unstable;
    // march until the arc exits the box on both sides
    {
      ArcOptions opt;
      std::vector<double> tp, tn;
      std::vector<RealPoint> pp, pn;
      double t_max = eps;
      while (bx0.contains(at(t_max), 1.3) && t_max < 1e9) t_max *= 1.5;
      double t_min = -eps;
      while (bx0.contains(at(t_min), 1.3) && t_min > -1e9) t_min *= 1.5;
      auto atf = [&](double t) { return at(t); };
      auto march1 = [&](double tmax, int sign, std::vector<double>& ts, std::vector<RealPoint>& ps) {
        const int NN = 2048;
        for (int i = 0; i <= NN; ++i) {
          const double t = sign * tmax * double(i) / NN;
          ts.push_back(t);
          ps.push_back(atf(t));
        }
      };
      march1(t_max, +1, tp, pp);
      march1(-t_min, -1, tn, pn);
      for (size_t i = tn.size(); i-- > 1;) {
        arc.t.push_back(tn[i]);
        arc.pts.push_back(pn[i]);
      }
      for (size_t i = 0; i < tp.size(); ++i) {
        arc.t.push_back(tp[i]);
        arc.pts.push_back(pp[i]);
      }
      arc.eval = atf;
      refine_arc(arc, opt);
    }

    // push through the finite prefix up to the zero position
    std::vector<ManifoldArc> pieces = {arc};
    std::vector<int> prefix(s.symbols.begin(), s.symbols.begin() + s.zero + 1);
    // the tail joins the core at its start; prepend the junction symbol
    int cur = tail_idx.symbols.front();
    std::vector<int> path;
    path.push_back(cur);
    for (int sym : prefix) path.push_back(sym);
    for (size_t j = 0; j + 1 < path.size(); ++j) {
      const BoxEmbedding& bsrc = sys.box(path[j]);
      const BoxEmbedding& bdst = sys.box(path[j + 1]);
      const EdgeMap& em = sys.map(path[j], path[j + 1]);
      std::vector<ManifoldArc> next;
      for (auto& pc : pieces) {
        auto clipped = clip_arc(pc, [&](const RealPoint& p) { return bsrc.contains(p); });
        for (auto& cl : clipped) {
          ManifoldArc im;
          im.kind = ManifoldKind::Unstable;
          im.t = cl.t;
          for (auto& p : cl.pts) {
            const PlanePoint q = em.fwd(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
            im.pts.emplace_back(q.x().real(), q.y().real());
          }
          if (cl.eval) {
            auto parent = cl.eval;
            auto fw = em.fwd;
            im.eval = [parent, fw](double t) {
              const RealPoint p = parent(t);
              const PlanePoint q = fw(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
              return RealPoint(q.x().real(), q.y().real());
            };
          }
          auto inside = clip_arc(im, [&](const RealPoint& p) { return bdst.contains(p); });
          for (auto& a2 : inside) next.push_back(a2);
        }
      }
      pieces = std::move(next);
    }
    MultiDisk md;
    md.orientation = DiskOrientation::Horizontal;
    md.box = path.back();
    for (auto& pc : pieces)
      if (pc.pts.size() >= 2) {
        md.components.push_back(pc);
        md.component_degrees.push_back(1);
      }
    return md;
  }

  if (s.left_infinite() && s.right_infinite()) {
    Index future = s;
    future.left_tail.clear();
    future.symbols.erase(future.symbols.begin(), future.symbols.begin() + future.zero);
    future.zero = 0;
    Index past = s;
    past.right_tail.clear();
    past.symbols.resize(size_t(past.zero) + 1);
    MultiDisk v = compute_B(sys, future, resolution);
    MultiDisk h = compute_B(sys, past, resolution);
    MultiDisk md;
    md.box = v.box;
    md.orientation = DiskOrientation::Vertical;
    for (auto& cv : v.components)
      for (auto& ch : h.components)
        for (auto& rec : intersect_arcs(ch, cv, 1e-9)) md.points.push_back(rec.location);
    return md;
  }

  throw InadmissiblePattern("compute_B: finite indices carry no disk; pass an infinite index");
}

RealPoint periodic_fixed_point(const CrossedSystem& sys, const Index& s, double tol,
                               double* residual) {
  if (s.symbols.size() < 2 || s.symbols.front() != s.symbols.back())
    throw InadmissiblePattern("periodic_fixed_point: index must be periodic (s0 = sm)");
  if (index_degree(sys.graph, s) != 1)
    throw DegreeNotOne("periodic_fixed_point: index degree must be 1");
  ComposedMap fs = compose(sys, s);
  auto F = [&](const RealPoint& p) {
    const PlanePoint q = fs.fwd(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
    return RealPoint(q.x().real(), q.y().real());
  };
  auto in_transit_relaxed = [&](const RealPoint& p, double slack) {
    PlanePoint q(Complex(p.x(), 0), Complex(p.y(), 0));
    if (!sys.box(s.symbols[0]).contains(q, slack)) return false;
    for (size_t i = 0; i + 1 < s.symbols.size(); ++i) {
      q = sys.map(s.symbols[i], s.symbols[i + 1]).fwd(q);
      if (!sys.box(s.symbols[i + 1]).contains(q, slack)) return false;
    }
    return true;
  };
  const BoxEmbedding& bx = sys.box(s.symbols.front());
  RealPoint best = RealPoint::Zero();
  double best_score = std::numeric_limits<double>::infinity();
  for (int a = -16; a <= 16; ++a)
    for (int b = -16; b <= 16; ++b) {
      const RealPoint p = bx.to_plane_real(a / 16.0 * 0.9, b / 16.0 * 0.9);
      if (!in_transit_relaxed(p, 1.25)) continue;
      const double sc = (F(p) - p).norm();
      if (sc < best_score) {
        best_score = sc;
        best = p;
      }
    }
  if (!std::isfinite(best_score))
    throw NotCrossed("periodic_fixed_point: empty transit set for the index");
  RealPoint p = best;
  const double hstep = 1e-7;
  for (int it = 0; it < 80; ++it) {
    const RealPoint g = F(p) - p;
    if (g.norm() < tol) break;
    Eigen::Matrix2d J;
    J.col(0) = (F(p + RealPoint(hstep, 0)) - F(p - RealPoint(hstep, 0))) / (2 * hstep);
    J.col(1) = (F(p + RealPoint(0, hstep)) - F(p - RealPoint(0, hstep))) / (2 * hstep);
    J -= Eigen::Matrix2d::Identity();
    RealPoint step = J.fullPivLu().solve(-g);
    const double cap = 0.5 * (bx.h_axis.norm() + bx.v_axis.norm());
    if (step.norm() > cap) step *= cap / step.norm();
    p += step;
  }
  const double res = (F(p) - p).norm();
  if (residual) *residual = res;
  if (res > tol * 10.0)
    throw std::runtime_error("periodic_fixed_point: Newton failed, residual " + std::to_string(res));
  return p;
}

}  // namespace henon
