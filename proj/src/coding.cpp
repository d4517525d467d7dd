#include "henon/coding.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace henon {

double orbit_slack(const Params& prm, const std::vector<RealPoint>& points) {
  double s = 0.0;
  for (size_t j = 0; j + 1 < points.size(); ++j)
    s = std::max(s, (points[j + 1] - apply_map(prm, points[j])).norm());
  return s;
}

namespace {

double box_depth(const BoxEmbedding& bx, const RealPoint& p, double kappa) {
  auto [z, w] = bx.to_frame_real(p);
  const double hm = (kappa - std::abs(z)) * bx.h_axis.norm();
  const double vm = (1.0 - std::abs(w)) * bx.v_axis.norm();
  return std::min(hm, vm);
}

}  // namespace

SeparationReport verify_separation(const CrossedSystem& sys,
                                   const std::vector<RealPoint>& k_samples, int grid_n) {
  SeparationReport rep;

  // (2.1): the shrunk boxes must contain a neighborhood of the sampled K set.
  double m21 = std::numeric_limits<double>::infinity();
  RealPoint w21 = RealPoint::Zero();
  for (const auto& p : k_samples) {
    double depth = -std::numeric_limits<double>::infinity();
    for (const auto& bx : sys.boxes) depth = std::max(depth, box_depth(bx, p, bx.kappa));
    if (depth < m21) {
      m21 = depth;
      w21 = p;
    }
  }
  rep.margin_21 = m21;
  if (!(m21 > 0.0)) {
    rep.violated = "(2.1): sampled K point outside the shrunk box union";
    rep.witness = w21;
    return rep;
  }

  // image samples of each shrunk box under each outgoing edge, kept per target
  std::map<std::pair<int, int>, std::vector<RealPoint>> images;
  for (const auto& e : sys.graph.edges) {
    const BoxEmbedding& src = sys.box(e.first);
    const BoxEmbedding& dst = sys.box(e.second);
    const EdgeMap& em = sys.map(e.first, e.second);
    auto& pts = images[{e.first, e.second}];
    for (int a = 0; a <= grid_n; ++a)
      for (int b = 0; b <= grid_n; ++b) {
        const double z = src.kappa * (-1.0 + 2.0 * a / grid_n);
        const double w = -1.0 + 2.0 * b / grid_n;
        const RealPoint p = src.to_plane_real(z, w);
        const PlanePoint q = em.fwd(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
        const RealPoint qr(q.x().real(), q.y().real());
        if (dst.contains(qr, 1.0)) pts.push_back(qr);
      }
  }

  // (2.3): images of distinct sources into a common target are separated.
  double m23 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sys.graph.n; ++i) {
    const auto preds = sys.graph.predecessors(i);
    for (size_t a = 0; a < preds.size(); ++a)
      for (size_t b = a + 1; b < preds.size(); ++b) {
        const auto& A = images[{preds[a], i}];
        const auto& B = images[{preds[b], i}];
        for (const auto& pa : A)
          for (const auto& pb : B) {
            const double d = (pa - pb).norm();
            if (d < m23) {
              m23 = d;
              rep.box_a = preds[a];
              rep.box_b = preds[b];
              rep.box_target = i;
              rep.witness = pa;
            }
          }
      }
  }
  rep.margin_23 = m23;
  if (!(m23 > 0.0)) {
    rep.violated = "(2.3): image separation vanished";
    return rep;
  }

  // (2.2): every K sample in a target box lies well inside some incoming
  // image; the relevant boundary pieces are the images of the |z| = kappa
  // sides of the source box.
  double m22 = std::numeric_limits<double>::infinity();
  bool have_inv = false;
  for (const auto& e : sys.graph.edges)
    if (sys.map(e.first, e.second).inv) have_inv = true;
  if (have_inv) {
    std::map<std::pair<int, int>, std::vector<RealPoint>> end_curves;
    for (const auto& e : sys.graph.edges) {
      const BoxEmbedding& src = sys.box(e.first);
      const EdgeMap& em = sys.map(e.first, e.second);
      auto& pts = end_curves[{e.first, e.second}];
      for (int side : {-1, +1})
        for (int b = 0; b <= 4 * grid_n; ++b) {
          const double w = -1.0 + 2.0 * b / (4 * grid_n);
          const RealPoint p = src.to_plane_real(side * src.kappa, w);
          const PlanePoint q = em.fwd(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
          pts.emplace_back(q.x().real(), q.y().real());
        }
    }
    for (const auto& p : k_samples) {
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < sys.graph.n; ++i) {
        const BoxEmbedding& bxi = sys.box(i);
        if (!bxi.contains(p, bxi.kappa)) continue;
        for (int alpha : sys.graph.predecessors(i)) {
          const EdgeMap& em = sys.map(alpha, i);
          if (!em.inv) continue;
          const PlanePoint y = em.inv(PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0)));
          const RealPoint yr(y.x().real(), y.y().real());
          const BoxEmbedding& bxa = sys.box(alpha);
          if (!bxa.contains(yr, bxa.kappa)) continue;
          double dmin = std::numeric_limits<double>::infinity();
          for (const auto& ec : end_curves[{alpha, i}]) dmin = std::min(dmin, (ec - p).norm());
          best = std::max(best, dmin);
        }
      }
      if (best < m22) {
        m22 = best;
        if (!(best > 0.0)) rep.witness = p;
      }
    }
    if (!std::isfinite(m22) || m22 < 0.0) {
      rep.violated = "(2.2): a sampled K point is covered by no incoming image";
      rep.margin_22 = 0.0;
      return rep;
    }
  } else {
    m22 = std::numeric_limits<double>::infinity();  // not checkable without inverses
  }
  rep.margin_22 = m22;

  rep.eta = std::min({m21, m22, m23});
  rep.ok = true;
  return rep;
}

std::vector<Index> code_pseudo_orbit(const CrossedSystem& sys, const PseudoOrbit& orbit,
                                     const SystemTolerances& tol, const CodingOptions& opt) {
  if (!(orbit.slack < tol.epsilon))
    throw std::invalid_argument("code_pseudo_orbit: orbit slack must be below epsilon");
  const long n = long(orbit.points.size());
  if (n == 0) return {};
  const double shrink = opt.membership_shrink + opt.boundary_margin;
  std::vector<std::vector<int>> member(static_cast<size_t>(n));
  for (long j = 0; j < n; ++j) {
    for (int i = 0; i < sys.graph.n; ++i)
      if (sys.box(i).contains(orbit.points[size_t(j)], shrink)) member[size_t(j)].push_back(i);
    if (member[size_t(j)].empty())
      throw NoMembership("code_pseudo_orbit: point lies in no box at step " + std::to_string(j), j);
  }
  std::vector<Index> out;
  for (int terminal : member[size_t(n - 1)]) {
    std::vector<int> syms(static_cast<size_t>(n));
    syms[size_t(n - 1)] = terminal;
    bool alive = true;
    for (long j = n - 2; j >= 0; --j) {
      std::vector<int> cand;
      for (int alpha : sys.graph.predecessors(syms[size_t(j + 1)]))
        if (std::find(member[size_t(j)].begin(), member[size_t(j)].end(), alpha) !=
            member[size_t(j)].end())
          cand.push_back(alpha);
      if (cand.empty()) {
        alive = false;
        break;
      }
      if (cand.size() > 1)
        throw AmbiguityBeyondN(
            "code_pseudo_orbit: backward step not unique; separation (2.2)/(2.3) violated");
      syms[size_t(j)] = cand.front();
    }
    if (alive) out.push_back(Index::finite_word(std::move(syms)));
  }
  std::sort(out.begin(), out.end(),
            [](const Index& a, const Index& b) { return a.symbols < b.symbols; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Index& a, const Index& b) { return a.symbols == b.symbols; }),
            out.end());
  if (long(out.size()) > long(sys.graph.n))
    throw AmbiguityBeyondN("code_pseudo_orbit: more codings than boxes");
  return out;
}

std::vector<Index> code_orbit_prefix(const CrossedSystem& sys, const PseudoOrbit& orbit,
                                     const SystemTolerances& tol, int tail_guard,
                                     const CodingOptions& opt) {
  auto full = code_pseudo_orbit(sys, orbit, tol, opt);
  const long keep = std::max<long>(1, long(orbit.points.size()) - tail_guard);
  for (auto& s : full) s.symbols.resize(size_t(keep));
  std::sort(full.begin(), full.end(),
            [](const Index& a, const Index& b) { return a.symbols < b.symbols; });
  full.erase(std::unique(full.begin(), full.end(),
                         [](const Index& a, const Index& b) { return a.symbols == b.symbols; }),
             full.end());
  return full;
}

namespace {

std::multiset<std::vector<int>> coding_key(const std::vector<Index>& v) {
  std::multiset<std::vector<int>> k;
  for (const auto& s : v) k.insert(s.symbols);
  return k;
}

}  // namespace

bool coding_stability(const CrossedSystem& sys, const Params& prm, const PseudoOrbit& orbit,
                      const SystemTolerances& tol, double perturbation_size, unsigned seed) {
  std::vector<Index> base;
  try {
    base = code_pseudo_orbit(sys, orbit, tol);
  } catch (const std::exception&) {
    return false;
  }

  // pointwise perturbation
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PseudoOrbit pert = orbit;
  for (auto& p : pert.points) {
    RealPoint d(u(rng), u(rng));
    if (d.norm() > 1.0) d.normalize();
    p += perturbation_size * d;
  }
  pert.slack = orbit_slack(prm, pert.points);
  try {
    if (!(pert.slack < tol.epsilon)) return false;
    if (coding_key(code_pseudo_orbit(sys, pert, tol)) != coding_key(base)) return false;
  } catch (const std::exception&) {
    return false;
  }

  // parameter perturbation: same boxes, same points, map moved in c
  for (double dc : {perturbation_size, -perturbation_size}) {
    const Params prm2(prm.c + dc, prm.delta);
    PseudoOrbit same = orbit;
    same.slack = orbit_slack(prm2, same.points);
    try {
      if (!(same.slack < tol.epsilon)) return false;
      if (coding_key(code_pseudo_orbit(sys, same, tol)) != coding_key(base)) return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

namespace {

// G symbol -> (h_j, h_{j+1}) block
const int kBlock[3][2] = {{0, 0}, {0, 1}, {1, 0}};

int block_to_g(int a, int b) {
  if (a == 0 && b == 0) return 0;
  if (a == 0 && b == 1) return 1;
  if (a == 1 && b == 0) return 2;
  throw InadmissiblePattern("h_to_g: block 11 has no G symbol");
}

}  // namespace

Index g_to_h(const Index& g) {
  for (int s : g.symbols)
    if (s < 0 || s > 2) throw InadmissiblePattern("g_to_h: symbols must be 0,1,2");
  Index h;
  h.zero = g.zero;
  for (size_t j = 0; j < g.symbols.size(); ++j) {
    h.symbols.push_back(kBlock[g.symbols[j]][0]);
    if (j + 1 < g.symbols.size() && kBlock[g.symbols[j]][1] != kBlock[g.symbols[j + 1]][0])
      throw InadmissiblePattern("g_to_h: inconsistent consecutive blocks (index not admissible)");
  }
  auto tail_digits = [&](const std::vector<int>& gt) {
    std::vector<int> ht;
    for (size_t k = 0; k < gt.size(); ++k) {
      ht.push_back(kBlock[gt[k]][0]);
      if (kBlock[gt[k]][1] != kBlock[gt[(k + 1) % gt.size()]][0])
        throw InadmissiblePattern("g_to_h: inconsistent tail blocks");
    }
    return ht;
  };
  if (!g.left_tail.empty()) {
    h.left_tail = tail_digits(g.left_tail);
    if (!g.symbols.empty() && kBlock[g.left_tail.back()][1] != kBlock[g.symbols.front()][0])
      throw InadmissiblePattern("g_to_h: tail/core junction inconsistent");
  }
  if (!g.right_tail.empty()) {
    h.right_tail = tail_digits(g.right_tail);
    if (!g.symbols.empty() && kBlock[g.symbols.back()][1] != kBlock[g.right_tail.front()][0])
      throw InadmissiblePattern("g_to_h: core/tail junction inconsistent");
  } else if (!g.symbols.empty()) {
    // trailing digit of the last block closes the H word
    h.symbols.push_back(kBlock[g.symbols.back()][1]);
  }
  return h;
}

Index h_to_g(const Index& h) {
  for (int s : h.symbols)
    if (s != 0 && s != 1) throw InadmissiblePattern("h_to_g: symbols must be 0,1");
  Index g;
  g.zero = h.zero;
  auto digit_at_end = [&]() -> int {
    if (!h.right_tail.empty()) return h.right_tail.front();
    throw InadmissiblePattern("h_to_g: finite H word shorter than 2 symbols");
  };
  for (size_t j = 0; j < h.symbols.size(); ++j) {
    const int a = h.symbols[j];
    const int b = j + 1 < h.symbols.size()
                      ? h.symbols[j + 1]
                      : (h.right_tail.empty() ? -1 : h.right_tail.front());
    if (b < 0) break;  // last overlapping block needs the next digit
    g.symbols.push_back(block_to_g(a, b));
  }
  if (g.symbols.empty() && h.symbols.size() >= 2) g.symbols.push_back(block_to_g(h.symbols[0], digit_at_end()));
  auto tail_blocks = [&](const std::vector<int>& ht) {
    std::vector<int> gt;
    for (size_t k = 0; k < ht.size(); ++k) gt.push_back(block_to_g(ht[k], ht[(k + 1) % ht.size()]));
    return gt;
  };
  if (!h.left_tail.empty()) g.left_tail = tail_blocks(h.left_tail);
  if (!h.right_tail.empty()) g.right_tail = tail_blocks(h.right_tail);
  if (g.symbols.empty()) throw InadmissiblePattern("h_to_g: empty translation");
  if (g.zero >= long(g.symbols.size())) g.zero = long(g.symbols.size()) - 1;
  return g;
}

namespace {

bool tail_all(const std::vector<int>& tail, int sym) {
  for (int s : tail)
    if (s != sym) return false;
  return true;
}

}  // namespace

QuotientShiftPoint quotient_canonicalize(const Index& seq) {
  QuotientShiftPoint q;
  q.seq = seq;
  q.canonical_form = seq;
  const bool tails_a = (seq.left_tail.empty() || tail_all(seq.left_tail, kSymbolA)) &&
                       (seq.right_tail.empty() || tail_all(seq.right_tail, kSymbolA));
  if (!tails_a) return q;
  long first_b = -1, last_b = -1;
  for (long j = 0; j < long(seq.symbols.size()); ++j) {
    if (seq.symbols[size_t(j)] == kSymbolB) {
      if (first_b < 0) first_b = j;
      last_b = j;
    }
  }
  if (first_b < 0) return q;  // all-a: its own class
  if (last_b - first_b != 2) return q;
  const int mid = seq.symbols[size_t(first_b + 1)];
  const bool is_bab = mid == kSymbolA;
  const bool is_bbb = mid == kSymbolB;
  if (!(is_bab || is_bbb)) return q;
  // identified class: canonical representative carries the bab core at the
  // same absolute positions
  q.identified = true;
  q.canonical_form.symbols[size_t(first_b + 1)] = kSymbolA;
  return q;
}

Index shift_index(const Index& s, long k) {
  Index r = s;
  r.zero += k;
  // materialize tail symbols so the zero mark stays inside the core
  while (r.zero < 0) {
    if (s.left_tail.empty()) throw InadmissiblePattern("shift_index: beyond a finite index");
    const long m = long(r.left_tail.size());
    // prepend one full period
    r.symbols.insert(r.symbols.begin(), r.left_tail.begin(), r.left_tail.end());
    r.zero += m;
  }
  while (r.zero >= long(r.symbols.size())) {
    if (s.right_tail.empty()) throw InadmissiblePattern("shift_index: beyond a finite index");
    r.symbols.insert(r.symbols.end(), r.right_tail.begin(), r.right_tail.end());
  }
  return r;
}

bool same_sequence(const Index& a, const Index& b, long window) {
  auto defined = [](const Index& s, long j) {
    const long k = j + s.zero;
    if (k >= 0 && k < long(s.symbols.size())) return true;
    if (k < 0) return !s.left_tail.empty();
    return !s.right_tail.empty();
  };
  for (long j = -window; j <= window; ++j) {
    const bool da = defined(a, j), db = defined(b, j);
    if (da != db) return false;
    if (da && a.at(j) != b.at(j)) return false;
  }
  return true;
}

std::string print_index(const Index& s) {
  std::ostringstream os;
  auto word = [&os](const std::vector<int>& w) {
    for (size_t i = 0; i < w.size(); ++i) {
      if (i) os << ' ';
      os << w[i];
    }
  };
  if (!s.left_tail.empty()) {
    word(s.left_tail);
    os << "^:";
  }
  for (size_t i = 0; i < s.symbols.size(); ++i) {
    if (i) os << ' ';
    if (long(i) == s.zero) os << '*';
    os << s.symbols[i];
  }
  if (!s.right_tail.empty()) {
    os << ':';
    word(s.right_tail);
    os << '^';
  }
  return os.str();
}

Index parse_index(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.empty() || parts.size() > 3) throw InadmissiblePattern("parse_index: malformed");
  auto is_tail = [](const std::string& p) {
    return !p.empty() && p.find('^') != std::string::npos;
  };
  std::string ltail, body, rtail;
  if (parts.size() == 3) {
    ltail = parts[0];
    body = parts[1];
    rtail = parts[2];
  } else if (parts.size() == 2) {
    if (is_tail(parts[0])) {
      ltail = parts[0];
      body = parts[1];
    } else {
      body = parts[0];
      rtail = parts[1];
    }
  } else {
    body = parts[0];
  }
  auto parse_word = [](const std::string& w, long* zero_pos) {
    std::vector<int> syms;
    std::istringstream is(w);
    std::string tok;
    while (is >> tok) {
      if (tok == "^") continue;
      bool zero = false;
      if (!tok.empty() && tok[0] == '*') {
        zero = true;
        tok.erase(tok.begin());
      }
      if (!tok.empty() && tok.back() == '^') tok.pop_back();
      if (tok.empty()) continue;
      size_t pos = 0;
      const int v = std::stoi(tok, &pos);
      if (pos != tok.size()) throw InadmissiblePattern("parse_index: bad symbol '" + tok + "'");
      if (zero && zero_pos) *zero_pos = long(syms.size());
      syms.push_back(v);
    }
    return syms;
  };
  Index s;
  long zp = -1;
  s.symbols = parse_word(body, &zp);
  s.zero = zp >= 0 ? zp : 0;
  if (!ltail.empty()) s.left_tail = parse_word(ltail, nullptr);
  if (!rtail.empty()) s.right_tail = parse_word(rtail, nullptr);
  if (s.symbols.empty()) throw InadmissiblePattern("parse_index: empty body");
  return s;
}

}  // namespace henon
