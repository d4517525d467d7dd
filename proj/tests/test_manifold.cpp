#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "henon/manifold.hpp"

using namespace henon;

namespace {

ManifoldArc arc_from_function(const std::function<RealPoint(double)>& f, double t0, double t1,
                              int n) {
  ManifoldArc a;
  for (int i = 0; i <= n; ++i) {
    const double t = t0 + (t1 - t0) * i / n;
    a.t.push_back(t);
    a.pts.push_back(f(t));
  }
  a.eval = f;
  return a;
}

}  // namespace

TEST_CASE("local parametrization normalization and conjugacy residual") {
  Params prm(6.0, 0.8);
  const auto [alpha, beta] = fixed_points(prm);
  for (ManifoldKind kind : {ManifoldKind::Unstable, ManifoldKind::Stable}) {
    const LocalParam lp = local_parametrization(prm, alpha, kind, 20);
    CHECK((lp.coeffs[0] - alpha.location).norm() < 1e-14);
    const RealPoint v = kind == ManifoldKind::Unstable ? alpha.eigvec_u : alpha.eigvec_s;
    const RealPoint a1 = lp.coeffs[1].normalized();
    CHECK(std::abs(std::abs(a1.dot(v)) - 1.0) < 1e-12);

    const double lam = lp.multiplier();
    double worst = 0.0;
    for (int i = -40; i <= 40; ++i) {
      const double t = lp.radius_of_validity * i / 40.0;
      const RealPoint lhs = kind == ManifoldKind::Unstable ? apply_map(prm, lp.eval(t))
                                                           : apply_inverse(prm, lp.eval(t));
      const RealPoint rhs = kind == ManifoldKind::Unstable ? lp.eval(lam * t) : lp.eval(t / lam);
      worst = std::max(worst, (lhs - rhs).norm());
    }
    CHECK(worst < 1e-10 * (1.0 + alpha.location.norm()));
  }
  // same at beta (negative multipliers)
  const LocalParam lb = local_parametrization(prm, beta, ManifoldKind::Stable, 20);
  CHECK(lb.multiplier() < 0.0);
  CHECK((apply_inverse(prm, lb.eval(0.3 * lb.radius_of_validity)) -
         lb.eval(0.3 * lb.radius_of_validity / lb.multiplier()))
            .norm() < 1e-9);
}

TEST_CASE("reparametrization rescales coefficients geometrically") {
  Params prm(6.0, 0.8);
  const auto [alpha, beta] = fixed_points(prm);
  const LocalParam lp = local_parametrization(prm, alpha, ManifoldKind::Unstable, 14);
  // psi_s(t) := psi(s t) solves the same equation with a1 scaled by s; points agree
  const double s = 0.35;
  for (int i = -5; i <= 5; ++i) {
    const double t = 0.2 * i / 5.0;
    RealPoint direct = lp.eval(s * t);
    RealPoint scaled = RealPoint::Zero();
    for (size_t k = lp.coeffs.size(); k-- > 0;)
      scaled = lp.coeffs[k] * std::pow(s, double(k)) + t * scaled;
    CHECK((direct - scaled).norm() < 1e-12);
  }
}

TEST_CASE("grow_arc base case and forward invariance of vertices") {
  Params prm(6.0, 0.8);
  const auto [alpha, beta] = fixed_points(prm);
  const LocalParam lp = local_parametrization(prm, alpha, ManifoldKind::Unstable, 20);
  ArcOptions opt;
  const ManifoldArc a0 = grow_arc(prm, lp, 0, opt);
  // iterations = 0: the local real slice through the validity radius
  CHECK(std::abs(a0.t.front() + lp.radius_of_validity) < 1e-9);
  CHECK(std::abs(a0.t.back() - lp.radius_of_validity) < 1e-9);
  for (size_t i = 0; i < a0.pts.size(); i += 50)
    CHECK((a0.pts[i] - lp.eval(a0.t[i])).norm() < 1e-12);

  const ManifoldArc a1 = grow_arc(prm, lp, 1, opt);
  const double lam = lp.multiplier();
  int checked = 0;
  for (size_t i = 0; i < a0.pts.size(); i += 29) {
    const double t_img = lam * a0.t[i];
    if (t_img < a1.t.front() || t_img > a1.t.back()) continue;  // clipped escape tail
    const RealPoint img = apply_map(prm, a0.pts[i]);
    CHECK(arc_distance(a1, img) < opt.h_max);
    ++checked;
  }
  CHECK(checked > 10);
  // spacing bound holds
  for (size_t i = 1; i < a1.pts.size(); ++i)
    CHECK((a1.pts[i] - a1.pts[i - 1]).norm() <= opt.h_max * (1 + 1e-9));
}

TEST_CASE("grown unstable arc folds (non-monotone x)") {
  Params prm(6.0, 0.8);
  const auto [alpha, beta] = fixed_points(prm);
  const LocalParam lp = local_parametrization(prm, alpha, ManifoldKind::Unstable, 20,
                                              alpha.eigvec_u.x() > 0 ? +1 : -1);
  const ManifoldArc arc = grow_arc(prm, lp, 3);
  int sign_changes = 0;
  double prev = 0.0;
  bool have = false;
  for (size_t i = 1; i < arc.pts.size(); ++i) {
    const double dx = arc.pts[i].x() - arc.pts[i - 1].x();
    if (std::abs(dx) < 1e-12) continue;
    if (have && dx * prev < 0.0) ++sign_changes;
    prev = dx;
    have = true;
  }
  CHECK(sign_changes >= 1);
}

TEST_CASE("real slice of an invariant disk, idempotence, and the non-invariant error") {
  Params prm(6.0, 0.8);
  const auto [alpha, beta] = fixed_points(prm);
  const LocalParam lp = local_parametrization(prm, alpha, ManifoldKind::Unstable, 16);
  ComplexDisk disk{[&lp](Complex t) { return lp.eval(t); }, lp.radius_of_validity};
  const ManifoldArc arc = real_slice(disk);
  CHECK(arc_distance(arc, alpha.location) < 1e-9);
  // slicing the slice again changes nothing
  ComplexDisk again{[&arc](Complex t) {
                      const RealPoint p = arc.eval(t.real());
                      return PlanePoint(Complex(p.x(), 0), Complex(p.y(), 0));
                    },
                    arc.t.back()};
  const ManifoldArc arc2 = real_slice(again);
  for (size_t i = 0; i < arc2.pts.size(); i += 40) CHECK(arc_distance(arc, arc2.pts[i]) < 1e-9);

  ComplexDisk skew{[&lp](Complex t) {
                     PlanePoint p = lp.eval(t);
                     return PlanePoint(p.x() + Complex(0, 0.3), p.y());
                   },
                   lp.radius_of_validity};
  CHECK_THROWS_AS(real_slice(skew), EmptySlice);
}

TEST_CASE("transversal crossing of two straight arcs") {
  auto horizontal = arc_from_function([](double t) { return RealPoint(t, 0.0); }, -1, 1, 200);
  auto vertical = arc_from_function([](double t) { return RealPoint(0.0, t); }, -1, 1, 200);
  const auto recs = intersect_arcs(horizontal, vertical, 1e-7);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].multiplicity == 1);
  CHECK(!recs[0].tangency_flag);
  CHECK(recs[0].location.norm() < 1e-9);
}

TEST_CASE("parabola against a line: the closed-form family") {
  auto line = arc_from_function([](double t) { return RealPoint(t, 0.0); }, -1, 1, 400);
  const double tol = 1e-7;

  SUBCASE("two simple roots for eps > tol^2") {
    const double eps = 1e-4;
    auto par = arc_from_function([eps](double t) { return RealPoint(t, t * t - eps); }, -1, 1, 400);
    const auto recs = intersect_arcs(par, line, tol);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
      CHECK(r.multiplicity == 1);
      CHECK(std::abs(std::abs(r.location.x()) - std::sqrt(eps)) < 1e-9);
    }
  }
  SUBCASE("exact tangency gives one double point") {
    auto par = arc_from_function([](double t) { return RealPoint(t, t * t); }, -1, 1, 400);
    const auto recs = intersect_arcs(par, line, tol);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].multiplicity == 2);
    CHECK(recs[0].tangency_flag);
    CHECK(recs[0].tangency_residual < 1e-10);
    CHECK(std::abs(recs[0].location.x()) < 1e-5);
  }
  SUBCASE("no intersection for eps < 0") {
    const double eps = -1e-4;
    auto par = arc_from_function([eps](double t) { return RealPoint(t, t * t - eps); }, -1, 1, 400);
    const auto recs = intersect_arcs(par, line, tol);
    CHECK(recs.empty());
  }
  SUBCASE("near-tangency below tol^2 reports multiplicity 2 with the gap residual") {
    const double eps = 1e-15;  // below tol^2 = 1e-14
    auto par = arc_from_function([eps](double t) { return RealPoint(t, t * t - eps); }, -1, 1, 400);
    const auto recs = intersect_arcs(par, line, tol);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].multiplicity == 2);
    CHECK(recs[0].tangency_residual == doctest::Approx(eps).epsilon(0.2));
  }
}

TEST_CASE("mod-2 parity of crossings through a rectangle") {
  // an arc crossing a vertical arc transversally k times has count parity k mod 2
  auto wiggly = arc_from_function(
      [](double t) { return RealPoint(t, 0.4 * std::sin(8.0 * t)); }, -1, 1, 3000);
  auto vert = arc_from_function([](double t) { return RealPoint(0.1, t); }, -1, 1, 400);
  const auto recs = intersect_arcs(wiggly, vert, 1e-7);
  CHECK(recs.size() == 1);  // one transversal crossing of the vertical line
  auto horiz = arc_from_function([](double t) { return RealPoint(t, 0.1); }, -1, 1, 400);
  const auto recs2 = intersect_arcs(wiggly, horiz, 1e-7);
  CHECK(recs2.size() % 2 == 1);  // ends on opposite sides of y = 0.1
  CHECK(recs2.size() == 5);
}

TEST_CASE("clip and sub-arc bookkeeping") {
  auto arc = arc_from_function([](double t) { return RealPoint(t, std::sin(t)); }, 0, 3.0 * M_PI, 1000);
  auto pieces = clip_arc(arc, [](const RealPoint& p) { return p.y() > 0.0; });
  REQUIRE(pieces.size() == 2);
  for (auto& pc : pieces) {
    CHECK(std::abs(pc.pts.front().y()) < 1e-9);
    CHECK(std::abs(pc.pts.back().y()) < 1e-9);
  }
  const ManifoldArc sub = sub_arc(arc, 1.0, 2.0);
  CHECK(sub.t.front() >= 1.0);
  CHECK(sub.t.back() <= 2.0);
}
