#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "henon/core.hpp"

using namespace henon;

namespace {

// independent oracle: fixed-point x-coordinates from the quadratic formula
// x^2 + (1+delta)x - c = 0
std::pair<double, double> fixed_x_oracle(double c, double delta) {
  const double s = 1.0 + delta;
  const double r = std::sqrt(s * s + 4.0 * c);
  return {0.5 * (-s - r), 0.5 * (-s + r)};
}

}  // namespace

TEST_CASE("map evaluation at the origin") {
  Params prm(6.0, 0.8);
  const PlanePoint q = apply_map(prm, PlanePoint(Complex(0, 0), Complex(0, 0)));
  CHECK(q.x().real() == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(q.y().real() == doctest::Approx(0.0));
}

TEST_CASE("fixed points satisfy the quadratic and are genuinely fixed") {
  Params prm(6.0, 0.8);
  const auto [xa, xb] = fixed_x_oracle(6.0, 0.8);
  CHECK(xa == doctest::Approx(-3.5096).epsilon(1e-4));
  CHECK(xb == doctest::Approx(1.7096).epsilon(1e-4));
  const auto [alpha, beta] = fixed_points(prm);
  CHECK(alpha.location.x() == doctest::Approx(xa).epsilon(1e-14));
  CHECK(beta.location.x() == doctest::Approx(xb).epsilon(1e-14));
  for (const auto& sd : {alpha, beta}) {
    const RealPoint img = apply_map(prm, sd.location);
    CHECK((img - sd.location).norm() < 1e-12);
    // eigenvalue product equals the Jacobian determinant
    CHECK(sd.lambda_s * sd.lambda_u == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(std::abs(sd.lambda_u) > 1.0);
    CHECK(std::abs(sd.lambda_s) < 1.0);
    // Jacobian times eigenvector = eigenvalue times eigenvector
    const Eigen::Matrix2d J = jacobian(prm, sd.location);
    CHECK((J * sd.eigvec_u - sd.lambda_u * sd.eigvec_u).norm() < 1e-10);
    CHECK((J * sd.eigvec_s - sd.lambda_s * sd.eigvec_s).norm() < 1e-10);
    CHECK(sd.eigvec_u.norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("degenerate parameters are rejected") {
  CHECK_THROWS_AS(Params(6.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Params(6.0, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(fixed_points(Params(-9.0, 0.8)), ComplexFixedPoints);
}

TEST_CASE("inverse round-trip on random points") {
  Params prm(6.0, 0.8);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const RealPoint p(u(rng), u(rng));
    worst = std::max(worst, (apply_inverse(prm, apply_map(prm, p)) - p).norm());
    worst = std::max(worst, (apply_map(prm, apply_inverse(prm, p)) - p).norm());
  }
  CHECK(worst < 1e-12);
  // complex points as well
  for (int i = 0; i < 20000; ++i) {
    const PlanePoint p(Complex(u(rng), u(rng) * 0.3), Complex(u(rng), u(rng) * 0.3));
    CHECK((apply_inverse(prm, apply_map(prm, p)) - p).norm() < 1e-11);
  }
}

TEST_CASE("determinant of the Jacobian is delta") {
  Params prm(6.0, 0.8);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const RealPoint p(u(rng), u(rng));
    CHECK(std::abs(jacobian(prm, p).determinant() - 0.8) < 1e-14);
  }
}

TEST_CASE("escape radius closed form and escape certificate") {
  Params prm(6.0, 0.8);
  const double R = escape_radius(prm);
  CHECK(R == doctest::Approx(1.1 * 0.5 * (1.8 + std::sqrt(27.24))).epsilon(1e-14));
  CHECK(R == doctest::Approx(3.861).epsilon(1e-3));
  CHECK(escape_radius(Params(0.0, 1e-12)) == doctest::Approx(1.1).epsilon(1e-9));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mag(1.0, 4.0), sgn(-1.0, 1.0);
  int tested = 0;
  for (int i = 0; i < 100000; ++i) {
    const double x = (sgn(rng) > 0 ? 1 : -1) * R * mag(rng);
    const double y = sgn(rng) * std::abs(x);
    if (!(std::abs(x) > R && std::abs(x) >= std::abs(y))) continue;
    ++tested;
    const RealPoint q = apply_map(prm, RealPoint(x, y));
    CHECK(std::abs(q.x()) > std::abs(x));
    CHECK(std::abs(q.x()) >= std::abs(q.y()));
  }
  CHECK(tested > 50000);
}

TEST_CASE("green function: asymptotics, zero on bounded orbits, functional equation") {
  Params prm(6.0, 0.8);
  const double g4 = green_plus(prm, PlanePoint(Complex(1e4, 0), Complex(0, 0)));
  CHECK(std::abs(g4 - std::log(1e4)) / std::log(1e4) < 1e-3);

  const auto [alpha, beta] = fixed_points(prm);
  const PlanePoint pa(Complex(alpha.location.x(), 0), Complex(alpha.location.y(), 0));
  // the fixed-point defect (~1 ulp) is amplified by lambda_u per step, so the
  // numerical orbit escapes eventually; the value reads as the roundoff floor
  CHECK(green_plus(prm, pa) < 1e-8);
  CHECK(green_minus(prm, pa) < 1e-4);
  CHECK(green_plus(prm, pa) >= 0.0);
  // a short depth keeps the orbit numerically bounded and yields exactly 0
  CHECK(green_plus(prm, pa, 15) == 0.0);
  CHECK(green_minus(prm, pa, 12) == 0.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const PlanePoint p(Complex(u(rng), 0), Complex(u(rng), 0));
    const double g = green_plus(prm, p);
    if (g <= 0.0) continue;
    ++checked;
    CHECK(std::abs(green_plus(prm, apply_map(prm, p)) - 2.0 * g) < 1e-8);
  }
  CHECK(checked > 100);
}

TEST_CASE("green minus mirrors under the inverse") {
  Params prm(6.0, 0.8);
  const double g = green_minus(prm, PlanePoint(Complex(0, 0), Complex(1e4, 0)));
  CHECK(std::abs(g - std::log(1e4 / 0.8)) / std::log(1e4 / 0.8) < 1e-3);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const PlanePoint p(Complex(u(rng), 0), Complex(u(rng), 0));
    const double gm = green_minus(prm, p);
    if (gm <= 0.0) continue;
    ++checked;
    CHECK(std::abs(green_minus(prm, apply_inverse(prm, p)) - 2.0 * gm) < 1e-8);
  }
  CHECK(checked > 100);
}

TEST_CASE("boettcher coordinate: normalization, functional equation, log matches green") {
  Params prm(6.0, 0.8);
  const Complex phi = bottcher_plus(prm, PlanePoint(Complex(-1e6, 0), Complex(0, 0)));
  CHECK(std::abs(phi - Complex(1e6, 0)) / 1e6 < 1e-4);
  CHECK(phi.real() > 0.0);
  CHECK(std::abs(phi.imag()) / std::abs(phi) < 1e-6);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mag(5.0, 40.0), ph(2.0, 4.3);
  int n = 0;
  const double R = escape_radius(prm);
  while (n < 100) {
    const Complex x = std::polar(mag(rng), ph(rng));  // Re x < 0 region
    const Complex y(0.3 * mag(rng) - 2.0, 0.0);
    if (!(std::abs(x) > std::max(R, std::abs(y)))) continue;
    const PlanePoint p(x, y);
    const Complex f1 = bottcher_plus(prm, p);
    const PlanePoint q = apply_map(prm, p);
    if (std::abs(q.x()) > std::max(R, std::abs(q.y()))) {
      const Complex f2 = bottcher_plus(prm, q);
      CHECK(std::abs(std::abs(f2) - std::abs(f1) * std::abs(f1)) / std::abs(f2) < 1e-6);
    }
    CHECK(std::abs(std::log(std::abs(f1)) - green_plus(prm, p)) < 1e-8);
    ++n;
  }
  CHECK_THROWS_AS(bottcher_plus(prm, PlanePoint(Complex(1.0, 0), Complex(0, 0))), BranchLoss);
}
