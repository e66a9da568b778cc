#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bathy/error.hpp"
#include "bathy/grid.hpp"

using namespace bathy;

TEST_CASE("flatten is row-major") {
  const GridSpec g(51, 75, 1.0, 1.0);
  CHECK(g.flatten({0, 0}) == 0);
  CHECK(g.flatten({1, 0}) == 75);
  CHECK(g.flatten({2, 3}) == 153);
  CHECK(g.size() == 3825);
}

TEST_CASE("flatten and unflatten are inverse over a 3x4 grid") {
  const GridSpec g(3, 4, 2.0, 5.0);
  std::vector<bool> seen(12, false);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 4; ++j) {
      const Index k = g.flatten({i, j});
      REQUIRE(k >= 0);
      REQUIRE(k < 12);
      CHECK_FALSE(seen[k]);
      seen[k] = true;
      CHECK(g.unflatten(k) == GridCoord{i, j});
    }
  }
  for (Index k = 0; k < 12; ++k) CHECK(g.flatten(g.unflatten(k)) == k);
}

TEST_CASE("out of range coordinates throw") {
  const GridSpec g(3, 4, 1.0, 1.0);
  CHECK_THROWS_AS(g.flatten({3, 0}), IndexError);
  CHECK_THROWS_AS(g.flatten({0, 4}), IndexError);
  CHECK_THROWS_AS(g.flatten({-1, 0}), IndexError);
  CHECK_THROWS_AS(g.unflatten(12), IndexError);
  CHECK_THROWS_AS(normalized_distance({0, 0}, {5, 0}, g), IndexError);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(GridSpec(1, 4, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(GridSpec(4, 1, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(GridSpec(4, 4, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(GridSpec(4, 4, 1.0, -2.0), ValidationError);
}

TEST_CASE("physical coordinates put the domain corners on the grid") {
  const GridSpec g(51, 75, 500.0, 750.0);
  CHECK(g.cross_shore(0) == 0.0);
  CHECK(g.cross_shore(50) == doctest::Approx(500.0));
  CHECK(g.along_shore(74) == doctest::Approx(750.0));
  CHECK(g.along_shore(37) == doctest::Approx(375.0));
}

TEST_CASE("normalized distance examples") {
  const GridSpec g(51, 75, 500.0, 750.0);
  CHECK(normalized_distance({3, 4}, {3, 4}, g) == 0.0);
  CHECK(normalized_distance({0, 0}, {50, 74}, g) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(normalized_distance({0, 0}, {0, 74}, g) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(normalized_distance({0, 0}, {50, 0}, g) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("normalized distance is a metric on random triples") {
  const GridSpec g(11, 17, 3.0, 8.0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<Index> ri(0, 10), rj(0, 16);
  for (int t = 0; t < 500; ++t) {
    const GridCoord a{ri(rng), rj(rng)}, b{ri(rng), rj(rng)}, c{ri(rng), rj(rng)};
    const double ab = normalized_distance(a, b, g);
    CHECK(ab == normalized_distance(b, a, g));
    CHECK(ab >= 0.0);
    CHECK((ab == 0.0) == (a == b));
    CHECK(normalized_distance(a, c, g) <= ab + normalized_distance(b, c, g) + 1e-15);
  }
}

TEST_CASE("field validates its values") {
  const GridSpec g(2, 3, 1.0, 1.0);
  CHECK_THROWS_AS(Field(g, Eigen::VectorXd::Zero(5)), ValidationError);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(6);
  v[2] = std::nan("");
  CHECK_THROWS_AS(Field(g, v), ValidationError);
  v[2] = INFINITY;
  CHECK_THROWS_AS(Field(g, v), ValidationError);
}

TEST_CASE("field text format round-trips exactly") {
  const GridSpec g(3, 4, 12.5, 40.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(12);
  for (auto& x : v) x = n01(rng) * 1e3;
  const Field f(g, v);
  std::stringstream ss;
  write_field(ss, f);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "3 4 12.5 40");
  ss.seekg(0);
  const Field back = read_field(ss);
  CHECK(back.grid() == g);
  CHECK(back.values() == v);
}

TEST_CASE("malformed field files are rejected") {
  std::stringstream short_body("2 2 1 1\n1 2\n3\n");
  CHECK_THROWS(read_field(short_body));
  std::stringstream bad_header("2 x 1 1\n");
  CHECK_THROWS(read_field(bad_header));
}
