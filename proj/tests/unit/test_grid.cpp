#include <gtest/gtest.h>

#include <sstream>

#include "ktrunc/catalog.hpp"
#include "ktrunc/grid.hpp"

using namespace ktrunc;

TEST(Domain, BallGeometry) {
  auto d = Domain::ball({0.5, 0.0}, 2.0);
  std::vector<double> x{0.5, 1.0}, dir{0.0, 1.0}, far{3.0, 0.0};
  EXPECT_TRUE(d.contains(x));
  EXPECT_FALSE(d.contains(far));
  EXPECT_NEAR(d.distance_to_boundary(x), 1.0, 1e-15);
  EXPECT_NEAR(d.exit_distance(x, dir), 1.0, 1e-15);
  EXPECT_NEAR(d.diameter(), 4.0, 1e-15);
}

TEST(Domain, IntersectionOfBalls) {
  auto d = Domain::balls({{{-0.5, 0.0}, 1.0}, {{0.5, 0.0}, 1.0}});
  std::vector<double> o{0, 0}, x{0.6, 0}, dir{1, 0};
  EXPECT_TRUE(d.contains(o));
  EXPECT_FALSE(d.contains(x));
  EXPECT_NEAR(d.distance_to_boundary(o), 0.5, 1e-15);
  EXPECT_NEAR(d.exit_distance(o, dir), 0.5, 1e-15);
  EXPECT_LE(d.diameter(), 2.0);
  EXPECT_THROW(Domain::balls({{{-2.0, 0.0}, 1.0}, {{2.0, 0.0}, 1.0}}), std::invalid_argument);
}

TEST(Domain, JsonRoundTrip) {
  for (auto d : {Domain::ball({0, 0, 1}, 1.5), Domain::box({0, 0}, {1, 2}),
                 Domain::balls({{{0.0, 0.0}, 1.0}, {{0.3, 0.0}, 1.0}})}) {
    auto e = Domain::from_json(d.to_json());
    EXPECT_EQ(e.to_json(), d.to_json());
  }
  EXPECT_THROW(Domain::from_json(json::parse(R"({"type":"torus"})")), std::invalid_argument);
}

TEST(Lattice, CenterIsNodeAndCoversDomain) {
  auto d = Domain::ball({0.1, -0.2}, 1.0);
  auto L = Lattice::covering(d, 0.1);
  bool found = false;
  std::vector<double> x(2);
  for (std::size_t i = 0; i < L.size(); ++i) {
    L.position(i, x);
    if (std::abs(x[0] - 0.1) < 1e-12 && std::abs(x[1] + 0.2) < 1e-12) found = true;
  }
  EXPECT_TRUE(found);
  EXPECT_LE(L.origin[0], d.lo()[0] - 0.1 + 1e-12);
  std::array<int, 2> m{};
  for (std::size_t i = 0; i < L.size(); i += 37) {
    L.index_to_multi(i, m);
    EXPECT_EQ(L.multi_to_index(m), i);
  }
}

TEST(GridField, InterpolatesLinearFunctionsExactly) {
  auto d = Domain::box({-1, -1}, {1, 1});
  auto L = Lattice::covering(d, 0.125);
  std::vector<double> v(L.size());
  std::vector<double> x(2);
  for (std::size_t i = 0; i < L.size(); ++i) {
    L.position(i, x);
    v[i] = 1 + 2 * x[0] - 3 * x[1];
  }
  GridField g(d, L, v);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> y{u(rng), u(rng)};
    EXPECT_NEAR(g.value(y), 1 + 2 * y[0] - 3 * y[1], 1e-13);
  }
  std::vector<double> out{1.5, 0};
  EXPECT_EQ(g.value(out), 0.0);
}

TEST(GridField, CsvRoundTripIsBitExact) {
  auto d = Domain::ball({0, 0}, 1.0);
  auto g = grid_sample(*exp_decay_field(2, 1.3), d, 1.0 / 12);
  std::stringstream ss;
  write_grid_csv(g, ss);
  auto back = read_grid_csv(ss);
  ASSERT_EQ(back.values().size(), g.values().size());
  for (std::size_t i = 0; i < g.values().size(); ++i) EXPECT_EQ(back.values()[i], g.values()[i]);
  EXPECT_EQ(back.lattice().h, g.lattice().h);
  EXPECT_EQ(back.domain().to_json(), d.to_json());
}

TEST(GridField, CorruptCsvIsRejected) {
  auto g = grid_sample(ConstantField(2, 1.0), Domain::ball({0, 0}, 1.0), 0.25);
  std::stringstream ss;
  write_grid_csv(g, ss);
  std::string text = ss.str();
  {
    std::stringstream bad(text.substr(0, text.size() - 10));
    EXPECT_THROW(read_grid_csv(bad), std::invalid_argument);
  }
  {
    std::string t = text;
    t.replace(t.find("# h="), 4, "# q=");
    std::stringstream bad(t);
    EXPECT_THROW(read_grid_csv(bad), std::invalid_argument);
  }
  {
    std::stringstream bad("hello\n");
    EXPECT_THROW(read_grid_csv(bad), std::invalid_argument);
  }
}

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3, -2.5e-300, 6.02214076e23}) EXPECT_EQ(parse_double(fmt(v)), v);
  EXPECT_THROW(parse_double("1.0x"), std::invalid_argument);
}
