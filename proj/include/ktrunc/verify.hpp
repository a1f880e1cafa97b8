#pragma once

// Identity suites run by `ktrunc verify`.  Every row records the measured
// value, the reference, the error, the tolerance it is judged against and
// the verdict.

#include <map>
#include <optional>

#include "ktrunc/catalog.hpp"
#include "ktrunc/grid.hpp"
#include "ktrunc/liouville.hpp"

namespace ktrunc {

struct VerifyConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::string> suites;       // empty: all applicable
  std::optional<Partition> partition;    // restricts every suite to this partition
  QuadratureSpec quad;
  OptimizerOptions opt;
};

struct SuiteReport {
  explicit SuiteReport(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  bool passed = true;
  std::vector<json> rows;

  void add(json row, double err, double tol) {
    const bool ok = std::isfinite(err) && err <= tol;
    row["error"] = err;
    row["tolerance"] = tol;
    row["pass"] = ok;
    passed = passed && ok;
    rows.push_back(std::move(row));
  }
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"barrier", "duality", "fixtures", "limit", "liouville", "representation"};
  return names;
}

namespace detail {

inline std::vector<double> random_in_ball(std::mt19937_64& rng, int N, double radius) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  std::vector<double> x(N);
  for (auto& v : x) v = g(rng);
  const double r = radius * std::pow(u(rng), 1.0 / N) / norm2(x);
  for (auto& v : x) v *= r;
  return x;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline SuiteReport suite_barrier(const VerifyConfig& c) {
  SuiteReport r{"barrier"};
  std::vector<std::pair<int, int>> cases;  // (N, k)
  if (c.partition) {
    for (int b : c.partition->blocks) cases.emplace_back(c.partition->N, b);
  } else {
    for (int k = 1; k <= 3; ++k) cases.emplace_back(std::max(3, k + 1), k);
  }
  std::mt19937_64 rng(c.seed);
  for (auto [N, k] : cases)
    for (double s : {0.25, 0.5, 0.75}) {
      BarrierField v(N, 1.0, s);
      const double ref = -normalizing_constant(k, s) * beta_1ms_s(s) * sphere_measure(k) / 2;
      double worst = 0;
      for (int i = 0; i < 20; ++i) {
        auto x = random_in_ball(rng, N, 0.9);
        BlockFrame F = sample_frame(Partition{N, {k}}, rng);
        worst = std::max(worst, rel_err(subspace_integral(v, x, F.M, s, c.quad).value, ref));
      }
      r.add({{"case", "N=" + std::to_string(N) + " k=" + std::to_string(k) + " s=" + fmt(s)}, {"reference", ref}}, worst,
            1e-4);
    }
  return r;
}

inline std::vector<Partition> representation_partitions(const VerifyConfig& c) {
  if (c.partition) return c.partition->k() < c.partition->N ? std::vector<Partition>{*c.partition} : std::vector<Partition>{};
  return {Partition{3, {1}}, Partition{3, {1, 1}}, Partition{4, {1}}, Partition{4, {1, 1}}, Partition{4, {1, 2}}};
}

inline SuiteReport suite_representation(const VerifyConfig& c) {
  SuiteReport r{"representation"};
  std::mt19937_64 rng(c.seed + 1);
  for (const auto& p : representation_partitions(c))
    for (double s : {0.3, 0.7})
      for (int prof = 0; prof < 2; ++prof) {
        FieldPtr u = prof == 0 ? FieldPtr(exp_decay_field(p.N, 1.0)) : FieldPtr(liouville_power_field(p.N, 1.0, 1.0, 2.0, s));
        OperatorSpec spec{p, Sign::minus, s, c.quad, c.opt};
        double worst = 0;
        for (int i = 0; i < 10; ++i) {
          auto x = random_in_ball(rng, p.N, 1.5);
          if (norm2(x) < 0.05) continue;
          const double K = eval_K(*u, x, spec).value;
          const double R = representation_K_minus_radial(*u, x, p, s, c.quad).value;
          worst = std::max(worst, rel_err(K, R));
        }
        r.add({{"case", u->params().dump() + " N=" + std::to_string(p.N) + " partition=" + json(p.blocks).dump() +
                            " s=" + fmt(s)}},
              worst, 1e-3);
      }
  return r;
}

// Ten fields of mixed type in dimension N.
inline std::vector<FieldPtr> duality_catalog(int N) {
  std::vector<double> c1(N, 0.0), c2(N, 0.0);
  c1[0] = 0.2;
  c2[N - 1] = -0.3;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(N, N);
  A(0, 0) = 2.0;
  A(0, 1) = A(1, 0) = 0.4;
  std::vector<FieldPtr> out{
      barrier_field(N, 1.0, 0.5),
      barrier_field(N, 1.5, 0.3, c1),
      exp_decay_field(N, 1.0),
      exp_decay_field(N, 3.0, c2),
      liouville_power_field(N, 1.0, 1.0, 2.0, 0.5),
      liouville_power_field(N, 1.0, 0.7, 3.0, 0.5),
      compact_power_field(N, 1.0, 1.2, 0.5, 0.5),
      std::make_shared<LastCoordinateProfile>(N),
      std::make_shared<AnisotropicGaussian>(A, c1),
  };
  out.push_back(std::make_shared<LinearCombination>(std::vector<FieldPtr>{out[2], out[8]}, std::vector<double>{0.7, -0.4}));
  return out;
}

inline SuiteReport suite_duality(const VerifyConfig& c) {
  SuiteReport r{"duality"};
  std::vector<Partition> parts = c.partition ? std::vector<Partition>{*c.partition}
                                             : std::vector<Partition>{{2, {1}}, {3, {1, 1}}, {3, {2}}, {3, {1, 2}}, {3, {1, 1, 1}}};
  for (const auto& p : parts) {
    auto cat = duality_catalog(p.N);
    std::vector<double> x(p.N, 0.0);
    x[0] = 0.3;
    x[1] = -0.2;
    if (p.N > 2) x[2] = 0.1;
    for (auto& u : cat) {
      OperatorSpec plus{p, Sign::plus, 0.5, c.quad, c.opt}, minus = plus;
      minus.sign = Sign::minus;
      auto neg = scaled(u, -1.0);
      const double a = eval_K(*neg, x, plus).value;
      const double b = eval_K(*u, x, minus).value;
      const double scale = std::max(1.0, std::abs(b));
      r.add({{"case", u->tag() + " " + u->params().dump() + " partition=" + json(p.blocks).dump()},
             {"measured", a},
             {"reference", -b}},
            std::abs(a + b) / scale, 2 * c.opt.tolerance);
    }
  }
  return r;
}

inline SuiteReport suite_fixtures(const VerifyConfig& c) {
  SuiteReport r{"fixtures"};
  const double s = 0.5;
  OperatorSpec spec{Partition{3, {1, 1}}, Sign::plus, s, c.quad, c.opt};
  {
    auto u = discontinuity_example(spec.partition);
    std::vector<double> o{0, 0, 0}, e{0, 0, 0.1};
    r.add({{"case", "discontinuity K+(0)"}, {"reference", 0.0}}, std::abs(eval_K(*u, o, spec).value), 0.0);
    const double bound = -0.9 / (4 * s) * normalizing_constant(1, s);
    const double v = eval_K(*u, e, spec).value;
    r.add({{"case", "discontinuity K+(e3/10) <= bound"}, {"measured", v}, {"reference", bound}}, std::max(0.0, v - bound),
          0.0);
  }
  spec.norm = Normalization::unit;
  // Single block of size k: the supremum is omega_k / (4s); two unit blocks
  // add the exponential tail.
  for (auto blocks : {std::vector<int>{1}, std::vector<int>{2}, std::vector<int>{1, 1}}) {
    Partition p{3, blocks};
    spec.partition = p;
    auto u = nonattain_example(p);
    std::vector<double> o{0, 0, 0};
    const double ref = blocks.size() == 1 ? sphere_measure(blocks[0]) / (4 * s) : 1 / (2 * s) + exp_tail(1.0, s);
    const double v = eval_K(*u, o, spec).value;
    r.add({{"case", "nonattain partition=" + json(blocks).dump()}, {"measured", v}, {"reference", ref}}, std::abs(v - ref),
          1e-3);
  }
  return r;
}

inline SuiteReport suite_limit(const VerifyConfig& c) {
  SuiteReport r{"limit"};
  Partition p = c.partition ? *c.partition : Partition{3, {1, 1}};
  auto u = exp_decay_field(p.N, 1.0);
  const std::vector<double> s_list{0.6, 0.8, 0.9, 0.95, 0.99};
  for (double x0 : {0.0, 0.3}) {
    std::vector<double> x(p.N, 0.0);
    x[0] = x0;
    OperatorSpec spec{p, Sign::plus, 0.5, c.quad, c.opt};
    auto rows = s_to_1_limit_study(*u, x, spec, s_list);
    double growth = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) growth = std::max(growth, rows[i].abs_err - rows[i - 1].abs_err);
    json table = json::array();
    for (auto& row : rows) table.push_back({{"s", row.s}, {"K", row.K}, {"P", row.P}, {"abs_err", row.abs_err}});
    r.add({{"case", "monotone decrease at x=" + json(x).dump()}, {"table", table}}, std::max(0.0, growth), 0.0);
    r.add({{"case", "relative gap at s=0.99, x=" + json(x).dump()}, {"measured", rows.back().K}, {"reference", rows.back().P}},
          rows.back().abs_err / std::abs(rows.back().P), 0.05);
  }
  return r;
}

inline SuiteReport suite_liouville(const VerifyConfig& c) {
  SuiteReport r{"liouville"};
  for (double p : {2.0, 1.0, 0.5}) {
    LiouvilleParams L;
    L.p = p;
    L.seed = c.seed;
    L.quad = c.quad;
    L.opt = c.opt;
    if (c.partition) {
      L.N = c.partition->N;
      L.blocks = c.partition->blocks;
    }
    auto res = liouville_study(L);
    r.add({{"case", "p=" + fmt(p)}, {"constant", res.constant}}, res.max_relative, res.tolerance);
  }
  return r;
}

inline bool suite_applies(const std::string& name, const VerifyConfig& c) {
  if (!c.partition) return true;
  const Partition& p = *c.partition;
  if (name == "barrier") return true;
  if (name == "representation" || name == "liouville") return p.k() < p.N;
  return false;
}

}  // namespace detail

inline std::vector<SuiteReport> run_verify(const VerifyConfig& c) {
  std::vector<std::string> names = c.suites.empty() ? suite_names() : c.suites;
  for (auto& n : names)
    if (std::find(suite_names().begin(), suite_names().end(), n) == suite_names().end())
      throw std::invalid_argument("unknown suite '" + n + "'");
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<std::string> run;
  for (auto& n : names)
    if (detail::suite_applies(n, c)) run.push_back(n);
  std::vector<SuiteReport> out(run.size());
  parallel_for(run.size(), c.jobs, [&](std::size_t i) {
    const auto& n = run[i];
    if (n == "barrier") out[i] = detail::suite_barrier(c);
    else if (n == "duality") out[i] = detail::suite_duality(c);
    else if (n == "fixtures") out[i] = detail::suite_fixtures(c);
    else if (n == "limit") out[i] = detail::suite_limit(c);
    else if (n == "liouville") out[i] = detail::suite_liouville(c);
    else out[i] = detail::suite_representation(c);
  });
  return out;
}

}  // namespace ktrunc
