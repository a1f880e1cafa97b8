#pragma once

// Fields described by JSON: a bare number is a constant, otherwise an object
// {"type": tag, ...parameters}.

#include <optional>

#include "ktrunc/fixtures.hpp"

namespace ktrunc {

inline FieldPtr barrier_field(int dim, double R, double s, std::vector<double> center = {}) {
  return std::make_shared<BarrierField>(dim, R, s, std::move(center));
}

// Radial profiles g(|x|^2) by name.
inline FieldPtr radial_field(int dim, const std::string& tag, const json& params) {
  auto num = [&](const char* key, double dflt) { return params.contains(key) ? params.at(key).get<double>() : dflt; };
  std::vector<double> center = params.contains("center") ? params.at("center").get<std::vector<double>>() : std::vector<double>{};
  if (tag == "exp_decay" || tag == "gaussian") return exp_decay_field(dim, num("alpha", 1.0), center);
  if (tag == "liouville_power") {
    if (!center.empty()) throw std::invalid_argument("liouville_power is centered at the origin");
    return liouville_power_field(dim, num("alpha", 1.0), num("a", 1.0), params.at("p").get<double>(), params.at("s").get<double>());
  }
  if (tag == "compact_power") {
    if (!center.empty()) throw std::invalid_argument("compact_power is centered at the origin");
    return compact_power_field(dim, num("alpha", 1.0), num("R", 1.0), params.at("p").get<double>(), params.at("s").get<double>());
  }
  throw std::invalid_argument("unknown radial profile '" + tag + "'");
}

inline FieldPtr field_from_json(const json& j, int dim, const std::optional<Partition>& partition = std::nullopt) {
  check_dim(dim);
  if (j.is_number()) return std::make_shared<ConstantField>(dim, j.get<double>());
  if (!j.is_object() || !j.contains("type")) throw std::invalid_argument("field must be a number or an object with a type");
  const std::string t = j.at("type").get<std::string>();
  auto num = [&](const char* key, double dflt) { return j.contains(key) ? j.at(key).get<double>() : dflt; };
  auto center = [&] {
    auto c = j.contains("center") ? j.at("center").get<std::vector<double>>() : std::vector<double>{};
    if (!c.empty() && static_cast<int>(c.size()) != dim) throw std::invalid_argument("field center has the wrong dimension");
    return c;
  };
  auto part = [&] {
    if (j.contains("partition")) return make_partition(dim, j.at("partition").get<std::vector<int>>());
    if (!partition) throw std::invalid_argument("field '" + t + "' needs a partition");
    return *partition;
  };
  if (t == "constant") return std::make_shared<ConstantField>(dim, j.at("value").get<double>());
  if (t == "barrier") return barrier_field(dim, num("R", 1.0), j.at("s").get<double>(), center());
  if (t == "bump") return std::make_shared<BumpField>(dim, num("R", 1.0), center());
  if (t == "exp_decay" || t == "gaussian" || t == "liouville_power" || t == "compact_power") {
    center();
    return radial_field(dim, t, j);
  }
  if (t == "anisotropic_gaussian") {
    auto rows = j.at("A").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != dim) throw std::invalid_argument("anisotropic_gaussian matrix has the wrong size");
    Eigen::MatrixXd A(dim, dim);
    for (int r = 0; r < dim; ++r) {
      if (static_cast<int>(rows[r].size()) != dim) throw std::invalid_argument("anisotropic_gaussian matrix has the wrong size");
      for (int c = 0; c < dim; ++c) A(r, c) = rows[r][c];
    }
    return std::make_shared<AnisotropicGaussian>(A, center());
  }
  if (t == "smp_profile") return smp_counterexample(part(), SmpKind::profile);
  if (t == "smp_indicator") return smp_counterexample(part(), SmpKind::indicator);
  if (t == "discontinuity") return discontinuity_example(part());
  if (t == "nonattain") return nonattain_example(part());
  if (t == "combination") {
    std::vector<FieldPtr> terms;
    for (auto& e : j.at("terms")) terms.push_back(field_from_json(e, dim, partition));
    return std::make_shared<LinearCombination>(terms, j.at("coef").get<std::vector<double>>());
  }
  throw std::invalid_argument("unknown field type '" + t + "'");
}

}  // namespace ktrunc
