#pragma once

#include <Eigen/Dense>
#include <memory>
#include <nlohmann/json.hpp>
#include <vector>

#include "ktrunc/core.hpp"
#include "ktrunc/frames.hpp"

namespace ktrunc {

using json = nlohmann::json;

// Radial fields u(x) = g(|x - center|^2).
struct RadialProfile {
  virtual ~RadialProfile() = default;
  virtual double g(double t) const = 0;
  virtual double dg(double t) const = 0;
  virtual double d2g(double t) const = 0;
  virtual bool convex() const = 0;
  // Smallest t > 0 where g is not smooth (inf if none).
  virtual double kink() const { return kInf; }
};

class ScalarField {
 public:
  explicit ScalarField(int dim) : dim_(dim) { check_dim(dim); }
  virtual ~ScalarField() = default;

  int dim() const { return dim_; }
  virtual std::string tag() const = 0;
  virtual json params() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual double bound() const = 0;

  // Outside the ball of this radius around support_center() the field
  // vanishes (up to ~1e-17 of its bound for rapidly decaying fields).
  virtual double support_radius() const { return kInf; }
  virtual std::vector<double> support_center() const { return std::vector<double>(dim_, 0.0); }

  virtual bool smooth_at(std::span<const double>) const { return true; }
  virtual bool discontinuous() const { return false; }
  virtual double length_scale() const { return 1.0; }

  virtual bool has_gradient() const { return false; }
  virtual void gradient(std::span<const double>, std::span<double>) const {
    throw Error(tag() + ": no analytic gradient");
  }
  virtual bool has_hessian() const { return false; }
  // Row-major N x N.
  virtual void hessian(std::span<const double>, std::span<double>) const {
    throw Error(tag() + ": no analytic hessian");
  }

  // Appends every r > 0 at which r -> u(x + r d) fails to be smooth.
  virtual void ray_breaks(std::span<const double>, std::span<const double>, std::vector<double>&) const {}

  virtual const RadialProfile* radial() const { return nullptr; }
  // True when J_V u(x) is independent of V at this x.
  virtual bool frame_invariant_at(std::span<const double>) const { return false; }

 private:
  int dim_;
};

using FieldPtr = std::shared_ptr<const ScalarField>;

inline double eval(const ScalarField& u, const Eigen::VectorXd& x) {
  return u.value(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

namespace detail {

inline void sphere_crossings(std::span<const double> x, std::span<const double> d,
                             std::span<const double> c, double R, std::vector<double>& out) {
  double b = 0, q = 0, dd = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double y = x[i] - c[i];
    b += d[i] * y;
    q += y * y;
    dd += d[i] * d[i];
  }
  b /= dd;
  const double disc = b * b - (q - R * R) / dd;
  if (disc <= 0) return;
  const double sq = std::sqrt(disc);
  // Stable roots of r^2 + 2 b r + (q - R^2)/dd = 0.
  const double r1 = (b > 0) ? -b - sq : -b + sq;
  const double r2 = (r1 != 0) ? ((q - R * R) / dd) / r1 : -2 * b;
  for (double r : {r1, r2})
    if (r > 0 && std::isfinite(r)) out.push_back(r);
}

inline double dist2(std::span<const double> x, std::span<const double> c) {
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - c[i]) * (x[i] - c[i]);
  return acc;
}

}  // namespace detail

// u(x) = g(|x-c|^2) with analytic derivatives.
class RadialField : public ScalarField {
 public:
  RadialField(int dim, std::shared_ptr<const RadialProfile> g, std::vector<double> center = {})
      : ScalarField(dim), g_(std::move(g)), c_(center.empty() ? std::vector<double>(dim, 0.0) : center) {
    if (static_cast<int>(c_.size()) != dim) throw std::invalid_argument("center has wrong dimension");
  }
  double value(std::span<const double> x) const override { return g_->g(detail::dist2(x, c_)); }
  std::vector<double> support_center() const override { return c_; }
  bool smooth_at(std::span<const double> x) const override {
    if (!std::isfinite(g_->kink())) return true;
    const double t = detail::dist2(x, c_);
    return std::abs(t - g_->kink()) > 1e-14 * std::max(1.0, g_->kink());
  }
  bool has_gradient() const override { return true; }
  void gradient(std::span<const double> x, std::span<double> out) const override {
    const double gp = g_->dg(detail::dist2(x, c_));
    for (int i = 0; i < dim(); ++i) out[i] = 2.0 * gp * (x[i] - c_[i]);
  }
  bool has_hessian() const override { return true; }
  void hessian(std::span<const double> x, std::span<double> H) const override {
    const double t = detail::dist2(x, c_);
    const double gp = g_->dg(t), gpp = g_->d2g(t);
    const int N = dim();
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        H[i * N + j] = 4.0 * gpp * (x[i] - c_[i]) * (x[j] - c_[j]) + (i == j ? 2.0 * gp : 0.0);
  }
  void ray_breaks(std::span<const double> x, std::span<const double> d, std::vector<double>& out) const override {
    if (std::isfinite(g_->kink())) detail::sphere_crossings(x, d, c_, std::sqrt(g_->kink()), out);
  }
  const RadialProfile* radial() const override { return g_.get(); }

 protected:
  std::shared_ptr<const RadialProfile> g_;
  std::vector<double> c_;
};

// (R^2 - t)_+^q
struct CompactPowerProfile : RadialProfile {
  double alpha, R, q;
  CompactPowerProfile(double alpha_, double R_, double q_) : alpha(alpha_), R(R_), q(q_) {
    if (!(R > 0 && q > 0)) throw std::invalid_argument("compact power needs R > 0 and exponent > 0");
  }
  double g(double t) const override { return t < R * R ? alpha * std::pow(R * R - t, q) : 0.0; }
  double dg(double t) const override { return t < R * R ? -alpha * q * std::pow(R * R - t, q - 1) : 0.0; }
  double d2g(double t) const override {
    return t < R * R ? alpha * q * (q - 1) * std::pow(R * R - t, q - 2) : 0.0;
  }
  // Convex on [0,R^2) when alpha*q*(q-1) >= 0.
  bool convex() const override { return alpha * (q - 1) >= 0 || alpha == 0; }
  double kink() const override { return R * R; }
};

// The barrier (R^2 - |x-c|^2)_+^s.  Its integral along any subspace through an
// interior point is the same constant.
class BarrierField final : public RadialField {
 public:
  BarrierField(int dim, double R, double s, std::vector<double> center = {})
      : RadialField(dim, std::make_shared<CompactPowerProfile>(1.0, R, s), std::move(center)), R_(R), s_(s) {
    if (!(R > 0)) throw std::invalid_argument("barrier radius must be positive");
    check_order(s);
  }
  std::string tag() const override { return "barrier"; }
  json params() const override { return {{"R", R_}, {"s", s_}, {"center", c_}}; }
  double bound() const override { return std::pow(R_, 2 * s_); }
  double support_radius() const override { return R_; }
  double length_scale() const override { return R_; }
  bool frame_invariant_at(std::span<const double> x) const override { return detail::dist2(x, c_) < R_ * R_; }

 private:
  double R_, s_;
};

struct ExpDecayProfile : RadialProfile {
  double alpha;
  explicit ExpDecayProfile(double a) : alpha(a) {
    if (!(a > 0)) throw std::invalid_argument("exp-decay rate must be positive");
  }
  double g(double t) const override { return std::exp(-alpha * t); }
  double dg(double t) const override { return -alpha * std::exp(-alpha * t); }
  double d2g(double t) const override { return alpha * alpha * std::exp(-alpha * t); }
  bool convex() const override { return true; }
};

// alpha (a^2 + t)^{-q}
struct LiouvillePowerProfile : RadialProfile {
  double alpha, a, q;
  LiouvillePowerProfile(double alpha_, double a_, double q_) : alpha(alpha_), a(a_), q(q_) {
    if (!(a > 0 && q > 0)) throw std::invalid_argument("liouville power needs a > 0 and exponent > 0");
  }
  double g(double t) const override { return alpha * std::pow(a * a + t, -q); }
  double dg(double t) const override { return -alpha * q * std::pow(a * a + t, -q - 1); }
  double d2g(double t) const override { return alpha * q * (q + 1) * std::pow(a * a + t, -q - 2); }
  bool convex() const override { return alpha >= 0; }
};

class ProfileField final : public RadialField {
 public:
  ProfileField(int dim, std::string name, json params, std::shared_ptr<const RadialProfile> g, double bound,
               double support, double scale, std::vector<double> center = {})
      : RadialField(dim, std::move(g), std::move(center)),
        name_(std::move(name)),
        params_(std::move(params)),
        bound_(bound),
        support_(support),
        scale_(scale) {}
  std::string tag() const override { return "radial"; }
  json params() const override {
    json p = params_;
    p["profile"] = name_;
    p["center"] = c_;
    return p;
  }
  double bound() const override { return bound_; }
  double support_radius() const override { return support_; }
  double length_scale() const override { return scale_; }

 private:
  std::string name_;
  json params_;
  double bound_, support_, scale_;
};

// e^{-alpha |x-c|^2}
inline std::shared_ptr<ProfileField> exp_decay_field(int dim, double alpha, std::vector<double> center = {}) {
  return std::make_shared<ProfileField>(dim, "exp_decay", json{{"alpha", alpha}},
                                        std::make_shared<ExpDecayProfile>(alpha), 1.0,
                                        std::sqrt(40.0 / alpha), 1.0 / std::sqrt(alpha), std::move(center));
}

// alpha (a^2 + |x|^2)^{-s/(p-1)}, p > 1.
inline std::shared_ptr<ProfileField> liouville_power_field(int dim, double alpha, double a, double p, double s) {
  if (!(p > 1)) throw std::invalid_argument("liouville power profile needs p > 1");
  check_order(s);
  const double q = s / (p - 1);
  return std::make_shared<ProfileField>(dim, "liouville_power",
                                        json{{"alpha", alpha}, {"a", a}, {"p", p}, {"s", s}},
                                        std::make_shared<LiouvillePowerProfile>(alpha, a, q),
                                        std::abs(alpha) * std::pow(a, -2 * q), kInf, a);
}

// alpha (R^2 - |x|^2)_+^{s/(1-p)}, p < 1.
inline std::shared_ptr<ProfileField> compact_power_field(int dim, double alpha, double R, double p, double s) {
  if (!(p < 1)) throw std::invalid_argument("compact power profile needs p < 1");
  check_order(s);
  const double q = s / (1 - p);
  return std::make_shared<ProfileField>(dim, "compact_power", json{{"alpha", alpha}, {"R", R}, {"p", p}, {"s", s}},
                                        std::make_shared<CompactPowerProfile>(alpha, R, q),
                                        std::abs(alpha) * std::pow(R, 2 * q), R, R);
}

// exp(-(x-c)^T A (x-c)), A symmetric positive definite.
class AnisotropicGaussian final : public ScalarField {
 public:
  AnisotropicGaussian(Eigen::MatrixXd A, std::vector<double> center = {})
      : ScalarField(static_cast<int>(A.rows())),
        A_(std::move(A)),
        c_(center.empty() ? std::vector<double>(A_.rows(), 0.0) : center) {
    if (A_.rows() != A_.cols() || !A_.isApprox(A_.transpose()))
      throw std::invalid_argument("anisotropic gaussian needs a symmetric matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A_);
    lmin_ = es.eigenvalues().minCoeff();
    lmax_ = es.eigenvalues().maxCoeff();
    if (!(lmin_ > 0)) throw std::invalid_argument("anisotropic gaussian needs a positive definite matrix");
  }
  std::string tag() const override { return "anisotropic_gaussian"; }
  json params() const override {
    std::vector<std::vector<double>> rows(A_.rows(), std::vector<double>(A_.cols()));
    for (int i = 0; i < A_.rows(); ++i)
      for (int j = 0; j < A_.cols(); ++j) rows[i][j] = A_(i, j);
    return {{"A", rows}, {"center", c_}};
  }
  double value(std::span<const double> x) const override { return std::exp(-quad(x)); }
  double bound() const override { return 1.0; }
  double support_radius() const override { return std::sqrt(40.0 / lmin_); }
  std::vector<double> support_center() const override { return c_; }
  double length_scale() const override { return 1.0 / std::sqrt(lmax_); }
  bool has_gradient() const override { return true; }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    const double e = value(x);
    const int N = dim();
    for (int i = 0; i < N; ++i) {
      double acc = 0;
      for (int j = 0; j < N; ++j) acc += A_(i, j) * (x[j] - c_[j]);
      g[i] = -2.0 * e * acc;
    }
  }
  bool has_hessian() const override { return true; }
  void hessian(std::span<const double> x, std::span<double> H) const override {
    const double e = value(x);
    const int N = dim();
    Buf Ay{};
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) Ay[i] += A_(i, j) * (x[j] - c_[j]);
    }
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) H[i * N + j] = e * (4.0 * Ay[i] * Ay[j] - 2.0 * A_(i, j));
  }

 private:
  double quad(std::span<const double> x) const {
    const int N = dim();
    double acc = 0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) acc += (x[i] - c_[i]) * A_(i, j) * (x[j] - c_[j]);
    return acc;
  }
  Eigen::MatrixXd A_;
  std::vector<double> c_;
  double lmin_, lmax_;
};

// phi(x_N) with phi(t) = t^2/(1+t^2): smooth, bounded, minimised at 0.
class LastCoordinateProfile final : public ScalarField {
 public:
  explicit LastCoordinateProfile(int dim) : ScalarField(dim) {}
  std::string tag() const override { return "smp_profile"; }
  json params() const override { return json::object(); }
  double value(std::span<const double> x) const override {
    const double t = x[dim() - 1];
    return t * t / (1.0 + t * t);
  }
  double bound() const override { return 1.0; }
  bool has_gradient() const override { return true; }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    const double t = x[dim() - 1];
    for (int i = 0; i < dim(); ++i) g[i] = 0;
    g[dim() - 1] = 2 * t / ((1 + t * t) * (1 + t * t));
  }
  bool has_hessian() const override { return true; }
  void hessian(std::span<const double> x, std::span<double> H) const override {
    const int N = dim();
    const double t = x[N - 1];
    for (int i = 0; i < N * N; ++i) H[i] = 0;
    const double d = 1 + t * t;
    H[N * N - 1] = (2 - 6 * t * t) / (d * d * d);
  }
};

class ConstantField final : public ScalarField {
 public:
  ConstantField(int dim, double c) : ScalarField(dim), c_(c) {}
  std::string tag() const override { return "constant"; }
  json params() const override { return {{"value", c_}}; }
  double value(std::span<const double>) const override { return c_; }
  double bound() const override { return std::abs(c_); }
  bool has_gradient() const override { return true; }
  void gradient(std::span<const double>, std::span<double> g) const override {
    for (int i = 0; i < dim(); ++i) g[i] = 0;
  }
  bool has_hessian() const override { return true; }
  void hessian(std::span<const double>, std::span<double> H) const override {
    for (int i = 0; i < dim() * dim(); ++i) H[i] = 0;
  }
  double constant() const { return c_; }

 private:
  double c_;
};

// 1 on B_{R/2}(c), cosine transition to 0 on B_{3R/4}(c).
class BumpField final : public ScalarField {
 public:
  BumpField(int dim, double R, std::vector<double> center = {})
      : ScalarField(dim), R_(R), c_(center.empty() ? std::vector<double>(dim, 0.0) : center) {
    if (!(R > 0)) throw std::invalid_argument("bump radius must be positive");
  }
  std::string tag() const override { return "bump"; }
  json params() const override { return {{"R", R_}, {"center", c_}}; }
  double value(std::span<const double> x) const override {
    const double r = std::sqrt(detail::dist2(x, c_));
    const double a = 0.5 * R_, b = 0.75 * R_;
    if (r <= a) return 1.0;
    if (r >= b) return 0.0;
    return 0.5 * (1.0 + std::cos(kPi * (r - a) / (b - a)));
  }
  double bound() const override { return 1.0; }
  double support_radius() const override { return 0.75 * R_; }
  std::vector<double> support_center() const override { return c_; }

 private:
  double R_;
  std::vector<double> c_;
};

// sum_i a_i u_i
class LinearCombination final : public ScalarField {
 public:
  LinearCombination(std::vector<FieldPtr> terms, std::vector<double> coef)
      : ScalarField(terms.empty() ? 1 : terms.front()->dim()), terms_(std::move(terms)), coef_(std::move(coef)) {
    if (terms_.empty() || terms_.size() != coef_.size())
      throw std::invalid_argument("linear combination needs matching terms and coefficients");
    for (auto& t : terms_)
      if (t->dim() != dim()) throw std::invalid_argument("linear combination terms differ in dimension");
  }
  std::string tag() const override { return "combination"; }
  json params() const override {
    json t = json::array();
    for (std::size_t i = 0; i < terms_.size(); ++i)
      t.push_back({{"coef", coef_[i]}, {"field", {{"type", terms_[i]->tag()}, {"params", terms_[i]->params()}}}});
    return {{"terms", t}};
  }
  double value(std::span<const double> x) const override {
    double acc = 0;
    for (std::size_t i = 0; i < terms_.size(); ++i) acc += coef_[i] * terms_[i]->value(x);
    return acc;
  }
  double bound() const override {
    double b = 0;
    for (std::size_t i = 0; i < terms_.size(); ++i) b += std::abs(coef_[i]) * terms_[i]->bound();
    return b;
  }
  double support_radius() const override {
    // Only meaningful when every term shares a center; otherwise unbounded.
    double r = 0;
    auto c0 = terms_.front()->support_center();
    for (auto& t : terms_) {
      if (t->support_center() != c0) return kInf;
      r = std::max(r, t->support_radius());
    }
    return r;
  }
  std::vector<double> support_center() const override { return terms_.front()->support_center(); }
  bool smooth_at(std::span<const double> x) const override {
    for (auto& t : terms_)
      if (!t->smooth_at(x)) return false;
    return true;
  }
  bool discontinuous() const override {
    for (auto& t : terms_)
      if (t->discontinuous()) return true;
    return false;
  }
  double length_scale() const override {
    double l = kInf;
    for (auto& t : terms_) l = std::min(l, t->length_scale());
    return l;
  }
  bool has_gradient() const override {
    for (auto& t : terms_)
      if (!t->has_gradient()) return false;
    return true;
  }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    Buf tmp{};
    for (int i = 0; i < dim(); ++i) g[i] = 0;
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      terms_[k]->gradient(x, std::span<double>(tmp.data(), dim()));
      for (int i = 0; i < dim(); ++i) g[i] += coef_[k] * tmp[i];
    }
  }
  bool has_hessian() const override {
    for (auto& t : terms_)
      if (!t->has_hessian()) return false;
    return true;
  }
  void hessian(std::span<const double> x, std::span<double> H) const override {
    const int NN = dim() * dim();
    std::vector<double> tmp(NN);
    for (int i = 0; i < NN; ++i) H[i] = 0;
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      terms_[k]->hessian(x, tmp);
      for (int i = 0; i < NN; ++i) H[i] += coef_[k] * tmp[i];
    }
  }
  void ray_breaks(std::span<const double> x, std::span<const double> d, std::vector<double>& out) const override {
    for (auto& t : terms_) t->ray_breaks(x, d, out);
  }
  bool frame_invariant_at(std::span<const double> x) const override {
    for (auto& t : terms_)
      if (!t->frame_invariant_at(x)) return false;
    return true;
  }

 private:
  std::vector<FieldPtr> terms_;
  std::vector<double> coef_;
};

inline FieldPtr scaled(FieldPtr u, double a) {
  return std::make_shared<LinearCombination>(std::vector<FieldPtr>{std::move(u)}, std::vector<double>{a});
}

// x -> u(Q^T (x - shift)), Q orthogonal.
class MovedField final : public ScalarField {
 public:
  MovedField(FieldPtr u, Eigen::MatrixXd Q, Eigen::VectorXd shift)
      : ScalarField(u->dim()), u_(std::move(u)), Q_(std::move(Q)), t_(std::move(shift)) {
    if (Q_.rows() != dim() || Q_.cols() != dim() || t_.size() != dim())
      throw std::invalid_argument("moved field: shape mismatch");
    if (orthonormality_defect(Q_) > 1e-12) throw std::invalid_argument("moved field needs an orthogonal matrix");
  }
  std::string tag() const override { return "moved"; }
  json params() const override { return {{"inner", {{"type", u_->tag()}, {"params", u_->params()}}}}; }
  double value(std::span<const double> x) const override {
    Buf y = pull(x);
    return u_->value(span(y));
  }
  double bound() const override { return u_->bound(); }
  double support_radius() const override { return u_->support_radius(); }
  std::vector<double> support_center() const override {
    auto c = u_->support_center();
    Eigen::VectorXd v = Q_ * Eigen::Map<const Eigen::VectorXd>(c.data(), dim()) + t_;
    return {v.data(), v.data() + dim()};
  }
  bool smooth_at(std::span<const double> x) const override {
    Buf y = pull(x);
    return u_->smooth_at(span(y));
  }
  bool discontinuous() const override { return u_->discontinuous(); }
  double length_scale() const override { return u_->length_scale(); }
  bool has_gradient() const override { return u_->has_gradient(); }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    Buf y = pull(x), gy{};
    u_->gradient(span(y), std::span<double>(gy.data(), dim()));
    for (int i = 0; i < dim(); ++i) {
      g[i] = 0;
      for (int j = 0; j < dim(); ++j) g[i] += Q_(i, j) * gy[j];
    }
  }
  bool has_hessian() const override { return u_->has_hessian(); }
  void hessian(std::span<const double> x, std::span<double> H) const override {
    Buf y = pull(x);
    const int N = dim();
    std::vector<double> Hy(N * N);
    u_->hessian(span(y), Hy);
    Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>> Hm(Hy.data(), N, N);
    Eigen::MatrixXd R = Q_ * Hm * Q_.transpose();
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) H[i * N + j] = R(i, j);
  }
  void ray_breaks(std::span<const double> x, std::span<const double> d, std::vector<double>& out) const override {
    Buf y = pull(x), e{};
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) e[i] += Q_(j, i) * d[j];
    u_->ray_breaks(span(y), span(e), out);
  }
  bool frame_invariant_at(std::span<const double> x) const override {
    Buf y = pull(x);
    return u_->frame_invariant_at(span(y));
  }

 private:
  std::span<const double> span(const Buf& b) const { return {b.data(), static_cast<std::size_t>(dim())}; }
  Buf pull(std::span<const double> x) const {
    Buf y{};
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) y[i] += Q_(j, i) * (x[j] - t_(j));
    return y;
  }
  FieldPtr u_;
  Eigen::MatrixXd Q_;
  Eigen::VectorXd t_;
};

}  // namespace ktrunc
