#pragma once

// Zero-exterior Dirichlet problems K u + c u = f on balls and intersections of
// balls, discretised on a lattice and solved by monotone pseudo-time stepping.

#include <algorithm>
#include <cstdint>
#include <optional>

#include "ktrunc/grid.hpp"
#include "ktrunc/operators.hpp"

namespace ktrunc {

struct SolverOptions {
  double dt_safety = 0.9;
  double tol = 1e-8;          // on the sup residual, relative to max(1, |f|_inf)
  int max_iter = 100000;
  double core_factor = 2.0;   // core radius rho = core_factor * h
  double boundary_layer = 0.0;  // nodes closer than this many h (at least 1e-6) to the boundary are held at 0
  bool boundary_interp = true;  // interpolate u / d^s in cells cut by the boundary
  bool local_steps = true;      // per-node step dt_safety / Lambda_p instead of one global step
  std::string core = "stencil";  // "stencil" (axis second differences) or "directional"
  double radial_ratio = 1.5;
  int radial_nodes = 3;
  int angles = 8;             // plane rotations of the frame (N = 2)
  int random_frames = 3;      // seeded random frames per node (N >= 3)
  int angular = 8;            // sphere rule for blocks of dimension >= 2
  int jobs = 1;

  void validate() const {
    if (!(dt_safety > 0 && dt_safety <= 1)) throw std::invalid_argument("dt_safety must lie in (0,1]");
    if (!(tol > 0)) throw std::invalid_argument("solver tolerance must be positive");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be positive");
    if (!(core_factor >= 1)) throw std::invalid_argument("core_factor must be >= 1");
    if (!(boundary_layer >= 0 && boundary_layer <= core_factor)) throw std::invalid_argument("boundary_layer must lie in [0, core_factor]");
    if (core != "stencil" && core != "directional") throw std::invalid_argument("core must be stencil or directional");
    if (!(radial_ratio > 1) || radial_nodes < 1) throw std::invalid_argument("invalid radial rule");
    if (angles < 1 || random_frames < 0 || angular < 2) throw std::invalid_argument("invalid frame sampling options");
  }
};

struct DirichletProblem {
  Domain domain = Domain::ball({0.0, 0.0}, 1.0);
  Partition partition;
  Sign sign = Sign::plus;
  double s = 0.5;
  FieldPtr f;
  FieldPtr c;  // optional
  double h = 1.0 / 16;
  SolverOptions solver;
  std::uint64_t seed = 0;
};

// Discrete operator: at each interior node, max/min over a fixed candidate
// frame set of linear, monotone approximations of sum_i J_{V_i}.
class DiscreteOperator {
 public:
  DiscreteOperator(const Domain& dom, const Lattice& lat, const Partition& p, double s, const SolverOptions& opt,
                   std::uint64_t seed)
      : dom_(dom), lat_(lat), p_(p), s_(s), opt_(opt) {
    const int N = lat.N;
    if (p.N != N) throw std::invalid_argument("partition dimension differs from domain dimension");
    rho_ = opt.core_factor * lat.h;
    sl_step_ = std::sqrt(lat.h * inradius());
    for (int i = 0; i < N; ++i) stride_[i] = lat.stride(i);

    Buf x{};
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
      lat.position(idx, std::span<double>(x.data(), N));
      std::span<const double> xs(x.data(), N);
      if (dom.contains(xs) && dom.distance_to_boundary(xs) >= std::max(opt.boundary_layer, 1e-6) * lat.h)
        interior_.push_back(idx);
    }
    if (opt.boundary_interp) {
      dpow_.assign(lat.size(), 0.0);
      for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        lat.position(idx, std::span<double>(x.data(), N));
        std::span<const double> xs(x.data(), N);
        if (dom.contains(xs)) dpow_[idx] = std::pow(dom.distance_to_boundary(xs), s);
      }
    }
    cut_.assign(lat.size(), 0);
    if (opt.boundary_interp) {
      std::vector<int> m(N);
      for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        lat.index_to_multi(idx, m);
        bool edge = false;
        for (int i = 0; i < N; ++i) edge = edge || m[i] + 1 >= lat.dims[i];
        if (edge) continue;
        bool in = false, out = false;
        for (int corner = 0; corner < (1 << N); ++corner) {
          std::size_t c = idx;
          for (int i = 0; i < N; ++i)
            if (corner & (1 << i)) c += stride_[i];
          (dpow_[c] > 0 ? in : out) = true;
        }
        cut_[idx] = in && out;
      }
    }
    node_slot_.push_back(0);
    node_cand_.push_back(0);
    const Rule& gl = gauss_legendre01(opt.radial_nodes);
    for (std::size_t k = 0; k < interior_.size(); ++k) {
      lat.position(interior_[k], std::span<double>(x.data(), N));
      build_node(k, x, seed, gl);
    }
    node_diag_.assign(interior_.size(), 0.0);
    for (std::size_t k = 0; k < interior_.size(); ++k)
      for (std::size_t c = node_cand_[k]; c < node_cand_[k + 1]; ++c) {
        double d = 0;
        for (std::size_t t = cand_term_[c]; t < cand_term_[c + 1]; ++t) d += term_coef_[t] * slot_diag_[term_slot_[t]];
        node_diag_[k] = std::max(node_diag_[k], d);
      }
  }

  const std::vector<std::size_t>& interior() const { return interior_; }
  const Lattice& lattice() const { return lat_; }
  const Domain& domain() const { return dom_; }
  // Largest weight on u(x) among the node's candidates.
  double diagonal(std::size_t k) const { return node_diag_[k]; }
  std::size_t candidate_count(std::size_t k) const { return node_cand_[k + 1] - node_cand_[k]; }

  // Objective of candidate c (relative index) at interior node k.
  double apply(const std::vector<double>& u, std::size_t k, std::size_t c) const {
    thread_local std::vector<double> vals;
    slot_values(u, k, vals);
    return candidate_value(k, node_cand_[k] + c, vals);
  }

  // Extremum over the node's candidates.
  double extremal(const std::vector<double>& u, std::size_t k, Sign sign) const {
    thread_local std::vector<double> vals;
    slot_values(u, k, vals);
    double best = sign == Sign::plus ? -kInf : kInf;
    for (std::size_t c = node_cand_[k]; c < node_cand_[k + 1]; ++c) {
      const double v = candidate_value(k, c, vals);
      best = sign == Sign::plus ? std::max(best, v) : std::min(best, v);
    }
    return best;
  }

 private:
  double inradius() const {
    if (dom_.kind() == Domain::Kind::box) {
      double r = kInf;
      for (int i = 0; i < lat_.N; ++i) r = std::min(r, 0.5 * (dom_.hi()[i] - dom_.lo()[i]));
      return r;
    }
    double r = kInf;
    for (auto& b : dom_.ball_list()) r = std::min(r, b.R);
    return r;
  }

  std::vector<Eigen::MatrixXd> node_frames(const Buf& x, std::size_t k, std::uint64_t seed) const {
    const int N = lat_.N;
    std::vector<Eigen::MatrixXd> bases, mats;
    if (N == 2) {
      for (int j = 0; j < opt_.angles; ++j) {
        const double phi = 0.5 * kPi * j / opt_.angles;
        Eigen::MatrixXd Q(2, 2);
        Q << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
        bases.push_back(Q);
      }
    } else {
      bases.push_back(Eigen::MatrixXd::Identity(N, N));
      auto c = dom_.center();
      Eigen::VectorXd rel(N);
      for (int i = 0; i < N; ++i) rel(i) = x[i] - c[i];
      if (rel.norm() > 1e-12) bases.push_back(detail::aligned_basis(rel));
      std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + interior_[k]);
      Partition full{N, {N}};
      for (int r = 0; r < opt_.random_frames; ++r) bases.push_back(sample_frame(full, rng).M);
    }
    for (auto& Q : bases) detail::block_selections(p_, Q, mats);
    return mats;
  }

  void build_node(std::size_t k, const Buf& x, std::uint64_t seed, const Rule& gl) {
    const int N = lat_.N;
    const std::size_t first_slot = slot_dir_.size() / N;
    auto find_slot = [&](const Buf& d) -> std::size_t {
      for (std::size_t q = first_slot; q < slot_dir_.size() / N; ++q) {
        double diff = 0;
        for (int i = 0; i < N; ++i) diff = std::max(diff, std::abs(slot_dir_[q * N + i] - d[i]));
        if (diff < 1e-12) return q;
      }
      add_slot(x, d, gl);
      return slot_dir_.size() / N - 1;
    };
    std::vector<std::vector<std::pair<std::size_t, double>>> seen;
    for (auto& M : node_frames(x, k, seed)) {
      BlockFrame F{p_, M};
      const std::size_t t0 = term_slot_.size();
      for (int b = 0; b < p_.ell(); ++b) {
        Eigen::MatrixXd B = F.block(b);
        const int n = static_cast<int>(B.cols());
        const SphereRule& S = sphere_rule(n, opt_.angular, true);
        const double C = normalizing_constant(n, s_);
        for (std::size_t q = 0; q < S.count(); ++q) {
          Buf d{};
          for (int i = 0; i < N; ++i)
            for (int j = 0; j < n; ++j) d[i] += B(i, j) * S.point(q)[j];
          int lead = 0;
          while (lead < N && std::abs(d[lead]) < 1e-14) ++lead;
          if (lead < N && d[lead] < 0)
            for (int i = 0; i < N; ++i) d[i] = -d[i];
          term_slot_.push_back(find_slot(d));
          term_coef_.push_back(C * S.w[q]);
        }
      }
      // Reordered blocks of equal size give the same operator; keep one.
      std::vector<std::pair<std::size_t, double>> key;
      for (std::size_t t = t0; t < term_slot_.size(); ++t) key.emplace_back(term_slot_[t], term_coef_[t]);
      std::sort(key.begin(), key.end());
      auto same = [&](const auto& other) {
        if (other.size() != key.size()) return false;
        for (std::size_t i = 0; i < key.size(); ++i)
          if (other[i].first != key[i].first || std::abs(other[i].second - key[i].second) > 1e-13) return false;
        return true;
      };
      if (std::any_of(seen.begin(), seen.end(), same)) {
        term_slot_.resize(t0);
        term_coef_.resize(t0);
        continue;
      }
      seen.push_back(std::move(key));
      cand_term_.push_back(term_slot_.size());
    }
    node_cand_.push_back(cand_term_.size() - 1);
    node_slot_.push_back(slot_dir_.size() / N);
  }

  void add_slot(const Buf& x, const Buf& d, const Rule& gl) {
    const int N = lat_.N;
    for (int i = 0; i < N; ++i) slot_dir_.push_back(d[i]);
    std::span<const double> xs(x.data(), N);
    Buf m{};
    for (int i = 0; i < N; ++i) m[i] = -d[i];
    const double ep = dom_.exit_distance(xs, std::span<const double>(d.data(), N));
    const double em = dom_.exit_distance(xs, std::span<const double>(m.data(), N));
    // The core never reaches past the boundary: beyond it the ray sees the
    // exterior zero, which the far-field self term accounts for exactly.
    const double rho = std::min(rho_, std::min(ep, em));
    const double cw = std::pow(rho, 2 - 2 * s_) / (2 - 2 * s_);
    const double self = 2 * std::pow(rho, -2 * s_) / (2 * s_);
    // Directional core step: wide enough for interpolation to be consistent,
    // short enough to stay inside the domain when possible.
    const double kstep = std::max(rho, std::min(sl_step_, 0.9 * std::min(ep, em)));
    slot_step_.push_back(kstep);
    slot_core_w_.push_back(cw);
    slot_self_.push_back(self);
    const double kk = opt_.core == "stencil" ? lat_.h : kstep;
    slot_diag_.push_back(self + cw * 2 / (kk * kk));
    // Radial samples of the far field on [rho, exit] for both rays.
    slot_rad_begin_.push_back(rad_r_.size());
    for (int side = 0; side < 2; ++side) {
      const double E = side == 0 ? ep : em;
      if (E > rho) {
        const int n = std::max(1, static_cast<int>(std::ceil(std::log(E / rho) / std::log(opt_.radial_ratio))));
        const double q = std::pow(E / rho, 1.0 / n);
        double a = rho;
        for (int j = 0; j < n; ++j) {
          const double b = (j == n - 1) ? E : a * q;
          for (std::size_t g = 0; g < gl.size(); ++g) {
            const double r = a + (b - a) * gl.x[g];
            rad_r_.push_back(side == 0 ? r : -r);
            rad_w_.push_back((b - a) * gl.w[g] * std::pow(r, -1 - 2 * s_));
          }
          a = b;
        }
      }
    }
    slot_rad_end_.push_back(rad_r_.size());
  }

  double interp(const std::vector<double>& u, const double* y) const {
    const int N = lat_.N;
    std::size_t idx0 = 0;
    Buf frac{};
    for (int i = 0; i < N; ++i) {
      const double t = (y[i] - lat_.origin[i]) / lat_.h;
      int j = static_cast<int>(t);
      j = std::clamp(j, 0, lat_.dims[i] - 2);
      frac[i] = t - j;
      idx0 += j * stride_[i];
    }
    if (cut_[idx0]) return interp_cut(u, y, idx0, frac);
    if (N == 2) {
      const double* a = u.data() + idx0;
      const std::size_t s0 = stride_[0];
      return (1 - frac[0]) * ((1 - frac[1]) * a[0] + frac[1] * a[1]) +
             frac[0] * ((1 - frac[1]) * a[s0] + frac[1] * a[s0 + 1]);
    }
    double acc = 0;
    for (int corner = 0; corner < (1 << N); ++corner) {
      double w = 1;
      std::size_t idx = idx0;
      for (int i = 0; i < N; ++i) {
        if (corner & (1 << i)) {
          w *= frac[i];
          idx += stride_[i];
        } else {
          w *= 1 - frac[i];
        }
      }
      acc += w * u[idx];
    }
    return acc;
  }

  // Cells crossing the boundary: interpolate u / d^s over the inside corners
  // and multiply back, so the zero exterior does not drag samples down.
  double interp_cut(const std::vector<double>& u, const double* y, std::size_t idx0, const Buf& frac) const {
    const int N = lat_.N;
    double acc = 0, wsum = 0;
    for (int corner = 0; corner < (1 << N); ++corner) {
      double w = 1;
      std::size_t idx = idx0;
      for (int i = 0; i < N; ++i) {
        if (corner & (1 << i)) {
          w *= frac[i];
          idx += stride_[i];
        } else {
          w *= 1 - frac[i];
        }
      }
      if (dpow_[idx] > 0) {
        acc += w * u[idx] / dpow_[idx];
        wsum += w;
      }
    }
    if (!(wsum > 0)) return 0.0;
    std::span<const double> ys(y, N);
    if (!dom_.contains(ys)) return 0.0;
    return std::pow(dom_.distance_to_boundary(ys), s_) * acc / wsum;
  }

  double interp_or_zero(const std::vector<double>& u, const double* y) const {
    if (!dom_.contains(std::span<const double>(y, lat_.N))) return 0.0;
    return interp(u, y);
  }

  void slot_values(const std::vector<double>& u, std::size_t k, std::vector<double>& vals) const {
    const int N = lat_.N;
    const std::size_t idx = interior_[k];
    const double up = u[idx];
    Buf x{};
    lat_.position(idx, std::span<double>(x.data(), N));
    const std::size_t s0 = node_slot_[k], s1 = node_slot_[k + 1];
    vals.resize(s1 - s0);
    Buf second{};
    if (opt_.core == "stencil")
      for (int i = 0; i < N; ++i)
        second[i] = (u[idx + stride_[i]] + u[idx - stride_[i]] - 2 * up) / (lat_.h * lat_.h);
    Buf y{};
    for (std::size_t q = s0; q < s1; ++q) {
      const double* d = slot_dir_.data() + q * N;
      double core = 0;
      if (opt_.core == "stencil") {
        for (int i = 0; i < N; ++i) core += d[i] * d[i] * second[i];
      } else {
        const double ks = slot_step_[q];
        for (int i = 0; i < N; ++i) y[i] = x[i] + ks * d[i];
        double v = interp_or_zero(u, y.data());
        for (int i = 0; i < N; ++i) y[i] = x[i] - ks * d[i];
        v += interp_or_zero(u, y.data());
        core = (v - 2 * up) / (ks * ks);
      }
      double far = 0;
      for (std::size_t j = slot_rad_begin_[q]; j < slot_rad_end_[q]; ++j) {
        const double r = rad_r_[j];
        for (int i = 0; i < N; ++i) y[i] = x[i] + r * d[i];
        far += rad_w_[j] * interp(u, y.data());
      }
      vals[q - s0] = slot_core_w_[q] * core + far - slot_self_[q] * up;
    }
  }

  double candidate_value(std::size_t k, std::size_t c, const std::vector<double>& vals) const {
    const std::size_t s0 = node_slot_[k];
    double acc = 0;
    for (std::size_t t = cand_term_[c]; t < cand_term_[c + 1]; ++t) acc += term_coef_[t] * vals[term_slot_[t] - s0];
    return acc;
  }

  Domain dom_;
  Lattice lat_;
  Partition p_;
  double s_;
  SolverOptions opt_;
  double rho_, sl_step_;
  std::vector<double> node_diag_;
  std::array<std::size_t, kMaxDim> stride_{};
  std::vector<std::size_t> interior_;
  std::vector<double> dpow_;        // d(x)^s at nodes inside the domain, 0 outside
  std::vector<std::uint8_t> cut_;   // cell (by lower corner) straddles the boundary
  std::vector<std::size_t> node_slot_, node_cand_;
  std::vector<double> slot_dir_, slot_step_, slot_diag_, slot_core_w_, slot_self_;
  std::vector<std::size_t> slot_rad_begin_, slot_rad_end_;
  std::vector<double> rad_r_, rad_w_;
  std::vector<std::size_t> cand_term_{0};
  std::vector<std::size_t> term_slot_;
  std::vector<double> term_coef_;
};

inline double smallness_threshold(const Domain& dom, const Partition& p, double s) {
  double sumC = 0;
  for (int b : p.blocks) sumC += normalizing_constant(b, s);
  return sumC / (2 * s) * std::pow(dom.diameter(), -2 * s);
}

inline void validate_problem(const DirichletProblem& P) {
  check_order(P.s);
  P.solver.validate();
  const int N = P.domain.dim();
  if (P.partition.N != N) throw std::invalid_argument("partition dimension differs from domain dimension");
  make_partition(N, P.partition.blocks);
  if (!P.f) throw std::invalid_argument("problem needs a right-hand side f");
  if (P.f->dim() != N || (P.c && P.c->dim() != N)) throw std::invalid_argument("coefficient fields differ in dimension");
  if (!(P.h > 0) || !std::isfinite(P.h)) throw std::invalid_argument("grid spacing must be positive");
  if (P.domain.diameter() / P.h + 1 < 17) throw std::invalid_argument("grid must have at least 17 nodes per diameter");
  if (P.domain.kind() != Domain::Kind::balls) throw std::invalid_argument("Dirichlet problems need a ball or intersection of balls");
}

struct Envelope {
  std::vector<double> sub, super;  // lattice values, zero outside the domain
  double M = 0;                    // continuous constant |f| / K_barrier
  double M_discrete = 0;           // largest constant actually used per ball
  double inflation = 0;            // barrier radius enlargement, in units of h
};

struct SolveReport {
  std::optional<GridField> solution;
  int iterations = 0;
  double residual_sup = 0;
  std::vector<double> residual_history;
  int envelope_violations = 0;
  std::optional<double> hopf_constant;
  bool converged = false;
  std::vector<double> scaled_residual_history;  // sup_p dt_p |res_p|
  bool residual_monotone = true;
  double dt = 0;      // smallest step used
  double lambda = 0;  // largest diagonal weight
  Envelope envelope;
  std::size_t interior_nodes = 0;
};

namespace detail {

struct NodeData {
  std::vector<double> f, c;
  double f_sup = 0, c_plus = 0, c_minus = 0;
};

inline NodeData node_data(const DirichletProblem& P, const DiscreteOperator& op) {
  NodeData nd;
  const auto& L = op.lattice();
  Buf x{};
  for (std::size_t idx : op.interior()) {
    L.position(idx, std::span<double>(x.data(), L.N));
    std::span<const double> xs(x.data(), L.N);
    const double fv = P.f->value(xs);
    const double cv = P.c ? P.c->value(xs) : 0.0;
    if (!std::isfinite(fv) || !std::isfinite(cv)) throw std::invalid_argument("f or c is not finite on the domain");
    nd.f.push_back(fv);
    nd.c.push_back(cv);
    nd.f_sup = std::max(nd.f_sup, std::abs(fv));
    nd.c_plus = std::max(nd.c_plus, cv);
    nd.c_minus = std::max(nd.c_minus, -cv);
  }
  return nd;
}

}  // namespace detail

inline double barrier_constant(const Partition& p, double s) {
  double acc = 0;
  for (int b : p.blocks) acc += normalizing_constant(b, s) * sphere_measure(b);
  return beta_1ms_s(s) / 2 * acc;
}

// super = min over balls of M_y (R^2 - |x - y|^2)_+^s, sub = -super.  Each M_y
// is raised if needed so that the barrier is a supersolution of the discrete
// operator itself.
inline Envelope barrier_envelope(const DirichletProblem& P, const DiscreteOperator& op, double f_sup, double c_plus,
                                 const std::vector<double>& c) {
  Envelope env;
  const auto& L = op.lattice();
  const auto& interior = op.interior();
  env.super.assign(L.size(), 0.0);
  env.sub.assign(L.size(), 0.0);
  if (f_sup == 0) return env;
  const double K = barrier_constant(P.partition, P.s);
  bool first = true;
  Buf x{};
  for (auto& ball : P.domain.ball_list()) {
    // The barrier's kink sits exactly on the boundary, where no lattice scheme
    // resolves it.  Pushing it outward by a fraction of h is allowed: the
    // truncation to zero outside the domain only lowers the operator, so the
    // enlarged barrier remains a supersolution.  Take the first enlargement
    // whose discrete constant is close to the continuous one, else the one
    // with the smallest peak.
    bool ok = false;
    double best_peak = kInf, best_M = 0, best_Mh = 0, best_j = 0;
    std::vector<double> best_vals;
    for (int j = 0; j <= 8; ++j) {
      const double R = ball.R + 0.25 * j * L.h;
      const double denom = K - c_plus * std::pow(R, 2 * P.s);
      if (!(denom > 0)) throw Error("barrier constant does not dominate the zero-order coefficient");
      const double M = f_sup / denom;
      BarrierField v(L.N, R, P.s, ball.center);
      std::vector<double> vals(L.size(), 0.0);
      for (std::size_t idx : interior) {
        L.position(idx, std::span<double>(x.data(), L.N));
        vals[idx] = v.value(std::span<const double>(x.data(), L.N));
      }
      std::vector<double> a(interior.size());
      parallel_for(interior.size(), P.solver.jobs, [&](std::size_t k) {
        a[k] = -(op.extremal(vals, k, Sign::plus) + c[k] * vals[interior[k]]);
      });
      const double amin = a.empty() ? kInf : *std::min_element(a.begin(), a.end());
      if (!(amin > 0)) continue;
      const double Mh = std::max(M, f_sup / amin);
      const double peak = Mh * std::pow(R, 2 * P.s);
      if (peak < best_peak) {
        ok = true;
        best_peak = peak;
        best_M = M;
        best_Mh = Mh;
        best_j = 0.25 * j;
        best_vals = std::move(vals);
      }
      if (Mh <= 1.25 * M) break;
    }
    if (ok) {
      env.M = std::max(env.M, best_M);
      env.M_discrete = std::max(env.M_discrete, best_Mh);
      env.inflation = std::max(env.inflation, best_j);
      for (std::size_t idx : interior) {
        const double w = best_Mh * best_vals[idx];
        env.super[idx] = first ? w : std::min(env.super[idx], w);
      }
      first = false;
    }
    if (!ok) throw Error("discrete barrier is not a strict supersolution");
  }
  for (std::size_t i = 0; i < L.size(); ++i) env.sub[i] = -env.super[i];
  return env;
}

inline SolveReport solve_dirichlet(const DirichletProblem& P) {
  validate_problem(P);
  const Lattice L = Lattice::covering(P.domain, P.h);
  DiscreteOperator op(P.domain, L, P.partition, P.s, P.solver, P.seed);
  auto nd = detail::node_data(P, op);
  if (P.c) {
    const double thr = smallness_threshold(P.domain, P.partition, P.s);
    if (!(nd.c_plus < thr))
      throw std::invalid_argument("zero-order coefficient violates the smallness condition |c+| < " + fmt(thr));
  }
  const auto& interior = op.interior();
  SolveReport rep;
  rep.interior_nodes = interior.size();
  rep.envelope = barrier_envelope(P, op, nd.f_sup, nd.c_plus, nd.c);
  std::vector<double> lam(interior.size()), dt(interior.size());
  for (std::size_t k = 0; k < interior.size(); ++k) {
    lam[k] = op.diagonal(k) + std::max(0.0, -nd.c[k]);
    rep.lambda = std::max(rep.lambda, lam[k]);
  }
  for (std::size_t k = 0; k < interior.size(); ++k)
    dt[k] = P.solver.dt_safety / (P.solver.local_steps ? lam[k] : rep.lambda);
  rep.dt = interior.empty() ? 0.0 : *std::min_element(dt.begin(), dt.end());
  const double tol_abs = P.solver.tol * std::max(1.0, nd.f_sup);

  std::vector<double> u = rep.envelope.sub, next = u, res(interior.size());
  for (int it = 0; it <= P.solver.max_iter; ++it) {
    parallel_for(interior.size(), P.solver.jobs, [&](std::size_t k) {
      const std::size_t idx = interior[k];
      res[k] = op.extremal(u, k, P.sign) + nd.c[k] * u[idx] - nd.f[k];
    });
    // With dt_p <= 1/Lambda_p the residual scaled by dt_p cannot grow.
    double rs = 0, scaled = 0;
    for (std::size_t k = 0; k < res.size(); ++k) {
      rs = std::max(rs, std::abs(res[k]));
      scaled = std::max(scaled, std::abs(res[k]) * dt[k]);
    }
    if (!rep.scaled_residual_history.empty() && scaled > rep.scaled_residual_history.back() * (1 + 1e-9) + 1e-300)
      rep.residual_monotone = false;
    rep.residual_history.push_back(rs);
    rep.scaled_residual_history.push_back(scaled);
    rep.residual_sup = rs;
    rep.iterations = it;
    if (rs <= tol_abs) {
      rep.converged = true;
      break;
    }
    if (it == P.solver.max_iter) break;
    for (std::size_t k = 0; k < interior.size(); ++k) next[interior[k]] = u[interior[k]] + dt[k] * res[k];
    std::swap(u, next);
  }
  // Distance to the fixed point is bounded by residual / (leak rate); allow a
  // generous multiple of the stopping tolerance.
  const double env_tol = 100 * tol_abs;
  for (std::size_t idx : interior)
    if (u[idx] < rep.envelope.sub[idx] - env_tol || u[idx] > rep.envelope.super[idx] + env_tol)
      ++rep.envelope_violations;
  rep.solution.emplace(P.domain, L, std::move(u));
  return rep;
}

// c_hat = min over interior nodes of u / d^s.
inline double hopf_fit(const SolveReport& rep, const DirichletProblem& P) {
  if (!rep.solution) throw std::invalid_argument("hopf_fit needs a solved problem");
  if (P.sign == Sign::minus && P.partition.k() < P.partition.N)
    throw RegimeMismatch("Hopf bound fails for the minimal operator with k < N");
  const auto& g = *rep.solution;
  const auto& L = g.lattice();
  Buf x{};
  double c = kInf;
  bool nonzero = false;
  for (std::size_t idx = 0; idx < L.size(); ++idx) {
    L.position(idx, std::span<double>(x.data(), L.N));
    std::span<const double> xs(x.data(), L.N);
    if (!P.domain.contains(xs)) continue;
    const double fv = P.f->value(xs);
    if (fv > 0) throw std::invalid_argument("hopf_fit needs f <= 0");
    if (fv < 0) nonzero = true;
    c = std::min(c, g.values()[idx] / std::pow(P.domain.distance_to_boundary(xs), P.s));
  }
  if (!nonzero) throw std::invalid_argument("hopf_fit needs f not identically zero");
  return c;
}

struct EigenUpper {
  double rho0 = kInf;
  SolveReport report;
};

// Solves -K v = h for a bump h supported in the half-to-three-quarter radius
// ball; max h / v over supp h bounds the principal eigenvalue from above.
inline EigenUpper eigen_upper_bound(const Domain& dom, const Partition& p, Sign sign, double s, double h,
                                    SolverOptions opt = {}, std::uint64_t seed = 0, double bump_scale = 1.0) {
  if (sign == Sign::minus && p.k() < p.N)
    throw RegimeMismatch("upper bound construction for the minimal operator needs k = N");
  double R = kInf;
  for (auto& b : dom.ball_list()) R = std::min(R, b.R);
  DirichletProblem P;
  P.domain = dom;
  P.partition = p;
  P.sign = sign;
  P.s = s;
  auto bump = std::make_shared<BumpField>(dom.dim(), R, dom.center());
  P.f = scaled(bump, -bump_scale);
  P.h = h;
  P.solver = opt;
  P.seed = seed;
  EigenUpper out;
  out.report = solve_dirichlet(P);
  if (!out.report.converged) throw NonConvergence("eigen_upper_bound: solver did not converge");
  const auto& g = *out.report.solution;
  const auto& L = g.lattice();
  Buf x{};
  double best = 0;
  for (std::size_t idx = 0; idx < L.size(); ++idx) {
    L.position(idx, std::span<double>(x.data(), L.N));
    const double hv = bump_scale * bump->value(std::span<const double>(x.data(), L.N));
    if (hv > 0 && dom.contains(std::span<const double>(x.data(), L.N))) {
      const double v = g.values()[idx];
      if (!(v > 0)) throw Error("eigen_upper_bound: solution not positive on the bump support");
      best = std::max(best, hv / v);
    }
  }
  out.rho0 = best;
  return out;
}

struct EigenEstimate {
  double mu_upper = kInf;  // max over supp h of h / v, where -K v = h
  double mu_lower = 0;     // 1 / max v1, where -K v1 = 1
  json witness;
};

// Both bounds come from positive solutions of -K v = g: v is a supersolution
// of K v + mu v <= 0 for mu = min g / v, and h / v bounds the other side.
inline EigenEstimate eigen_estimate(const Domain& dom, const Partition& p, Sign sign, double s, double h,
                                    SolverOptions opt = {}, std::uint64_t seed = 0) {
  EigenEstimate out;
  auto up = eigen_upper_bound(dom, p, sign, s, h, opt, seed);
  out.mu_upper = up.rho0;
  DirichletProblem P;
  P.domain = dom;
  P.partition = p;
  P.sign = sign;
  P.s = s;
  P.f = std::make_shared<ConstantField>(dom.dim(), -1.0);
  P.h = h;
  P.solver = opt;
  P.seed = seed;
  auto rep = solve_dirichlet(P);
  if (!rep.converged) throw NonConvergence("eigen_estimate: solver did not converge");
  const auto& v = rep.solution->values();
  const double vmax = *std::max_element(v.begin(), v.end());
  if (!(vmax > 0)) throw Error("eigen_estimate: torsion solution is not positive");
  out.mu_lower = 1.0 / vmax;
  out.witness = {{"upper", {{"h_field", "bump"}, {"iterations", up.report.iterations}}},
                 {"lower", {{"h_field", "constant"}, {"max_v", vmax}, {"iterations", rep.iterations}}}};
  return out;
}

struct LowerScanOptions {
  double alpha0 = 0.25;
  double factor = 2.0;
  int steps = 24;
  double sample_h = 0.125;  // relative to the domain radius
  QuadratureSpec quad;
};

struct LowerWitness {
  double alpha = 0;
  double worst = 0;  // max over samples of (K^- w + mu w) / w, <= 0
  int samples = 0;  // nodes where w is representable
};

// Searches w = exp(-alpha |x - c|^2) with K^- w + mu w <= 0 at sampled nodes,
// evaluating K^- at frames orthogonal to x - c (an upper bound for the inf).
inline std::optional<LowerWitness> eigen_lower_scan(const Domain& dom, const Partition& p, double s, double mu,
                                                    const LowerScanOptions& opt = {}) {
  if (!(p.k() < p.N)) throw RegimeMismatch("lower scan needs k < N");
  check_order(s);
  const int N = dom.dim();
  double R = kInf;
  for (auto& b : dom.ball_list()) R = std::min(R, b.R);
  const auto c = dom.center();
  Lattice L = Lattice::covering(dom, opt.sample_h * R);
  std::vector<std::vector<double>> pts;
  Buf x{};
  for (std::size_t idx = 0; idx < L.size(); ++idx) {
    L.position(idx, std::span<double>(x.data(), N));
    if (dom.contains(std::span<const double>(x.data(), N))) pts.emplace_back(x.begin(), x.begin() + N);
  }
  QuadratureSpec q = opt.quad;
  q.estimate_error = false;
  double alpha = opt.alpha0;
  for (int step = 0; step < opt.steps; ++step, alpha *= opt.factor) {
    auto w = exp_decay_field(N, alpha, c);
    double worst = -kInf;
    int used = 0;
    for (auto& pt : pts) {
      Eigen::VectorXd rel(N);
      for (int i = 0; i < N; ++i) rel(i) = pt[i] - c[i];
      Eigen::MatrixXd Q = detail::aligned_basis(rel);
      BlockFrame F{p, Q.rightCols(p.k())};
      // Compare relative to w: far from the center w underflows and the raw
      // sign test would pass vacuously.
      const double wv = w->value(pt);
      if (!(wv > 1e-250)) continue;
      const double v = frame_objective(*w, pt, F, s, q).value / wv + mu;
      ++used;
      worst = std::max(worst, v);
      if (worst > 0) break;
    }
    if (worst <= 0) return LowerWitness{alpha, worst, used};
  }
  return std::nullopt;
}

}  // namespace ktrunc
