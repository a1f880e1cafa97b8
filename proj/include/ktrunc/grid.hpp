#pragma once

#include <charconv>
#include <fstream>
#include <sstream>

#include "ktrunc/fields.hpp"

namespace ktrunc {

struct Ball {
  std::vector<double> center;
  double R = 1.0;
};

// A ball, an intersection of balls, or an axis-aligned box.
class Domain {
 public:
  enum class Kind { balls, box };

  static Domain ball(std::vector<double> center, double R) { return balls({Ball{std::move(center), R}}); }

  static Domain balls(std::vector<Ball> bs) {
    if (bs.empty()) throw std::invalid_argument("domain needs at least one ball");
    Domain d;
    d.kind_ = Kind::balls;
    d.N_ = static_cast<int>(bs.front().center.size());
    check_dim(d.N_);
    for (auto& b : bs) {
      if (static_cast<int>(b.center.size()) != d.N_) throw std::invalid_argument("ball centers differ in dimension");
      if (!(b.R > 0) || !std::isfinite(b.R)) throw std::invalid_argument("ball radius must be positive");
    }
    d.balls_ = std::move(bs);
    d.lo_.assign(d.N_, -kInf);
    d.hi_.assign(d.N_, kInf);
    for (auto& b : d.balls_)
      for (int i = 0; i < d.N_; ++i) {
        d.lo_[i] = std::max(d.lo_[i], b.center[i] - b.R);
        d.hi_[i] = std::min(d.hi_[i], b.center[i] + b.R);
      }
    for (int i = 0; i < d.N_; ++i)
      if (!(d.lo_[i] < d.hi_[i])) throw std::invalid_argument("ball intersection is empty");
    return d;
  }

  static Domain box(std::vector<double> lo, std::vector<double> hi) {
    Domain d;
    d.kind_ = Kind::box;
    d.N_ = static_cast<int>(lo.size());
    check_dim(d.N_);
    if (hi.size() != lo.size()) throw std::invalid_argument("box corners differ in dimension");
    for (int i = 0; i < d.N_; ++i)
      if (!(lo[i] < hi[i])) throw std::invalid_argument("box must have positive extent");
    d.lo_ = std::move(lo);
    d.hi_ = std::move(hi);
    return d;
  }

  int dim() const { return N_; }
  Kind kind() const { return kind_; }
  const std::vector<Ball>& ball_list() const { return balls_; }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }

  std::vector<double> center() const {
    if (kind_ == Kind::balls && balls_.size() == 1) return balls_.front().center;
    std::vector<double> c(N_);
    for (int i = 0; i < N_; ++i) c[i] = 0.5 * (lo_[i] + hi_[i]);
    return c;
  }

  // Open set membership.
  bool contains(std::span<const double> x) const {
    if (kind_ == Kind::box) {
      for (int i = 0; i < N_; ++i)
        if (!(x[i] > lo_[i] && x[i] < hi_[i])) return false;
      return true;
    }
    for (auto& b : balls_)
      if (!(detail::dist2(x, b.center) < b.R * b.R)) return false;
    return true;
  }

  double distance_to_boundary(std::span<const double> x) const {
    double d = kInf;
    if (kind_ == Kind::box) {
      for (int i = 0; i < N_; ++i) d = std::min({d, x[i] - lo_[i], hi_[i] - x[i]});
      return d;
    }
    for (auto& b : balls_) d = std::min(d, b.R - std::sqrt(detail::dist2(x, b.center)));
    return d;
  }

  // Distance along unit direction dir from interior x to the boundary.
  double exit_distance(std::span<const double> x, std::span<const double> dir) const {
    double t = kInf;
    if (kind_ == Kind::box) {
      for (int i = 0; i < N_; ++i) {
        if (dir[i] > 0) t = std::min(t, (hi_[i] - x[i]) / dir[i]);
        if (dir[i] < 0) t = std::min(t, (lo_[i] - x[i]) / dir[i]);
      }
      return std::max(t, 0.0);
    }
    for (auto& b : balls_) {
      double bb = 0, q = 0;
      for (int i = 0; i < N_; ++i) {
        const double y = x[i] - b.center[i];
        bb += dir[i] * y;
        q += y * y;
      }
      const double c = b.R * b.R - q;
      if (c <= 0) return 0.0;
      t = std::min(t, c / (bb + std::sqrt(bb * bb + c)));
    }
    return t;
  }

  double diameter() const {
    double d2 = 0;
    for (int i = 0; i < N_; ++i) d2 += (hi_[i] - lo_[i]) * (hi_[i] - lo_[i]);
    double d = std::sqrt(d2);
    if (kind_ == Kind::balls)
      for (auto& b : balls_) d = std::min(d, 2 * b.R);
    return d;
  }

  json to_json() const {
    if (kind_ == Kind::box) return {{"type", "box"}, {"lo", lo_}, {"hi", hi_}};
    if (balls_.size() == 1) return {{"type", "ball"}, {"center", balls_[0].center}, {"R", balls_[0].R}};
    json arr = json::array();
    for (auto& b : balls_) arr.push_back({{"center", b.center}, {"R", b.R}});
    return {{"type", "ball_intersection"}, {"balls", arr}};
  }

  static Domain from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "ball") return ball(j.at("center").get<std::vector<double>>(), j.at("R").get<double>());
    if (type == "box") return box(j.at("lo").get<std::vector<double>>(), j.at("hi").get<std::vector<double>>());
    if (type == "ball_intersection") {
      // Either an explicit list of balls or a common radius R with centers Y.
      std::vector<Ball> bs;
      if (j.contains("balls")) {
        for (auto& b : j.at("balls")) bs.push_back({b.at("center").get<std::vector<double>>(), b.at("R").get<double>()});
      } else {
        const double R = j.at("R").get<double>();
        for (auto& y : j.at("Y")) bs.push_back({y.get<std::vector<double>>(), R});
      }
      return balls(std::move(bs));
    }
    throw std::invalid_argument("unknown domain type '" + type + "'");
  }

 private:
  Kind kind_ = Kind::balls;
  int N_ = 0;
  std::vector<Ball> balls_;
  std::vector<double> lo_, hi_;
};

// Regular lattice covering the closure of a domain with one layer of
// exterior nodes; the domain center is a lattice node.
struct Lattice {
  int N = 0;
  double h = 0;
  std::vector<double> origin;
  std::vector<int> dims;

  std::size_t size() const {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t stride(int axis) const {
    std::size_t st = 1;
    for (int i = N - 1; i > axis; --i) st *= static_cast<std::size_t>(dims[i]);
    return st;
  }
  void index_to_multi(std::size_t idx, std::span<int> m) const {
    for (int i = N - 1; i >= 0; --i) {
      m[i] = static_cast<int>(idx % dims[i]);
      idx /= dims[i];
    }
  }
  std::size_t multi_to_index(std::span<const int> m) const {
    std::size_t idx = 0;
    for (int i = 0; i < N; ++i) idx = idx * dims[i] + static_cast<std::size_t>(m[i]);
    return idx;
  }
  void position(std::size_t idx, std::span<double> x) const {
    std::array<int, kMaxDim> m{};
    index_to_multi(idx, std::span<int>(m.data(), N));
    for (int i = 0; i < N; ++i) x[i] = origin[i] + h * m[i];
  }

  static Lattice covering(const Domain& dom, double h) {
    if (!(h > 0) || !std::isfinite(h)) throw std::invalid_argument("grid spacing must be positive");
    Lattice L;
    L.N = dom.dim();
    L.h = h;
    auto c = dom.center();
    for (int i = 0; i < L.N; ++i) {
      const int below = static_cast<int>(std::ceil((c[i] - dom.lo()[i]) / h - 1e-9)) + 1;
      const int above = static_cast<int>(std::ceil((dom.hi()[i] - c[i]) / h - 1e-9)) + 1;
      L.origin.push_back(c[i] - below * h);
      L.dims.push_back(below + above + 1);
    }
    if (L.size() > 50'000'000) throw std::invalid_argument("grid too fine for this domain");
    return L;
  }
};

// Lattice values; exactly zero outside the domain, multilinear inside.
class GridField final : public ScalarField {
 public:
  GridField(Domain dom, Lattice lat, std::vector<double> values)
      : ScalarField(dom.dim()), dom_(std::move(dom)), lat_(std::move(lat)), v_(std::move(values)) {
    if (v_.size() != lat_.size()) throw std::invalid_argument("grid values do not match lattice size");
  }
  std::string tag() const override { return "grid"; }
  json params() const override { return {{"h", lat_.h}, {"domain", dom_.to_json()}}; }
  double bound() const override {
    double b = 0;
    for (double v : v_) b = std::max(b, std::abs(v));
    return b;
  }
  bool smooth_at(std::span<const double>) const override { return false; }

  double value(std::span<const double> x) const override {
    if (!dom_.contains(x)) return 0.0;
    return interpolate(x);
  }

  // Multilinear interpolation of the stored values (no domain test).
  double interpolate(std::span<const double> x) const {
    const int N = lat_.N;
    std::array<int, kMaxDim> base{};
    Buf frac{};
    std::size_t idx0 = 0;
    for (int i = 0; i < N; ++i) {
      const double t = (x[i] - lat_.origin[i]) / lat_.h;
      int j = static_cast<int>(std::floor(t));
      j = std::clamp(j, 0, lat_.dims[i] - 2);
      base[i] = j;
      frac[i] = std::clamp(t - j, 0.0, 1.0);
      idx0 = idx0 * lat_.dims[i] + j;
    }
    double acc = 0;
    for (int corner = 0; corner < (1 << N); ++corner) {
      double w = 1;
      std::size_t idx = idx0;
      for (int i = 0; i < N; ++i) {
        if (corner & (1 << i)) {
          w *= frac[i];
          idx += lat_.stride(i);
        } else {
          w *= 1 - frac[i];
        }
      }
      if (w != 0) acc += w * v_[idx];
    }
    return acc;
  }

  const Domain& domain() const { return dom_; }
  const Lattice& lattice() const { return lat_; }
  const std::vector<double>& values() const { return v_; }

 private:
  Domain dom_;
  Lattice lat_;
  std::vector<double> v_;
};

inline GridField grid_sample(const ScalarField& u, const Domain& dom, double h) {
  if (u.dim() != dom.dim()) throw std::invalid_argument("grid_sample: field and domain differ in dimension");
  Lattice L = Lattice::covering(dom, h);
  std::vector<double> v(L.size(), 0.0);
  Buf x{};
  for (std::size_t i = 0; i < L.size(); ++i) {
    L.position(i, std::span<double>(x.data(), L.N));
    std::span<const double> xs(x.data(), L.N);
    if (dom.contains(xs)) v[i] = u.value(xs);
  }
  return GridField(dom, std::move(L), std::move(v));
}

inline double grid_eval(const GridField& g, std::span<const double> x) { return g.value(x); }

// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::invalid_argument("malformed number '" + std::string(s) + "'");
  return v;
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

inline json grid_metadata(const GridField& g) {
  const auto& L = g.lattice();
  return {{"schema_version", 1},
          {"N", L.N},
          {"h", L.h},
          {"origin", L.origin},
          {"dims", L.dims},
          {"domain", g.domain().to_json()},
          {"exterior", "zero"},
          {"interpolation", "multilinear"},
          {"node_count", L.size()}};
}

inline void write_grid_csv(const GridField& g, std::ostream& os) {
  const auto& L = g.lattice();
  os << "# ktrunc-grid 1\n";
  os << "# N=" << L.N << "\n";
  os << "# h=" << fmt(L.h) << "\n";
  os << "# origin=" << join(L.origin) << "\n";
  os << "# dims=";
  for (int i = 0; i < L.N; ++i) os << (i ? "," : "") << L.dims[i];
  os << "\n# domain=" << g.domain().to_json().dump() << "\n";
  for (int i = 0; i < L.N; ++i) os << "i" << i << ",";
  os << "value\n";
  std::array<int, kMaxDim> m{};
  for (std::size_t idx = 0; idx < L.size(); ++idx) {
    L.index_to_multi(idx, std::span<int>(m.data(), L.N));
    for (int i = 0; i < L.N; ++i) os << m[i] << ",";
    os << fmt(g.values()[idx]) << "\n";
  }
}

inline GridField read_grid_csv(std::istream& is) {
  std::string line;
  auto header = [&](const std::string& key) {
    if (!std::getline(is, line) || line.rfind("# " + key + "=", 0) != 0)
      throw std::invalid_argument("grid csv: expected header '" + key + "'");
    return line.substr(key.size() + 3);
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string p;
    while (std::getline(ss, p, ',')) parts.push_back(p);
    return parts;
  };
  if (!std::getline(is, line) || line != "# ktrunc-grid 1") throw std::invalid_argument("grid csv: bad magic line");
  Lattice L;
  L.N = std::stoi(header("N"));
  check_dim(L.N);
  L.h = parse_double(header("h"));
  for (auto& p : split(header("origin"))) L.origin.push_back(parse_double(p));
  for (auto& p : split(header("dims"))) L.dims.push_back(std::stoi(p));
  Domain dom = Domain::from_json(json::parse(header("domain")));
  if (static_cast<int>(L.origin.size()) != L.N || static_cast<int>(L.dims.size()) != L.N || dom.dim() != L.N)
    throw std::invalid_argument("grid csv: inconsistent header");
  for (int d : L.dims)
    if (d < 2) throw std::invalid_argument("grid csv: lattice too small");
  if (!std::getline(is, line)) throw std::invalid_argument("grid csv: missing column header");
  std::vector<double> v(L.size());
  std::vector<bool> seen(L.size(), false);
  std::array<int, kMaxDim> m{};
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto parts = split(line);
    if (static_cast<int>(parts.size()) != L.N + 1) throw std::invalid_argument("grid csv: malformed row");
    for (int i = 0; i < L.N; ++i) {
      m[i] = std::stoi(parts[i]);
      if (m[i] < 0 || m[i] >= L.dims[i]) throw std::invalid_argument("grid csv: index out of range");
    }
    const auto idx = L.multi_to_index(std::span<const int>(m.data(), L.N));
    if (seen[idx]) throw std::invalid_argument("grid csv: duplicate row");
    seen[idx] = true;
    v[idx] = parse_double(parts[L.N]);
    ++rows;
  }
  if (rows != L.size()) throw std::invalid_argument("grid csv: missing rows");
  return GridField(std::move(dom), std::move(L), std::move(v));
}

inline void save_grid(const GridField& g, const std::string& csv_path, const std::string& json_path) {
  std::ofstream os(csv_path);
  if (!os) throw Error("cannot write " + csv_path);
  write_grid_csv(g, os);
  std::ofstream js(json_path);
  if (!js) throw Error("cannot write " + json_path);
  js << grid_metadata(g).dump(2) << "\n";
}

inline GridField load_grid(const std::string& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw std::invalid_argument("cannot read " + csv_path);
  return read_grid_csv(is);
}

}  // namespace ktrunc
