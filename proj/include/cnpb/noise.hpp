#pragma once

// Two-sided Brownian sample paths for the common noise.
//
// A path lives on the grid t_j = j * dt, j in [first_index, last_index], and
// is anchored so that the value at t = 0 is exactly zero. Increment j (from
// t_j to t_{j+1}) is a pure function of (key, j), so extending the window in
// either direction never changes values that were already generated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cnpb/error.hpp"
#include "cnpb/random.hpp"

namespace cnpb {

class BrownianPath {
 public:
  BrownianPath() = default;

  /// Builds a path from explicit grid values (row-major, `dim` per point).
  /// The grid must contain t = 0 and the value there must be zero.
  static BrownianPath from_values(std::int64_t first_index, double dt, std::size_t dim,
                                  std::vector<double> values) {
    if (!(dt > 0.0)) throw InvalidParameter("path dt must be positive");
    if (dim == 0 || values.empty() || values.size() % dim != 0)
      throw InvalidParameter("path values must be a non-empty multiple of the dimension");
    BrownianPath p;
    p.dt_ = dt;
    p.dim_ = dim;
    p.first_ = first_index;
    p.values_ = std::move(values);
    if (p.first_ > 0 || p.last_index() < 0)
      throw InvalidParameter("path grid must contain t = 0");
    for (std::size_t c = 0; c < dim; ++c)
      if (p.values_[p.anchor() * dim + c] != 0.0)
        throw InvalidParameter("path value at t = 0 must be zero");
    return p;
  }

  /// The identically zero path on [t_start, t_end].
  static BrownianPath zero(double t_start, double t_end, double dt, std::size_t dim = 1) {
    const auto [lo, hi] = index_range(t_start, t_end, dt);
    return from_values(lo, dt, dim,
                       std::vector<double>(static_cast<std::size_t>(hi - lo + 1) * dim, 0.0));
  }

  double dt() const noexcept { return dt_; }
  std::size_t dim() const noexcept { return dim_; }
  std::int64_t first_index() const noexcept { return first_; }
  std::int64_t last_index() const noexcept {
    return first_ + static_cast<std::int64_t>(values_.size() / dim_) - 1;
  }
  std::size_t size() const noexcept { return values_.size() / dim_; }
  /// Position of t = 0 in the value array.
  std::size_t anchor() const noexcept { return static_cast<std::size_t>(-first_); }
  double t_start() const noexcept { return static_cast<double>(first_) * dt_; }
  double t_end() const noexcept { return static_cast<double>(last_index()) * dt_; }
  double time(std::int64_t j) const noexcept { return static_cast<double>(j) * dt_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::optional<NoiseStreamKey>& key() const noexcept { return key_; }
  std::int64_t increment_offset() const noexcept { return offset_; }
  std::uint64_t seed_id() const noexcept { return key_ ? key_->particle_id : 0; }

  /// Value at grid index j (component c).
  double at_index(std::int64_t j, std::size_t c = 0) const {
    if (j < first_ || j > last_index())
      throw WindowError("path index outside stored window");
    return values_[static_cast<std::size_t>(j - first_) * dim_ + c];
  }

  bool covers(double t0, double t1) const noexcept {
    const double slack = 1e-9 * dt_;
    return t0 >= t_start() - slack && t1 <= t_end() + slack;
  }

  /// Piecewise-linear evaluation; exact at grid points.
  double value_at(double t, std::size_t c = 0) const {
    const double u = t / dt_;
    const double j_near = std::round(u);
    if (std::abs(u - j_near) <= 1e-9 * std::max(1.0, std::abs(u)))
      return at_index(static_cast<std::int64_t>(j_near), c);
    const auto j = static_cast<std::int64_t>(std::floor(u));
    if (j < first_ || j + 1 > last_index())
      throw WindowError("path evaluated outside stored window at t = " + std::to_string(t));
    const double w = u - static_cast<double>(j);
    const double a = at_index(j, c);
    const double b = at_index(j + 1, c);
    return a + w * (b - a);
  }

  /// Grid index range [lo, hi] covering [t_start, t_end], rounded outwards.
  static std::pair<std::int64_t, std::int64_t> index_range(double t_start, double t_end,
                                                           double dt) {
    if (!(dt > 0.0)) throw InvalidParameter("path dt must be positive");
    if (!(t_start <= 0.0 && 0.0 <= t_end))
      throw InvalidParameter("path window must satisfy t_start <= 0 <= t_end");
    if (!(t_end > t_start)) throw InvalidParameter("path window is empty");
    const auto lo = static_cast<std::int64_t>(std::floor(t_start / dt + 1e-9));
    const auto hi = static_cast<std::int64_t>(std::ceil(t_end / dt - 1e-9));
    return {lo, hi};
  }

 private:
  friend BrownianPath sample_path(const NoiseStreamKey&, double, double, double, std::size_t);
  friend BrownianPath wiener_shift(const BrownianPath&, double);
  friend BrownianPath extend_backwards(const BrownianPath&, double);
  friend BrownianPath extend_forwards(const BrownianPath&, double);

  double increment(std::int64_t j, std::size_t c) const {
    const std::int64_t idx = (j + offset_) * static_cast<std::int64_t>(dim_) +
                             static_cast<std::int64_t>(c);
    return std::sqrt(dt_) *
           stream_normal(key_->master_seed, key_->stream_role, key_->particle_id, idx);
  }

  double dt_ = 1.0;
  std::size_t dim_ = 1;
  std::int64_t first_ = 0;
  std::vector<double> values_{0.0};
  std::optional<NoiseStreamKey> key_;
  // Grid index j of this path reads increment j + offset_ of the stream.
  std::int64_t offset_ = 0;
};

/// Samples a path on [t_start, t_end] (rounded outwards to the dt grid).
/// Only master_seed, stream_role and particle_id of the key are used; the
/// block index is derived from the increment index.
inline BrownianPath sample_path(const NoiseStreamKey& key, double t_start, double t_end,
                                double dt, std::size_t dim = 1) {
  const auto [lo, hi] = BrownianPath::index_range(t_start, t_end, dt);
  if (dim == 0) throw InvalidParameter("path dimension must be at least 1");
  BrownianPath p;
  p.dt_ = dt;
  p.dim_ = dim;
  p.first_ = lo;
  NoiseStreamKey k = key;
  k.block_index = 0;
  p.key_ = k;
  p.values_.assign(static_cast<std::size_t>(hi - lo + 1) * dim, 0.0);
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::int64_t j = 0; j < hi; ++j) {
      const auto i = static_cast<std::size_t>(j - lo);
      p.values_[(i + 1) * dim + c] = p.values_[i * dim + c] + p.increment(j, c);
    }
    for (std::int64_t j = -1; j >= lo; --j) {
      const auto i = static_cast<std::size_t>(j - lo);
      p.values_[i * dim + c] = p.values_[(i + 1) * dim + c] - p.increment(j, c);
    }
  }
  return p;
}

/// (theta_t xi)(s) = xi(s + t) - xi(t). t must be a grid time inside the window.
inline BrownianPath wiener_shift(const BrownianPath& path, double t) {
  const double u = t / path.dt_;
  const double k_real = std::round(u);
  if (std::abs(u - k_real) > 1e-9 * std::max(1.0, std::abs(u)))
    throw InvalidParameter("wiener_shift requires a shift on the path grid");
  const auto k = static_cast<std::int64_t>(k_real);
  if (k < path.first_ || k > path.last_index())
    throw WindowError("wiener_shift by a time outside the stored window");
  BrownianPath out = path;
  out.first_ = path.first_ - k;
  out.offset_ = path.offset_ + k;
  const std::size_t d = path.dim_;
  const std::size_t base = static_cast<std::size_t>(k - path.first_) * d;
  std::vector<double> ref(path.values_.begin() + static_cast<std::ptrdiff_t>(base),
                          path.values_.begin() + static_cast<std::ptrdiff_t>(base + d));
  for (std::size_t i = 0; i < out.values_.size(); ++i) out.values_[i] -= ref[i % d];
  // Re-anchoring must leave an exact zero at the new origin.
  for (std::size_t c = 0; c < d; ++c) out.values_[base + c] = 0.0;
  return out;
}

/// Extends the window to [t_start - extra_duration, t_end]; existing values
/// are untouched.
inline BrownianPath extend_backwards(const BrownianPath& path, double extra_duration) {
  if (!(extra_duration > 0.0)) throw InvalidParameter("extension must be positive");
  if (!path.key_) throw InvalidParameter("path has no generating key and cannot be extended");
  const auto extra = static_cast<std::int64_t>(std::ceil(extra_duration / path.dt_ - 1e-9));
  const std::size_t d = path.dim_;
  BrownianPath out = path;
  out.first_ = path.first_ - extra;
  std::vector<double> head(static_cast<std::size_t>(extra) * d, 0.0);
  out.values_.insert(out.values_.begin(), head.begin(), head.end());
  for (std::size_t c = 0; c < d; ++c) {
    for (std::int64_t j = path.first_ - 1; j >= out.first_; --j) {
      const auto i = static_cast<std::size_t>(j - out.first_);
      out.values_[i * d + c] = out.values_[(i + 1) * d + c] - out.increment(j, c);
    }
  }
  return out;
}

/// Extends the window to [t_start, t_end + extra_duration].
inline BrownianPath extend_forwards(const BrownianPath& path, double extra_duration) {
  if (!(extra_duration > 0.0)) throw InvalidParameter("extension must be positive");
  if (!path.key_) throw InvalidParameter("path has no generating key and cannot be extended");
  const auto extra = static_cast<std::int64_t>(std::ceil(extra_duration / path.dt_ - 1e-9));
  const std::size_t d = path.dim_;
  BrownianPath out = path;
  const std::int64_t old_last = path.last_index();
  out.values_.resize(out.values_.size() + static_cast<std::size_t>(extra) * d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::int64_t j = old_last; j < old_last + extra; ++j) {
      const auto i = static_cast<std::size_t>(j - out.first_);
      out.values_[(i + 1) * d + c] = out.values_[i * d + c] + out.increment(j, c);
    }
  }
  return out;
}

/// Returns a path whose window covers [t0, t1], extending as needed.
inline BrownianPath ensure_window(BrownianPath path, double t0, double t1) {
  if (t0 < path.t_start()) path = extend_backwards(path, path.t_start() - t0);
  if (t1 > path.t_end()) path = extend_forwards(path, t1 - path.t_end());
  return path;
}

// CSV: header "t,b0[,b1...]", one row per grid point.
inline void write_path_csv(const BrownianPath& p, std::ostream& os) {
  os << "t";
  for (std::size_t c = 0; c < p.dim(); ++c) os << ",b" << c;
  os << '\n';
  os.precision(17);
  for (std::int64_t j = p.first_index(); j <= p.last_index(); ++j) {
    os << p.time(j);
    for (std::size_t c = 0; c < p.dim(); ++c) os << ',' << p.at_index(j, c);
    os << '\n';
  }
}

/// Reads a path written by write_path_csv. The result carries no generating
/// key, so it cannot be extended.
inline BrownianPath read_path_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t", 0) != 0)
    throw InvalidParameter("path CSV must start with a 't,...' header");
  std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (dim == 0) throw InvalidParameter("path CSV has no value columns");
  std::vector<double> times, values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    times.push_back(std::stod(cell));
    for (std::size_t c = 0; c < dim; ++c) {
      if (!std::getline(ss, cell, ',')) throw InvalidParameter("short row in path CSV");
      values.push_back(std::stod(cell));
    }
  }
  if (times.size() < 2) throw InvalidParameter("path CSV needs at least two rows");
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  const auto first = static_cast<std::int64_t>(std::llround(times.front() / dt));
  return BrownianPath::from_values(first, dt, dim, std::move(values));
}

}  // namespace cnpb
