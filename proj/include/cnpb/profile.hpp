#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cnpb/error.hpp"

namespace cnpb {

/// Tabulated contraction data: the rate function k, the weight phi and its
/// integral Phi, the correction g, and the concave distance function f with
/// f' = phi * g. Built by build_profile (contraction.hpp).
struct ContractionProfile {
  std::string id;
  std::vector<double> r_grid;  // starts at 0, strictly increasing
  std::vector<double> k_values;
  std::vector<double> phi;
  std::vector<double> Phi;
  std::vector<double> g;
  std::vector<double> f;
  std::vector<double> f_prime;
  double R0 = 0.0;
  double R1 = 0.0;
  double alpha = 1.0;
  double c = 0.0;
  double sigma = 1.0;

  std::size_t size() const noexcept { return r_grid.size(); }

  /// phi(R0); f' is bounded below by half of it.
  double phi_R0() const noexcept { return phi.empty() ? 1.0 : phi.back(); }

  /// Bridge constant between W1 and W_f: W1 <= K * W_f.
  double bridge_constant() const noexcept { return 2.0 / phi_R0(); }

  /// f(r), linear interpolation on the table and linear continuation with
  /// slope phi(R0)/2 beyond it.
  double f_at(double r) const {
    if (r <= 0.0) return 0.0;
    if (r >= r_grid.back()) return f.back() + f_prime.back() * (r - r_grid.back());
    const auto it = std::upper_bound(r_grid.begin(), r_grid.end(), r);
    const auto i = static_cast<std::size_t>(it - r_grid.begin()) - 1;
    const double w = (r - r_grid[i]) / (r_grid[i + 1] - r_grid[i]);
    return f[i] + w * (f[i + 1] - f[i]);
  }

  /// Throws unless f(0) = 0, f'(0) = 1 and f is non-decreasing and concave
  /// on the table.
  void validate() const {
    const std::size_t n = r_grid.size();
    if (n < 2 || f.size() != n || f_prime.size() != n)
      throw InvalidParameter("contraction profile tables are inconsistent");
    if (std::abs(f[0]) > 1e-12 || std::abs(f_prime[0] - 1.0) > 1e-9)
      throw InvalidParameter("contraction profile needs f(0) = 0 and f'(0) = 1");
    for (std::size_t i = 1; i < n; ++i) {
      if (f[i] < f[i - 1] - 1e-12) throw InvalidParameter("profile f is not non-decreasing");
      if (f_prime[i] > f_prime[i - 1] + 1e-9) throw InvalidParameter("profile f is not concave");
    }
  }
};

}  // namespace cnpb
