#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace gradphi {

// Neumaier compensated accumulator; the n=4 identity tests need the
// 3^{2dn}-term energy sums accurate to ~1e-10 relative.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

// Gauss-Legendre nodes and weights on [0, 1], via Newton on Legendre P_k.
std::pair<std::vector<double>, std::vector<double>> gauss_legendre01(int k);

// Golden-section maximization of a unimodal function on [a, b].
double golden_section_max(const std::function<double(double)>& f, double a,
                          double b, double tol, double* arg = nullptr);

// Inverse standard normal CDF (Acklam's rational approximation with one
// Halley refinement; ~1e-15 absolute).
double normal_quantile(double p);

// Halton low-discrepancy point, dimension index -> prime base.
double halton(std::uint64_t index, int dim);

// Adaptive composite Simpson on [a, b] to tolerance tol.
double integrate_simpson(const std::function<double(double)>& f, double a,
                         double b, double tol);

// FNV-1a 64-bit content hash.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_str(const std::string& s);

}  // namespace gradphi
