#pragma once

#include <string>
#include <vector>

namespace gradphi {

enum class PotentialKind { quadratic, logcosh, table };

// Even, normalized, uniformly convex elastic potential.
//   quadratic: V(x) = beta x^2,             V'' = 2 beta
//   logcosh:   V(x) = x^2/2 + a ln cosh x,  V'' = 1 + a (1 - tanh^2 x)
//   table:     symmetric samples of V on a uniform grid, cubic interpolation
class Potential {
 public:
  static Potential quadratic(double beta);
  static Potential logcosh(double a);
  static Potential table(std::vector<double> values, double x_max);
  // "kind:param[,param]" config strings, e.g. "quadratic:1.0", "logcosh:1.0".
  static Potential parse(const std::string& spec);

  PotentialKind kind() const { return kind_; }
  double beta() const { return beta_; }
  double a() const { return a_; }
  // Ellipticity lambda with lambda <= V'' <= 1/lambda.
  double lambda() const { return lambda_; }

  double eval(double x) const;
  double deriv(double x) const;
  double second_deriv(double x) const;

  std::string to_spec_string() const;

 private:
  PotentialKind kind_ = PotentialKind::quadratic;
  double beta_ = 1.0;
  double a_ = 1.0;
  double lambda_ = 0.5;
  std::vector<double> table_;
  double table_xmax_ = 0.0;
};

struct EllipticityReport {
  bool admissible = false;
  double lambda = 0.0;        // claimed lambda
  double min_second = 0.0;    // min V'' on the probe grid
  double max_second = 0.0;    // max V'' on the probe grid
  double symmetry_residual = 0.0;
  double value_at_zero = 0.0;
  double deriv_at_zero = 0.0;
  double offending_x = 0.0;   // first probe point violating a bound
  std::string reason;
};

// Probes V on x in [-50, 50] step 1e-3: symmetry, normalization, V'' within
// [lambda, 1/lambda] and the integrated growth bound
// lambda x^2 / 2 <= V(x) <= x^2 / (2 lambda).
EllipticityReport validate(const Potential& v);

}  // namespace gradphi
