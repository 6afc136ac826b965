#include "gradphi/potential.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gradphi {

Potential Potential::quadratic(double beta) {
  if (!(beta > 0)) throw std::invalid_argument("quadratic potential needs beta > 0");
  Potential v;
  v.kind_ = PotentialKind::quadratic;
  v.beta_ = beta;
  // V'' = 2 beta: lambda = min(2 beta, 1/(2 beta)) keeps lambda <= V'' <= 1/lambda.
  v.lambda_ = std::min(2 * beta, 1.0 / (2 * beta));
  return v;
}

Potential Potential::logcosh(double a) {
  if (a < 0) throw std::invalid_argument("logcosh potential needs a >= 0");
  Potential v;
  v.kind_ = PotentialKind::logcosh;
  v.a_ = a;
  // V'' ranges over [1, 1 + a].
  v.lambda_ = 1.0 / (1.0 + a);
  return v;
}

Potential Potential::table(std::vector<double> values, double x_max) {
  // Samples on the full grid [-x_max, x_max]; odd count so x = 0 is a node.
  if (values.size() < 5 || values.size() % 2 == 0 || x_max <= 0)
    throw std::invalid_argument(
        "table potential needs an odd sample count >= 5 and x_max > 0");
  Potential v;
  v.kind_ = PotentialKind::table;
  v.table_ = std::move(values);
  v.table_xmax_ = x_max;
  v.lambda_ = 0.5;
  return v;
}

Potential Potential::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  std::vector<double> params;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) params.push_back(std::stod(tok));
    }
  }
  if (kind == "quadratic") {
    if (params.size() != 1) throw std::invalid_argument("quadratic:<beta>");
    return quadratic(params[0]);
  }
  if (kind == "logcosh") {
    if (params.size() != 1) throw std::invalid_argument("logcosh:<a>");
    return logcosh(params[0]);
  }
  if (kind == "table") {
    if (params.size() < 6) throw std::invalid_argument("table:<x_max>,<v0>,<v1>,...");
    return table({params.begin() + 1, params.end()}, params[0]);
  }
  throw std::invalid_argument("unknown potential kind: " + kind);
}

std::string Potential::to_spec_string() const {
  std::ostringstream os;
  switch (kind_) {
    case PotentialKind::quadratic: os << "quadratic:" << beta_; break;
    case PotentialKind::logcosh: os << "logcosh:" << a_; break;
    case PotentialKind::table:
      os << "table:" << table_xmax_;
      for (double v : table_) os << ',' << v;
      break;
  }
  return os.str();
}

namespace {

// Catmull-Rom interpolation of samples on [-x_max, x_max].
double table_eval(const std::vector<double>& t, double xmax, double x) {
  const int n = static_cast<int>(t.size());
  const double h = 2 * xmax / (n - 1);
  if (x >= xmax) {
    // Quadratic continuation matching value, slope and curvature at the edge.
    const double s1 = (t[n - 1] - t[n - 2]) / h;
    const double c = (t[n - 1] - 2 * t[n - 2] + t[n - 3]) / (h * h);
    const double dx = x - xmax;
    return t[n - 1] + s1 * dx + 0.5 * c * dx * dx;
  }
  if (x <= -xmax) {
    const double s1 = (t[1] - t[0]) / h;
    const double c = (t[2] - 2 * t[1] + t[0]) / (h * h);
    const double dx = x + xmax;
    return t[0] + s1 * dx + 0.5 * c * dx * dx;
  }
  const double u = (x + xmax) / h;
  const int i = std::min(static_cast<int>(u), n - 2);
  const double s = u - i;
  const double p0 = i > 0 ? t[i - 1] : 2 * t[0] - t[1];
  const double p1 = t[i];
  const double p2 = t[i + 1];
  const double p3 = i + 2 < n ? t[i + 2] : 2 * t[n - 1] - t[n - 2];
  return p1 + 0.5 * s * (p2 - p0 +
                         s * (2 * p0 - 5 * p1 + 4 * p2 - p3 +
                              s * (3 * (p1 - p2) + p3 - p0)));
}

}  // namespace

double Potential::eval(double x) const {
  switch (kind_) {
    case PotentialKind::quadratic:
      return beta_ * x * x;
    case PotentialKind::logcosh: {
      // ln cosh with overflow-safe tail.
      const double ax = std::abs(x);
      const double lc = ax > 30 ? ax - M_LN2 : std::log(std::cosh(ax));
      return 0.5 * x * x + a_ * lc;
    }
    case PotentialKind::table:
      return table_eval(table_, table_xmax_, x);
  }
  return 0;
}

double Potential::deriv(double x) const {
  switch (kind_) {
    case PotentialKind::quadratic:
      return 2 * beta_ * x;
    case PotentialKind::logcosh:
      return x + a_ * std::tanh(x);
    case PotentialKind::table: {
      const double h = 1e-5;
      return (eval(x + h) - eval(x - h)) / (2 * h);
    }
  }
  return 0;
}

double Potential::second_deriv(double x) const {
  switch (kind_) {
    case PotentialKind::quadratic:
      return 2 * beta_;
    case PotentialKind::logcosh: {
      const double t = std::tanh(x);
      return 1 + a_ * (1 - t * t);
    }
    case PotentialKind::table: {
      const double h = 1e-4;
      return (eval(x + h) - 2 * eval(x) + eval(x - h)) / (h * h);
    }
  }
  return 0;
}

EllipticityReport validate(const Potential& v) {
  EllipticityReport rep;
  rep.lambda = v.lambda();
  rep.value_at_zero = v.eval(0.0);
  rep.deriv_at_zero = v.deriv(0.0);
  rep.min_second = 1e300;
  rep.max_second = -1e300;

  const double step = 1e-3;
  // Symmetry sweep first: an asymmetric table pollutes every derived probe.
  for (double x = 0.0; x <= 50.0 + step / 2; x += step) {
    const double sym = std::abs(v.eval(x) - v.eval(-x));
    rep.symmetry_residual = std::max(rep.symmetry_residual, sym);
    if (sym > 1e-9 * (1 + std::abs(v.eval(x)))) {
      rep.offending_x = x;
      rep.reason = "symmetry violation";
      return rep;
    }
  }
  if (std::abs(rep.value_at_zero) > 1e-12) {
    rep.reason = "V(0) != 0";
    return rep;
  }
  if (std::abs(rep.deriv_at_zero) > 1e-9) {
    rep.reason = "V'(0) != 0";
    return rep;
  }
  const double lam = v.lambda();
  if (!(lam > 0 && lam <= 1)) {
    rep.reason = "lambda not in (0, 1]";
    return rep;
  }

  const double tol = 1e-7;  // probe slack for interpolated kinds
  for (double x = 0.0; x <= 50.0 + step / 2; x += step) {
    const double dd = v.second_deriv(x);
    rep.min_second = std::min(rep.min_second, dd);
    rep.max_second = std::max(rep.max_second, dd);
    if (dd < lam - tol || dd > 1.0 / lam + tol) {
      rep.offending_x = x;
      rep.reason = "second derivative outside [lambda, 1/lambda]";
      return rep;
    }
    const double val = v.eval(x);
    if (val < 0.5 * lam * x * x - tol || val > 0.5 * x * x / lam + tol) {
      rep.offending_x = x;
      rep.reason = "growth bound violation";
      return rep;
    }
  }
  rep.admissible = true;
  return rep;
}

}  // namespace gradphi
