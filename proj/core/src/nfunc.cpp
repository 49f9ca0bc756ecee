#include "quasihom/nfunc.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstring>
#include <string>

#include "quasihom/error.hpp"

namespace quasihom {

const char* to_string(NFunctionKind kind) {
  switch (kind) {
    case NFunctionKind::kPower: return "power";
    case NFunctionKind::kRegC1: return "reg_c1";
    case NFunctionKind::kRegC2: return "reg_c2";
  }
  return "unknown";
}

NFunctionKind parse_nfunction_kind(const char* name) {
  if (std::strcmp(name, "power") == 0) return NFunctionKind::kPower;
  if (std::strcmp(name, "reg_c1") == 0) return NFunctionKind::kRegC1;
  if (std::strcmp(name, "reg_c2") == 0) return NFunctionKind::kRegC2;
  fail(ErrorCode::kInvalidArgument, std::string("unknown N-function kind '") + name + "'");
}

NFunction::NFunction(NFunctionKind kind, double p, double eps_minus, double eps_plus)
    : kind_(kind), p_(p), eps_minus_(eps_minus), eps_plus_(eps_plus) {
  if (!(p > 1.0)) fail(ErrorCode::kInvalidArgument, "exponent p must exceed 1");
  if (kind != NFunctionKind::kPower) {
    if (!(eps_minus >= 0.0)) fail(ErrorCode::kInvalidArgument, "eps_minus must be >= 0");
    if (!(eps_plus > eps_minus)) fail(ErrorCode::kInvalidArgument, "eps_plus must exceed eps_minus");
  }
}

NFunction NFunction::power(double p) { return {NFunctionKind::kPower, p, 0.0, kInfinity}; }

NFunction NFunction::reg_c1(double p, double eps_minus, double eps_plus) {
  return {NFunctionKind::kRegC1, p, eps_minus, eps_plus};
}

NFunction NFunction::reg_c2(double p, double eps_minus, double eps_plus) {
  return {NFunctionKind::kRegC2, p, eps_minus, eps_plus};
}

NFunction NFunction::from_eps_pow(NFunctionKind kind, double p, double eps_minus_pow, double eps_plus) {
  if (kind == NFunctionKind::kPower) return power(p);
  if (!(eps_minus_pow >= 0.0)) fail(ErrorCode::kInvalidArgument, "eps_minus^(p-2) must be >= 0");
  const double eps_minus = (p == 2.0) ? 0.0 : std::pow(eps_minus_pow, 1.0 / (p - 2.0));
  return {kind, p, eps_minus, eps_plus};
}

NFunction NFunction::solver_default(double p) {
  return from_eps_pow(NFunctionKind::kRegC1, p, 1e-6);
}

NFunctionValues NFunction::eval(double t) const {
  if (!(t >= 0.0)) fail(ErrorCode::kDomainError, "N-function argument must be >= 0");
  const double p = p_;
  const auto power_piece = [p](double s) {
    const double s_pm2 = std::pow(s, p - 2.0);
    return NFunctionValues{s_pm2 * s * s / p, s_pm2 * s, (p - 1.0) * s_pm2};
  };
  if (kind_ == NFunctionKind::kPower) return power_piece(t);

  const double em = eps_minus_;
  const double ep = eps_plus_;
  // eps_minus == 0 leaves no lower piece.
  const bool lower = em > 0.0 && t <= em;
  if (kind_ == NFunctionKind::kRegC1) {
    if (lower) {
      const double c = std::pow(em, p - 2.0);
      return {0.5 * c * t * t + (1.0 / p - 0.5) * c * em * em, c * t, c};
    }
    if (t <= ep) return power_piece(t);
    const double c = std::pow(ep, p - 2.0);
    return {0.5 * c * t * t + (1.0 / p - 0.5) * c * ep * ep, c * t, c};
  }

  if (lower) {
    const double c = std::pow(em, p - 2.0);
    const double tp = std::pow(t, p);
    const double inv_em2 = 1.0 / (em * em);
    return {c * t * t / p + (p - 2.0) / (p * p + 2.0 * p) * inv_em2 * tp * t * t -
                (p - 2.0) / (p * (p + 2.0)) * c * em * em,
            2.0 / p * c * t + (p - 2.0) / p * inv_em2 * tp * t,
            2.0 / p * c + (p - 2.0) * (p + 1.0) / p * inv_em2 * tp};
  }
  if (t <= ep) return power_piece(t);
  // Quadratic continuation matching phi, phi' and phi'' at eps_plus.
  const double c = std::pow(ep, p - 2.0);
  return {0.5 * (p - 1.0) * c * t * t + (2.0 - p) * c * ep * t + (p * p - 3.0 * p + 2.0) / (2.0 * p) * c * ep * ep,
          (p - 1.0) * c * t + (2.0 - p) * c * ep, (p - 1.0) * c};
}

double NFunction::secant(double t) const {
  if (t > 0.0) return eval(t).dphi / t;
  if (!(t == 0.0)) fail(ErrorCode::kDomainError, "N-function argument must be >= 0");
  switch (kind_) {
    case NFunctionKind::kPower:
      if (p_ == 2.0) return 1.0;
      return p_ > 2.0 ? 0.0 : kInfinity;
    case NFunctionKind::kRegC1:
      return std::pow(eps_minus_, p_ - 2.0);
    case NFunctionKind::kRegC2:
      return 2.0 / p_ * std::pow(eps_minus_, p_ - 2.0);
  }
  return 0.0;
}

ShiftedValues NFunction::shifted(double a, double t) const {
  if (!(a >= 0.0) || !(t >= 0.0)) fail(ErrorCode::kDomainError, "shifted N-function arguments must be >= 0");
  const auto dphi_a = [this, a](double s) { return s * secant(std::max(a, s)); };
  ShiftedValues out;
  out.dphi = dphi_a(t);
  if (a == 0.0) {
    out.phi = eval(t).phi;
  } else if (t > 0.0) {
    // phi_a' has a kink at s = a; integrating the two smooth pieces separately
    // keeps Gauss-Kronrod at full order.
    using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double split = std::min(a, t);
    out.phi = Quadrature::integrate(dphi_a, 0.0, split, 15, 1e-12);
    if (t > split) out.phi += Quadrature::integrate(dphi_a, split, t, 15, 1e-12);
  }
  return out;
}

}  // namespace quasihom
