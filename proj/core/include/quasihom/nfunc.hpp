#pragma once

#include <limits>

namespace quasihom {

enum class NFunctionKind { kPower, kRegC1, kRegC2 };

const char* to_string(NFunctionKind kind);
NFunctionKind parse_nfunction_kind(const char* name);

struct NFunctionValues {
  double phi = 0.0;
  double dphi = 0.0;
  double ddphi = 0.0;
};

struct ShiftedValues {
  double phi = 0.0;
  double dphi = 0.0;
};

/// The flux potential phi of the energy integral kappa * phi(|grad u|).
///
/// kPower is t^p / p. The two regularized kinds replace it by a quadratic
/// below eps_minus and above eps_plus:
///   - kRegC1 glues 1/2 eps^{p-2} t^2 + (1/p - 1/2) eps^p (value and slope match),
///   - kRegC2 uses a (p+2)-degree lower piece and a quadratic upper piece so
///     that phi'' is continuous as well.
/// eps_plus = +inf disables the upper regularization. At a breakpoint the
/// lower/left piece is evaluated.
class NFunction {
 public:
  static constexpr double kInfinity = std::numeric_limits<double>::infinity();

  static NFunction power(double p);
  static NFunction reg_c1(double p, double eps_minus, double eps_plus = kInfinity);
  static NFunction reg_c2(double p, double eps_minus, double eps_plus = kInfinity);
  /// Regularized kinds parameterized by eps_minus^{p-2}, the quantity usually
  /// reported for these models. For p == 2 every kind is t^2/2 and eps_minus
  /// is set to 0.
  static NFunction from_eps_pow(NFunctionKind kind, double p, double eps_minus_pow,
                                double eps_plus = kInfinity);
  /// The solver default: kRegC1 with eps_minus^{p-2} = 1e-6, no upper cap.
  static NFunction solver_default(double p);

  NFunctionKind kind() const noexcept { return kind_; }
  double p() const noexcept { return p_; }
  double eps_minus() const noexcept { return eps_minus_; }
  double eps_plus() const noexcept { return eps_plus_; }

  /// (phi, phi', phi'') at t >= 0; throws domain-error for t < 0.
  NFunctionValues eval(double t) const;
  /// phi'(t) / t, with the t -> 0 limit at t == 0.
  double secant(double t) const;
  /// Shifted N-function: phi_a'(t) = t phi'(max(a,t)) / max(a,t) and its
  /// antiderivative phi_a(t), the latter by adaptive Gauss-Kronrod quadrature.
  ShiftedValues shifted(double a, double t) const;

 private:
  NFunction(NFunctionKind kind, double p, double eps_minus, double eps_plus);

  NFunctionKind kind_;
  double p_;
  double eps_minus_;
  double eps_plus_;
};

}  // namespace quasihom
