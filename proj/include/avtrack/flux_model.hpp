#pragma once
#include <vector>

namespace avtrack {

/** Geometry of the inadmissible density band at one bottleneck speed u.
 *
 * The moving bottleneck travelling at speed u caps the flow past itself at
 * F_alpha(u).  Densities rho with f(rho) - u*rho > F_alpha(u) cannot occur
 * adjacent to it; they form the open band ]rho_check, rho_hat[.  At both band
 * endpoints f(rho) - u*rho = F_alpha(u) holds exactly, and the two endpoints
 * are the admissible states of the nonclassical discontinuity travelling at
 * speed u (rho_hat on the left, rho_check on the right). */
struct BottleneckGeometry {
  double u;          // bottleneck speed this row is evaluated at
  double rho_tilde;  // argmax of f_alpha(rho) - u*rho on [0, alpha*R]
  double F_alpha;    // flow capacity past the bottleneck, in its own frame
  double rho_check;  // lower band endpoint, in [0, fp_inverse(u)]
  double rho_hat;    // upper band endpoint, in [fp_inverse(u), R]
  double rho_star;   // density whose mean traffic speed equals u: v(rho_star) = u
};

/** Report of check_map_derivative_bounds. */
struct DerivativeBoundsReport {
  bool ok;
  double max_check_violation;  // worst excess of the rho_check'(u) bounds
  double max_hat_violation;    // worst excess of the rho_hat'(u) bound
  double max_fd_mismatch;      // worst |analytic - central difference|
  int samples;
};

/** Quadratic (Greenshields) traffic flux together with the reduced-capacity
 * geometry of a moving bottleneck.
 *
 * Flux: f(rho) = V * rho * (1 - rho/R) on [0, R], so f(0) = f(R) = 0,
 * f'' = -2V/R identically (beta = B = 2V/R), and the mean traffic speed
 * v(rho) = f(rho)/rho = V * (1 - rho/R) is strictly decreasing with v(0) = V.
 * The bottleneck occupies a fraction of the road that scales capacity by
 * alpha in (0,1): f_alpha(rho) = alpha * f(rho/alpha) on [0, alpha*R].
 *
 * Band endpoints are computed by damped Newton iteration inside a sign-change
 * bracket (never by the closed forms available for this family); the closed
 * forms live in the test oracle so the two derivations stay independent. */
class FluxModel {
 public:
  /** Builds the model; requires R > 0, V > 0, 0 < alpha < 1. */
  static FluxModel greenshields(double R, double V, double alpha);

  double R() const { return R_; }
  double V() const { return V_; }
  double alpha() const { return alpha_; }
  double beta() const { return two_VR_; }  // f'' <= -beta everywhere
  double B() const { return two_VR_; }     // f'' >= -B everywhere

  /** Flux at density rho in [0, R] (tolerates roundoff-level overshoot). */
  double f(double rho) const;
  /** f'(rho); strictly decreasing, f'(0) = V, f'(R) = -V. */
  double fp(double rho) const;
  /** Mean traffic speed f(rho)/rho, extended continuously by v(0) = V. */
  double v(double rho) const;
  /** Slope of the flux chord between densities a and b, computed in the
   * cancellation-free form V*(1 - (a+b)/R); equals f'(a) when a == b. */
  double chord(double a, double b) const;
  /** Inverse of f' on [0, R]; requires s in [-V, V]. */
  double fp_inverse(double s) const;
  /** Inverse of v on [0, R]; requires s in [0, V]. */
  double v_inverse(double s) const;
  double rho_crit() const { return 0.5 * R_; }  // argmax of f
  double f_max() const { return 0.25 * V_ * R_; }

  /** Reduced flux alpha * f(rho/alpha); requires rho in [0, alpha*R]. */
  double f_alpha(double rho) const;
  /** Capacity past the bottleneck at speed u: max of f_alpha(rho) - u*rho. */
  double F_alpha(double u) const;

  /** Full band geometry at speed u in [0, V].  At u = V the band degenerates
   * to the single point 0 and every field except u is exactly 0. */
  BottleneckGeometry geometry_at(double u) const;

  /** Inverse of u -> rho_hat(u); requires rho in [0, rho_hat(0)]. */
  double rho_hat_inverse(double rho) const;
  /** Inverse of u -> rho_check(u); requires rho in [0, rho_check(0)]. */
  double rho_check_inverse(double rho) const;

  /** Speed ladder 0 = w_0 < w_1 < ... where consecutive bands just touch:
   * rho_hat(w_{n+1}) = rho_check(w_n).  Strictly increasing with limit V;
   * the returned ladder ends with the first entry satisfying V - w < tol.
   * Requires 0 < tol < V. */
  std::vector<double> omega_sequence(double tol) const;

  /** Verifies the band-endpoint derivative bounds
   *   -1/beta <= rho_check'(u) < 0   and   rho_hat'(u) <= -1/B
   * at n interior speeds, comparing the implicit-function formula against a
   * central finite difference.  Requires n >= 2. */
  DerivativeBoundsReport check_map_derivative_bounds(int n) const;

 private:
  FluxModel(double R, double V, double alpha);

  double R_, V_, alpha_;
  double two_VR_;  // 2V/R = |f''|
};

}  // namespace avtrack
