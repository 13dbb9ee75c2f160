#include "avtrack/flux_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "avtrack/check.hpp"

namespace avtrack {
namespace {

// Tolerated relative overshoot on domain endpoints before an argument is
// rejected; accumulated roundoff in callers stays far below this.
constexpr double kDomainSlack = 1e-9;

/** Root of g on the sign-change bracket [lo, hi] (either endpoint may hit the
 * root exactly).  Damped Newton: a step is accepted only while it stays inside
 * the current bracket and halves the residual fast enough, otherwise the
 * iteration bisects.  Runs to machine precision. */
template <class G, class DG>
double bracketed_newton(G&& g, DG&& dg, double lo, double hi) {
  double glo = g(lo);
  if (glo == 0.0) return lo;
  double ghi = g(hi);
  if (ghi == 0.0) return hi;
  AVTRACK_CHECK((glo < 0.0) != (ghi < 0.0), "root bracket must change sign");
  if (glo > 0.0) std::swap(lo, hi);  // keep g(lo) < 0 < g(hi)
  double x = 0.5 * (lo + hi);
  double gx = g(x), dgx = dg(x);
  double dx_old = std::abs(hi - lo), dx = dx_old;
  for (int it = 0; it < 160; ++it) {
    if (gx == 0.0) break;
    if (gx < 0.0) lo = x; else hi = x;
    double xn;
    if (dgx != 0.0 && (x - gx / dgx - lo) * (x - gx / dgx - hi) < 0.0 &&
        std::abs(2.0 * gx) <= std::abs(dx_old * dgx)) {
      xn = x - gx / dgx;
    } else {
      xn = 0.5 * (lo + hi);
    }
    dx_old = dx;
    dx = std::abs(xn - x);
    x = xn;
    gx = g(x);
    dgx = dg(x);
    if (dx <= 1e-16 * (1.0 + std::abs(x))) break;
  }
  return x;
}

}  // namespace

FluxModel::FluxModel(double R, double V, double alpha)
    : R_(R), V_(V), alpha_(alpha), two_VR_(2.0 * V / R) {}

FluxModel FluxModel::greenshields(double R, double V, double alpha) {
  if (!(R > 0.0) || !std::isfinite(R)) throw std::invalid_argument("FluxModel: R must be positive");
  if (!(V > 0.0) || !std::isfinite(V)) throw std::invalid_argument("FluxModel: V must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("FluxModel: alpha must lie in (0,1)");
  return FluxModel(R, V, alpha);
}

double FluxModel::f(double rho) const {
  if (!(rho >= -kDomainSlack * R_ && rho <= R_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::f: density " + std::to_string(rho) + " outside [0, R]");
  return V_ * rho * (1.0 - rho / R_);
}

double FluxModel::fp(double rho) const {
  if (!(rho >= -kDomainSlack * R_ && rho <= R_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::fp: density outside [0, R]");
  return V_ * (1.0 - 2.0 * rho / R_);
}

double FluxModel::v(double rho) const {
  if (!(rho >= -kDomainSlack * R_ && rho <= R_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::v: density outside [0, R]");
  return V_ * (1.0 - rho / R_);
}

double FluxModel::chord(double a, double b) const {
  if (!(a >= -kDomainSlack * R_ && a <= R_ * (1.0 + kDomainSlack) && b >= -kDomainSlack * R_ &&
        b <= R_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::chord: density outside [0, R]");
  return V_ * (1.0 - (a + b) / R_);
}

double FluxModel::fp_inverse(double s) const {
  if (!(std::abs(s) <= V_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::fp_inverse: slope outside [-V, V]");
  return 0.5 * R_ * (1.0 - s / V_);
}

double FluxModel::v_inverse(double s) const {
  if (!(s >= -kDomainSlack * V_ && s <= V_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::v_inverse: speed outside [0, V]");
  return R_ * (1.0 - s / V_);
}

double FluxModel::f_alpha(double rho) const {
  if (!(rho >= -kDomainSlack * R_ && rho <= alpha_ * R_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::f_alpha: density outside [0, alpha*R]");
  return alpha_ * f(rho / alpha_);
}

double FluxModel::F_alpha(double u) const { return geometry_at(u).F_alpha; }

BottleneckGeometry FluxModel::geometry_at(double u) const {
  if (!(u >= -kDomainSlack * V_ && u <= V_ * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::geometry_at: speed " + std::to_string(u) + " outside [0, V]");
  u = std::clamp(u, 0.0, V_);
  if (u == V_) return {V_, 0.0, 0.0, 0.0, 0.0, 0.0};

  // barrier separates the two band endpoints: f'(barrier) = u
  double barrier = fp_inverse(u);
  double rho_tilde = alpha_ * barrier;
  double F = f_alpha(rho_tilde) - u * rho_tilde;
  auto g = [&](double r) { return f(r) - u * r - F; };
  auto dg = [&](double r) { return fp(r) - u; };
  double rho_check = bracketed_newton(g, dg, 0.0, barrier);
  double rho_hat = bracketed_newton(g, dg, barrier, R_);
  double rho_star =
      u == 0.0 ? R_
               : bracketed_newton([&](double r) { return f(r) - u * r; }, dg, barrier, R_);
  return {u, rho_tilde, F, rho_check, rho_hat, rho_star};
}

double FluxModel::rho_hat_inverse(double rho) const {
  double top = geometry_at(0.0).rho_hat;
  if (!(rho >= -kDomainSlack * R_ && rho <= top * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::rho_hat_inverse: density outside [0, rho_hat(0)]");
  rho = std::clamp(rho, 0.0, top);
  auto g = [&](double w) { return geometry_at(w).rho_hat - rho; };
  auto dg = [&](double w) {
    BottleneckGeometry geo = geometry_at(w);
    if (geo.u == V_) return -1.0 / two_VR_ * 2.0;  // limit slope, sign only matters
    return (geo.rho_hat - geo.rho_tilde) / (fp(geo.rho_hat) - w);
  };
  return bracketed_newton(g, dg, 0.0, V_);
}

double FluxModel::rho_check_inverse(double rho) const {
  double top = geometry_at(0.0).rho_check;
  if (!(rho >= -kDomainSlack * R_ && rho <= top * (1.0 + kDomainSlack)))
    throw std::invalid_argument("FluxModel::rho_check_inverse: density outside [0, rho_check(0)]");
  rho = std::clamp(rho, 0.0, top);
  auto g = [&](double w) { return geometry_at(w).rho_check - rho; };
  auto dg = [&](double w) {
    BottleneckGeometry geo = geometry_at(w);
    if (geo.u == V_) return -1e-3;  // sign placeholder at the degenerate end
    return (geo.rho_check - geo.rho_tilde) / (fp(geo.rho_check) - w);
  };
  return bracketed_newton(g, dg, 0.0, V_);
}

std::vector<double> FluxModel::omega_sequence(double tol) const {
  if (!(tol > 0.0 && tol <= V_))
    throw std::invalid_argument("FluxModel::omega_sequence: tol must lie in (0, V]");
  std::vector<double> out{0.0};
  while (V_ - out.back() >= tol) {
    double next = rho_hat_inverse(geometry_at(out.back()).rho_check);
    AVTRACK_CHECK(next > out.back(), "speed ladder must increase");
    AVTRACK_CHECK(out.size() < 100000, "speed ladder failed to reach V");
    out.push_back(next);
  }
  return out;
}

DerivativeBoundsReport FluxModel::check_map_derivative_bounds(int n) const {
  if (n < 2) throw std::invalid_argument("check_map_derivative_bounds: n must be >= 2");
  n = std::min(n, 100000);
  double h = 1e-6 * V_;
  DerivativeBoundsReport rep{true, 0.0, 0.0, 0.0, n};
  for (int i = 0; i < n; ++i) {
    double u = V_ * (i + 0.5) / n;
    BottleneckGeometry geo = geometry_at(u);
    double dck = (geo.rho_check - geo.rho_tilde) / (fp(geo.rho_check) - u);
    double dht = (geo.rho_hat - geo.rho_tilde) / (fp(geo.rho_hat) - u);
    // bounds: -1/beta <= rho_check' < 0 and rho_hat' <= -1/B
    double ck_viol = std::max(dck, (-1.0 / beta()) - dck);
    double hat_viol = dht - (-1.0 / B());
    rep.max_check_violation = std::max(rep.max_check_violation, ck_viol);
    rep.max_hat_violation = std::max(rep.max_hat_violation, hat_viol);
    BottleneckGeometry lo = geometry_at(u - h), hi = geometry_at(u + h);
    double fd_ck = (hi.rho_check - lo.rho_check) / (2.0 * h);
    double fd_ht = (hi.rho_hat - lo.rho_hat) / (2.0 * h);
    rep.max_fd_mismatch = std::max({rep.max_fd_mismatch, std::abs(fd_ck - dck), std::abs(fd_ht - dht)});
  }
  rep.ok = rep.max_check_violation <= 1e-9 && rep.max_hat_violation <= 1e-9 &&
           rep.max_fd_mismatch <= 1e-6 * std::max(1.0, R_ / V_);
  return rep;
}

}  // namespace avtrack
