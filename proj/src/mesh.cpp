#include "avtrack/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "avtrack/check.hpp"

namespace avtrack {
namespace {

constexpr double kDedup = 1e-12;

void sort_dedupe(std::vector<double>& xs, double tol) {
  std::sort(xs.begin(), xs.end());
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  xs.swap(out);
}

int nearest_in(const std::vector<double>& grid, double value) {
  auto it = std::lower_bound(grid.begin(), grid.end(), value);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return int(grid.size()) - 1;
  int hi = int(it - grid.begin());
  int lo = hi - 1;
  return (value - grid[lo] <= grid[hi] - value) ? lo : hi;  // ties toward the smaller value
}

int exact_in(const std::vector<double>& grid, double value, double slack, const char* what) {
  int i = nearest_in(grid, value);
  if (std::abs(grid[i] - value) > slack)
    throw std::invalid_argument(std::string("Grids: ") + what + " " + std::to_string(value) +
                                " is not a grid member");
  return i;
}

}  // namespace

int Grids::rho_index(double value) const {
  return exact_in(rho, value, 1e-9 * std::max(1.0, model.R()), "density");
}
int Grids::speed_index(double value) const {
  return exact_in(speed, value, 1e-9 * std::max(1.0, model.V()), "speed");
}
int Grids::nearest_rho_index(double value) const { return nearest_in(rho, value); }
int Grids::nearest_speed_index(double value) const { return nearest_in(speed, value); }

double Grids::chord(int i, int j) const {
  AVTRACK_CHECK(i != j, "chord needs two distinct grid points");
  return (f_of[i] - f_of[j]) / (rho[i] - rho[j]);
}

Grids build_grids(const FluxModel& model, int nu) {
  if (nu < 1 || nu > 12) throw std::invalid_argument("build_grids: nu must lie in [1, 12]");
  const double V = model.V(), R = model.R();
  const double tol = std::ldexp(1.0, -nu);
  if (!(tol < V)) throw std::invalid_argument("build_grids: 2^-nu must be below V");

  Grids g(model);
  g.nu = nu;

  std::vector<double> ladder = model.omega_sequence(tol);
  const int J = int(ladder.size()) - 2;  // ladder.back() is the terminator
  g.ladder_depth = J;

  std::vector<double> speeds = ladder;
  speeds.push_back(V);
  std::vector<double> rhos{0.0, R};

  // step 2: refine [0, u_1] uniformly, chain each refined speed down the
  // ladder by band contact, collecting the shared contact densities
  const int parts = 1 << nu;
  const double u1 = ladder[1];
  for (int k = 1; k < parts; ++k) {
    double u = u1 * k / parts;
    speeds.push_back(u);
    rhos.push_back(model.geometry_at(u).rho_hat);
    for (int i = 1; i <= J; ++i) {
      double contact = model.geometry_at(u).rho_check;
      double next = model.rho_hat_inverse(contact);
      if (next > V) {
        next = V;
        g.clipped = true;
      }
      speeds.push_back(next);
      rhos.push_back(contact);  // = rho_hat(next)
      u = next;
    }
  }

  // step 3: uniform cells above the widest band
  const double hat0 = model.geometry_at(0.0).rho_hat;
  for (int l = 0; l <= parts; ++l) rhos.push_back(hat0 + (R - hat0) * l / parts);

  // step 4: every grid speed contributes its band endpoints, then dedupe
  sort_dedupe(speeds, kDedup * std::max(1.0, V));
  for (double u : speeds) {
    if (u >= V) continue;
    BottleneckGeometry geo = model.geometry_at(u);
    rhos.push_back(geo.rho_check);
    rhos.push_back(geo.rho_hat);
  }
  sort_dedupe(rhos, kDedup * std::max(1.0, R));

  AVTRACK_CHECK(std::abs(rhos.front()) <= kDedup && std::abs(rhos.back() - R) <= kDedup,
                "density grid must span [0, R]");
  AVTRACK_CHECK(std::abs(speeds.front()) <= kDedup && std::abs(speeds.back() - V) <= kDedup,
                "speed grid must span [0, V]");
  rhos.front() = 0.0;
  rhos.back() = R;
  speeds.front() = 0.0;
  speeds.back() = V;
  g.rho = std::move(rhos);
  g.speed = std::move(speeds);

  const int n = int(g.rho.size()), m = int(g.speed.size());
  AVTRACK_CHECK(n >= 3 && m >= 3, "degenerate grid");
  g.f_of.resize(n);
  g.v_of.resize(n);
  for (int i = 0; i < n; ++i) {
    g.f_of[i] = model.f(g.rho[i]);
    g.v_of[i] = model.v(g.rho[i]);
  }
  g.hat_idx.resize(m);
  g.check_idx.resize(m);
  g.cap_of.resize(m);
  for (int s = 0; s < m; ++s) {
    if (g.speed[s] == V) {
      g.hat_idx[s] = g.check_idx[s] = 0;
      g.cap_of[s] = 0.0;
      continue;
    }
    BottleneckGeometry geo = model.geometry_at(g.speed[s]);
    g.check_idx[s] = g.rho_index(geo.rho_check);
    g.hat_idx[s] = g.rho_index(geo.rho_hat);
    g.cap_of[s] = geo.F_alpha;
    AVTRACK_CHECK(g.check_idx[s] < g.hat_idx[s], "band endpoints out of order");
  }

  g.delta_rho = R;
  g.delta_u = V;
  for (int i = 0; i + 1 < n; ++i) {
    double d = g.rho[i + 1] - g.rho[i];
    g.delta_rho = std::min(g.delta_rho, d);
    g.eps_rho = std::max(g.eps_rho, d);
  }
  for (int s = 0; s + 1 < m; ++s) {
    double d = g.speed[s + 1] - g.speed[s];
    g.delta_u = std::min(g.delta_u, d);
    g.eps_u = std::max(g.eps_u, d);
  }
  AVTRACK_CHECK(g.delta_rho > 0 && g.delta_u > 0, "grid spacing must be positive");
  return g;
}

double total_variation(const std::vector<double>& values) {
  double tv = 0.0;
  for (size_t i = 0; i + 1 < values.size(); ++i) tv += std::abs(values[i + 1] - values[i]);
  return tv;
}

std::vector<double> quantize_sequence(const std::vector<double>& grid,
                                      const std::vector<double>& values) {
  AVTRACK_CHECK(grid.size() >= 2 && std::is_sorted(grid.begin(), grid.end()),
                "quantize_sequence needs a sorted grid");
  if (values.empty()) return {};

  const size_t n = values.size();
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) w[i] = grid[nearest_in(grid, values[i])];
  const double tv_in = total_variation(values);
  if (total_variation(w) <= tv_in + 1e-12) return w;

  // Nearest rounding inflated the variation: rebuild over the two bracketing
  // grid points of each value.  A threading with TV <= TV(values) always
  // exists inside those brackets (snap the taut string of the bracket
  // corridor run by run; run endpoints sit on grid-valued corridor walls), so
  // the minimum found here restores the bound.
  std::vector<std::array<int, 2>> cand(n);
  for (size_t i = 0; i < n; ++i) {
    auto it = std::lower_bound(grid.begin(), grid.end(), values[i]);
    int hi = int(it - grid.begin());
    if (hi == int(grid.size())) hi = int(grid.size()) - 1;
    int lo = (grid[hi] <= values[i] || hi == 0) ? hi : hi - 1;
    cand[i] = {lo, hi};
  }
  struct Cost {
    double tv, dist;
    bool operator<(const Cost& o) const { return tv != o.tv ? tv < o.tv : dist < o.dist; }
  };
  std::vector<std::array<Cost, 2>> best(n);
  std::vector<std::array<int, 2>> parent(n);
  for (int c = 0; c < 2; ++c)
    best[0][c] = {0.0, std::abs(grid[cand[0][c]] - values[0])};
  for (size_t i = 1; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      Cost bc{1e300, 1e300};
      int bp = 0;
      for (int p = 0; p < 2; ++p) {
        Cost cost = best[i - 1][p];
        cost.tv += std::abs(grid[cand[i][c]] - grid[cand[i - 1][p]]);
        if (cost < bc) {
          bc = cost;
          bp = p;
        }
      }
      bc.dist += std::abs(grid[cand[i][c]] - values[i]);
      best[i][c] = bc;
      parent[i][c] = bp;
    }
  }
  int c = best[n - 1][1] < best[n - 1][0] ? 1 : 0;
  AVTRACK_CHECK(best[n - 1][c].tv <= tv_in + 1e-12, "quantizer variation repair failed");
  for (size_t i = n; i-- > 0;) {
    w[i] = grid[cand[i][c]];
    if (i > 0) c = parent[i][c];
  }
  return w;
}

std::vector<double> quantize_density_profile(const Grids& g, const std::vector<double>& values) {
  return quantize_sequence(g.rho, values);
}

std::vector<double> quantize_control(const Grids& g, const std::vector<double>& values) {
  return quantize_sequence(g.speed, values);
}

double PiecewiseLinearFlux::operator()(double x) const {
  const std::vector<double>& r = g_->rho;
  if (!(x >= r.front() - 1e-9 && x <= r.back() + 1e-9))
    throw std::invalid_argument("PiecewiseLinearFlux: density outside [0, R]");
  x = std::clamp(x, r.front(), r.back());
  auto it = std::upper_bound(r.begin(), r.end(), x);
  int cell = std::clamp(int(it - r.begin()) - 1, 0, int(r.size()) - 2);
  return g_->f_of[cell] + slope(cell) * (x - r[cell]);
}

}  // namespace avtrack
