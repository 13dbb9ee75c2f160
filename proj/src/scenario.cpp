#include "avtrack/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <random>
#include <sstream>

#include "avtrack/check.hpp"

namespace avtrack {
namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw InvariantError("scenario line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) fail(line, "bad number '" + tok + "'");
  return v;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

/** Parses "[a b c]" (tokens already split) into doubles. */
std::vector<double> parse_array(const std::vector<std::string>& toks, std::size_t line) {
  if (toks.empty() || toks.front().front() != '[' || toks.back().back() != ']')
    fail(line, "array must be bracketed, e.g. [0 0.5 1]");
  std::string joined;
  for (const auto& t : toks) joined += t + ' ';
  const auto lo = joined.find('[');
  const auto hi = joined.rfind(']');
  std::vector<double> out;
  for (const auto& t : tokenize(joined.substr(lo + 1, hi - lo - 1)))
    out.push_back(parse_double(t, line));
  return out;
}

void append_array(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt_double(v[i]);
  }
  out += "]\n";
}

void require_steps(const StepFunction& s, double lo, double hi, const char* who) {
  AVTRACK_CHECK(s.values.size() == s.breaks.size() + 1,
                std::string(who) + ": need one more value than breaks");
  for (std::size_t i = 1; i < s.breaks.size(); ++i)
    AVTRACK_CHECK(s.breaks[i - 1] < s.breaks[i],
                  std::string(who) + ": breaks must be strictly increasing");
  for (double v : s.values)
    AVTRACK_CHECK(v >= lo && v <= hi, std::string(who) + ": value " + fmt_double(v) +
                                          " outside [" + fmt_double(lo) + ", " + fmt_double(hi) +
                                          "]");
}

void validate(const Scenario& s) {
  AVTRACK_CHECK(s.flux == "greenshields", "unknown flux family '" + s.flux + "'");
  AVTRACK_CHECK(s.R > 0.0 && s.V > 0.0, "R and V must be positive");
  AVTRACK_CHECK(s.alpha > 0.0 && s.alpha < 1.0, "alpha must lie in (0, 1)");
  AVTRACK_CHECK(s.nu >= 2 && s.nu <= 12, "nu must lie in [2, 12]");
  AVTRACK_CHECK(s.t_end > 0.0, "t_end must be positive");
  require_steps(s.rho0, 0.0, s.R, "rho0");
  require_steps(s.control, 0.0, s.V, "control");
  for (std::size_t i = 0; i < s.snapshots.size(); ++i) {
    AVTRACK_CHECK(s.snapshots[i] >= 0.0 && s.snapshots[i] <= s.t_end,
                  "snapshot time outside [0, t_end]");
    if (i) AVTRACK_CHECK(s.snapshots[i - 1] < s.snapshots[i], "snapshot times must increase");
  }
  for (double b : s.control.breaks)
    AVTRACK_CHECK(b > 0.0, "control breaks must be positive times");
}

}  // namespace

std::string fmt_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  AVTRACK_CHECK(ec == std::errc{}, "fmt_double: conversion failed");
  return std::string(buf, p);
}

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  std::map<std::string, std::size_t> seen;
  std::vector<double> rho_breaks, rho_values, u_breaks, u_values;
  bool have_rho_breaks = false, have_u_breaks = false;
  bool have_rho = false, have_u = false, have_t_end = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    auto toks = tokenize(raw);
    if (toks.empty()) continue;
    const std::string key = toks.front();
    toks.erase(toks.begin());
    if (toks.empty()) fail(line, "key '" + key + "' has no value");
    if (!seen.emplace(key, line).second) fail(line, "duplicate key '" + key + "'");
    const std::string& val = toks.front();

    if (key == "flux") {
      s.flux = val;
    } else if (key == "R") {
      s.R = parse_double(val, line);
    } else if (key == "V") {
      s.V = parse_double(val, line);
    } else if (key == "alpha") {
      s.alpha = parse_double(val, line);
    } else if (key == "nu") {
      s.nu = static_cast<int>(parse_double(val, line));
    } else if (key == "y0") {
      s.y0 = parse_double(val, line);
    } else if (key == "t_end") {
      s.t_end = parse_double(val, line);
      have_t_end = true;
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(parse_double(val, line));
    } else if (key == "diagram") {
      if (val == "true")
        s.diagram = true;
      else if (val == "false")
        s.diagram = false;
      else
        fail(line, "diagram must be true or false");
    } else if (key == "rho0_breaks") {
      rho_breaks = parse_array(toks, line);
      have_rho_breaks = true;
    } else if (key == "rho0_values") {
      rho_values = parse_array(toks, line);
      have_rho = true;
    } else if (key == "control_breaks") {
      u_breaks = parse_array(toks, line);
      have_u_breaks = true;
    } else if (key == "control_values") {
      u_values = parse_array(toks, line);
      have_u = true;
    } else if (key == "snapshots") {
      s.snapshots = parse_array(toks, line);
    } else {
      fail(line, "unknown key '" + key + "'");
    }
  }

  if (!have_rho) fail(line, "missing required key 'rho0_values'");
  if (!have_u) fail(line, "missing required key 'control_values'");
  if (!have_t_end) fail(line, "missing required key 't_end'");
  (void)have_rho_breaks;
  (void)have_u_breaks;
  s.rho0 = StepFunction{std::move(rho_breaks), std::move(rho_values)};
  s.control = StepFunction{std::move(u_breaks), std::move(u_values)};
  validate(s);
  return s;
}

std::string print_scenario(const Scenario& s) {
  validate(s);
  std::string out;
  out += "flux " + s.flux + "\n";
  out += "R " + fmt_double(s.R) + "\n";
  out += "V " + fmt_double(s.V) + "\n";
  out += "alpha " + fmt_double(s.alpha) + "\n";
  out += "nu " + std::to_string(s.nu) + "\n";
  out += "rho0_breaks ";
  append_array(out, s.rho0.breaks);
  out += "rho0_values ";
  append_array(out, s.rho0.values);
  out += "control_breaks ";
  append_array(out, s.control.breaks);
  out += "control_values ";
  append_array(out, s.control.values);
  out += "y0 " + fmt_double(s.y0) + "\n";
  out += "t_end " + fmt_double(s.t_end) + "\n";
  out += "snapshots ";
  append_array(out, s.snapshots);
  out += std::string("diagram ") + (s.diagram ? "true" : "false") + "\n";
  out += "seed " + std::to_string(s.seed) + "\n";
  return out;
}

std::string scenario_hash(const Scenario& s) {
  const std::string text = print_scenario(s);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

FluxModel scenario_model(const Scenario& s) {
  AVTRACK_CHECK(s.flux == "greenshields", "unknown flux family '" + s.flux + "'");
  return FluxModel::greenshields(s.R, s.V, s.alpha);
}

Scenario random_scenario(std::uint64_t seed, int nu, int max_rho_jumps, int max_u_jumps,
                         double t_end) {
  AVTRACK_CHECK(max_rho_jumps >= 0 && max_u_jumps >= 0, "random_scenario: negative jump count");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  Scenario s;
  s.nu = nu;
  s.t_end = t_end;
  s.seed = seed;

  std::uniform_int_distribution<int> nrho(0, max_rho_jumps);
  std::uniform_int_distribution<int> nu_jumps(0, max_u_jumps);
  std::uniform_real_distribution<double> xpos(-5.0, 5.0);
  std::uniform_real_distribution<double> tpos(t_end * 1e-3, t_end * (1.0 - 1e-3));
  std::uniform_real_distribution<double> rho_val(0.0, 1.0);
  std::uniform_real_distribution<double> u_val(0.0, 1.0);

  const int nr = nrho(rng);
  for (int i = 0; i < nr; ++i) s.rho0.breaks.push_back(xpos(rng));
  std::sort(s.rho0.breaks.begin(), s.rho0.breaks.end());
  s.rho0.breaks.erase(std::unique(s.rho0.breaks.begin(), s.rho0.breaks.end()),
                      s.rho0.breaks.end());
  s.rho0.values.clear();
  for (std::size_t i = 0; i <= s.rho0.breaks.size(); ++i) s.rho0.values.push_back(rho_val(rng));

  const int nc = nu_jumps(rng);
  for (int i = 0; i < nc; ++i) s.control.breaks.push_back(tpos(rng));
  std::sort(s.control.breaks.begin(), s.control.breaks.end());
  s.control.breaks.erase(std::unique(s.control.breaks.begin(), s.control.breaks.end()),
                         s.control.breaks.end());
  s.control.values.clear();
  for (std::size_t i = 0; i <= s.control.breaks.size(); ++i) s.control.values.push_back(u_val(rng));

  s.y0 = xpos(rng);
  validate(s);
  return s;
}

}  // namespace avtrack
