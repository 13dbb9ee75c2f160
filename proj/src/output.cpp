#include "avtrack/output.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "avtrack/check.hpp"
#include "avtrack/scenario.hpp"

namespace avtrack {
namespace {

std::string head(const RunHistory& h) {
  return "# scenario " + (h.scenario_hash.empty() ? std::string("unset") : h.scenario_hash) + "\n";
}

const char* mode_name(AvMode m) { return to_string(m); }

}  // namespace

std::string csv_fronts(const RunHistory& h) {
  std::string out = head(h);
  out += "t_event [T],x [L],left [veh/L],right [veh/L],kind,speed [L/T]\n";
  for (const auto& f : h.fronts) {
    out += fmt_double(f.t_birth) + ',' + fmt_double(f.x_birth) + ',' + fmt_double(f.left) + ',' +
           fmt_double(f.right) + ',' + to_string(f.kind) + ',' + fmt_double(f.speed) + '\n';
  }
  return out;
}

std::string csv_trajectory(const RunHistory& h) {
  std::string out = head(h);
  out += "t [T],y [L],speed [L/T],u [L/T],mode,trace_left [veh/L],trace_right [veh/L]\n";
  for (const auto& s : h.av) {
    out += fmt_double(s.t_begin) + ',' + fmt_double(s.y_begin) + ',' + fmt_double(s.speed) + ',' +
           fmt_double(s.u) + ',' + mode_name(s.mode) + ',' + fmt_double(s.trace_left) + ',' +
           fmt_double(s.trace_right) + '\n';
  }
  if (!h.av.empty()) {
    const auto& s = h.av.back();
    out += fmt_double(h.t_end) + ',' + fmt_double(s.position(h.t_end)) + ',' +
           fmt_double(s.speed) + ',' + fmt_double(s.u) + ',' + mode_name(s.mode) + ',' +
           fmt_double(s.trace_left) + ',' + fmt_double(s.trace_right) + '\n';
  }
  return out;
}

std::string csv_ledger(const RunHistory& h) {
  std::string out = head(h);
  out +=
      "time [T],type,tv_rho [veh/L],gamma [veh/L],tv_u_tail [L/T],upsilon [veh/L],"
      "d_upsilon [veh/L],front_count\n";
  for (const auto& r : h.ledger.rows) {
    out += fmt_double(r.time) + ',' + to_string(r.type) + ',' + fmt_double(r.tv_rho) + ',' +
           fmt_double(r.gamma) + ',' + fmt_double(r.tv_u_tail) + ',' + fmt_double(r.upsilon) +
           ',' + fmt_double(r.d_upsilon) + ',' + std::to_string(r.front_count) + '\n';
  }
  return out;
}

std::string csv_snapshots(const RunHistory& h, const std::vector<double>& times) {
  std::string out = head(h);
  out += "t [T],x_start [L],rho [veh/L]\n";
  for (double t : times) {
    const StepFunction prof = h.profile(t);
    out += fmt_double(t) + ",-inf," + fmt_double(prof.values.front()) + '\n';
    for (std::size_t i = 0; i < prof.breaks.size(); ++i)
      out += fmt_double(t) + ',' + fmt_double(prof.breaks[i]) + ',' +
             fmt_double(prof.values[i + 1]) + '\n';
  }
  return out;
}

std::string svg_diagram(const RunHistory& h) {
  const auto [lo, hi] = h.support();
  const double span = std::max(hi - lo, 1e-6);
  const double x0 = lo - 0.05 * span;
  const double x1 = hi + 0.05 * span;
  const double t1 = h.t_end;
  const double w = 800.0, ht = 600.0, m = 50.0;
  const auto px = [&](double x) { return m + (x - x0) / (x1 - x0) * (w - 2 * m); };
  const auto py = [&](double t) { return ht - m - t / t1 * (ht - 2 * m); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt_double(w) + " " +
         fmt_double(ht) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += "<line x1=\"" + fmt_double(m) + "\" y1=\"" + fmt_double(ht - m) + "\" x2=\"" +
         fmt_double(w - m) + "\" y2=\"" + fmt_double(ht - m) +
         "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  out += "<line x1=\"" + fmt_double(m) + "\" y1=\"" + fmt_double(ht - m) + "\" x2=\"" +
         fmt_double(m) + "\" y2=\"" + fmt_double(m) +
         "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  out += "<text x=\"" + fmt_double(w - m) + "\" y=\"" + fmt_double(ht - m + 30) +
         "\" font-size=\"14\" text-anchor=\"end\" fill=\"#444444\">x</text>\n";
  out += "<text x=\"" + fmt_double(m - 30) + "\" y=\"" + fmt_double(m) +
         "\" font-size=\"14\" fill=\"#444444\">t</text>\n";

  for (const auto& f : h.fronts) {
    const double td = std::min(f.t_death, h.t_end);
    if (td <= f.t_birth && f.t_death < h.t_end) continue;  // zero-lifetime front
    const char* color = f.kind == FrontKind::kShock        ? "#bb3333"
                        : f.kind == FrontKind::kRarefaction ? "#3366cc"
                                                            : "#884499";
    out += "<line x1=\"" + fmt_double(px(f.x_birth)) + "\" y1=\"" + fmt_double(py(f.t_birth)) +
           "\" x2=\"" + fmt_double(px(f.position(td))) + "\" y2=\"" + fmt_double(py(td)) +
           "\" stroke=\"" + color + "\" stroke-width=\"1.4\"/>\n";
  }

  const auto path = h.av_polyline();
  if (!path.empty()) {
    out += "<polyline fill=\"none\" stroke=\"#111111\" stroke-width=\"2.5\" points=\"";
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i) out += ' ';
      out += fmt_double(px(path[i].second)) + ',' + fmt_double(py(path[i].first));
    }
    out += "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  AVTRACK_CHECK(out.good(), "cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  AVTRACK_CHECK(out.good(), "short write to '" + path.string() + "'");
}

}  // namespace avtrack
