#include "avtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <sstream>
#include <utility>

#include "avtrack/check.hpp"

namespace avtrack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Two speeds this close never separate; used for ride/pass ties only.
constexpr double kTieSpeed = 1e-13;
// State values and breakpoints this close coincide.
constexpr double kTieValue = 1e-12;
// Affine flows meeting at one event point agree to this much.
constexpr double kPosAgree = 1e-6;
// Functional bookkeeping tolerance.
constexpr double kLedgerTol = 1e-9;
// Events between full recomputations of the running sums.
constexpr std::uint64_t kAuditStride = 256;

}  // namespace

// ---------------------------------------------------------------- StepFunction

double StepFunction::operator()(double x) const {
  AVTRACK_CHECK(values.size() == breaks.size() + 1, "step function shape");
  const std::size_t i = std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin();
  return values[i];
}

double StepFunction::total_variation() const {
  AVTRACK_CHECK(values.size() == breaks.size() + 1, "step function shape");
  return avtrack::total_variation(values);
}

void StepFunction::compress(double tol) {
  AVTRACK_CHECK(values.size() == breaks.size() + 1, "step function shape");
  std::vector<double> nb;
  std::vector<double> nv{values.front()};
  for (std::size_t i = 0; i < breaks.size(); ++i) {
    if (std::abs(values[i + 1] - nv.back()) <= tol) continue;
    nb.push_back(breaks[i]);
    nv.push_back(values[i + 1]);
  }
  breaks = std::move(nb);
  values = std::move(nv);
}

// --------------------------------------------------------------------- labels

const char* to_string(FrontKind k) {
  switch (k) {
    case FrontKind::kShock: return "shock";
    case FrontKind::kRarefaction: return "rarefaction";
    case FrontKind::kBottleneck: return "bottleneck";
  }
  return "?";
}

const char* to_string(AvMode m) {
  switch (m) {
    case AvMode::kFree: return "free";
    case AvMode::kRide: return "ride";
    case AvMode::kBottleneck: return "bottleneck";
  }
  return "?";
}

const char* to_string(EventType t) {
  switch (t) {
    case EventType::kInit: return "init";
    case EventType::kFrontMerge: return "merge";
    case EventType::kAvInteraction: return "interaction";
    case EventType::kControlJump: return "control";
  }
  return "?";
}

// ----------------------------------------------------------- local solutions

void Tracker::emit_classical(std::vector<Front>& out, int a, int b) const {
  if (a == b) return;
  const Grids& gr = g();
  if (a < b) {
    out.push_back({.l = a, .r = b, .kind = FrontKind::kShock, .speed = gr.chord(a, b)});
    return;
  }
  // Downward jump: one tracked fan front while it fits the strength budget,
  // otherwise one front per grid step.
  if (gr.rho[a] - gr.rho[b] <= gr.eps_rho + kTieValue) {
    out.push_back({.l = a, .r = b, .kind = FrontKind::kRarefaction, .speed = gr.chord(a, b)});
    return;
  }
  for (int k = a; k > b; --k)
    out.push_back({.l = k, .r = k - 1, .kind = FrontKind::kRarefaction, .speed = gr.chord(k, k - 1)});
}

bool Tracker::band_blocked(int a, int b, int u_idx) const {
  const Grids& gr = g();
  if (u_idx == static_cast<int>(gr.speed.size()) - 1) return false;  // full speed: no constraint
  const double uv = gr.speed[u_idx];
  if (a == b) return gr.in_band(a, u_idx);
  if (a < b) {
    // Trace along the ray of slope uv, taken right-continuous when the ray
    // sits exactly on the jump.
    const double sigma = gr.chord(a, b);
    const int tau = (uv < sigma - kTieSpeed) ? a : b;
    return gr.in_band(tau, u_idx);
  }
  // Fan: the trace along the ray of slope uv is the nearer edge outside the
  // fan's speed span; inside the span the tangency state always violates
  // capacity (alpha < 1, uv < V).
  if (uv <= model().fp(gr.rho[a]) + kTieSpeed) return gr.in_band(a, u_idx);
  if (uv >= model().fp(gr.rho[b]) - kTieSpeed) return gr.in_band(b, u_idx);
  return true;
}

Tracker::LocalSolve Tracker::solve_at_av(int a, int b, int u_idx) const {
  LocalSolve s;
  const Grids& gr = g();
  if (!band_blocked(a, b, u_idx)) {
    emit_classical(s.out, a, b);
  } else {
    s.constrained = true;
    const int h = gr.hat_idx[u_idx];
    const int c = gr.check_idx[u_idx];
    const double uv = gr.speed[u_idx];
    emit_classical(s.out, a, h);
    for (const Front& f : s.out)
      AVTRACK_CHECK(f.speed < uv - kTieSpeed, "upstream piece must trail the bottleneck");
    s.uc_pos = static_cast<int>(s.out.size());
    s.out.push_back({.l = h, .r = c, .kind = FrontKind::kBottleneck, .speed = uv});
    std::vector<Front> right;
    emit_classical(right, c, b);
    for (const Front& f : right)
      AVTRACK_CHECK(f.speed > uv + kTieSpeed, "downstream piece must outrun the bottleneck");
    s.out.insert(s.out.end(), right.begin(), right.end());
  }
  for (std::size_t i = 1; i < s.out.size(); ++i)
    AVTRACK_CHECK(s.out[i - 1].speed <= s.out[i].speed + kTieSpeed, "outgoing waves out of order");
  return s;
}

// ------------------------------------------------------------- live mutation

Tracker::FrontIt Tracker::insert_front(FrontIt before, Front f, double x, double t) {
  AVTRACK_CHECK(f.l != f.r, "zero-strength front");
  f.id = next_id_++;
  f.x0 = x;
  f.t0 = t;
  f.rec = static_cast<std::uint32_t>(history_.fronts.size());
  FrontRecord rec;
  rec.id = f.id;
  rec.kind = f.kind;
  rec.left = g().rho[f.l];
  rec.right = g().rho[f.r];
  rec.speed = f.speed;
  rec.t_birth = t;
  rec.x_birth = x;
  history_.fronts.push_back(rec);
  const FrontIt it = fronts_.insert(before, f);
  by_id_[f.id] = it;
  return it;
}

void Tracker::kill_front(FrontIt it, double t) {
  history_.fronts[it->rec].t_death = t;
  by_id_.erase(it->id);
  fronts_.erase(it);
}

void Tracker::push_merge(FrontIt a, FrontIt b) {
  const double dv = a->speed - b->speed;
  if (dv <= kTieSpeed) return;
  const double dx = b->x(time_) - a->x(time_);
  AVTRACK_CHECK(dx >= -kPosAgree, "fronts out of order");
  Pending p;
  p.t = time_ + std::max(0.0, dx) / dv;
  p.x = a->x(p.t);
  p.seq = next_seq_++;
  p.kind = PendKind::kMerge;
  p.a_id = a->id;
  p.b_id = b->id;
  queue_.push(p);
}

void Tracker::push_av_hits() {
  if (av_attached_) return;
  const double t = time_;
  if (av_next_ != fronts_.end()) {
    const double dv = av_speed_ - av_next_->speed;
    if (dv > kTieSpeed) {
      const double dx = av_next_->x(t) - av_y(t);
      AVTRACK_CHECK(dx >= -kPosAgree, "bottleneck ahead of its right neighbor");
      Pending p;
      p.t = t + std::max(0.0, dx) / dv;
      p.x = av_y(p.t);
      p.seq = next_seq_++;
      p.kind = PendKind::kAvHit;
      p.a_id = av_next_->id;
      p.av_ver = av_version_;
      queue_.push(p);
    }
  }
  if (av_next_ != fronts_.begin()) {
    const FrontIt left = std::prev(av_next_);
    const double dv = left->speed - av_speed_;
    if (dv > kTieSpeed) {
      const double dx = av_y(t) - left->x(t);
      AVTRACK_CHECK(dx >= -kPosAgree, "bottleneck behind its left neighbor");
      Pending p;
      p.t = t + std::max(0.0, dx) / dv;
      p.x = av_y(p.t);
      p.seq = next_seq_++;
      p.kind = PendKind::kAvHit;
      p.a_id = left->id;
      p.av_ver = av_version_;
      queue_.push(p);
    }
  }
}

bool Tracker::pending_valid(const Pending& p, FrontIt* a, FrontIt* b) {
  const auto ia = by_id_.find(p.a_id);
  if (ia == by_id_.end()) return false;
  if (p.kind == PendKind::kMerge) {
    const auto ib = by_id_.find(p.b_id);
    if (ib == by_id_.end()) return false;
    if (std::next(ia->second) != ib->second) return false;
    *a = ia->second;
    *b = ib->second;
    return true;
  }
  if (p.av_ver != av_version_) return false;
  AVTRACK_CHECK(!av_attached_, "stale bottleneck flow survived an attach");
  const FrontIt it = ia->second;
  const bool is_right = (it == av_next_);
  const bool is_left = (av_next_ != fronts_.begin() && it == std::prev(av_next_));
  if (!is_right && !is_left) return false;
  *a = it;
  *b = fronts_.end();
  return true;
}

int Tracker::gap_state_left_of_av() const {
  if (av_attached_) return av_next_->l;
  if (fronts_.empty()) return far_left_idx_;
  if (av_next_ == fronts_.begin()) return av_next_->l;
  return std::prev(av_next_)->r;
}

int Tracker::gap_state_right_of_av() const {
  if (av_attached_) return av_next_->r;
  if (fronts_.empty()) return far_left_idx_;
  if (av_next_ == fronts_.end()) return std::prev(fronts_.end())->r;
  return av_next_->l;
}

double Tracker::gamma_now() const {
  if (av_mode_ != AvMode::kBottleneck) return 0.0;
  const Grids& gr = g();
  return -2.0 * (gr.rho[gr.hat_idx[av_u_]] - gr.rho[gr.check_idx[av_u_]]);
}

void Tracker::place_av(LocalSolve& sol, int left_state, FrontIt insert_before, double y, double t,
                       std::vector<FrontIt>& inserted) {
  const Grids& gr = g();
  inserted.clear();
  inserted.reserve(sol.out.size());
  for (Front& f : sol.out) inserted.push_back(insert_front(insert_before, f, y, t));

  const double uv = gr.speed[av_u_];
  if (sol.constrained) {
    av_attached_ = true;
    av_next_ = inserted[sol.uc_pos];
    av_mode_ = AvMode::kBottleneck;
    av_speed_ = uv;
  } else {
    // Rightmost slot the AV can occupy without outrunning its own trace: in
    // slot i the trace is the state right of wave i-1 and the AV speed is
    // min(u, v(trace)), which must not fall behind wave i-1.
    const int n = static_cast<int>(sol.out.size());
    int slot = 0;
    double w = std::min(uv, model().v(gr.rho[left_state]));
    for (int i = 1; i <= n; ++i) {
      const double wi = std::min(uv, model().v(gr.rho[sol.out[i - 1].r]));
      if (wi >= sol.out[i - 1].speed - kTieSpeed) {
        slot = i;
        w = wi;
      }
    }
    AVTRACK_CHECK(slot == n || w <= sol.out[slot].speed + kTieSpeed,
                  "bottleneck would cross the wave ahead");
    if (slot > 0 && std::abs(w - sol.out[slot - 1].speed) <= kTieSpeed) {
      av_attached_ = true;
      av_next_ = inserted[slot - 1];
      av_mode_ = AvMode::kRide;
      av_speed_ = sol.out[slot - 1].speed;
    } else {
      av_attached_ = false;
      av_next_ = (slot < n) ? inserted[slot] : insert_before;
      av_mode_ = AvMode::kFree;
      av_speed_ = w;
    }
  }
  AVTRACK_CHECK(av_speed_ >= 0.0 && av_speed_ <= model().V() + kTieSpeed,
                "bottleneck speed out of range");
  av_y0_ = y;
  av_t0_ = t;
  ++av_version_;
}

// ------------------------------------------------------------------- ledger

void Tracker::append_ledger(EventType type, double t, double d_tv, double d_gamma, double d_tvu) {
  const Grids& gr = g();
  const double six_over_beta = 6.0 / model().beta();
  const double d_up = d_tv + d_gamma + six_over_beta * d_tvu;
  tv_rho_ += d_tv;
  upsilon_ += d_up;
  AVTRACK_CHECK(!history_.ledger.rows.empty(), "ledger missing its opening row");
  const std::size_t prev_count = history_.ledger.rows.back().front_count;
  const std::size_t count = fronts_.size();
  const double quantum = std::min(gr.delta_rho, six_over_beta * gr.delta_u);
  const bool strict = d_up <= -quantum + kLedgerTol;
  const bool flat = std::abs(d_up) <= kLedgerTol && count <= prev_count;
  if (!(d_up <= kLedgerTol && (strict || flat))) {
    std::ostringstream os;
    os << "functional step rejected: t=" << t << " type=" << to_string(type)
       << " d_upsilon=" << d_up << " d_tv=" << d_tv << " d_gamma=" << d_gamma
       << " d_tvu=" << d_tvu << " fronts " << prev_count << " -> " << count
       << " quantum=" << quantum << " upsilon=" << upsilon_;
    AVTRACK_CHECK(false, os.str());
  }
  const double tvu = tvu_suffix_[control_pos_];
  const double gamma = gamma_now();
  AVTRACK_CHECK(std::abs(upsilon_ - (tv_rho_ + 2.0 * model().R() + gamma + six_over_beta * tvu)) <=
                    kLedgerTol,
                "functional bookkeeping out of sync");
  history_.ledger.rows.push_back({t, type, tv_rho_, gamma, tvu, upsilon_, d_up, count});
}

void Tracker::audit_geometry(double t) {
  const Grids& gr = g();
  double tv = 0;
  const Front* last = nullptr;
  for (const Front& f : fronts_) {
    tv += std::abs(gr.rho[f.l] - gr.rho[f.r]);
    if (last) {
      AVTRACK_CHECK(last->r == f.l, "state chain broken");
      AVTRACK_CHECK(last->x(t) <= f.x(t) + kPosAgree, "front order broken");
    }
    last = &f;
  }
  AVTRACK_CHECK(std::abs(tv - tv_rho_) <= kLedgerTol, "variation bookkeeping out of sync");
  tv_rho_ = tv;
  upsilon_ = tv + 2.0 * model().R() + gamma_now() + (6.0 / model().beta()) * tvu_suffix_[control_pos_];
}

// ----------------------------------------------------------------- segments

void Tracker::open_av_segment(double t) {
  AvSegment s;
  s.t_begin = t;
  s.t_end = t;
  s.y_begin = av_y(t);
  s.speed = av_speed_;
  s.u = g().speed[av_u_];
  s.mode = av_mode_;
  s.trace_left = g().rho[gap_state_left_of_av()];
  s.trace_right = g().rho[gap_state_right_of_av()];
  history_.av.push_back(s);
}

void Tracker::close_av_segment(double t) {
  AVTRACK_CHECK(!history_.av.empty(), "no open bottleneck segment");
  AvSegment& s = history_.av.back();
  AVTRACK_CHECK(t >= s.t_begin - kTieValue, "segment closes before it opens");
  s.t_end = std::max(t, s.t_begin);
}

// ------------------------------------------------------------------- events

void Tracker::process_merge(FrontIt a, FrontIt b, double t) {
  AVTRACK_CHECK(++events_ <= event_cap_, "event cap exceeded");
  const Grids& gr = g();
  AVTRACK_CHECK(a->kind != FrontKind::kBottleneck && b->kind != FrontKind::kBottleneck,
                "nonclassical front outside the bottleneck bookkeeping");
  AVTRACK_CHECK(!(av_attached_ && (av_next_ == a || av_next_ == b)),
                "attached bottleneck handled as a plain merge");
  AVTRACK_CHECK(!(!av_attached_ && av_next_ == b), "squeezed bottleneck handled as a plain merge");
  AVTRACK_CHECK(a->r == b->l, "merging fronts do not chain");
  const double xa = a->x(t);
  const double xb = b->x(t);
  AVTRACK_CHECK(std::abs(xa - xb) <= kPosAgree * (1.0 + std::abs(xa)), "merge point mismatch");
  const double x = 0.5 * (xa + xb);
  const int l = a->l;
  const int r = b->r;
  const double removed =
      std::abs(gr.rho[a->l] - gr.rho[a->r]) + std::abs(gr.rho[b->l] - gr.rho[b->r]);
  const FrontIt before = std::next(b);
  const bool av_in_gap_left_of_a = (!av_attached_ && av_next_ == a);
  kill_front(a, t);
  kill_front(b, t);

  double added = 0;
  FrontIt merged = fronts_.end();
  if (l != r) {
    Front f;
    f.l = l;
    f.r = r;
    f.kind = (l < r) ? FrontKind::kShock : FrontKind::kRarefaction;
    f.speed = gr.chord(l, r);
    if (l > r)
      AVTRACK_CHECK(gr.rho[l] - gr.rho[r] <= gr.eps_rho + kTieValue, "fan piece too strong");
    merged = insert_front(before, f, x, t);
    added = std::abs(gr.rho[l] - gr.rho[r]);
  }
  if (av_in_gap_left_of_a) av_next_ = (merged != fronts_.end()) ? merged : before;

  const FrontIt after = (merged != fronts_.end()) ? merged : before;
  if (after != fronts_.begin() && after != fronts_.end()) push_merge(std::prev(after), after);
  if (merged != fronts_.end() && std::next(merged) != fronts_.end())
    push_merge(merged, std::next(merged));
  push_av_hits();

  append_ledger(EventType::kFrontMerge, t, added - removed, 0.0, 0.0);
  if (events_ % kAuditStride == 0) audit_geometry(t);
}

void Tracker::process_av_interaction(std::vector<FrontIt> group, double y, double t, EventType type,
                                     double d_tvu, double gamma_before) {
  AVTRACK_CHECK(++events_ <= event_cap_, "event cap exceeded");
  const Grids& gr = g();
  close_av_segment(t);

  int a = 0;
  int b = 0;
  FrontIt before;
  double removed = 0;
  if (group.empty()) {
    AVTRACK_CHECK(!av_attached_, "attached bottleneck needs its front in the group");
    a = b = gap_state_right_of_av();
    before = av_next_;
  } else {
    for (std::size_t i = 0; i < group.size(); ++i) {
      AVTRACK_CHECK(std::abs(group[i]->x(t) - y) <= kPosAgree * (1.0 + std::abs(y)),
                    "group away from the interaction point");
      if (i)
        AVTRACK_CHECK(std::next(group[i - 1]) == group[i] && group[i - 1]->r == group[i]->l,
                      "interaction group not contiguous");
      removed += std::abs(gr.rho[group[i]->l] - gr.rho[group[i]->r]);
    }
    a = group.front()->l;
    b = group.back()->r;
    before = std::next(group.back());
    av_attached_ = false;
    av_next_ = before;
    for (const FrontIt it : group) kill_front(it, t);
  }

  LocalSolve sol = solve_at_av(a, b, av_u_);
  std::vector<FrontIt> inserted;
  place_av(sol, a, before, y, t, inserted);
  double added = 0;
  for (const Front& f : sol.out) added += std::abs(gr.rho[f.l] - gr.rho[f.r]);

  const FrontIt first_new = inserted.empty() ? before : inserted.front();
  if (first_new != fronts_.begin())
    AVTRACK_CHECK(std::prev(first_new)->x(t) <= y + kPosAgree,
                  "left neighbor ahead of the interaction point");
  if (before != fronts_.end())
    AVTRACK_CHECK(before->x(t) >= y - kPosAgree, "right neighbor behind the interaction point");

  // Re-arm every adjacency touching the rewritten stretch.
  FrontIt it = first_new;
  if (it != fronts_.begin()) --it;
  while (it != fronts_.end()) {
    const FrontIt nx = std::next(it);
    if (nx == fronts_.end()) break;
    push_merge(it, nx);
    if (it == before) break;
    ++it;
  }
  push_av_hits();

  append_ledger(type, t, added - removed, gamma_now() - gamma_before, d_tvu);
  open_av_segment(t);
  if (events_ % kAuditStride == 0) audit_geometry(t);
}

void Tracker::process_control_jump(double t) {
  AVTRACK_CHECK(control_pos_ < control_.breaks.size(), "no control jump pending");
  AVTRACK_CHECK(std::abs(control_.breaks[control_pos_] - t) <= kTieValue, "control clock skew");
  const double gamma_before = gamma_now();
  const double u_old = g().speed[av_u_];
  const double u_new = control_.values[control_pos_ + 1];
  ++control_pos_;
  av_u_ = g().speed_index(u_new);
  std::vector<FrontIt> group;
  if (av_attached_) group.push_back(av_next_);
  process_av_interaction(std::move(group), av_y(t), t, EventType::kControlJump,
                         -std::abs(u_new - u_old), gamma_before);
}

// ------------------------------------------------------------------ lifecycle

Tracker::Tracker(const Grids& grids, const StepFunction& rho0, const StepFunction& control,
                 double y0)
    : history_(grids) {
  const Grids& gr = g();
  AVTRACK_CHECK(rho0.values.size() == rho0.breaks.size() + 1, "initial datum shape");
  AVTRACK_CHECK(control.values.size() == control.breaks.size() + 1, "control shape");
  AVTRACK_CHECK(std::isfinite(y0), "bottleneck start position");
  for (std::size_t i = 1; i < rho0.breaks.size(); ++i)
    AVTRACK_CHECK(rho0.breaks[i - 1] < rho0.breaks[i], "initial jump positions must increase");
  for (std::size_t i = 0; i < control.breaks.size(); ++i) {
    AVTRACK_CHECK(control.breaks[i] > 0, "control jumps must lie at positive times");
    if (i) AVTRACK_CHECK(control.breaks[i - 1] < control.breaks[i], "control jump times must increase");
  }
  for (const double r : rho0.values)
    AVTRACK_CHECK(0.0 <= r && r <= model().R(), "density out of range");
  for (const double u : control.values)
    AVTRACK_CHECK(0.0 <= u && u <= model().V(), "control out of range");

  // Project the data onto the grids; the projection never inflates variation.
  StepFunction rq{rho0.breaks, quantize_density_profile(gr, rho0.values)};
  AVTRACK_CHECK(rq.total_variation() <= rho0.total_variation() + kTieValue,
                "density projection inflated variation");
  rq.compress(0.0);
  StepFunction uq{control.breaks, quantize_control(gr, control.values)};
  AVTRACK_CHECK(uq.total_variation() <= control.total_variation() + kTieValue,
                "control projection inflated variation");
  uq.compress(0.0);
  history_.rho0 = rq;
  history_.control = uq;
  history_.rho_far_left = rq.values.front();
  history_.rho_far_right = rq.values.back();
  history_.y0 = y0;
  control_ = uq;

  std::vector<int> vidx;
  vidx.reserve(rq.values.size());
  for (const double r : rq.values) vidx.push_back(gr.rho_index(r));
  far_left_idx_ = vidx.front();
  av_y0_ = y0;
  av_t0_ = 0;
  av_u_ = gr.speed_index(uq.values.front());

  tvu_suffix_.assign(uq.breaks.size() + 1, 0.0);
  for (std::size_t k = uq.breaks.size(); k-- > 0;)
    tvu_suffix_[k] = tvu_suffix_[k + 1] + std::abs(uq.values[k + 1] - uq.values[k]);

  // Initial fronts away from the AV; a jump at the AV position joins the
  // bottleneck solve instead.
  int a_av = -1;
  int b_av = -1;
  FrontIt before_av = fronts_.end();
  bool before_found = false;
  for (std::size_t j = 0; j < rq.breaks.size(); ++j) {
    const double xj = rq.breaks[j];
    if (std::abs(xj - y0) <= kTieValue) {
      a_av = vidx[j];
      b_av = vidx[j + 1];
      continue;
    }
    std::vector<Front> out;
    emit_classical(out, vidx[j], vidx[j + 1]);
    for (const Front& f : out) {
      const FrontIt it = insert_front(fronts_.end(), f, xj, 0.0);
      if (xj > y0 && !before_found) {
        before_av = it;
        before_found = true;
      }
    }
  }
  if (a_av < 0) a_av = b_av = gr.rho_index(rq(y0));

  LocalSolve sol = solve_at_av(a_av, b_av, av_u_);
  std::vector<FrontIt> inserted;
  place_av(sol, a_av, before_av, y0, 0.0, inserted);

  for (FrontIt it = fronts_.begin(); it != fronts_.end(); ++it) {
    const FrontIt nx = std::next(it);
    if (nx != fronts_.end()) push_merge(it, nx);
  }
  push_av_hits();

  double tv = 0;
  for (const Front& f : fronts_) tv += std::abs(gr.rho[f.l] - gr.rho[f.r]);
  tv_rho_ = tv;
  const double six_over_beta = 6.0 / model().beta();
  upsilon_ = tv_rho_ + 2.0 * model().R() + gamma_now() + six_over_beta * tvu_suffix_[0];
  AVTRACK_CHECK(upsilon_ <= rq.total_variation() + 2.0 * model().R() +
                                six_over_beta * tvu_suffix_[0] + kLedgerTol,
                "functional exceeds its opening bound");
  history_.ledger.rows.push_back(
      {0.0, EventType::kInit, tv_rho_, gamma_now(), tvu_suffix_[0], upsilon_, 0.0, fronts_.size()});
  open_av_segment(0.0);

  const int shift = 2 * std::min(gr.nu, 14);
  event_cap_ = 10ull * (fronts_.size() + control_.breaks.size() + 1) * (1ull << shift);
}

double Tracker::next_event_time() {
  FrontIt a, b;
  while (!queue_.empty()) {
    if (pending_valid(queue_.top(), &a, &b)) break;
    queue_.pop();
  }
  const double tq = queue_.empty() ? kInf : queue_.top().t;
  const double tc = control_pos_ < control_.breaks.size() ? control_.breaks[control_pos_] : kInf;
  return std::min(tq, tc);
}

void Tracker::advance_to(double t) {
  AVTRACK_CHECK(!finalized_, "run already finalized");
  AVTRACK_CHECK(t >= time_, "time must not run backwards");
  while (true) {
    FrontIt a, b;
    double tq = kInf;
    while (!queue_.empty()) {
      if (pending_valid(queue_.top(), &a, &b)) {
        tq = queue_.top().t;
        break;
      }
      queue_.pop();
    }
    const double tc = control_pos_ < control_.breaks.size() ? control_.breaks[control_pos_] : kInf;
    if (std::min(tq, tc) > t) break;
    if (tq <= tc) {
      const Pending p = queue_.top();
      queue_.pop();
      AVTRACK_CHECK(p.t >= time_ - kTieValue, "event queue ran backwards");
      time_ = std::max(time_, p.t);
      if (p.kind == PendKind::kMerge) {
        const bool involves_av =
            (av_attached_ && (av_next_ == a || av_next_ == b)) || (!av_attached_ && av_next_ == b);
        if (involves_av) {
          const double y = 0.5 * (a->x(time_) + b->x(time_));
          process_av_interaction({a, b}, y, time_, EventType::kAvInteraction, 0.0, gamma_now());
        } else {
          process_merge(a, b, time_);
        }
      } else {
        const double y = a->x(time_);
        AVTRACK_CHECK(std::abs(av_y(time_) - y) <= kPosAgree * (1.0 + std::abs(y)),
                      "bottleneck misses its collision point");
        process_av_interaction({a}, y, time_, EventType::kAvInteraction, 0.0, gamma_now());
      }
    } else {
      AVTRACK_CHECK(tc >= time_ - kTieValue, "control clock ran backwards");
      time_ = std::max(time_, tc);
      process_control_jump(time_);
    }
  }
  time_ = t;
}

const RunHistory& Tracker::finalize() {
  if (!finalized_) {
    audit_geometry(time_);
    close_av_segment(time_);
    history_.t_end = time_;
    finalized_ = true;
  }
  return history_;
}

std::vector<Tracker::FrontSnap> Tracker::front_snapshot() const {
  std::vector<FrontSnap> out;
  out.reserve(fronts_.size());
  const Grids& gr = g();
  for (const Front& f : fronts_)
    out.push_back({f.x(time_), gr.rho[f.l], gr.rho[f.r], f.speed, f.kind});
  return out;
}

Tracker::AvSnap Tracker::av_snapshot() const {
  return {av_y(time_), av_speed_, g().speed[av_u_], av_mode_,
          g().rho[gap_state_left_of_av()], g().rho[gap_state_right_of_av()]};
}

// ------------------------------------------------------------------ history

StepFunction RunHistory::profile(double t) const {
  AVTRACK_CHECK(0.0 <= t && t <= t_end + kTieValue, "time outside the simulated range");
  struct Item {
    double x, right, speed;
  };
  std::vector<Item> items;
  for (const FrontRecord& f : fronts)
    if (f.alive_at(t)) items.push_back({f.position(t), f.right, f.speed});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.speed < b.speed;
  });
  StepFunction s;
  s.values.push_back(rho_far_left);
  for (const Item& i : items) {
    s.breaks.push_back(i.x);
    s.values.push_back(i.right);
  }
  return s;
}

std::vector<double> RunHistory::sample(double t, const std::vector<double>& xs) const {
  const StepFunction p = profile(t);
  std::vector<double> out;
  out.reserve(xs.size());
  for (const double x : xs) out.push_back(p(x));
  return out;
}

const AvSegment& RunHistory::av_segment_at(double t) const {
  AVTRACK_CHECK(!av.empty(), "no bottleneck history");
  AVTRACK_CHECK(0.0 <= t && t <= t_end + kTieValue, "time outside the simulated range");
  auto it = std::upper_bound(av.begin(), av.end(), t,
                             [](double tt, const AvSegment& s) { return tt < s.t_begin; });
  if (it != av.begin()) --it;
  return *it;
}

double RunHistory::av_position(double t) const { return av_segment_at(t).position(t); }

std::vector<std::pair<double, double>> RunHistory::av_polyline() const {
  std::vector<std::pair<double, double>> pts;
  for (const AvSegment& s : av) {
    if (!pts.empty() && pts.back().first == s.t_begin) continue;
    pts.emplace_back(s.t_begin, s.y_begin);
  }
  if (!av.empty()) pts.emplace_back(av.back().t_end, av.back().position(av.back().t_end));
  return pts;
}

double RunHistory::mass_in(double t, double a, double b) const {
  AVTRACK_CHECK(a < b, "mass window must be nonempty");
  const StepFunction p = profile(t);
  double m = 0;
  double x = a;
  std::size_t i = std::upper_bound(p.breaks.begin(), p.breaks.end(), a) - p.breaks.begin();
  for (; i < p.breaks.size() && p.breaks[i] < b; ++i) {
    m += p.values[i] * (p.breaks[i] - x);
    x = p.breaks[i];
  }
  m += p.values[i] * (b - x);
  return m;
}

std::pair<double, double> RunHistory::support() const {
  double lo = y0;
  double hi = y0;
  const auto upd = [&](double x) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  };
  for (const FrontRecord& f : fronts) {
    upd(f.x_birth);
    upd(f.position(std::min(f.t_death, t_end)));
  }
  for (const AvSegment& s : av) {
    upd(s.y_begin);
    upd(s.position(s.t_end));
  }
  for (const double xb : rho0.breaks) upd(xb);
  return {lo, hi};
}

// --------------------------------------------------------------- validation

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os << checks << " checks, " << issues.size() << " issues";
  for (std::size_t i = 0; i < issues.size() && i < 8; ++i)
    os << "\n  t=" << issues[i].time << ": " << issues[i].what;
  if (issues.size() > 8) os << "\n  ...";
  return os.str();
}

ValidationReport validate_history(const RunHistory& h) {
  ValidationReport rep;
  const FluxModel& m = h.grids.model;
  const double eps = h.grids.eps_rho;
  const auto flag = [&](double t, std::string what) { rep.issues.push_back({t, std::move(what)}); };
  const auto expect = [&](bool ok, double t, const char* what) {
    ++rep.checks;
    if (!ok) flag(t, what);
  };

  constexpr double kRh = 1e-10;     // propagation against the flux chord
  constexpr double kBand = 1e-9;    // nonclassical states against the band endpoints
  constexpr double kLaw = 1e-12;    // AV speed law
  constexpr double kCap = 1e-9;     // capacity inequality
  constexpr double kCont = 1e-9;    // path continuity

  // Fronts: admissibility, propagation, fan budget, nonclassical pinning.
  for (const FrontRecord& f : h.fronts) {
    const double tb = f.t_birth;
    expect(f.t_death >= f.t_birth, tb, "front dies before its birth");
    expect(0.0 <= f.left && f.left <= m.R() && 0.0 <= f.right && f.right <= m.R(), tb,
           "front state out of range");
    expect(std::abs(f.left - f.right) > 0, tb, "zero-strength front recorded");
    expect(std::abs(f.speed - m.chord(f.left, f.right)) <= kRh, tb,
           "propagation speed off the flux chord");
    switch (f.kind) {
      case FrontKind::kShock:
        expect(f.left < f.right, tb, "shock with downward jump");
        break;
      case FrontKind::kRarefaction:
        expect(f.right < f.left, tb, "fan piece with upward jump");
        expect(f.left - f.right <= eps + 1e-9, tb, "fan piece above the strength budget");
        expect(m.fp(f.left) - kRh <= f.speed && f.speed <= m.fp(f.right) + kRh, tb,
               "fan piece speed outside its characteristic bracket");
        break;
      case FrontKind::kBottleneck: {
        expect(f.right < f.left, tb, "nonclassical jump must go downward");
        const BottleneckGeometry geo = m.geometry_at(f.speed);
        expect(std::abs(f.left - geo.rho_hat) <= kBand, tb,
               "nonclassical left state off the band endpoint");
        expect(std::abs(f.right - geo.rho_check) <= kBand, tb,
               "nonclassical right state off the band endpoint");
        expect(std::abs(m.f(f.left) - f.speed * f.left - geo.F_alpha) <= kBand, tb,
               "capacity not saturated on the nonclassical jump");
        // The AV must carry this front for its whole lifetime.
        const double td = std::min(f.t_death, h.t_end);
        bool carried = true;
        for (const AvSegment& s : h.av) {
          const double lo = std::max(s.t_begin, tb);
          const double hi = std::min(s.t_end, td);
          if (lo >= hi) continue;
          const double mid = 0.5 * (lo + hi);
          if (s.mode != AvMode::kBottleneck || std::abs(s.speed - f.speed) > kLaw ||
              std::abs(s.position(mid) - f.position(mid)) > kCont)
            carried = false;
        }
        expect(carried, tb, "nonclassical jump detached from the bottleneck");
        break;
      }
    }
  }

  // AV segments: speed law, capacity, control consistency, continuity.
  expect(!h.av.empty(), 0, "empty bottleneck history");
  for (std::size_t i = 0; i < h.av.size(); ++i) {
    const AvSegment& s = h.av[i];
    const double t0 = s.t_begin;
    expect(s.t_end >= s.t_begin, t0, "segment ends before it begins");
    expect(0.0 <= s.speed && s.speed <= m.V() + kLaw, t0, "bottleneck speed out of range");
    expect(std::abs(s.speed - std::min(s.u, m.v(s.trace_right))) <= kLaw, t0,
           "bottleneck speed law broken");
    expect(m.f(s.trace_left) - s.speed * s.trace_left <= m.F_alpha(s.speed) + kCap, t0,
           "capacity exceeded on the left trace");
    expect(m.f(s.trace_right) - s.speed * s.trace_right <= m.F_alpha(s.speed) + kCap, t0,
           "capacity exceeded on the right trace");
    expect(std::abs(s.u - h.control(s.t_begin)) <= kLaw, t0,
           "segment control value off the control function");
    if (s.mode == AvMode::kBottleneck)
      expect(std::abs(s.speed - s.u) <= kLaw, t0, "nonclassical segment not at the control speed");
    if (i) {
      const AvSegment& p = h.av[i - 1];
      expect(std::abs(p.t_end - s.t_begin) <= kCont, t0, "gap in the bottleneck timeline");
      expect(std::abs(p.position(p.t_end) - s.y_begin) <= kCont, t0, "bottleneck path jumps");
    } else {
      expect(s.t_begin == 0.0, t0, "bottleneck history starts late");
    }
  }
  if (!h.av.empty())
    expect(std::abs(h.av.back().t_end - h.t_end) <= kCont, h.t_end,
           "bottleneck history ends early");

  // Profile structure at sampled times: chaining, far fields, variation bound,
  // and the trace at the AV.
  std::vector<double> times;
  for (const LedgerRow& r : h.ledger.rows) times.push_back(r.time);
  times.push_back(h.t_end);
  std::sort(times.begin(), times.end());
  std::vector<double> mids;
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (times[i + 1] > times[i] + 1e-12) mids.push_back(0.5 * (times[i] + times[i + 1]));
  if (mids.empty()) mids.push_back(0.5 * h.t_end);
  const std::size_t stride = std::max<std::size_t>(1, mids.size() / 200);
  const double upsilon0 = h.ledger.upsilon0();
  for (std::size_t k = 0; k < mids.size(); k += stride) {
    const double t = mids[k];
    struct Item {
      double x, left, right;
    };
    std::vector<Item> items;
    for (const FrontRecord& f : h.fronts)
      if (f.alive_at(t)) items.push_back({f.position(t), f.left, f.right});
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.x < b.x; });
    double tv = 0;
    bool chained = true;
    bool ordered = true;
    for (std::size_t i = 0; i < items.size(); ++i) {
      tv += std::abs(items[i].left - items[i].right);
      if (i) {
        if (std::abs(items[i - 1].right - items[i].left) > kTieValue) chained = false;
        if (items[i - 1].x > items[i].x + kPosAgree) ordered = false;
      }
    }
    expect(chained, t, "profile state chain broken");
    expect(ordered, t, "profile front order broken");
    expect(items.empty() || std::abs(items.front().left - h.rho_far_left) <= kTieValue, t,
           "left far field drifted");
    expect(items.empty() || std::abs(items.back().right - h.rho_far_right) <= kTieValue, t,
           "right far field drifted");
    expect(tv <= upsilon0 + kLedgerTol, t, "density variation above the functional bound");
    const AvSegment& s = h.av_segment_at(t);
    const StepFunction p = h.profile(t);
    expect(std::abs(p(s.position(t)) - s.trace_right) <= kTieValue, t,
           "profile disagrees with the recorded trace at the bottleneck");
  }

  // Ledger: monotone functional, consistent rows.
  const std::vector<LedgerRow>& rows = h.ledger.rows;
  expect(!rows.empty(), 0, "empty ledger");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const LedgerRow& r = rows[i];
    expect(r.tv_rho >= -kLedgerTol, r.time, "negative variation recorded");
    if (i) {
      expect(r.upsilon <= rows[i - 1].upsilon + kLedgerTol, r.time, "functional increased");
      expect(r.time >= rows[i - 1].time - 1e-12, r.time, "ledger times not sorted");
      expect(std::abs((r.upsilon - rows[i - 1].upsilon) - r.d_upsilon) <= kLedgerTol, r.time,
             "ledger step inconsistent with the running value");
    }
  }

  return rep;
}

// ----------------------------------------------------------------- distances

double l1_distance(const RunHistory& a, const RunHistory& b, double t) {
  AVTRACK_CHECK(std::abs(a.rho_far_left - b.rho_far_left) <= kTieValue &&
                    std::abs(a.rho_far_right - b.rho_far_right) <= kTieValue,
                "far fields differ; the distance would be unbounded");
  const StepFunction pa = a.profile(t);
  const StepFunction pb = b.profile(t);
  const auto [lo1, hi1] = a.support();
  const auto [lo2, hi2] = b.support();
  const double lo = std::min(lo1, lo2) - 1.0;
  const double hi = std::max(hi1, hi2) + 1.0;
  std::vector<double> cuts{lo, hi};
  for (const double v : pa.breaks)
    if (v > lo && v < hi) cuts.push_back(v);
  for (const double v : pb.breaks)
    if (v > lo && v < hi) cuts.push_back(v);
  std::sort(cuts.begin(), cuts.end());
  double total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double w = cuts[i + 1] - cuts[i];
    if (w <= 0) continue;
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    total += w * std::abs(pa(mid) - pb(mid));
  }
  return total;
}

double l1_space_time(const RunHistory& a, const RunHistory& b, double t1, int slices) {
  AVTRACK_CHECK(slices > 0 && t1 > 0, "bad averaging window");
  const double dt = t1 / slices;
  double acc = 0;
  for (int k = 0; k < slices; ++k) acc += l1_distance(a, b, (k + 0.5) * dt) * dt;
  return acc;
}

}  // namespace avtrack
