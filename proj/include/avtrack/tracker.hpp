#pragma once
#include <cstdint>
#include <limits>
#include <list>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "avtrack/mesh.hpp"

namespace avtrack {

/** Piecewise-constant function of one variable, right-continuous:
 * values[i] holds on [breaks[i-1], breaks[i][, values.front() to the left of
 * breaks.front(), values.back() to the right of breaks.back().  breaks are
 * strictly increasing and one shorter than values; an empty breaks vector
 * denotes a constant function. */
struct StepFunction {
  std::vector<double> breaks;
  std::vector<double> values;

  double operator()(double x) const;
  double total_variation() const;
  /** Drops zero-size jumps, preserving the function pointwise. */
  void compress(double tol = 0.0);
};

enum class FrontKind {
  kShock,          // admissible jump, left density < right density
  kRarefaction,    // small downward jump standing in for a piece of a fan
  kBottleneck,     // nonclassical jump pinned to the AV
};

enum class AvMode {
  kFree,        // no front at the AV position
  kRide,        // AV travels on a classical front of equal speed
  kBottleneck,  // AV carries the nonclassical jump
};

enum class EventType { kInit, kFrontMerge, kAvInteraction, kControlJump };

const char* to_string(FrontKind k);
const char* to_string(AvMode m);
const char* to_string(EventType t);

/** One row of the interaction ledger, written after every processed event.
 * upsilon = tv_rho + 2R + gamma + (6/beta) tv_u_tail, where gamma discounts
 * twice the band width while the nonclassical jump is present and tv_u_tail
 * is the remaining total variation of the control. */
struct LedgerRow {
  double time = 0;
  EventType type = EventType::kInit;
  double tv_rho = 0;
  double gamma = 0;
  double tv_u_tail = 0;
  double upsilon = 0;
  double d_upsilon = 0;
  std::size_t front_count = 0;
};

struct GlimmLedger {
  std::vector<LedgerRow> rows;
  double upsilon0() const { return rows.empty() ? 0.0 : rows.front().upsilon; }
};

/** Lifetime record of one front: position is affine, x(t) = x_birth +
 * speed * (t - t_birth), valid on [t_birth, t_death[.  States are density
 * values (not grid indices) so a stored run can be audited independently. */
struct FrontRecord {
  std::uint32_t id = 0;
  FrontKind kind = FrontKind::kShock;
  double left = 0, right = 0;
  double speed = 0;
  double t_birth = 0, x_birth = 0;
  double t_death = std::numeric_limits<double>::infinity();

  double position(double t) const { return x_birth + speed * (t - t_birth); }
  bool alive_at(double t) const { return t_birth <= t && t < t_death; }
};

/** AV state over one inter-event interval: y(t) = y_begin + speed*(t-t_begin)
 * on [t_begin, t_end[, with the adjacent density traces recorded. */
struct AvSegment {
  double t_begin = 0, t_end = 0;
  double y_begin = 0;
  double speed = 0;
  double u = 0;  // control value in force
  AvMode mode = AvMode::kFree;
  double trace_left = 0, trace_right = 0;

  double position(double t) const { return y_begin + speed * (t - t_begin); }
};

/** Completed run: every front lifetime, the AV polyline, and the ledger.
 * Self-contained (carries the grids, quantized data, and far-field states)
 * so validation and output need no access to the live simulator. */
struct RunHistory {
  explicit RunHistory(const Grids& g) : grids(g) {}

  Grids grids;
  double t_end = 0;
  double rho_far_left = 0, rho_far_right = 0;
  StepFunction rho0;     // quantized initial datum
  StepFunction control;  // quantized control
  double y0 = 0;
  std::string scenario_hash;  // optional provenance tag for emitted files

  std::vector<FrontRecord> fronts;
  std::vector<AvSegment> av;
  GlimmLedger ledger;

  /** Density profile at time t in [0, t_end]; right-continuous in x. */
  StepFunction profile(double t) const;
  std::vector<double> sample(double t, const std::vector<double>& xs) const;
  double av_position(double t) const;
  const AvSegment& av_segment_at(double t) const;
  /** Vertices (t, y) of the AV path, one per segment boundary. */
  std::vector<std::pair<double, double>> av_polyline() const;
  /** Exact integral of the density profile at time t over [a, b]. */
  double mass_in(double t, double a, double b) const;
  /** Window [lo, hi] containing every front and the AV over the whole run. */
  std::pair<double, double> support() const;
};

struct ValidationIssue {
  double time = 0;
  std::string what;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  long checks = 0;
  bool ok() const { return issues.empty(); }
  std::string summary() const;
};

/** Re-derives every admissibility and consistency property of a stored run
 * from the recorded values alone: propagation speeds against flux chords,
 * jump admissibility, fan-piece strength and speed brackets, nonclassical
 * states pinned to the band endpoints with capacity equality, the capacity
 * inequality and the speed law along the AV, continuity of the AV path,
 * profile chaining, the total-variation bound, and ledger monotonicity. */
ValidationReport validate_history(const RunHistory& h);

/** Exact L1 distance between the density profiles of two runs at time t. */
double l1_distance(const RunHistory& a, const RunHistory& b, double t);
/** Space-time L1 distance over [0, t1], exact in x, midpoint rule in t. */
double l1_space_time(const RunHistory& a, const RunHistory& b, double t1, int slices = 256);

/** Event-driven simulator for the density field coupled to the AV.
 *
 * All densities live on the grids: states are stored as grid indices, the
 * nonclassical jump endpoints come from the band-closure tables, and front
 * speeds are flux chords of grid values, so event handling never drifts off
 * the grid.  Every processed event appends a ledger row and must not
 * increase the functional: it either drops by at least
 * min(delta_rho, 6 delta_u / beta) or stays constant with a non-increasing
 * front count; any other outcome raises InvariantError with an event dump. */
class Tracker {
 public:
  /** Quantizes the data onto the grids, solves the initial jump problems
   * (fans split into grid-step pieces), and classifies the AV.  rho0 values
   * in [0, R]; control values in [0, V] with positive, increasing jump
   * times; finitely many jumps each. */
  Tracker(const Grids& grids, const StepFunction& rho0, const StepFunction& control, double y0);

  double time() const { return time_; }
  /** Time of the next pending event, +infinity when none remain. */
  double next_event_time();
  /** Processes every event with time <= t, then sets the clock to t. */
  void advance_to(double t);
  /** Closes the history at the current clock; idempotent, and no further
   * advance is allowed afterwards. */
  const RunHistory& finalize();
  const RunHistory& history() const { return history_; }
  const GlimmLedger& ledger() const { return history_.ledger; }
  const Grids& grids() const { return history_.grids; }

  struct FrontSnap {
    double x = 0, left = 0, right = 0, speed = 0;
    FrontKind kind = FrontKind::kShock;
  };
  struct AvSnap {
    double y = 0, speed = 0, u = 0;
    AvMode mode = AvMode::kFree;
    double trace_left = 0, trace_right = 0;
  };
  std::vector<FrontSnap> front_snapshot() const;
  AvSnap av_snapshot() const;

  Tracker(const Tracker&) = delete;
  Tracker& operator=(const Tracker&) = delete;

 private:
  struct Front {
    std::uint32_t id = 0;
    int l = 0, r = 0;  // density grid indices
    FrontKind kind = FrontKind::kShock;
    double x0 = 0, t0 = 0, speed = 0;
    std::uint32_t rec = 0;  // index into history_.fronts
    double x(double t) const { return x0 + speed * (t - t0); }
  };
  using FrontList = std::list<Front>;
  using FrontIt = FrontList::iterator;

  enum class PendKind { kMerge, kAvHit };
  // Fronts never move or change speed once created, so a pending event stays
  // valid exactly while its participants are alive and still adjacent (and,
  // for AV events, while the AV flow is unchanged).
  struct Pending {
    double t = 0, x = 0;
    std::uint64_t seq = 0;
    PendKind kind = PendKind::kMerge;
    std::uint32_t a_id = 0, b_id = 0;
    std::uint64_t av_ver = 0;
  };
  struct PendingLater {
    bool operator()(const Pending& a, const Pending& b) const {
      if (a.t != b.t) return a.t > b.t;
      if (a.x != b.x) return a.x > b.x;
      return a.seq > b.seq;
    }
  };

  struct LocalSolve {
    std::vector<Front> out;
    bool constrained = false;
    int uc_pos = -1;
  };
  void emit_classical(std::vector<Front>& out, int a, int b) const;
  bool band_blocked(int a, int b, int u_idx) const;
  LocalSolve solve_at_av(int a, int b, int u_idx) const;

  double av_y(double t) const { return av_y0_ + av_speed_ * (t - av_t0_); }
  int gap_state_left_of_av() const;
  int gap_state_right_of_av() const;
  FrontIt insert_front(FrontIt before, Front f, double x, double t);
  void kill_front(FrontIt it, double t);
  void push_merge(FrontIt a, FrontIt b);
  void push_av_hits();
  bool pending_valid(const Pending& p, FrontIt* a, FrontIt* b);

  void place_av(LocalSolve& sol, int left_state, FrontIt insert_before, double y, double t,
                std::vector<FrontIt>& inserted);
  void process_merge(FrontIt a, FrontIt b, double t);
  void process_av_interaction(std::vector<FrontIt> group, double y, double t, EventType type,
                              double d_tvu, double gamma_before);
  void process_control_jump(double t);
  void open_av_segment(double t);
  void close_av_segment(double t);
  void append_ledger(EventType type, double t, double d_tv, double d_gamma, double d_tvu);
  double gamma_now() const;
  void audit_geometry(double t);

  // immutable problem data
  const FluxModel& model() const { return history_.grids.model; }
  const Grids& g() const { return history_.grids; }

  RunHistory history_;
  StepFunction control_;             // quantized control (values on the speed grid)
  std::vector<double> tvu_suffix_;   // tvu_suffix_[k]: control variation from jump k on
  std::size_t control_pos_ = 0;      // next unprocessed control jump

  FrontList fronts_;
  std::unordered_map<std::uint32_t, FrontIt> by_id_;
  std::priority_queue<Pending, std::vector<Pending>, PendingLater> queue_;

  double time_ = 0;
  int far_left_idx_ = 0;  // grid index of the constant state left of all fronts
  double av_y0_ = 0, av_t0_ = 0, av_speed_ = 0;
  int av_u_ = 0;  // index into the speed grid
  AvMode av_mode_ = AvMode::kFree;
  bool av_attached_ = false;
  FrontIt av_next_;  // attached: the ridden front; free: first front right of the AV
  std::uint64_t av_version_ = 0;

  double tv_rho_ = 0;       // running total variation of the density
  double upsilon_ = 0;      // running functional value
  std::uint32_t next_id_ = 1;
  std::uint64_t next_seq_ = 1;
  std::uint64_t events_ = 0;
  std::uint64_t event_cap_ = 0;
  bool finalized_ = false;
};

}  // namespace avtrack
