#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace soclab {

/// Raised for invalid lattice or drive parameters.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Boundary { Open, Closed };

inline const char* to_string(Boundary b) { return b == Boundary::Open ? "open" : "closed"; }

inline Boundary parse_boundary(const std::string& s) {
  if (s == "open") return Boundary::Open;
  if (s == "closed") return Boundary::Closed;
  throw ConfigError("unknown boundary '" + s + "' (expected open|closed)");
}

struct Boundaries {
  Boundary north = Boundary::Open;
  Boundary south = Boundary::Open;
  Boundary east = Boundary::Open;
  Boundary west = Boundary::Open;

  static Boundaries all(Boundary b) { return {b, b, b, b}; }

  /// Closed north and west, open south and east: the corner-driven pile.
  static Boundaries corner_pile() {
    return {Boundary::Closed, Boundary::Open, Boundary::Open, Boundary::Closed};
  }

  friend bool operator==(const Boundaries&, const Boundaries&) = default;
};

/// Row 0 is the north edge, column 0 the west edge.
struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct AvalancheRecord {
  std::int64_t size = 0;        // total topplings S
  std::int64_t area = 0;        // distinct cells toppled
  std::int64_t duration = 0;    // synchronous sweeps with at least one toppling
  std::int64_t dissipated = 0;  // grains lost through open sides
  Cell trigger{};
  std::int64_t timestep = 0;

  friend bool operator==(const AvalancheRecord&, const AvalancheRecord&) = default;
};

inline constexpr const char* kAvalancheCsvHeader =
    "timestep,size_S,area,duration,dissipated,trigger_row,trigger_col";

inline void write_csv_row(std::ostream& os, const AvalancheRecord& r) {
  os << r.timestep << ',' << r.size << ',' << r.area << ',' << r.duration << ','
     << r.dissipated << ',' << r.trigger.row << ',' << r.trigger.col << '\n';
}

/// Grain bookkeeping. `stored` is maintained as grains_in - grains_out and is
/// checked against the actual lattice content by Lattice::grain_count().
struct Ledger {
  std::int64_t grains_in = 0;
  std::int64_t grains_out = 0;
  std::int64_t stored = 0;
  std::int64_t timesteps = 0;

  bool balanced() const { return grains_in == grains_out + stored; }
  double injection_rate() const { return timesteps ? double(grains_in) / double(timesteps) : 0.0; }
  double dissipation_rate() const { return timesteps ? double(grains_out) / double(timesteps) : 0.0; }

  friend bool operator==(const Ledger&, const Ledger&) = default;
};

/// Square height-model sandpile with per-side open/closed boundaries.
///
/// A cell with height >= threshold topples: it loses `threshold` grains which
/// are dealt to the four neighbours, floor(g/4) each plus the remainder one at a
/// time in the order N, E, S, W. A share aimed at a closed side stays in the
/// toppling cell; a share aimed at an open side leaves the system.
///
/// Storage is padded by one ring of sink cells so the toppling kernel needs no
/// bounds checks; sinks are cleared after every relaxation.
class Lattice {
public:
  static constexpr std::int64_t kMaxSweeps = 1'000'000'000;

  Lattice(int side, std::int64_t threshold, Boundaries boundaries)
      : side_(side), stride_(side + 2), threshold_(threshold), boundaries_(boundaries) {
    if (side < 2) throw ConfigError("lattice side must be >= 2, got " + std::to_string(side));
    if (threshold < 1)
      throw ConfigError("toppling threshold must be >= 1, got " + std::to_string(threshold));
    const auto padded = static_cast<std::size_t>(stride_) * static_cast<std::size_t>(stride_);
    heights_.assign(padded, kSinkLevel);
    loss_.assign(padded, 0);
    leak_.assign(padded, 0);
    area_mark_.assign(padded, 0);
    current_.assign(static_cast<std::size_t>(side) * side + 1, 0);
    next_.assign(current_.size(), 0);

    const std::int64_t base = threshold_ / 4;
    const std::int64_t rem = threshold_ % 4;
    shares_ = {base + (rem > 0), base + (rem > 1), base + (rem > 2), base};  // N, E, S, W

    for (int r = 0; r < side_; ++r) {
      for (int c = 0; c < side_; ++c) {
        const auto i = index(r, c);
        heights_[i] = 0;
        std::int64_t kept = 0;
        std::int64_t lost = 0;
        const std::array<bool, 4> at_edge = {r == 0, c == side_ - 1, r == side_ - 1, c == 0};
        const std::array<Boundary, 4> side_kind = {boundaries_.north, boundaries_.east,
                                                   boundaries_.south, boundaries_.west};
        for (int d = 0; d < 4; ++d) {
          if (!at_edge[d]) continue;
          (side_kind[d] == Boundary::Closed ? kept : lost) += shares_[d];
        }
        loss_[i] = threshold_ - kept;
        leak_[i] = lost;
      }
    }
  }

  int side() const { return side_; }
  std::int64_t threshold() const { return threshold_; }
  const Boundaries& boundaries() const { return boundaries_; }
  const Ledger& ledger() const { return ledger_; }
  Ledger& ledger() { return ledger_; }

  std::int64_t height(int row, int col) const { return heights_[checked_index(row, col)]; }

  /// Loads a height directly. The change is booked as injected (or removed)
  /// grains so the ledger stays balanced.
  void set_height(int row, int col, std::int64_t h) {
    if (h < 0) throw ConfigError("heights must be non-negative");
    const auto i = checked_index(row, col);
    const std::int64_t delta = h - heights_[i];
    heights_[i] = h;
    ledger_.grains_in += delta;
    ledger_.stored += delta;
    note_pending(i);
  }

  void add_grains(Cell cell, std::int64_t grains) {
    if (grains < 0) throw ConfigError("cannot add a negative number of grains");
    const auto i = checked_index(cell.row, cell.col);
    heights_[i] += grains;
    ledger_.grains_in += grains;
    ledger_.stored += grains;
    note_pending(i);
  }

  /// Sum of all heights, recomputed from the grid.
  std::int64_t grain_count() const {
    std::int64_t total = 0;
    for (int r = 0; r < side_; ++r) {
      const auto* row = &heights_[index(r, 0)];
      for (int c = 0; c < side_; ++c) total += row[c];
    }
    return total;
  }

  std::int64_t max_height() const {
    std::int64_t m = 0;
    for (int r = 0; r < side_; ++r)
      for (int c = 0; c < side_; ++c) m = std::max(m, heights_[index(r, c)]);
    return m;
  }

  bool is_relaxed() const { return pending_.empty() && max_height() < threshold_; }

  /// The cell where two closed sides meet (NW, NE, SW, SE checked in that
  /// order); NW when no such corner exists.
  Cell closed_corner() const {
    const auto closed = [](Boundary b) { return b == Boundary::Closed; };
    const int last = side_ - 1;
    if (closed(boundaries_.north) && closed(boundaries_.west)) return {0, 0};
    if (closed(boundaries_.north) && closed(boundaries_.east)) return {0, last};
    if (closed(boundaries_.south) && closed(boundaries_.west)) return {last, 0};
    if (closed(boundaries_.south) && closed(boundaries_.east)) return {last, last};
    return {0, 0};
  }

  /// Topples synchronously until every height is below threshold.
  ///
  /// The next sweep's toppling set is collected while toppling: a cell joins
  /// it either when it is still at or above threshold right after its own
  /// toppling, or when an incoming grain lifts it across the threshold. Each
  /// cell qualifies at most once per sweep, so no deduplication is needed.
  AvalancheRecord relax() {
    AvalancheRecord rec;
    ++avalanche_serial_;
    const std::int64_t g = threshold_;
    const std::ptrdiff_t w = stride_;
    const auto [s_n, s_e, s_s, s_w] = shares_;
    std::int64_t* h = heights_.data();
    Index* cur = current_.data();
    Index* nxt = next_.data();

    std::sort(pending_.begin(), pending_.end());
    pending_.erase(std::unique(pending_.begin(), pending_.end()), pending_.end());
    std::size_t n_cur = 0;
    for (auto i : pending_)
      if (h[i] >= g) cur[n_cur++] = i;
    pending_.clear();

    std::int64_t out = 0;
    while (n_cur != 0) {
      if (++rec.duration > kMaxSweeps)
        throw std::runtime_error("relaxation exceeded the sweep ceiling; lattice cannot dissipate");
      std::size_t n_next = 0;
      const auto feed = [&](Index j, std::int64_t grains) {
        const std::int64_t before = h[j];
        h[j] = before + grains;
        nxt[n_next] = j;
        n_next += (before < g) & (before + grains >= g);
      };
      for (std::size_t k = 0; k < n_cur; ++k) {
        const Index i = cur[k];
        h[i] -= loss_[i];
        nxt[n_next] = i;
        n_next += h[i] >= g;
        feed(i - w, s_n);
        feed(i + 1, s_e);
        feed(i + w, s_s);
        feed(i - 1, s_w);
        out += leak_[i];
        rec.area += area_mark_[i] != avalanche_serial_;
        area_mark_[i] = avalanche_serial_;
      }
      rec.size += static_cast<std::int64_t>(n_cur);
      std::swap(cur, nxt);
      n_cur = n_next;
    }
    clear_sinks();

    rec.dissipated = out;
    ledger_.grains_out += out;
    ledger_.stored -= out;
    return rec;
  }

  /// Plain-text snapshot: one row per line, heights separated by spaces.
  void write_snapshot(std::ostream& os) const {
    for (int r = 0; r < side_; ++r) {
      for (int c = 0; c < side_; ++c) os << (c ? " " : "") << heights_[index(r, c)];
      os << '\n';
    }
  }

private:
  using Index = std::uint32_t;

  // Sinks sit far below zero so incoming grains never lift them to threshold.
  static constexpr std::int64_t kSinkLevel = std::numeric_limits<std::int64_t>::min() / 4;

  Index index(int row, int col) const {
    return static_cast<Index>(row + 1) * static_cast<Index>(stride_) + static_cast<Index>(col + 1);
  }

  Index checked_index(int row, int col) const {
    if (row < 0 || row >= side_ || col < 0 || col >= side_)
      throw std::out_of_range("cell (" + std::to_string(row) + "," + std::to_string(col) +
                              ") outside lattice of side " + std::to_string(side_));
    return index(row, col);
  }

  void note_pending(Index i) {
    if (heights_[i] >= threshold_) pending_.push_back(i);
  }

  void clear_sinks() {
    const Index last = static_cast<Index>(stride_) - 1;
    for (Index k = 0; k <= last; ++k) {
      heights_[k] = kSinkLevel;
      heights_[last * stride_ + k] = kSinkLevel;
      heights_[k * stride_] = kSinkLevel;
      heights_[k * stride_ + last] = kSinkLevel;
    }
  }

  int side_;
  int stride_;
  std::int64_t threshold_;
  Boundaries boundaries_;
  std::array<std::int64_t, 4> shares_{};

  std::vector<std::int64_t> heights_;
  std::vector<std::int64_t> loss_;  // grains leaving the cell per toppling
  std::vector<std::int64_t> leak_;  // of which cross an open side
  std::vector<std::uint64_t> area_mark_;
  std::uint64_t avalanche_serial_ = 0;

  std::vector<Index> pending_;
  std::vector<Index> current_;
  std::vector<Index> next_;

  Ledger ledger_;
};

// ---------------------------------------------------------------------------
// Driving

enum class SitePolicy { CornerCell, TopRegion, UniformRandom };

inline const char* to_string(SitePolicy p) {
  switch (p) {
    case SitePolicy::CornerCell: return "corner";
    case SitePolicy::TopRegion: return "top_region";
    case SitePolicy::UniformRandom: return "uniform";
  }
  return "?";
}

inline SitePolicy parse_site_policy(const std::string& s) {
  if (s == "corner") return SitePolicy::CornerCell;
  if (s == "top_region") return SitePolicy::TopRegion;
  if (s == "uniform") return SitePolicy::UniformRandom;
  throw ConfigError("unknown site policy '" + s + "' (expected corner|top_region|uniform)");
}

struct DriveSpec {
  std::int64_t grains_per_event = 1;  // h * dt
  SitePolicy site_policy = SitePolicy::CornerCell;
  int region_extent = 1;              // TopRegion only
  double event_probability = 1.0;

  void validate(int side) const {
    if (grains_per_event < 1) throw ConfigError("grains_per_event must be >= 1");
    if (!(event_probability > 0.0 && event_probability <= 1.0))
      throw ConfigError("event_probability must lie in (0, 1]");
    if (site_policy == SitePolicy::TopRegion && (region_extent < 1 || region_extent > side))
      throw ConfigError("top region extent must lie in [1, side]");
  }
};

using Rng = std::mt19937_64;

/// Adds one drive event with probability `event_probability`. Returns the
/// driven cell, or nullopt when no event fired this timestep.
template <class Urbg>
std::optional<Cell> drive(Lattice& lattice, const DriveSpec& spec, Urbg& rng) {
  if (spec.event_probability < 1.0) {
    std::bernoulli_distribution fire(spec.event_probability);
    if (!fire(rng)) return std::nullopt;
  }
  Cell site = lattice.closed_corner();
  switch (spec.site_policy) {
    case SitePolicy::CornerCell: break;
    case SitePolicy::TopRegion: {
      std::uniform_int_distribution<int> pick(0, spec.region_extent * spec.region_extent - 1);
      const int k = pick(rng);
      const int dr = k / spec.region_extent;
      const int dc = k % spec.region_extent;
      const int last = lattice.side() - 1;
      site.row = site.row == 0 ? dr : last - dr;
      site.col = site.col == 0 ? dc : last - dc;
      break;
    }
    case SitePolicy::UniformRandom: {
      const int n = lattice.side();
      std::uniform_int_distribution<int> pick(0, n * n - 1);
      const int k = pick(rng);
      site = {k / n, k % n};
      break;
    }
  }
  lattice.add_grains(site, spec.grains_per_event);
  return site;
}

/// One timestep: drive, then relax to completion. A record is returned only
/// when a drive event occurred.
template <class Urbg>
std::optional<AvalancheRecord> step(Lattice& lattice, const DriveSpec& spec, Urbg& rng) {
  const std::int64_t t = lattice.ledger().timesteps;
  const auto site = drive(lattice, spec, rng);
  std::optional<AvalancheRecord> rec;
  if (site) {
    rec = lattice.relax();
    rec->trigger = *site;
    rec->timestep = t;
  }
  ++lattice.ledger().timesteps;
  return rec;
}

}  // namespace soclab
