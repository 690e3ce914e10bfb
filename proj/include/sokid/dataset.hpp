#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sokid {

/// Shared observation times t_0 < t_1 < ... < t_n.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> times);

  /// `points` equispaced times covering [t0, t1] inclusive.
  static TimeGrid equispaced(double t0, double t1, std::size_t points);

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t points() const noexcept { return times_.size(); }
  /// Number of snapshot intervals n.
  std::size_t intervals() const noexcept {
    return times_.empty() ? 0 : times_.size() - 1;
  }
  /// Width of interval i in 1..n, spanning [t_{i-1}, t_i].
  double width(std::size_t interval) const {
    return times_[interval] - times_[interval - 1];
  }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> times_;
};

/// k trajectories started from one initial condition, observed on the grid.
/// Row j is a trajectory, column i is time t_i.
struct TrajectoryGroup {
  double initial_condition = 0.0;
  Eigen::MatrixXd snapshots;

  std::size_t trajectories() const noexcept {
    return static_cast<std::size_t>(snapshots.rows());
  }

  bool operator==(const TrajectoryGroup& other) const {
    return initial_condition == other.initial_condition &&
           snapshots.rows() == other.snapshots.rows() &&
           snapshots.cols() == other.snapshots.cols() &&
           snapshots == other.snapshots;
  }
};

/// Location of one occupation functional: a group and an interval in 1..n.
struct FunctionalIndex {
  std::size_t group = 0;
  std::size_t interval = 0;

  bool operator==(const FunctionalIndex&) const = default;
};

/// Groups of trajectory snapshots sharing one time grid.
///
/// Functionals are ordered group-major, interval-minor, so functional
/// `group * n + (interval - 1)` covers [t_{interval-1}, t_interval] of
/// `group`. A default-constructed ensemble is empty and fails validation.
class SnapshotEnsemble {
 public:
  SnapshotEnsemble() = default;
  /// Throws Error(validation) if any invariant is violated.
  SnapshotEnsemble(TimeGrid grid, std::vector<TrajectoryGroup> groups);

  const TimeGrid& grid() const noexcept { return grid_; }
  const std::vector<TrajectoryGroup>& groups() const noexcept {
    return groups_;
  }
  const TrajectoryGroup& group(std::size_t g) const { return groups_[g]; }
  std::size_t group_count() const noexcept { return groups_.size(); }
  std::size_t intervals() const noexcept { return grid_.intervals(); }
  /// Total number of functionals N = g * n.
  std::size_t functional_count() const noexcept {
    return groups_.size() * grid_.intervals();
  }

  FunctionalIndex functional(std::size_t row) const {
    const std::size_t n = grid_.intervals();
    return {row / n, row % n + 1};
  }
  std::size_t row_of(FunctionalIndex f) const {
    return f.group * grid_.intervals() + (f.interval - 1);
  }
  std::vector<FunctionalIndex> functional_index() const;

  /// Every observed state, all groups, trajectories and times.
  std::vector<double> all_states() const;

  bool operator==(const SnapshotEnsemble&) const = default;

 private:
  TimeGrid grid_;
  std::vector<TrajectoryGroup> groups_;
};

/// Checks every ensemble invariant; throws Error(validation) naming the
/// offending location.
void validate(const SnapshotEnsemble& ensemble);

struct IncrementStats {
  Eigen::VectorXd mean_increments;
  std::vector<FunctionalIndex> index;
};

/// Across-trajectory mean of y_i - y_{i-1} for every (group, interval).
IncrementStats mean_increments(const SnapshotEnsemble& ensemble);

enum class FileFormat { csv, json };

FileFormat parse_format(std::string_view name);
/// Guesses the format from a file extension; defaults to csv.
FileFormat format_from_path(const std::filesystem::path& path);

std::string to_csv(const SnapshotEnsemble& ensemble);
std::string to_json(const SnapshotEnsemble& ensemble);
SnapshotEnsemble from_csv(std::string_view text);
SnapshotEnsemble from_json(std::string_view text);

SnapshotEnsemble load_ensemble(const std::filesystem::path& path,
                               FileFormat format);
void save_ensemble(const SnapshotEnsemble& ensemble,
                   const std::filesystem::path& path, FileFormat format);

/// Hex SHA-256 of a byte string / file contents.
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace sokid
