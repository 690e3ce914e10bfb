#include "sokid/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sokid/error.hpp"
#include "sokid/io.hpp"

namespace sokid {

namespace {

using nlohmann::json;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

std::string format_real(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

double parse_real(std::string_view token, std::size_t row, std::size_t col) {
  while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\r'))
    token.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    // from_chars rejects "nan"/"inf" spellings on some libstdc++ versions.
    if (token == "nan" || token == "NaN" || token == "-nan") {
      return std::nan("");
    }
    if (token == "inf" || token == "-inf") {
      return token.front() == '-' ? -HUGE_VAL : HUGE_VAL;
    }
    fail(ErrorKind::parse, "row " + std::to_string(row) + ", column " +
                               std::to_string(col) + ": cannot parse '" +
                               std::string(token) + "' as a real number");
  }
  return value;
}

std::size_t parse_index(std::string_view token, std::size_t row,
                        std::size_t col) {
  std::size_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail(ErrorKind::parse, "row " + std::to_string(row) + ", column " +
                               std::to_string(col) + ": expected an index, got '" +
                               std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out << bytes;
  out.flush();
  if (!out) fail(ErrorKind::io, "write to '" + path.string() + "' failed");
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 2) {
    fail(ErrorKind::validation, "time grid needs at least 2 points, got " +
                                    std::to_string(times_.size()));
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) {
      fail(ErrorKind::validation,
           "non-finite time at index " + std::to_string(i));
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      fail(ErrorKind::validation,
           "non-monotone time grid at index " + std::to_string(i) + " (t=" +
               format_real(times_[i]) + " after t=" +
               format_real(times_[i - 1]) + ")");
    }
    if (i > 0 && !std::isfinite(times_[i] - times_[i - 1])) {
      fail(ErrorKind::validation,
           "non-finite interval width at index " + std::to_string(i));
    }
  }
}

TimeGrid TimeGrid::equispaced(double t0, double t1, std::size_t points) {
  if (points < 2) {
    fail(ErrorKind::validation, "equispaced grid needs at least 2 points");
  }
  std::vector<double> times(points);
  const double span = t1 - t0;
  for (std::size_t i = 0; i < points; ++i) {
    times[i] = t0 + span * static_cast<double>(i) /
                        static_cast<double>(points - 1);
  }
  times.back() = t1;
  return TimeGrid(std::move(times));
}

SnapshotEnsemble::SnapshotEnsemble(TimeGrid grid,
                                   std::vector<TrajectoryGroup> groups)
    : grid_(std::move(grid)), groups_(std::move(groups)) {
  validate(*this);
}

std::vector<FunctionalIndex> SnapshotEnsemble::functional_index() const {
  std::vector<FunctionalIndex> index;
  index.reserve(functional_count());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (std::size_t i = 1; i <= grid_.intervals(); ++i) {
      index.push_back({g, i});
    }
  }
  return index;
}

std::vector<double> SnapshotEnsemble::all_states() const {
  std::vector<double> states;
  for (const auto& group : groups_) {
    states.insert(states.end(), group.snapshots.data(),
                  group.snapshots.data() + group.snapshots.size());
  }
  return states;
}

void validate(const SnapshotEnsemble& ensemble) {
  const auto& times = ensemble.grid().times();
  if (times.size() < 2) {
    fail(ErrorKind::validation, "time grid needs at least 2 points");
  }
  if (ensemble.groups().empty()) {
    fail(ErrorKind::validation, "ensemble has no trajectory groups");
  }
  const auto cols = static_cast<Eigen::Index>(times.size());
  for (std::size_t g = 0; g < ensemble.group_count(); ++g) {
    const auto& group = ensemble.group(g);
    if (group.snapshots.rows() == 0) {
      fail(ErrorKind::validation,
           "group " + std::to_string(g) + " has no trajectories");
    }
    if (group.snapshots.cols() != cols) {
      fail(ErrorKind::validation,
           "group " + std::to_string(g) + " has " +
               std::to_string(group.snapshots.cols()) +
               " snapshots per trajectory, expected " + std::to_string(cols));
    }
    if (!std::isfinite(group.initial_condition)) {
      fail(ErrorKind::validation, "group " + std::to_string(g) +
                                      " has a non-finite initial condition");
    }
    for (Eigen::Index j = 0; j < group.snapshots.rows(); ++j) {
      for (Eigen::Index i = 0; i < cols; ++i) {
        if (!std::isfinite(group.snapshots(j, i))) {
          fail(ErrorKind::validation,
               "non-finite snapshot at (group " + std::to_string(g) +
                   ", trajectory " + std::to_string(j) + ", time index " +
                   std::to_string(i) + ")");
        }
      }
      if (group.snapshots(j, 0) != group.initial_condition) {
        fail(ErrorKind::validation,
             "trajectory " + std::to_string(j) + " of group " +
                 std::to_string(g) +
                 " does not start at the group's initial condition");
      }
    }
  }
}

IncrementStats mean_increments(const SnapshotEnsemble& ensemble) {
  const std::size_t n = ensemble.intervals();
  IncrementStats stats;
  stats.mean_increments.resize(
      static_cast<Eigen::Index>(ensemble.functional_count()));
  stats.index = ensemble.functional_index();
  for (std::size_t g = 0; g < ensemble.group_count(); ++g) {
    const auto& y = ensemble.group(g).snapshots;
    const double k = static_cast<double>(y.rows());
    for (std::size_t i = 1; i <= n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      stats.mean_increments(static_cast<Eigen::Index>(g * n + i - 1)) =
          (y.col(ii) - y.col(ii - 1)).sum() / k;
    }
  }
  return stats;
}

FileFormat parse_format(std::string_view name) {
  if (name == "csv") return FileFormat::csv;
  if (name == "json") return FileFormat::json;
  fail(ErrorKind::config, "unknown file format '" + std::string(name) +
                              "' (expected csv or json)");
}

FileFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".json" ? FileFormat::json : FileFormat::csv;
}

std::string to_csv(const SnapshotEnsemble& ensemble) {
  validate(ensemble);
  std::string out = "group,traj";
  for (double t : ensemble.grid().times()) {
    out += ",t=";
    out += format_real(t);
  }
  out += '\n';
  for (std::size_t g = 0; g < ensemble.group_count(); ++g) {
    const auto& y = ensemble.group(g).snapshots;
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      out += std::to_string(g);
      out += ',';
      out += std::to_string(j);
      for (Eigen::Index i = 0; i < y.cols(); ++i) {
        out += ',';
        out += format_real(y(j, i));
      }
      out += '\n';
    }
  }
  return out;
}

SnapshotEnsemble from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) fail(ErrorKind::parse, "empty CSV input");

  const auto header = split(lines[0], ',');
  if (header.size() < 4 || header[0] != "group" || header[1] != "traj") {
    fail(ErrorKind::parse,
         "row 0: header must be 'group,traj,t=<time>,...' with at least two "
         "times");
  }
  std::vector<double> times;
  for (std::size_t c = 2; c < header.size(); ++c) {
    auto token = header[c];
    if (token.substr(0, 2) != "t=") {
      fail(ErrorKind::parse, "row 0, column " + std::to_string(c) +
                                 ": expected 't=<time>', got '" +
                                 std::string(token) + "'");
    }
    times.push_back(parse_real(token.substr(2), 0, c));
  }
  TimeGrid grid(std::move(times));
  const std::size_t cols = grid.points();

  std::vector<std::vector<std::vector<double>>> rows_by_group;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split(lines[r], ',');
    if (fields.size() != cols + 2) {
      fail(ErrorKind::validation,
           "row " + std::to_string(r) + ": ragged row with " +
               std::to_string(fields.size()) + " columns, expected " +
               std::to_string(cols + 2));
    }
    const std::size_t g = parse_index(fields[0], r, 0);
    const std::size_t j = parse_index(fields[1], r, 1);
    if (g > rows_by_group.size() ||
        (g + 1 < rows_by_group.size())) {
      fail(ErrorKind::validation,
           "row " + std::to_string(r) + ", column 0: groups must appear in "
                                        "order 0, 1, 2, ...");
    }
    if (g == rows_by_group.size()) rows_by_group.emplace_back();
    if (j != rows_by_group[g].size()) {
      fail(ErrorKind::validation,
           "row " + std::to_string(r) + ", column 1: trajectory index " +
               std::to_string(j) + " out of order in group " +
               std::to_string(g));
    }
    std::vector<double> values(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      values[c] = parse_real(fields[c + 2], r, c + 2);
    }
    rows_by_group[g].push_back(std::move(values));
  }

  std::vector<TrajectoryGroup> groups;
  for (auto& rows : rows_by_group) {
    TrajectoryGroup group;
    group.snapshots.resize(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(cols));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      for (std::size_t c = 0; c < cols; ++c) {
        group.snapshots(static_cast<Eigen::Index>(j),
                        static_cast<Eigen::Index>(c)) = rows[j][c];
      }
    }
    group.initial_condition = rows.front().front();
    groups.push_back(std::move(group));
  }
  return SnapshotEnsemble(std::move(grid), std::move(groups));
}

std::string to_json(const SnapshotEnsemble& ensemble) {
  validate(ensemble);
  json doc;
  doc["times"] = ensemble.grid().times();
  json groups = json::array();
  for (const auto& group : ensemble.groups()) {
    json rows = json::array();
    for (Eigen::Index j = 0; j < group.snapshots.rows(); ++j) {
      json row = json::array();
      for (Eigen::Index i = 0; i < group.snapshots.cols(); ++i) {
        row.push_back(group.snapshots(j, i));
      }
      rows.push_back(std::move(row));
    }
    groups.push_back(
        {{"initial_condition", group.initial_condition}, {"snapshots", rows}});
  }
  doc["groups"] = std::move(groups);
  return doc.dump(1) + "\n";
}

SnapshotEnsemble from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, std::string("malformed JSON: ") + e.what());
  }
  try {
    TimeGrid grid(doc.at("times").get<std::vector<double>>());
    std::vector<TrajectoryGroup> groups;
    const auto& jgroups = doc.at("groups");
    for (std::size_t g = 0; g < jgroups.size(); ++g) {
      const auto& jg = jgroups[g];
      TrajectoryGroup group;
      group.initial_condition = jg.at("initial_condition").get<double>();
      const auto& rows = jg.at("snapshots");
      group.snapshots.resize(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(grid.points()));
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].size() != grid.points()) {
          fail(ErrorKind::validation,
               "group " + std::to_string(g) + ", trajectory " +
                   std::to_string(j) + ": ragged row with " +
                   std::to_string(rows[j].size()) + " entries, expected " +
                   std::to_string(grid.points()));
        }
        for (std::size_t i = 0; i < grid.points(); ++i) {
          if (!rows[j][i].is_number()) {
            fail(ErrorKind::validation,
                 "non-finite snapshot at (group " + std::to_string(g) +
                     ", trajectory " + std::to_string(j) + ", time index " +
                     std::to_string(i) + ")");
          }
          group.snapshots(static_cast<Eigen::Index>(j),
                          static_cast<Eigen::Index>(i)) =
              rows[j][i].get<double>();
        }
      }
      groups.push_back(std::move(group));
    }
    return SnapshotEnsemble(std::move(grid), std::move(groups));
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("unexpected JSON layout: ") + e.what());
  }
}

SnapshotEnsemble load_ensemble(const std::filesystem::path& path,
                               FileFormat format) {
  const std::string text = read_text(path);
  return format == FileFormat::csv ? from_csv(text) : from_json(text);
}

void save_ensemble(const SnapshotEnsemble& ensemble,
                   const std::filesystem::path& path, FileFormat format) {
  const std::string bytes =
      format == FileFormat::csv ? to_csv(ensemble) : to_json(ensemble);
  write_text(path, bytes);
}

std::string content_hash(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    fail(ErrorKind::io, "SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string file_hash(const std::filesystem::path& path) {
  return content_hash(read_text(path));
}

}  // namespace sokid
