#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "oracles.hpp"
#include "sokid/dataset.hpp"
#include "sokid/error.hpp"
#include "sokid/io.hpp"

using namespace sokid;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sokid_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

template <typename F>
Error capture(F&& body) {
  try {
    body();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected sokid::Error");
  return Error(ErrorKind::io, "unreachable");
}

}  // namespace

TEST_CASE("time grid rejects short, repeated and non-finite times") {
  CHECK_THROWS_AS(TimeGrid({0.0}), Error);
  const Error e = capture([] { TimeGrid({0.0, 0.5, 0.5}); });
  CHECK(e.kind() == ErrorKind::validation);
  CHECK(std::string(e.what()).find("non-monotone time grid") != std::string::npos);
  CHECK_THROWS_AS(TimeGrid({0.0, std::nan(""), 1.0}), Error);
  const auto g = TimeGrid::equispaced(0.0, 1.0, 100);
  CHECK(g.points() == 100);
  CHECK(g.intervals() == 99);
  CHECK(g.times().back() == 1.0);
  CHECK(g.width(1) == doctest::Approx(1.0 / 99));
}

TEST_CASE("ensemble validation names the offending snapshot") {
  auto e = oracle::constant_ensemble({0.0, 1.0, 2.0}, {0.5, 1.0}, 3);
  auto groups = e.groups();
  groups[1].snapshots(2, 1) = std::nan("");
  const Error err = capture([&] { SnapshotEnsemble(e.grid(), groups); });
  CHECK(err.kind() == ErrorKind::validation);
  CHECK(std::string(err.what()) ==
        "non-finite snapshot at (group 1, trajectory 2, time index 1)");

  CHECK_THROWS_AS(SnapshotEnsemble(e.grid(), {}), Error);
  CHECK_THROWS_AS(validate(SnapshotEnsemble{}), Error);
  groups = e.groups();
  groups[0].snapshots(1, 0) = 0.7;  // does not match the initial condition
  CHECK_THROWS_AS(SnapshotEnsemble(e.grid(), groups), Error);
}

TEST_CASE("functional index is group-major and interval-minor") {
  const auto e = oracle::constant_ensemble({0.0, 0.5, 1.0, 1.5}, {0, 1, 2}, 2);
  CHECK(e.functional_count() == 9);
  const auto idx = e.functional_index();
  for (std::size_t row = 0; row < idx.size(); ++row) {
    CHECK(idx[row] == e.functional(row));
    CHECK(e.row_of(idx[row]) == row);
  }
  CHECK(e.functional(4) == FunctionalIndex{1, 2});
}

TEST_CASE("mean increments") {
  SUBCASE("constant trajectories have zero increments") {
    const auto e = oracle::constant_ensemble({0.0, 0.3, 0.9}, {2.0, -1.0}, 4);
    CHECK(mean_increments(e).mean_increments.isZero(0.0));
  }
  SUBCASE("two trajectories, one interval") {
    TrajectoryGroup g;
    g.initial_condition = 0.0;
    g.snapshots.resize(2, 2);
    g.snapshots << 0.0, 1.0, 0.0, 3.0;
    const SnapshotEnsemble e(TimeGrid({0.0, 1.0}), {g});
    const auto stats = mean_increments(e);
    REQUIRE(stats.mean_increments.size() == 1);
    CHECK(stats.mean_increments(0) == 2.0);
  }
  SUBCASE("matches the double-loop oracle and is linear in the data") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 10; ++rep) {
      const auto e = oracle::random_ensemble(rng, 1 + rep % 3, 2 + rep % 4, 2 + rep % 3);
      const auto stats = mean_increments(e);
      CHECK(stats.mean_increments.size() ==
            static_cast<Eigen::Index>(e.group_count() * e.intervals()));
      CHECK(oracle::rel_diff(stats.mean_increments, oracle::mean_increments(e)) < 1e-14);

      auto groups = e.groups();
      for (auto& g : groups) {
        g.snapshots *= 2.5;
        g.initial_condition *= 2.5;
      }
      const SnapshotEnsemble scaled(e.grid(), groups);
      CHECK(oracle::rel_diff(mean_increments(scaled).mean_increments,
                             2.5 * stats.mean_increments) < 1e-14);
    }
  }
}

TEST_CASE("CSV and JSON round trips are exact") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto e = oracle::random_ensemble(rng, 1 + rep % 2, 3, 2 + rep);
    for (auto format : {FileFormat::csv, FileFormat::json}) {
      const auto path = scratch("roundtrip" + std::to_string(rep) +
                                (format == FileFormat::csv ? ".csv" : ".json"));
      save_ensemble(e, path, format);
      const auto back = load_ensemble(path, format);
      CHECK(back == e);
      // Canonical form: saving again reproduces the same bytes.
      const auto path2 = scratch("roundtrip_again");
      save_ensemble(back, path2, format);
      CHECK(read_text(path) == read_text(path2));
    }
  }
}

TEST_CASE("CSV layout") {
  const auto e = oracle::constant_ensemble({0.0, 0.1}, {1.5, 2.0}, 2);
  const std::string csv = to_csv(e);
  CHECK(csv.rfind("group,traj,t=0,t=0.10000000000000001\n", 0) == 0);
  CHECK(csv.find("\n1,1,2,2\n") != std::string::npos);
}

TEST_CASE("CSV parse and validation errors carry locations") {
  const std::string header = "group,traj,t=0,t=0.5,t=1\n";
  auto err = capture([&] { from_csv(header + "0,0,1,2\n"); });
  CHECK(err.kind() == ErrorKind::validation);
  CHECK(std::string(err.what()).find("row 1") != std::string::npos);

  err = capture([&] { from_csv(header + "0,0,1,abc,2\n"); });
  CHECK(err.kind() == ErrorKind::parse);
  CHECK(std::string(err.what()).find("row 1, column 3") != std::string::npos);

  err = capture([&] { from_csv("group,traj,t=0,t=0.5,t=0.5\n0,0,1,1,1\n"); });
  CHECK(err.kind() == ErrorKind::validation);
  CHECK(std::string(err.what()).find("non-monotone time grid") != std::string::npos);

  err = capture([&] { from_csv(header + "0,0,1,nan,2\n"); });
  CHECK(std::string(err.what()) ==
        "non-finite snapshot at (group 0, trajectory 0, time index 1)");

  CHECK_THROWS_AS(from_csv(""), Error);
  CHECK_THROWS_AS(from_json("{not json"), Error);
  CHECK_THROWS_AS(from_json(R"({"times": [0, 1]})"), Error);
}

TEST_CASE("saving refuses invalid ensembles and unwritable paths") {
  const Error e = capture([] { to_csv(SnapshotEnsemble{}); });
  CHECK(e.kind() == ErrorKind::validation);
  CHECK_THROWS_AS(to_json(SnapshotEnsemble{}), Error);

  const auto ens = oracle::constant_ensemble({0.0, 1.0}, {1.0}, 2);
  const Error io = capture([&] {
    save_ensemble(ens, "/nonexistent-dir/sub/data.csv", FileFormat::csv);
  });
  CHECK(io.kind() == ErrorKind::io);
  CHECK_THROWS_AS(load_ensemble("/nonexistent-dir/data.csv", FileFormat::csv), Error);
}

TEST_CASE("format names and content hashes") {
  CHECK(parse_format("csv") == FileFormat::csv);
  CHECK(parse_format("json") == FileFormat::json);
  CHECK_THROWS_AS(parse_format("xml"), Error);
  CHECK(format_from_path("a/b.json") == FileFormat::json);
  CHECK(format_from_path("a/b.csv") == FileFormat::csv);
  CHECK(content_hash("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(content_hash("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
