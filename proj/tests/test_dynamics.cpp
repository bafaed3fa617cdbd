#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "traindyn/dynamics.hpp"
#include "traindyn/errors.hpp"
#include "traindyn/rng.hpp"

using namespace traindyn;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("resampling hand fixtures") {
  const std::vector<double> tent = {0.0, 1.0, 0.0};
  CHECK(resample_sequence(tent, 5) == std::vector<double>{0.0, 0.5, 1.0, 0.5, 0.0});

  const std::vector<double> ramp = {0.0, 0.2, 0.4, 0.6};
  const std::vector<double> down = resample_sequence(ramp, 3);
  REQUIRE(down.size() == 3);
  CHECK(down[0] == 0.0);
  CHECK(down[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(down[2] == 0.6);

  const std::vector<double> pair = {0.25, 0.75};
  CHECK(resample_sequence(pair, 2) == pair);
}

TEST_CASE("resampling preserves endpoints, range and equal-length identity") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int src_len = 2 + static_cast<int>(rng.below(30));
    const int dst_len = 2 + static_cast<int>(rng.below(30));
    std::vector<double> seq(static_cast<std::size_t>(src_len));
    for (double& v : seq) v = rng.uniform();
    const std::vector<double> out = resample_sequence(seq, dst_len);
    REQUIRE(out.size() == static_cast<std::size_t>(dst_len));
    CHECK(out.front() == seq.front());
    CHECK(out.back() == seq.back());
    const auto [lo, hi] = std::minmax_element(seq.begin(), seq.end());
    for (double v : out) {
      CHECK(v >= *lo);
      CHECK(v <= *hi);
    }
    if (dst_len == src_len) CHECK(out == seq);
  }
}

TEST_CASE("resampling input validation") {
  CHECK_THROWS_AS(resample_sequence(std::vector<double>{0.5}, 4), std::invalid_argument);
  CHECK_THROWS_AS(resample_sequence(std::vector<double>{0.1, 0.2}, 1), std::invalid_argument);
  CHECK_THROWS_AS(resample_sequence(std::vector<double>{0.1, kNaN}, 3), std::invalid_argument);
}

TEST_CASE("missing epochs are filled by interpolation at write time") {
  const auto dir = fresh_dir("traindyn_dyn_nan");
  DynamicsTable table;
  table.num_epochs = 6;
  table.values = {kNaN, 0.2, kNaN, kNaN, 0.8, kNaN};
  table.labels = {3};
  write_dynamics(table, dir / "dyn.csv");
  const DynamicsTable back = read_dynamics(dir / "dyn.csv");
  REQUIRE(back.num_samples() == 1);
  const std::vector<double> expect = {0.2, 0.2, 0.4, 0.6, 0.8, 0.8};
  for (int e = 0; e < 6; ++e) CHECK(back.row(0)[e] == doctest::Approx(expect[e]).epsilon(1e-12));

  DynamicsTable empty_row = table;
  empty_row.values = {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
  CHECK_THROWS_AS(write_dynamics(empty_row, dir / "bad.csv"), std::invalid_argument);
}

TEST_CASE("dynamics CSV round-trip is stable to the byte") {
  const auto dir = fresh_dir("traindyn_dyn_rt");
  Rng rng(17);
  DynamicsTable table;
  table.num_epochs = 9;
  const std::size_t n = 23;
  for (std::size_t i = 0; i < n; ++i) {
    for (int e = 0; e < 9; ++e) table.values.push_back(rng.uniform());
    table.labels.push_back(static_cast<int>(rng.below(4)));
    table.true_labels.push_back(static_cast<int>(rng.below(4)));
    table.flags.push_back(table.labels[i] != table.true_labels[i] ? 1 : 0);
  }
  table.metadata["num_classes"] = "4";
  table.metadata["seed"] = "17";
  table.metadata["schedule"] = "test";
  table.metadata["generator"] = "ref_trainer";

  write_dynamics(table, dir / "a.csv");
  const DynamicsTable once = read_dynamics(dir / "a.csv");
  CHECK(once.labels == table.labels);
  CHECK(once.true_labels == table.true_labels);
  CHECK(once.flags == table.flags);
  CHECK(once.num_epochs == 9);
  CHECK(once.metadata.at("num_classes") == "4");
  CHECK(once.metadata.at("generator") == "ref_trainer");
  for (std::size_t i = 0; i < table.values.size(); ++i) {
    CHECK(std::abs(once.values[i] - table.values[i]) <= 5e-7);
  }

  write_dynamics(once, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(meta_sidecar_path(dir / "a.csv")) == slurp(meta_sidecar_path(dir / "b.csv")));
}

TEST_CASE("sidecar path replaces only a csv extension") {
  CHECK(meta_sidecar_path("out/dyn.csv") == std::filesystem::path("out/dyn.meta.json"));
  CHECK(meta_sidecar_path("out/dyn") == std::filesystem::path("out/dyn.meta.json"));
}

TEST_CASE("table validation rejects inconsistent shapes and ranges") {
  DynamicsTable t;
  t.num_epochs = 1;
  t.values = {0.5};
  t.labels = {0};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);

  t.num_epochs = 2;
  t.values = {0.5, 0.6, 0.7};
  t.labels = {0};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);

  t.values = {0.5, 0.6};
  t.labels = {0, 1};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);

  t.labels = {0};
  CHECK_NOTHROW(t.validate());
  t.values = {0.5, 1.2};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("reader rejects malformed files") {
  const auto dir = fresh_dir("traindyn_dyn_bad");
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    return dir / name;
  };

  CHECK_THROWS_AS(read_dynamics(write_text("h.csv", "id,given_label,p_0,p_1\n")), ParseError);
  CHECK_THROWS_AS(
      read_dynamics(write_text("e.csv", "sample_id,given_label,flag,p_0\n0,1,0,0.5\n")),
      ParseError);
  CHECK_THROWS_AS(
      read_dynamics(write_text(
          "ids.csv", "sample_id,given_label,p_0,p_1\n0,1,0.5,0.5\n2,1,0.5,0.5\n")),
      ParseError);
  CHECK_THROWS_AS(
      read_dynamics(write_text("rng.csv", "sample_id,given_label,p_0,p_1\n0,1,0.5,1.5\n")),
      ParseError);
  CHECK_THROWS_AS(
      read_dynamics(write_text("num.csv", "sample_id,given_label,p_0,p_1\n0,1,0.5,oops\n")),
      ParseError);
}
