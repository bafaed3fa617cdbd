#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "traindyn/dataset.hpp"
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

LabeledDataset random_dataset(std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset d;
  d.num_classes = 5;
  d.feature_dim = 3;
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) d.features.push_back(rng.normal() * 1e3);
    d.true_labels.push_back(static_cast<int>(rng.below(5)));
    const bool flip = rng.uniform() < 0.3;
    d.given_labels.push_back(flip ? (d.true_labels.back() + 1) % 5 : d.true_labels.back());
    d.flags.push_back(flip ? 1 : 0);
  }
  return d;
}

}  // namespace

TEST_CASE("dataset CSV round-trip is exact, including the doubles") {
  const auto dir = fresh_dir("traindyn_ds_rt");
  const LabeledDataset d = random_dataset(4);
  write_dataset(d, dir / "a.csv");
  const LabeledDataset back = read_dataset(dir / "a.csv");
  CHECK(back.num_classes == 5);
  CHECK(back.feature_dim == 3);
  CHECK(back.given_labels == d.given_labels);
  CHECK(back.true_labels == d.true_labels);
  CHECK(back.flags == d.flags);
  CHECK_FALSE(back.has_underlying_flags());
  CHECK(back.features == d.features);

  write_dataset(back, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(meta_sidecar_path(dir / "a.csv")) == slurp(meta_sidecar_path(dir / "b.csv")));
}

TEST_CASE("optional channels write as -1 and read back as absent") {
  const auto dir = fresh_dir("traindyn_ds_opt");
  LabeledDataset d;
  d.num_classes = 3;
  d.feature_dim = 1;
  d.features = {1.5, -2.5};
  d.given_labels = {0, 2};
  write_dataset(d, dir / "plain.csv");

  const std::string text = slurp(dir / "plain.csv");
  CHECK(text.find("0,0,-1,-1,-1,1.5\n") != std::string::npos);

  const LabeledDataset back = read_dataset(dir / "plain.csv");
  CHECK_FALSE(back.has_true_labels());
  CHECK_FALSE(back.has_flags());
  CHECK_FALSE(back.has_underlying_flags());
}

TEST_CASE("underlying flags survive the round trip") {
  const auto dir = fresh_dir("traindyn_ds_under");
  LabeledDataset d = random_dataset(9);
  d.underlying_flags.assign(d.size(), 0);
  d.underlying_flags[3] = 1;
  d.underlying_flags[17] = 1;
  write_dataset(d, dir / "u.csv");
  const LabeledDataset back = read_dataset(dir / "u.csv");
  CHECK(back.underlying_flags == d.underlying_flags);
}

TEST_CASE("missing sidecar is an error") {
  const auto dir = fresh_dir("traindyn_ds_meta");
  const LabeledDataset d = random_dataset(2);
  write_dataset(d, dir / "x.csv");
  std::filesystem::remove(meta_sidecar_path(dir / "x.csv"));
  CHECK_THROWS_AS(read_dataset(dir / "x.csv"), ParseError);
}

TEST_CASE("dataset validation enforces the flag and label contracts") {
  LabeledDataset d;
  d.num_classes = 2;
  d.feature_dim = 1;
  d.features = {0.0, 1.0};
  d.given_labels = {0, 1};
  CHECK_NOTHROW(d.validate());

  LabeledDataset bad = d;
  bad.given_labels = {0, 2};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = d;
  bad.features.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = d;
  bad.flags = {0, 2};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = d;
  bad.true_labels = {0, 0};
  bad.flags = {0, 0};  // sample 1 changed label but carries flag 0
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.flags = {0, 1};
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("reader rejects malformed dataset files") {
  const auto dir = fresh_dir("traindyn_ds_bad");
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    std::ofstream meta(dir / (name.substr(0, name.size() - 4) + ".meta.json"), std::ios::binary);
    meta << "{\"num_classes\": 3}\n";
    return dir / name;
  };

  const std::string header = "sample_id,given_label,true_label,flag,underlying_flag,x_0\n";
  CHECK_THROWS_AS(read_dataset(write_text("h.csv", "id,given_label\n")), ParseError);
  CHECK_THROWS_AS(read_dataset(write_text("ids.csv", header + "1,0,-1,-1,-1,0.5\n")), ParseError);
  CHECK_THROWS_AS(read_dataset(write_text("short.csv", header + "0,0,-1,-1,-1\n")), ParseError);
  CHECK_THROWS_AS(read_dataset(write_text("feat.csv", header + "0,0,-1,-1,-1,abc\n")), ParseError);
}
