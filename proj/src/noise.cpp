#include "traindyn/noise.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "traindyn/rng.hpp"

namespace traindyn {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::symmetric: return "symmetric";
    case NoiseKind::asymmetric: return "asymmetric";
    case NoiseKind::superclass: return "superclass";
  }
  throw std::invalid_argument("unknown noise kind");
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "symmetric") return NoiseKind::symmetric;
  if (name == "asymmetric") return NoiseKind::asymmetric;
  if (name == "superclass") return NoiseKind::superclass;
  throw std::invalid_argument("unknown noise kind '" + name + "'");
}

namespace {

std::map<int, int> map_from_json(const nlohmann::json& obj) {
  std::map<int, int> out;
  for (const auto& [key, value] : obj.items()) {
    out[std::stoi(key)] = value.get<int>();
  }
  return out;
}

nlohmann::json map_to_json(const std::map<int, int>& m) {
  nlohmann::json obj = nlohmann::json::object();
  for (const auto& [cls, grp] : m) obj[std::to_string(cls)] = grp;
  return obj;
}

void check_injection_input(const LabeledDataset& dataset, double ratio) {
  dataset.validate();
  if (dataset.has_flags()) {
    throw std::invalid_argument("dataset already carries noise flags");
  }
  if (dataset.num_classes < 2) {
    throw std::invalid_argument("noise injection needs at least 2 classes");
  }
  if (ratio < 0.0 || ratio > 1.0) {
    throw std::invalid_argument("noise ratio must lie in [0,1]");
  }
}

// Quota sampling: exactly floor(ratio*n) corrupted samples.
std::vector<std::size_t> pick_corrupted(std::size_t n, double ratio, Rng& rng) {
  const auto quota = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  return rng.sample_without_replacement(n, quota);
}

LabeledDataset finalize(LabeledDataset noisy, const LabeledDataset& original) {
  noisy.true_labels = original.given_labels;
  noisy.flags.assign(noisy.size(), 0);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    noisy.flags[i] = noisy.given_labels[i] != noisy.true_labels[i] ? 1 : 0;
  }
  return noisy;
}

}  // namespace

void NoiseSpec::validate(int num_classes) const {
  if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("noise ratio must lie in [0,1]");
  if (kind == NoiseKind::superclass) {
    std::map<int, int> group_sizes;
    for (int c = 0; c < num_classes; ++c) {
      const auto it = class_to_group.find(c);
      if (it == class_to_group.end()) {
        throw std::invalid_argument("class_to_group must cover every class, missing " +
                                    std::to_string(c));
      }
      ++group_sizes[it->second];
    }
    for (const auto& [grp, size] : group_sizes) {
      if (size < 2) {
        throw std::invalid_argument("super-class group " + std::to_string(grp) +
                                    " has fewer than 2 classes");
      }
    }
  }
}

std::string NoiseSpec::to_json_string() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["ratio"] = ratio;
  j["seed"] = seed;
  if (!class_to_group.empty()) j["class_to_group"] = map_to_json(class_to_group);
  if (!class_permutation.empty()) j["class_permutation"] = map_to_json(class_permutation);
  if (allow_true_class_redraw) j["allow_true_class_redraw"] = true;
  return j.dump();
}

NoiseSpec NoiseSpec::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("noise spec: invalid JSON");
  NoiseSpec spec;
  spec.kind = noise_kind_from_string(j.at("kind").get<std::string>());
  spec.ratio = j.at("ratio").get<double>();
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("class_to_group")) spec.class_to_group = map_from_json(j["class_to_group"]);
  if (j.contains("class_permutation")) {
    spec.class_permutation = map_from_json(j["class_permutation"]);
  }
  if (j.contains("allow_true_class_redraw")) {
    spec.allow_true_class_redraw = j["allow_true_class_redraw"].get<bool>();
  }
  return spec;
}

LabeledDataset inject_symmetric(const LabeledDataset& dataset, double ratio, std::uint64_t seed,
                                bool allow_true_class_redraw) {
  check_injection_input(dataset, ratio);
  Rng rng(seed);
  LabeledDataset noisy = dataset;
  const int c = dataset.num_classes;
  for (std::size_t i : pick_corrupted(dataset.size(), ratio, rng)) {
    if (allow_true_class_redraw) {
      noisy.given_labels[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    } else {
      const auto draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(c - 1)));
      noisy.given_labels[i] = draw < noisy.given_labels[i] ? draw : draw + 1;
    }
  }
  return finalize(std::move(noisy), dataset);
}

LabeledDataset inject_asymmetric(const LabeledDataset& dataset, double ratio, std::uint64_t seed,
                                 const std::map<int, int>& class_permutation) {
  check_injection_input(dataset, ratio);
  if (!class_permutation.empty()) {
    for (int c = 0; c < dataset.num_classes; ++c) {
      const auto it = class_permutation.find(c);
      if (it == class_permutation.end()) {
        throw std::invalid_argument("class_permutation must cover every class");
      }
      if (it->second == c) {
        throw std::invalid_argument("class_permutation must not map a class to itself");
      }
      if (it->second < 0 || it->second >= dataset.num_classes) {
        throw std::invalid_argument("class_permutation target out of range");
      }
    }
  }
  Rng rng(seed);
  LabeledDataset noisy = dataset;
  for (std::size_t i : pick_corrupted(dataset.size(), ratio, rng)) {
    const int y = noisy.given_labels[i];
    noisy.given_labels[i] =
        class_permutation.empty() ? (y + 1) % dataset.num_classes : class_permutation.at(y);
  }
  return finalize(std::move(noisy), dataset);
}

LabeledDataset inject_superclass(const LabeledDataset& dataset, double ratio,
                                 const std::map<int, int>& class_to_group, std::uint64_t seed) {
  check_injection_input(dataset, ratio);
  // Group membership lists, ordered by class index for determinism.
  std::map<int, std::vector<int>> groups;
  for (int c = 0; c < dataset.num_classes; ++c) {
    const auto it = class_to_group.find(c);
    if (it == class_to_group.end()) {
      throw std::invalid_argument("class_to_group must cover every class, missing " +
                                  std::to_string(c));
    }
    groups[it->second].push_back(c);
  }
  Rng rng(seed);
  LabeledDataset noisy = dataset;
  for (std::size_t i : pick_corrupted(dataset.size(), ratio, rng)) {
    const int y = noisy.given_labels[i];
    const auto& members = groups.at(class_to_group.at(y));
    if (members.size() < 2) {
      throw std::invalid_argument("class " + std::to_string(y) +
                                  " sits in a singleton super-class group");
    }
    // Uniform over the group members other than y.
    auto draw = static_cast<std::size_t>(rng.below(members.size() - 1));
    std::size_t pos = 0;
    while (members[pos] == y) ++pos;
    while (draw > 0) {
      ++pos;
      while (members[pos] == y) ++pos;
      --draw;
    }
    noisy.given_labels[i] = members[pos];
  }
  return finalize(std::move(noisy), dataset);
}

LabeledDataset inject_noise(const LabeledDataset& dataset, const NoiseSpec& spec) {
  spec.validate(dataset.num_classes);
  switch (spec.kind) {
    case NoiseKind::symmetric:
      return inject_symmetric(dataset, spec.ratio, spec.seed, spec.allow_true_class_redraw);
    case NoiseKind::asymmetric:
      return inject_asymmetric(dataset, spec.ratio, spec.seed, spec.class_permutation);
    case NoiseKind::superclass:
      return inject_superclass(dataset, spec.ratio, spec.class_to_group, spec.seed);
  }
  throw std::invalid_argument("unknown noise kind");
}

LabeledDataset contaminate_twice(const LabeledDataset& dataset, const NoiseSpec& underlying,
                                 const NoiseSpec& synthesized) {
  LabeledDataset first = inject_noise(dataset, underlying);
  // The underlying contamination mimics unknown real-world noise: its
  // bookkeeping moves aside and its labels become the "clean" baseline
  // for the synthesized injection.
  std::vector<int> underlying_flags = std::move(first.flags);
  first.flags.clear();
  first.true_labels.clear();
  LabeledDataset second = inject_noise(first, synthesized);
  second.underlying_flags = std::move(underlying_flags);
  return second;
}

}  // namespace traindyn
