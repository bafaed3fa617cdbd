#include "traindyn/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "traindyn/errors.hpp"
#include "traindyn/rng.hpp"

namespace traindyn {

namespace {

struct Offsets {
  std::size_t w1, b1, w2, b2, total;
};

Offsets offsets(int d, int h, int c) {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + static_cast<std::size_t>(h) * d;
  o.w2 = o.b1 + static_cast<std::size_t>(h);
  o.b2 = o.w2 + static_cast<std::size_t>(c) * h;
  o.total = o.b2 + static_cast<std::size_t>(c);
  return o;
}

/// Hidden activations and stabilized softmax for one sample.
void forward(const ClassifierModel& m, std::span<const double> x,
             std::vector<double>& hidden, std::vector<double>& probs) {
  const auto o = offsets(m.input_dim, m.hidden_size, m.num_classes);
  const double* p = m.params.data();
  hidden.resize(m.hidden_size);
  for (int j = 0; j < m.hidden_size; ++j) {
    double z = p[o.b1 + j];
    const double* row = p + o.w1 + static_cast<std::size_t>(j) * m.input_dim;
    for (int k = 0; k < m.input_dim; ++k) z += row[k] * x[k];
    hidden[j] = std::tanh(z);
  }
  probs.resize(m.num_classes);
  double zmax = -HUGE_VAL;
  for (int c = 0; c < m.num_classes; ++c) {
    double z = p[o.b2 + c];
    const double* row = p + o.w2 + static_cast<std::size_t>(c) * m.hidden_size;
    for (int j = 0; j < m.hidden_size; ++j) z += row[j] * hidden[j];
    probs[c] = z;
    zmax = std::max(zmax, z);
  }
  double sum = 0.0;
  for (double& z : probs) {
    z = std::exp(z - zmax);
    sum += z;
  }
  for (double& z : probs) z /= sum;
}

std::string schedule_string(const TrainConfig& c) {
  std::string s = "sgd lr=" + std::to_string(c.learning_rate) +
                  " momentum=" + std::to_string(c.momentum) + " drops=";
  for (std::size_t i = 0; i < c.lr_drop_epochs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(c.lr_drop_epochs[i]);
  }
  s += " x" + std::to_string(c.lr_drop_factor);
  return s;
}

}  // namespace

ClassifierModel ClassifierModel::init(int input_dim, int hidden_size, int num_classes,
                                      std::uint64_t seed) {
  if (input_dim < 1 || hidden_size < 1 || num_classes < 2) {
    throw std::invalid_argument("classifier needs input_dim >= 1, hidden >= 1, classes >= 2");
  }
  ClassifierModel m;
  m.input_dim = input_dim;
  m.hidden_size = hidden_size;
  m.num_classes = num_classes;
  const auto o = offsets(input_dim, hidden_size, num_classes);
  m.params.assign(o.total, 0.0);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (std::size_t i = o.w1; i < o.b1; ++i) {
    m.params[i] = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return m;
}

std::vector<double> ClassifierModel::probabilities(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim) {
    throw std::invalid_argument("feature length does not match input_dim");
  }
  std::vector<double> hidden, probs;
  forward(*this, x, hidden, probs);
  return probs;
}

int ClassifierModel::predict(std::span<const double> x) const {
  const auto probs = probabilities(x);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(lr_drop_factor > 0.0)) throw std::invalid_argument("lr_drop_factor must be > 0");
  if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
  for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] < 1 || lr_drop_epochs[i] >= epochs) {
      throw std::invalid_argument("lr drop epochs must lie in [1, epochs)");
    }
    if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1]) {
      throw std::invalid_argument("lr drop epochs must be strictly increasing");
    }
  }
}

std::string TrainConfig::to_json_string() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["lr_drop_epochs"] = lr_drop_epochs;
  j["lr_drop_factor"] = lr_drop_factor;
  j["hidden_size"] = hidden_size;
  j["seed"] = seed;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_drop_epochs = j.value("lr_drop_epochs", c.lr_drop_epochs);
    c.lr_drop_factor = j.value("lr_drop_factor", c.lr_drop_factor);
    c.hidden_size = j.value("hidden_size", c.hidden_size);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

void BlobSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (!(separation > 0.0)) throw std::invalid_argument("separation must be > 0");
  if (num_classes > 2 * dim) {
    throw std::invalid_argument("dim too small to place " + std::to_string(num_classes) +
                                " centers at the requested separation");
  }
  if (!(label_overlap_fraction >= 0.0 && label_overlap_fraction <= 1.0)) {
    throw std::invalid_argument("label_overlap_fraction must lie in [0, 1]");
  }
}

std::string BlobSpec::to_json_string() const {
  nlohmann::json j;
  j["num_classes"] = num_classes;
  j["per_class"] = per_class;
  j["dim"] = dim;
  j["separation"] = separation;
  j["label_overlap_fraction"] = label_overlap_fraction;
  j["seed"] = seed;
  return j.dump(2);
}

BlobSpec BlobSpec::from_json_string(const std::string& text) {
  BlobSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.per_class = j.value("per_class", s.per_class);
    s.dim = j.value("dim", s.dim);
    s.separation = j.value("separation", s.separation);
    s.label_overlap_fraction = j.value("label_overlap_fraction", s.label_overlap_fraction);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("blob spec: ") + e.what());
  }
  s.validate();
  return s;
}

BlobData make_blobs(const BlobSpec& spec) {
  spec.validate();
  BlobData out;
  // Center c sits on axis c/2, sign alternating, at radius separation/sqrt(2):
  // distances are separation (different axes) or separation*sqrt(2) (same axis).
  const double radius = spec.separation / std::sqrt(2.0);
  out.centers.assign(static_cast<std::size_t>(spec.num_classes) * spec.dim, 0.0);
  for (int c = 0; c < spec.num_classes; ++c) {
    const int axis = c / 2;
    const double sign = (c % 2 == 0) ? 1.0 : -1.0;
    out.centers[static_cast<std::size_t>(c) * spec.dim + axis] = sign * radius;
  }

  const int test_per_class = spec.per_class / 5;
  const int train_per_class = spec.per_class - test_per_class;
  auto init_split = [&](LabeledDataset& d, int rows) {
    d.num_classes = spec.num_classes;
    d.feature_dim = spec.dim;
    d.features.reserve(static_cast<std::size_t>(rows) * spec.dim);
    d.given_labels.reserve(rows);
  };
  init_split(out.train, train_per_class * spec.num_classes);
  init_split(out.test, test_per_class * spec.num_classes);

  Rng rng(derive_seed(spec.seed, "blobs"));
  for (int c = 0; c < spec.num_classes; ++c) {
    const double* center = out.centers.data() + static_cast<std::size_t>(c) * spec.dim;
    for (int i = 0; i < spec.per_class; ++i) {
      LabeledDataset& d = (i < train_per_class) ? out.train : out.test;
      for (int k = 0; k < spec.dim; ++k) d.features.push_back(center[k] + rng.normal());
      d.given_labels.push_back(c);
    }
  }

  // Shuffle train rows so mini-batches mix classes.
  std::vector<std::size_t> order(out.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  LabeledDataset shuffled;
  init_split(shuffled, static_cast<int>(order.size()));
  for (std::size_t i : order) {
    const auto row = out.train.sample(i);
    shuffled.features.insert(shuffled.features.end(), row.begin(), row.end());
    shuffled.given_labels.push_back(out.train.given_labels[i]);
  }
  out.train = std::move(shuffled);

  const auto n_overlap = static_cast<std::size_t>(std::floor(
      spec.label_overlap_fraction * static_cast<double>(out.train.size())));
  for (std::size_t i : rng.sample_without_replacement(out.train.size(), n_overlap)) {
    out.train.given_labels[i] = static_cast<int>(rng.below(spec.num_classes));
  }
  return out;
}

BlobData make_blobs(int num_classes, int per_class, int dim, double separation,
                    double label_overlap_fraction, std::uint64_t seed) {
  BlobSpec spec;
  spec.num_classes = num_classes;
  spec.per_class = per_class;
  spec.dim = dim;
  spec.separation = separation;
  spec.label_overlap_fraction = label_overlap_fraction;
  spec.seed = seed;
  return make_blobs(spec);
}

std::pair<double, std::vector<double>> classifier_loss_and_grad(
    const ClassifierModel& model, const LabeledDataset& dataset,
    std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("empty batch");
  const auto o = offsets(model.input_dim, model.hidden_size, model.num_classes);
  std::vector<double> grad(o.total, 0.0);
  std::vector<double> hidden, probs, dhidden(model.hidden_size);
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto x = dataset.sample(r);
    const int y = dataset.given_labels[r];
    forward(model, x, hidden, probs);
    loss += -std::log(std::max(probs[y], 1e-300));
    // dL/dz2 = p - onehot(y)
    for (int c = 0; c < model.num_classes; ++c) {
      const double dz = probs[c] - (c == y ? 1.0 : 0.0);
      grad[o.b2 + c] += dz;
      double* gw = grad.data() + o.w2 + static_cast<std::size_t>(c) * model.hidden_size;
      for (int j = 0; j < model.hidden_size; ++j) gw[j] += dz * hidden[j];
    }
    for (int j = 0; j < model.hidden_size; ++j) {
      double da = 0.0;
      for (int c = 0; c < model.num_classes; ++c) {
        da += model.params[o.w2 + static_cast<std::size_t>(c) * model.hidden_size + j] *
              (probs[c] - (c == dataset.given_labels[r] ? 1.0 : 0.0));
      }
      dhidden[j] = da * (1.0 - hidden[j] * hidden[j]);
    }
    for (int j = 0; j < model.hidden_size; ++j) {
      grad[o.b1 + j] += dhidden[j];
      double* gw = grad.data() + o.w1 + static_cast<std::size_t>(j) * model.input_dim;
      for (int k = 0; k < model.input_dim; ++k) gw[k] += dhidden[j] * x[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  loss *= inv;
  for (double& g : grad) g *= inv;
  return {loss, std::move(grad)};
}

ClassifierTrainResult train_classifier(const LabeledDataset& dataset,
                                       const TrainConfig& config) {
  config.validate();
  if (dataset.size() == 0) throw std::invalid_argument("empty dataset");
  dataset.validate();

  ClassifierTrainResult out;
  out.model = ClassifierModel::init(dataset.feature_dim, config.hidden_size,
                                    dataset.num_classes, derive_seed(config.seed, "init"));
  out.dynamics.num_epochs = config.epochs;
  out.dynamics.values.assign(dataset.size() * static_cast<std::size_t>(config.epochs), 0.0);
  out.dynamics.labels = dataset.given_labels;
  out.dynamics.true_labels = dataset.true_labels;
  out.dynamics.flags = dataset.flags;
  out.dynamics.metadata["num_classes"] = std::to_string(dataset.num_classes);
  out.dynamics.metadata["seed"] = std::to_string(config.seed);
  out.dynamics.metadata["schedule"] = schedule_string(config);
  out.dynamics.metadata["generator"] = "ref_trainer";

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> velocity(out.model.num_params(), 0.0);
  std::vector<double> hidden, probs;

  double lr = config.learning_rate;
  out.epoch_losses.reserve(config.epochs);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (std::find(config.lr_drop_epochs.begin(), config.lr_drop_epochs.end(), epoch) !=
        config.lr_drop_epochs.end()) {
      lr *= config.lr_drop_factor;
    }
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min<std::size_t>(config.batch_size, order.size() - start);
      auto [loss, grad] = classifier_loss_and_grad(
          out.model, dataset, std::span<const std::size_t>(order.data() + start, len));
      if (!std::isfinite(loss)) throw DivergenceError("classifier training", epoch);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] +
                      (grad[i] + config.weight_decay * out.model.params[i]);
        out.model.params[i] -= lr * velocity[i];
      }
    }
    // End-of-epoch sweep: record the given-label probability of every sample.
    double sweep_loss = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      forward(out.model, dataset.sample(i), hidden, probs);
      const double p = probs[dataset.given_labels[i]];
      out.dynamics.values[i * static_cast<std::size_t>(config.epochs) + epoch] = p;
      sweep_loss += -std::log(std::max(p, 1e-300));
    }
    sweep_loss /= static_cast<double>(dataset.size());
    if (!std::isfinite(sweep_loss)) throw DivergenceError("classifier training", epoch);
    out.epoch_losses.push_back(sweep_loss);
  }
  return out;
}

double evaluate_classifier(const ClassifierModel& model, const LabeledDataset& test) {
  if (test.size() == 0) throw std::invalid_argument("empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (model.predict(test.sample(i)) == test.given_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path) {
  const auto o = offsets(model.input_dim, model.hidden_size, model.num_classes);
  nlohmann::json j;
  j["input_dim"] = model.input_dim;
  j["hidden_size"] = model.hidden_size;
  j["num_classes"] = model.num_classes;
  j["w1"] = std::vector<double>(model.params.begin() + o.w1, model.params.begin() + o.b1);
  j["b1"] = std::vector<double>(model.params.begin() + o.b1, model.params.begin() + o.w2);
  j["w2"] = std::vector<double>(model.params.begin() + o.w2, model.params.begin() + o.b2);
  j["b2"] = std::vector<double>(model.params.begin() + o.b2, model.params.end());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(path.string() + ": cannot open");
  ClassifierModel m;
  try {
    const auto j = nlohmann::json::parse(f);
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden_size = j.at("hidden_size").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    const auto o = offsets(m.input_dim, m.hidden_size, m.num_classes);
    m.params.reserve(o.total);
    for (const char* key : {"w1", "b1", "w2", "b2"}) {
      const auto block = j.at(key).get<std::vector<double>>();
      m.params.insert(m.params.end(), block.begin(), block.end());
    }
    if (m.params.size() != o.total) {
      throw ParseError(path.string() + ": weight array sizes do not match shapes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace traindyn
