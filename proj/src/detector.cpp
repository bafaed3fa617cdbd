#include "traindyn/detector.hpp"

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

struct ParamLayout {
  struct Layer {
    std::size_t w_ih, w_hh, b_ih, b_hh;
    int in;
  };
  std::vector<Layer> layers;
  std::size_t head_w = 0, head_b = 0, total = 0;
};

ParamLayout layout_of(int num_layers, int hidden) {
  ParamLayout pl;
  const auto h = static_cast<std::size_t>(hidden);
  std::size_t off = 0;
  for (int l = 0; l < num_layers; ++l) {
    ParamLayout::Layer lay;
    lay.in = (l == 0) ? 1 : hidden;
    lay.w_ih = off;
    off += 4 * h * static_cast<std::size_t>(lay.in);
    lay.w_hh = off;
    off += 4 * h * h;
    lay.b_ih = off;
    off += 4 * h;
    lay.b_hh = off;
    off += 4 * h;
    pl.layers.push_back(lay);
  }
  pl.head_w = off;
  off += h;
  pl.head_b = off;
  off += 1;
  pl.total = off;
  return pl;
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Output cells accumulate with explicit fma in a fixed reduction order, so
// every batch size (including b = 1) produces bit-identical values per cell.
// The kTile-wide register block keeps each output row out of memory across
// the whole reduction.
constexpr int kTile = 64;

// Z (rows x B) += W (rows x cols) @ X (cols x B); B is the contiguous dim.
void matmul_acc(const double* __restrict w, const double* __restrict x,
                double* __restrict z, int rows, int cols, int b) {
  for (int r = 0; r < rows; ++r) {
    double* zr = z + static_cast<std::size_t>(r) * b;
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    int i0 = 0;
    for (; i0 + kTile <= b; i0 += kTile) {
      double acc[kTile];
      for (int i = 0; i < kTile; ++i) acc[i] = zr[i0 + i];
      for (int k = 0; k < cols; ++k) {
        const double wv = wr[k];
        const double* xk = x + static_cast<std::size_t>(k) * b + i0;
        for (int i = 0; i < kTile; ++i) acc[i] = std::fma(wv, xk[i], acc[i]);
      }
      for (int i = 0; i < kTile; ++i) zr[i0 + i] = acc[i];
    }
    for (; i0 < b; ++i0) {
      double acc = zr[i0];
      for (int k = 0; k < cols; ++k) {
        acc = std::fma(wr[k], x[static_cast<std::size_t>(k) * b + i0], acc);
      }
      zr[i0] = acc;
    }
  }
}

// dW (rows x cols) += dZ (rows x B) @ X^T (B x cols). Only gradients flow
// through here, so the lane-split reduction (fixed tree) is fine.
void matmul_grad_w(const double* __restrict dz, const double* __restrict x,
                   double* __restrict dw, int rows, int cols, int b) {
  constexpr int kLanes = 8;
  for (int r = 0; r < rows; ++r) {
    const double* dzr = dz + static_cast<std::size_t>(r) * b;
    double* dwr = dw + static_cast<std::size_t>(r) * cols;
    for (int k = 0; k < cols; ++k) {
      const double* xk = x + static_cast<std::size_t>(k) * b;
      double part[kLanes] = {};
      int i = 0;
      for (; i + kLanes <= b; i += kLanes) {
        for (int l = 0; l < kLanes; ++l) part[l] = std::fma(dzr[i + l], xk[i + l], part[l]);
      }
      for (; i < b; ++i) part[0] = std::fma(dzr[i], xk[i], part[0]);
      const double s = ((part[0] + part[1]) + (part[2] + part[3])) +
                       ((part[4] + part[5]) + (part[6] + part[7]));
      dwr[k] += s;
    }
  }
}

// dX (cols x B) += W^T (cols x rows) @ dZ (rows x B).
void matmul_grad_x(const double* __restrict w, const double* __restrict dz,
                   double* __restrict dx, int rows, int cols, int b) {
  for (int k = 0; k < cols; ++k) {
    double* dxk = dx + static_cast<std::size_t>(k) * b;
    int i0 = 0;
    for (; i0 + kTile <= b; i0 += kTile) {
      double acc[kTile];
      for (int i = 0; i < kTile; ++i) acc[i] = dxk[i0 + i];
      for (int r = 0; r < rows; ++r) {
        const double wv = w[static_cast<std::size_t>(r) * cols + k];
        const double* dzr = dz + static_cast<std::size_t>(r) * b + i0;
        for (int i = 0; i < kTile; ++i) acc[i] = std::fma(wv, dzr[i], acc[i]);
      }
      for (int i = 0; i < kTile; ++i) dxk[i0 + i] = acc[i];
    }
    for (; i0 < b; ++i0) {
      double acc = dxk[i0];
      for (int r = 0; r < rows; ++r) {
        acc = std::fma(w[static_cast<std::size_t>(r) * cols + k],
                       dz[static_cast<std::size_t>(r) * b + i0], acc);
      }
      dxk[i0] = acc;
    }
  }
}

/// Scratch shared across batches so training does not reallocate per step.
/// Activations are stored (rows x B) with the batch contiguous; the cache
/// arrays are indexed by (layer, timestep).
struct Workspace {
  std::vector<double> x;  // T x B layer-0 inputs
  std::vector<double> gates, cells, tanhc, hidden;
  std::vector<double> h_prev, c_prev;  // L x H x B rolling state
  std::vector<double> z;               // 4H x B
  std::vector<double> dh, dc;          // L x H x B
  std::vector<double> dz;              // 4H x B
  std::vector<double> logits, dlogit;  // B
  std::vector<double> grad;
};

/// Runs the stacked recurrence over ws.x and fills ws.logits. With
/// keep_cache, stores every activation needed by backward_batch.
void forward_batch(const DetectorModel& m, const ParamLayout& pl, Workspace& ws, int t_len,
                   int b, bool keep_cache) {
  const int h = m.hidden_size;
  const int layers = m.num_layers;
  const double* p = m.params.data();
  const auto hb = static_cast<std::size_t>(h) * b;
  ws.h_prev.assign(static_cast<std::size_t>(layers) * hb, 0.0);
  ws.c_prev.assign(static_cast<std::size_t>(layers) * hb, 0.0);
  ws.z.resize(4 * hb);
  if (keep_cache) {
    const auto cells_sz = static_cast<std::size_t>(layers) * t_len * hb;
    ws.gates.resize(4 * cells_sz);
    ws.cells.resize(cells_sz);
    ws.tanhc.resize(cells_sz);
    ws.hidden.resize(cells_sz);
  }
  for (int t = 0; t < t_len; ++t) {
    for (int l = 0; l < layers; ++l) {
      const auto& lay = pl.layers[l];
      for (int r = 0; r < 4 * h; ++r) {
        const double bias = p[lay.b_ih + r] + p[lay.b_hh + r];
        double* zr = ws.z.data() + static_cast<std::size_t>(r) * b;
        for (int i = 0; i < b; ++i) zr[i] = bias;
      }
      // Layer 0 reads the sequence; layer l > 0 reads the hidden state the
      // layer below just wrote for this timestep.
      const double* input =
          (l == 0) ? ws.x.data() + static_cast<std::size_t>(t) * b
                   : ws.h_prev.data() + static_cast<std::size_t>(l - 1) * hb;
      matmul_acc(p + lay.w_ih, input, ws.z.data(), 4 * h, lay.in, b);
      matmul_acc(p + lay.w_hh, ws.h_prev.data() + static_cast<std::size_t>(l) * hb,
                 ws.z.data(), 4 * h, h, b);
      double* hp = ws.h_prev.data() + static_cast<std::size_t>(l) * hb;
      double* cp = ws.c_prev.data() + static_cast<std::size_t>(l) * hb;
      const auto cell_at = (static_cast<std::size_t>(l) * t_len + t) * hb;
      for (int j = 0; j < h; ++j) {
        const double* zi = ws.z.data() + static_cast<std::size_t>(j) * b;
        const double* zf = ws.z.data() + static_cast<std::size_t>(h + j) * b;
        const double* zg = ws.z.data() + static_cast<std::size_t>(2 * h + j) * b;
        const double* zo = ws.z.data() + static_cast<std::size_t>(3 * h + j) * b;
        for (int i = 0; i < b; ++i) {
          const double gi = stable_sigmoid(zi[i]);
          const double gf = stable_sigmoid(zf[i]);
          const double gg = std::tanh(zg[i]);
          const double go = stable_sigmoid(zo[i]);
          const std::size_t jb = static_cast<std::size_t>(j) * b + i;
          const double c = gf * cp[jb] + gi * gg;
          const double tc = std::tanh(c);
          cp[jb] = c;
          hp[jb] = go * tc;
          if (keep_cache) {
            const std::size_t gate_at = (static_cast<std::size_t>(l) * t_len + t) * 4 * hb;
            ws.gates[gate_at + jb] = gi;
            ws.gates[gate_at + hb + jb] = gf;
            ws.gates[gate_at + 2 * hb + jb] = gg;
            ws.gates[gate_at + 3 * hb + jb] = go;
            ws.cells[cell_at + jb] = c;
            ws.tanhc[cell_at + jb] = tc;
            ws.hidden[cell_at + jb] = hp[jb];
          }
        }
      }
    }
  }
  ws.logits.assign(b, p[pl.head_b]);
  const double* h_top = ws.h_prev.data() + static_cast<std::size_t>(layers - 1) * hb;
  for (int j = 0; j < h; ++j) {
    const double wv = p[pl.head_w + j];
    const double* hj = h_top + static_cast<std::size_t>(j) * b;
    for (int i = 0; i < b; ++i) ws.logits[i] += wv * hj[i];
  }
}

/// BPTT over the cached activations; accumulates into ws.grad (pre-zeroed).
void backward_batch(const DetectorModel& m, const ParamLayout& pl, Workspace& ws, int t_len,
                    int b) {
  const int h = m.hidden_size;
  const int layers = m.num_layers;
  const double* p = m.params.data();
  const auto hb = static_cast<std::size_t>(h) * b;
  double* grad = ws.grad.data();
  ws.dh.assign(static_cast<std::size_t>(layers) * hb, 0.0);
  ws.dc.assign(static_cast<std::size_t>(layers) * hb, 0.0);
  ws.dz.resize(4 * hb);

  const double* h_top =
      ws.hidden.data() + (static_cast<std::size_t>(layers - 1) * t_len + (t_len - 1)) * hb;
  for (int j = 0; j < h; ++j) {
    const double* hj = h_top + static_cast<std::size_t>(j) * b;
    double s = 0.0;
    for (int i = 0; i < b; ++i) s += ws.dlogit[i] * hj[i];
    grad[pl.head_w + j] += s;
    double* dhj = ws.dh.data() + static_cast<std::size_t>(layers - 1) * hb +
                  static_cast<std::size_t>(j) * b;
    for (int i = 0; i < b; ++i) dhj[i] = p[pl.head_w + j] * ws.dlogit[i];
  }
  {
    double s = 0.0;
    for (int i = 0; i < b; ++i) s += ws.dlogit[i];
    grad[pl.head_b] += s;
  }

  for (int t = t_len - 1; t >= 0; --t) {
    for (int l = layers - 1; l >= 0; --l) {
      const auto& lay = pl.layers[l];
      const auto cell_at = (static_cast<std::size_t>(l) * t_len + t) * hb;
      const auto gate_at = (static_cast<std::size_t>(l) * t_len + t) * 4 * hb;
      const double* gates = ws.gates.data() + gate_at;
      const double* tc = ws.tanhc.data() + cell_at;
      const double* cprev =
          (t > 0) ? ws.cells.data() + (static_cast<std::size_t>(l) * t_len + t - 1) * hb
                  : nullptr;
      double* dh = ws.dh.data() + static_cast<std::size_t>(l) * hb;
      double* dc = ws.dc.data() + static_cast<std::size_t>(l) * hb;
      for (int j = 0; j < h; ++j) {
        const std::size_t jb0 = static_cast<std::size_t>(j) * b;
        const double* gi = gates + jb0;
        const double* gf = gates + hb + jb0;
        const double* gg = gates + 2 * hb + jb0;
        const double* go = gates + 3 * hb + jb0;
        for (int i = 0; i < b; ++i) {
          const std::size_t jb = jb0 + i;
          const double dhv = dh[jb];
          const double tcv = tc[jb];
          const double dov = dhv * tcv;
          const double dcv = dc[jb] + dhv * go[i] * (1.0 - tcv * tcv);
          const double div = dcv * gg[i];
          const double dgv = dcv * gi[i];
          const double dfv = dcv * (cprev ? cprev[jb] : 0.0);
          dc[jb] = dcv * gf[i];
          ws.dz[jb] = div * gi[i] * (1.0 - gi[i]);
          ws.dz[hb + jb] = dfv * gf[i] * (1.0 - gf[i]);
          ws.dz[2 * hb + jb] = dgv * (1.0 - gg[i] * gg[i]);
          ws.dz[3 * hb + jb] = dov * go[i] * (1.0 - go[i]);
        }
      }
      const double* input =
          (l == 0) ? ws.x.data() + static_cast<std::size_t>(t) * b
                   : ws.hidden.data() + (static_cast<std::size_t>(l - 1) * t_len + t) * hb;
      matmul_grad_w(ws.dz.data(), input, grad + lay.w_ih, 4 * h, lay.in, b);
      if (t > 0) {
        const double* hprev =
            ws.hidden.data() + (static_cast<std::size_t>(l) * t_len + t - 1) * hb;
        matmul_grad_w(ws.dz.data(), hprev, grad + lay.w_hh, 4 * h, h, b);
      }
      for (int r = 0; r < 4 * h; ++r) {
        const double* dzr = ws.dz.data() + static_cast<std::size_t>(r) * b;
        double s = 0.0;
        for (int i = 0; i < b; ++i) s += dzr[i];
        grad[lay.b_ih + r] += s;
        grad[lay.b_hh + r] += s;
      }
      std::fill(dh, dh + hb, 0.0);
      matmul_grad_x(p + lay.w_hh, ws.dz.data(), dh, 4 * h, h, b);
      if (l > 0) {
        matmul_grad_x(p + lay.w_ih, ws.dz.data(),
                      ws.dh.data() + static_cast<std::size_t>(l - 1) * hb, 4 * h, h, b);
      }
    }
  }
}

/// Mean fused sigmoid-BCE over ws.logits; fills ws.dlogit when asked.
double bce_from_logits(Workspace& ws, std::span<const int> flags, bool want_grad) {
  const int b = static_cast<int>(flags.size());
  if (want_grad) ws.dlogit.resize(b);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double z = ws.logits[i];
    const double k = flags[i];
    loss += std::max(z, 0.0) - z * k + std::log1p(std::exp(-std::abs(z)));
    if (want_grad) ws.dlogit[i] = (stable_sigmoid(z) - k) / b;
  }
  return loss / b;
}

void check_flags(std::span<const int> flags) {
  for (int k : flags) {
    if (k != 0 && k != 1) throw std::invalid_argument("flags must be 0 or 1");
  }
}

double loss_and_grad_ws(const DetectorModel& model, const ParamLayout& pl, Workspace& ws,
                        std::span<const int> flags) {
  const int b = static_cast<int>(flags.size());
  forward_batch(model, pl, ws, model.input_len, b, true);
  const double loss = bce_from_logits(ws, flags, true);
  ws.grad.assign(pl.total, 0.0);
  backward_batch(model, pl, ws, model.input_len, b);
  return loss;
}

/// Rows of the table resampled to `target_len`, flattened row-major.
std::vector<double> resampled_rows(const DynamicsTable& table, int target_len) {
  for (double v : table.values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("dynamics contain missing values; fill before detector use");
    }
  }
  if (table.num_epochs == target_len) return table.values;
  std::vector<double> out;
  out.reserve(table.num_samples() * static_cast<std::size_t>(target_len));
  for (std::size_t i = 0; i < table.num_samples(); ++i) {
    const auto row = resample_sequence(table.row(i), target_len);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

DetectorTrainResult run_training(DetectorModel model, const DynamicsTable& table,
                                 const DetectorTrainConfig& config) {
  table.validate();
  if (!table.has_flags()) throw std::invalid_argument("detector training needs flags");
  check_flags(table.flags);
  const std::size_t n = table.num_samples();
  if (n == 0) throw std::invalid_argument("empty dynamics table");
  const int t_len = model.input_len;
  const std::vector<double> rows = resampled_rows(table, t_len);

  DetectorTrainResult out;
  out.epoch_losses.reserve(config.epochs);

  const ParamLayout pl = layout_of(model.num_layers, model.hidden_size);
  AdamWConfig opt;
  opt.learning_rate = config.learning_rate;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  opt.epsilon = config.epsilon;
  opt.weight_decay = config.weight_decay;
  AdamWState state(model.params.size());

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Workspace ws;
  std::vector<int> batch_flags;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const auto len = std::min<std::size_t>(config.batch_size, n - start);
      ws.x.resize(static_cast<std::size_t>(t_len) * len);
      batch_flags.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t row = order[start + i];
        batch_flags[i] = table.flags[row];
        const double* src = rows.data() + row * static_cast<std::size_t>(t_len);
        for (int t = 0; t < t_len; ++t) ws.x[static_cast<std::size_t>(t) * len + i] = src[t];
      }
      const double loss = loss_and_grad_ws(model, pl, ws, batch_flags);
      if (!std::isfinite(loss)) throw DivergenceError("detector training", epoch);
      if (config.clip_norm > 0.0) {
        double sq = 0.0;
        for (double g : ws.grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm) {
          const double scale = config.clip_norm / norm;
          for (double& g : ws.grad) g *= scale;
        }
      }
      adamw_step(model.params, ws.grad, state, opt);
      loss_sum += loss * static_cast<double>(len);
    }
    out.epoch_losses.push_back(loss_sum / static_cast<double>(n));
  }
  out.model = std::move(model);
  return out;
}

}  // namespace

DetectorModel DetectorModel::init(int input_len, std::uint64_t seed, int num_layers,
                                  int hidden_size) {
  if (input_len < 1 || num_layers < 1 || hidden_size < 1) {
    throw std::invalid_argument("detector needs input_len, layers and hidden size >= 1");
  }
  DetectorModel m;
  m.num_layers = num_layers;
  m.hidden_size = hidden_size;
  m.input_len = input_len;
  const ParamLayout pl = layout_of(num_layers, hidden_size);
  m.params.resize(pl.total);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (double& v : m.params) v = (2.0 * rng.uniform() - 1.0) * bound;
  for (const auto& lay : pl.layers) {
    for (int j = 0; j < hidden_size; ++j) {
      m.params[lay.b_ih + hidden_size + j] = 1.0;  // forget gate opens
      m.params[lay.b_hh + hidden_size + j] = 0.0;
    }
  }
  return m;
}

void DetectorTrainConfig::validate(bool fine_tuning) const {
  if (epochs < (fine_tuning ? 0 : 1)) throw std::invalid_argument("epochs out of range");
  if (fine_tuning ? !(learning_rate >= 0.0) : !(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate out of range");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  AdamWConfig opt;
  opt.learning_rate = learning_rate;
  opt.beta1 = beta1;
  opt.beta2 = beta2;
  opt.epsilon = epsilon;
  opt.weight_decay = weight_decay;
  opt.validate();
}

std::string DetectorTrainConfig::to_json_string() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epsilon"] = epsilon;
  j["weight_decay"] = weight_decay;
  j["clip_norm"] = clip_norm;
  j["seed"] = seed;
  return j.dump(2);
}

DetectorTrainConfig DetectorTrainConfig::from_json_string(const std::string& text) {
  DetectorTrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("detector config: ") + e.what());
  }
  return c;
}

double detector_forward(const DetectorModel& model, std::span<const double> seq) {
  if (static_cast<int>(seq.size()) != model.input_len) {
    throw std::invalid_argument("sequence length does not match the detector's input_len");
  }
  for (double v : seq) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite sequence entry");
  }
  const ParamLayout pl = layout_of(model.num_layers, model.hidden_size);
  Workspace ws;
  ws.x.assign(seq.begin(), seq.end());
  forward_batch(model, pl, ws, model.input_len, 1, false);
  return stable_sigmoid(ws.logits[0]);
}

std::pair<double, std::vector<double>> detector_loss_and_grad(const DetectorModel& model,
                                                              std::span<const double> seqs,
                                                              std::span<const int> flags) {
  if (flags.empty()) throw std::invalid_argument("empty batch");
  check_flags(flags);
  const auto t_len = static_cast<std::size_t>(model.input_len);
  if (seqs.size() != flags.size() * t_len) {
    throw std::invalid_argument("sequence buffer does not match batch x input_len");
  }
  const ParamLayout pl = layout_of(model.num_layers, model.hidden_size);
  Workspace ws;
  const auto b = flags.size();
  ws.x.resize(seqs.size());
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < t_len; ++t) ws.x[t * b + i] = seqs[i * t_len + t];
  }
  const double loss = loss_and_grad_ws(model, pl, ws, flags);
  return {loss, std::move(ws.grad)};
}

DetectorTrainResult train_detector(const DynamicsTable& table,
                                   const DetectorTrainConfig& config) {
  config.validate(false);
  DetectorModel model =
      DetectorModel::init(table.num_epochs, derive_seed(config.seed, "init"));
  return run_training(std::move(model), table, config);
}

DetectorTrainResult fine_tune(const DetectorModel& model, const DynamicsTable& table,
                              const DetectorTrainConfig& config) {
  config.validate(true);
  if (config.epochs == 0) return {model, {}};
  return run_training(model, table, config);
}

std::vector<double> score(const DetectorModel& model, const DynamicsTable& table) {
  table.validate();
  const std::size_t n = table.num_samples();
  if (n == 0) throw std::invalid_argument("empty dynamics table");
  const int t_len = model.input_len;
  const std::vector<double> rows = resampled_rows(table, t_len);
  const ParamLayout pl = layout_of(model.num_layers, model.hidden_size);
  Workspace ws;
  std::vector<double> out(n);
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const auto len = std::min(kChunk, n - start);
    ws.x.resize(static_cast<std::size_t>(t_len) * len);
    for (std::size_t i = 0; i < len; ++i) {
      const double* src = rows.data() + (start + i) * static_cast<std::size_t>(t_len);
      for (int t = 0; t < t_len; ++t) ws.x[static_cast<std::size_t>(t) * len + i] = src[t];
    }
    forward_batch(model, pl, ws, t_len, static_cast<int>(len), false);
    for (std::size_t i = 0; i < len; ++i) out[start + i] = stable_sigmoid(ws.logits[i]);
  }
  return out;
}

std::vector<double> baseline_score(const DynamicsTable& table) {
  table.validate();
  const std::size_t n = table.num_samples();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = table.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    out[i] = 1.0 - mean / static_cast<double>(row.size());
  }
  return out;
}

void save_detector(const DetectorModel& model, const std::filesystem::path& path) {
  const ParamLayout pl = layout_of(model.num_layers, model.hidden_size);
  nlohmann::json j;
  j["num_layers"] = model.num_layers;
  j["hidden_size"] = model.hidden_size;
  j["input_len"] = model.input_len;
  j["layers"] = nlohmann::json::array();
  const auto& p = model.params;
  for (const auto& lay : pl.layers) {
    nlohmann::json lj;
    const auto h4 = static_cast<std::size_t>(4) * model.hidden_size;
    lj["w_ih"] = std::vector<double>(p.begin() + lay.w_ih,
                                     p.begin() + lay.w_ih + h4 * lay.in);
    lj["w_hh"] = std::vector<double>(p.begin() + lay.w_hh,
                                     p.begin() + lay.w_hh + h4 * model.hidden_size);
    lj["b_ih"] = std::vector<double>(p.begin() + lay.b_ih, p.begin() + lay.b_ih + h4);
    lj["b_hh"] = std::vector<double>(p.begin() + lay.b_hh, p.begin() + lay.b_hh + h4);
    j["layers"].push_back(std::move(lj));
  }
  j["head"] = {{"w", std::vector<double>(p.begin() + pl.head_w,
                                         p.begin() + pl.head_w + model.hidden_size)},
               {"b", p[pl.head_b]}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
}

DetectorModel load_detector(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(path.string() + ": cannot open");
  DetectorModel m;
  try {
    const auto j = nlohmann::json::parse(f);
    m.num_layers = j.at("num_layers").get<int>();
    m.hidden_size = j.at("hidden_size").get<int>();
    m.input_len = j.at("input_len").get<int>();
    const auto& layers = j.at("layers");
    if (static_cast<int>(layers.size()) != m.num_layers) {
      throw ParseError(path.string() + ": layer count does not match num_layers");
    }
    const ParamLayout pl = layout_of(m.num_layers, m.hidden_size);
    m.params.reserve(pl.total);
    for (const auto& lj : layers) {
      for (const char* key : {"w_ih", "w_hh", "b_ih", "b_hh"}) {
        const auto block = lj.at(key).get<std::vector<double>>();
        m.params.insert(m.params.end(), block.begin(), block.end());
      }
    }
    const auto head_w = j.at("head").at("w").get<std::vector<double>>();
    m.params.insert(m.params.end(), head_w.begin(), head_w.end());
    m.params.push_back(j.at("head").at("b").get<double>());
    if (m.params.size() != pl.total) {
      throw ParseError(path.string() + ": weight array sizes do not match shapes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  for (double v : m.params) {
    if (!std::isfinite(v)) throw ParseError(path.string() + ": non-finite parameter");
  }
  return m;
}

}  // namespace traindyn
