#include "claimlab/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "claimlab/kernels.hpp"

namespace claimlab::nn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch: ") + what);
}

// Gate pre-activations for one step: G = x * w_x^T + h_prev * w_h^T + b.
void gate_preact(const LstmLayer& layer, const Matrix& x, const Matrix& h_prev, Matrix& g) {
  const std::size_t batch = x.rows;
  const std::size_t gates = 4 * layer.hidden_size;
  g.rows = batch;
  g.cols = gates;
  g.data.resize(batch * gates);
  kernels::matmul_nt(x.data.data(), layer.w_x.value.data.data(), g.data.data(),
                     batch, layer.input_size, gates);
  Matrix rec(batch, gates);
  kernels::matmul_nt(h_prev.data.data(), layer.w_h.value.data.data(), rec.data.data(),
                     batch, layer.hidden_size, gates);
  kernels::axpy(1.0, rec.data.data(), g.data.data(), batch * gates);
  kernels::add_bias_rows(g.data.data(), layer.b.value.data.data(), batch, gates);
}

// Applies the activations and the cell update for one step, filling the
// cached per-gate matrices.
void gate_apply(const Matrix& g, const Matrix& c_prev, Matrix& gi, Matrix& gf, Matrix& gg,
                Matrix& go, Matrix& c, Matrix& tanh_c, Matrix& h, std::size_t hidden) {
  const std::size_t batch = g.rows;
  auto init = [&](Matrix& m) {
    m.rows = batch;
    m.cols = hidden;
    m.data.resize(batch * hidden);
  };
  init(gi);
  init(gf);
  init(gg);
  init(go);
  init(c);
  init(tanh_c);
  init(h);
  const std::size_t total = batch * hidden;
#pragma omp parallel for schedule(static)
  for (std::size_t idx = 0; idx < total; ++idx) {
    const std::size_t b = idx / hidden;
    const std::size_t j = idx % hidden;
    const double* row = g.row(b);
    const double vi = sigmoid(row[j]);
    const double vf = sigmoid(row[hidden + j]);
    const double vg = std::tanh(row[2 * hidden + j]);
    const double vo = sigmoid(row[3 * hidden + j]);
    const double vc = vf * c_prev.data[idx] + vi * vg;
    const double vt = std::tanh(vc);
    gi.data[idx] = vi;
    gf.data[idx] = vf;
    gg.data[idx] = vg;
    go.data[idx] = vo;
    c.data[idx] = vc;
    tanh_c.data[idx] = vt;
    h.data[idx] = vo * vt;
  }
}

}  // namespace

LstmLayer::LstmLayer(const std::string& prefix, std::size_t input, std::size_t hidden)
    : input_size(input),
      hidden_size(hidden),
      w_x(prefix + ".w_x", 4 * hidden, input),
      w_h(prefix + ".w_h", 4 * hidden, hidden),
      b(prefix + ".b", 1, 4 * hidden) {}

LstmStack LstmStack::create(const StackConfig& cfg, Rng& rng) {
  if (cfg.vocab == 0 || cfg.embed_dim == 0 || cfg.hidden_dim == 0 || cfg.num_layers == 0) {
    throw std::invalid_argument("stack dimensions must be positive");
  }
  LstmStack stack;
  stack.cfg = cfg;
  stack.embedding = Parameter("embedding", cfg.vocab, cfg.embed_dim);
  for (double& v : stack.embedding.value.data) v = rng.uniform(-0.1, 0.1);

  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::size_t input = l == 0 ? cfg.embed_dim : cfg.hidden_dim;
    LstmLayer layer("lstm" + std::to_string(l), input, cfg.hidden_dim);
    for (double& v : layer.w_x.value.data) v = rng.uniform(-bound, bound);
    for (double& v : layer.w_h.value.data) v = rng.uniform(-bound, bound);
    // forget-gate bias 1, everything else 0
    for (std::size_t j = 0; j < cfg.hidden_dim; ++j) {
      layer.b.value.data[cfg.hidden_dim + j] = 1.0;
    }
    stack.layers.push_back(std::move(layer));
  }
  return stack;
}

std::vector<Parameter*> LstmStack::parameters() {
  std::vector<Parameter*> params{&embedding};
  for (auto& layer : layers) {
    params.push_back(&layer.w_x);
    params.push_back(&layer.w_h);
    params.push_back(&layer.b);
  }
  return params;
}

std::vector<const Parameter*> LstmStack::parameters() const {
  std::vector<const Parameter*> params{&embedding};
  for (const auto& layer : layers) {
    params.push_back(&layer.w_x);
    params.push_back(&layer.w_h);
    params.push_back(&layer.b);
  }
  return params;
}

LanguageModel LanguageModel::create(const StackConfig& cfg, bool tie_weights, Rng& rng) {
  if (tie_weights && cfg.embed_dim != cfg.hidden_dim) {
    throw std::invalid_argument("tied decoder requires embed_dim == hidden_dim");
  }
  LanguageModel model;
  model.stack = LstmStack::create(cfg, rng);
  model.tie_weights = tie_weights;
  if (!tie_weights) {
    model.decoder_w = Parameter("decoder.w", cfg.vocab, cfg.hidden_dim);
    for (double& v : model.decoder_w.value.data) v = rng.uniform(-0.1, 0.1);
  }
  model.decoder_b = Parameter("decoder.b", 1, cfg.vocab);
  return model;
}

std::vector<Parameter*> LanguageModel::parameters() {
  std::vector<Parameter*> params = stack.parameters();
  if (!tie_weights) params.push_back(&decoder_w);
  params.push_back(&decoder_b);
  return params;
}

std::vector<const Parameter*> LanguageModel::parameters() const {
  std::vector<const Parameter*> params = stack.parameters();
  if (!tie_weights) params.push_back(&decoder_w);
  params.push_back(&decoder_b);
  return params;
}

RecurrentState RecurrentState::zeros(const LstmStack& stack, std::size_t batch) {
  RecurrentState state;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    state.h.emplace_back(batch, stack.cfg.hidden_dim);
    state.c.emplace_back(batch, stack.cfg.hidden_dim);
  }
  return state;
}

void stack_forward(const LstmStack& stack, const int* ids, std::size_t batch,
                   std::size_t steps, RecurrentState& state, bool training,
                   Rng* dropout_rng, StackCache& cache) {
  const std::size_t layers = stack.layers.size();
  check_shape(state.h.size() == layers && state.c.size() == layers, "state layer count");
  check_shape(state.h[0].rows == batch, "state batch");

  cache.batch = batch;
  cache.steps = steps;
  cache.training = training;
  cache.x.assign(layers, {});
  cache.gi.assign(layers, {});
  cache.gf.assign(layers, {});
  cache.gg.assign(layers, {});
  cache.go.assign(layers, {});
  cache.c.assign(layers, {});
  cache.tanh_c.assign(layers, {});
  cache.h.assign(layers, {});
  cache.h0.clear();
  cache.c0.clear();
  cache.drop_mask.assign(layers > 0 ? layers - 1 : 0, {});

  const bool use_dropout = training && dropout_rng != nullptr && stack.cfg.dropout > 0.0;
  const double keep = 1.0 - stack.cfg.dropout;

  for (std::size_t l = 0; l < layers; ++l) {
    const LstmLayer& layer = stack.layers[l];
    auto& xs = cache.x[l];
    xs.resize(steps);
    if (l == 0) {
      std::vector<int> step_ids(batch);
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t b = 0; b < batch; ++b) step_ids[b] = ids[b * steps + t];
        xs[t] = Matrix(batch, stack.cfg.embed_dim);
        kernels::gather_rows(stack.embedding.value.data.data(), step_ids.data(),
                             xs[t].data.data(), batch, stack.cfg.embed_dim);
      }
    } else {
      auto& masks = cache.drop_mask[l - 1];
      for (std::size_t t = 0; t < steps; ++t) {
        xs[t] = cache.h[l - 1][t];
        if (use_dropout) {
          Matrix mask(batch, layer.input_size);
          for (double& m : mask.data) {
            m = dropout_rng->next_double() < keep ? 1.0 / keep : 0.0;
          }
          const std::size_t total = batch * layer.input_size;
#pragma omp parallel for schedule(static)
          for (std::size_t idx = 0; idx < total; ++idx) xs[t].data[idx] *= mask.data[idx];
          masks.push_back(std::move(mask));
        }
      }
    }

    cache.h0.push_back(state.h[l]);
    cache.c0.push_back(state.c[l]);
    cache.gi[l].resize(steps);
    cache.gf[l].resize(steps);
    cache.gg[l].resize(steps);
    cache.go[l].resize(steps);
    cache.c[l].resize(steps);
    cache.tanh_c[l].resize(steps);
    cache.h[l].resize(steps);

    Matrix gates;
    const Matrix* h_prev = &cache.h0[l];
    const Matrix* c_prev = &cache.c0[l];
    for (std::size_t t = 0; t < steps; ++t) {
      gate_preact(layer, xs[t], *h_prev, gates);
      gate_apply(gates, *c_prev, cache.gi[l][t], cache.gf[l][t], cache.gg[l][t],
                 cache.go[l][t], cache.c[l][t], cache.tanh_c[l][t], cache.h[l][t],
                 layer.hidden_size);
      h_prev = &cache.h[l][t];
      c_prev = &cache.c[l][t];
    }
    state.h[l] = *h_prev;  // detached carry
    state.c[l] = *c_prev;
  }
}

void stack_backward(LstmStack& stack, const StackCache& cache,
                    const std::vector<Matrix>& d_h_top) {
  const std::size_t layers = stack.layers.size();
  const std::size_t batch = cache.batch;
  const std::size_t steps = cache.steps;
  check_shape(d_h_top.size() == steps, "d_h_top length");

  std::vector<Matrix> d_from_above;  // gradient w.r.t. this layer's h outputs
  for (std::size_t li = layers; li-- > 0;) {
    LstmLayer& layer = stack.layers[li];
    const std::size_t hidden = layer.hidden_size;
    const std::size_t input = layer.input_size;
    const std::size_t gates = 4 * hidden;

    std::vector<Matrix> d_in(steps);
    Matrix d_h_carry(batch, hidden);
    Matrix d_c_carry(batch, hidden);
    Matrix d_gate(batch, gates);

    for (std::size_t t = steps; t-- > 0;) {
      const Matrix& dh_ext = li == layers - 1 ? d_h_top[t] : d_from_above[t];
      const Matrix& gi = cache.gi[li][t];
      const Matrix& gf = cache.gf[li][t];
      const Matrix& gg = cache.gg[li][t];
      const Matrix& go = cache.go[li][t];
      const Matrix& tanh_c = cache.tanh_c[li][t];
      const Matrix& c_prev = t > 0 ? cache.c[li][t - 1] : cache.c0[li];
      const Matrix& h_prev = t > 0 ? cache.h[li][t - 1] : cache.h0[li];

      const std::size_t total = batch * hidden;
#pragma omp parallel for schedule(static)
      for (std::size_t idx = 0; idx < total; ++idx) {
        const std::size_t b = idx / hidden;
        const std::size_t j = idx % hidden;
        const double dh = dh_ext.data[idx] + d_h_carry.data[idx];
        const double vi = gi.data[idx];
        const double vf = gf.data[idx];
        const double vg = gg.data[idx];
        const double vo = go.data[idx];
        const double vt = tanh_c.data[idx];
        const double d_o = dh * vt;
        const double dc = d_c_carry.data[idx] + dh * vo * (1.0 - vt * vt);
        const double d_i = dc * vg;
        const double d_f = dc * c_prev.data[idx];
        const double d_g = dc * vi;
        double* grow = d_gate.row(b);
        grow[j] = d_i * vi * (1.0 - vi);
        grow[hidden + j] = d_f * vf * (1.0 - vf);
        grow[2 * hidden + j] = d_g * (1.0 - vg * vg);
        grow[3 * hidden + j] = d_o * vo * (1.0 - vo);
        d_c_carry.data[idx] = dc * vf;  // becomes dc_{t-1}
      }

      kernels::matmul_tn_acc(d_gate.data.data(), cache.x[li][t].data.data(),
                             layer.w_x.grad.data.data(), batch, gates, input);
      kernels::matmul_tn_acc(d_gate.data.data(), h_prev.data.data(),
                             layer.w_h.grad.data.data(), batch, gates, hidden);
      kernels::col_sums_acc(d_gate.data.data(), layer.b.grad.data.data(), batch, gates);

      d_in[t] = Matrix(batch, input);
      kernels::matmul_nn(d_gate.data.data(), layer.w_x.value.data.data(),
                         d_in[t].data.data(), batch, gates, input);
      kernels::matmul_nn(d_gate.data.data(), layer.w_h.value.data.data(),
                         d_h_carry.data.data(), batch, gates, hidden);
    }

    if (li > 0) {
      if (!cache.drop_mask[li - 1].empty()) {
        for (std::size_t t = 0; t < steps; ++t) {
          const Matrix& mask = cache.drop_mask[li - 1][t];
          const std::size_t total = batch * input;
#pragma omp parallel for schedule(static)
          for (std::size_t idx = 0; idx < total; ++idx) d_in[t].data[idx] *= mask.data[idx];
        }
      }
      d_from_above = std::move(d_in);
    } else {
      // scatter into the embedding gradient, time-major fixed order
      const std::size_t rows = batch * steps;
      Matrix flat(rows, input);
      std::vector<int> flat_ids(rows);
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t b = 0; b < batch; ++b) {
          flat_ids[t * batch + b] = cache.ids[b * steps + t];
          std::memcpy(flat.row(t * batch + b), d_in[t].row(b), input * sizeof(double));
        }
      }
      kernels::scatter_rows_acc(flat_ids.data(), flat.data.data(),
                                stack.embedding.grad.data.data(), rows, input);
    }
  }
}

LayerRun lstm_forward(const LstmLayer& layer, const std::vector<Matrix>& inputs,
                      const Matrix& h0, const Matrix& c0) {
  check_shape(!inputs.empty(), "inputs non-empty");
  check_shape(inputs[0].cols == layer.input_size, "input width");
  check_shape(h0.cols == layer.hidden_size && c0.cols == layer.hidden_size, "state width");
  check_shape(h0.rows == inputs[0].rows && c0.rows == inputs[0].rows, "state batch");

  LayerRun run;
  run.h.reserve(inputs.size());
  Matrix gates, gi, gf, gg, go, c, tanh_c, h;
  const Matrix* h_prev = &h0;
  const Matrix* c_prev = &c0;
  for (const Matrix& x : inputs) {
    check_shape(x.cols == layer.input_size && x.rows == h0.rows, "step shape");
    gate_preact(layer, x, *h_prev, gates);
    gate_apply(gates, *c_prev, gi, gf, gg, go, c, tanh_c, h, layer.hidden_size);
    run.h.push_back(h);
    run.c_final = c;
    h_prev = &run.h.back();
    c_prev = &run.c_final;
  }
  run.h_final = run.h.back();
  return run;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                             Matrix* d_logits) {
  const std::size_t rows = logits.rows;
  const std::size_t cols = logits.cols;
  if (rows == 0) throw std::invalid_argument("empty logits");
  if (targets.size() != rows) throw std::invalid_argument("targets/logits mismatch");
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw std::out_of_range("target id out of range");
    }
  }

  if (d_logits) {
    d_logits->rows = rows;
    d_logits->cols = cols;
    d_logits->data.resize(rows * cols);
  }

  std::vector<double> row_loss(rows);
  const double inv_rows = 1.0 / static_cast<double>(rows);
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = logits.row(r);
    double mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = in[j] > mx ? in[j] : mx;
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += std::exp(in[j] - mx);
    const std::size_t tgt = static_cast<std::size_t>(targets[r]);
    row_loss[r] = std::log(sum) + mx - in[tgt];
    if (d_logits) {
      double* out = d_logits->row(r);
      const double inv_sum = 1.0 / sum;
      for (std::size_t j = 0; j < cols; ++j) {
        out[j] = std::exp(in[j] - mx) * inv_sum * inv_rows;
      }
      out[tgt] -= inv_rows;
    }
  }
  double total = 0.0;
  for (double l : row_loss) total += l;  // fixed order
  return total * inv_rows;
}

namespace {

// Shared LM forward: runs the stack and the decoder, returns the mean loss.
// When model_mut is non-null, also backpropagates and accumulates gradients.
double lm_pass(const LanguageModel& model, LanguageModel* model_mut,
               const LmBatchView& batch, RecurrentState& state, bool training,
               Rng* dropout_rng) {
  const std::size_t vocab = model.vocab();
  const std::size_t hidden = model.stack.cfg.hidden_dim;
  const std::size_t batch_n = batch.batch;
  const std::size_t steps = batch.steps;
  for (std::size_t i = 0; i < batch_n * steps; ++i) {
    if (batch.inputs[i] < 0 || static_cast<std::size_t>(batch.inputs[i]) >= vocab) {
      throw std::out_of_range("input id out of range");
    }
  }

  StackCache cache;
  cache.ids.assign(batch.inputs, batch.inputs + batch_n * steps);
  stack_forward(model.stack, batch.inputs, batch_n, steps, state, training, dropout_rng,
                cache);

  // flatten time-major: row t*B + b
  const std::size_t rows = batch_n * steps;
  Matrix hidden_flat(rows, hidden);
  std::vector<int> targets_flat(rows);
  const auto& top = cache.h.back();
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch_n; ++b) {
      std::memcpy(hidden_flat.row(t * batch_n + b), top[t].row(b), hidden * sizeof(double));
      targets_flat[t * batch_n + b] = batch.targets[b * steps + t];
    }
  }

  const Parameter& dec_w = model.decoder_weight();
  Matrix logits(rows, vocab);
  kernels::matmul_nt(hidden_flat.data.data(), dec_w.value.data.data(), logits.data.data(),
                     rows, hidden, vocab);
  kernels::add_bias_rows(logits.data.data(), model.decoder_b.value.data.data(), rows, vocab);

  Matrix d_logits;
  const double loss =
      softmax_cross_entropy(logits, targets_flat, model_mut ? &d_logits : nullptr);
  if (!std::isfinite(loss)) throw DivergenceError("non-finite language model loss");
  if (!model_mut) return loss;

  Parameter& dec_w_mut = model_mut->decoder_weight();
  kernels::matmul_tn_acc(d_logits.data.data(), hidden_flat.data.data(),
                         dec_w_mut.grad.data.data(), rows, vocab, hidden);
  kernels::col_sums_acc(d_logits.data.data(), model_mut->decoder_b.grad.data.data(), rows,
                        vocab);

  Matrix d_hidden_flat(rows, hidden);
  kernels::matmul_nn(d_logits.data.data(), dec_w.value.data.data(),
                     d_hidden_flat.data.data(), rows, vocab, hidden);
  std::vector<Matrix> d_h_top(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    d_h_top[t] = Matrix(batch_n, hidden);
    for (std::size_t b = 0; b < batch_n; ++b) {
      std::memcpy(d_h_top[t].row(b), d_hidden_flat.row(t * batch_n + b),
                  hidden * sizeof(double));
    }
  }
  stack_backward(model_mut->stack, cache, d_h_top);
  return loss;
}

}  // namespace

double lm_loss(const LanguageModel& model, const LmBatchView& batch, RecurrentState& state,
               bool training, Rng* dropout_rng) {
  return lm_pass(model, nullptr, batch, state, training, dropout_rng);
}

double lm_loss_and_grads(LanguageModel& model, const LmBatchView& batch,
                         RecurrentState& state, Rng* dropout_rng) {
  return lm_pass(model, &model, batch, state, /*training=*/true, dropout_rng);
}

void Optimizer::step(const std::vector<Parameter*>& params, double lr) {
  step(params, std::vector<bool>(params.size(), true), lr);
}

void Optimizer::step(const std::vector<Parameter*>& params, const std::vector<bool>& trainable,
                     double lr) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (trainable.size() != params.size()) throw std::invalid_argument("trainable mask size");
  if (m_.empty() && kind == Kind::adam) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }
  if (kind == Kind::adam && m_.size() != params.size()) {
    throw std::invalid_argument("optimizer bound to a different parameter list");
  }

  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!trainable[i]) continue;
      sq += kernels::sum_squares(params[i]->grad.data.data(), params[i]->grad.size());
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
      const double factor = clip_norm / norm;
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable[i]) continue;
        kernels::scale(factor, params[i]->grad.data.data(), params[i]->grad.size());
      }
    }
  }

  ++step_count;
  bool finite = true;
  if (kind == Kind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!trainable[i]) continue;
      kernels::axpy(-lr, params[i]->grad.data.data(), params[i]->value.data.data(),
                    params[i]->value.size());
    }
  } else {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!trainable[i]) continue;
      double* value = params[i]->value.data.data();
      const double* grad = params[i]->grad.data.data();
      double* m = m_[i].data.data();
      double* v = v_[i].data.data();
      const std::size_t n = params[i]->value.size();
      const double b1 = beta1, b2 = beta2, eps = epsilon;
#pragma omp parallel for schedule(static)
      for (std::size_t j = 0; j < n; ++j) {
        m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
        v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (trainable[i]) {
      for (double x : params[i]->value.data) {
        if (!std::isfinite(x)) {
          finite = false;
          break;
        }
      }
    }
    params[i]->zero_grad();
  }
  if (!finite) throw DivergenceError("non-finite parameter after optimizer step");
}

double perplexity(const LanguageModel& model, const std::vector<int>& ids,
                  std::size_t window) {
  if (ids.size() < 2) throw std::invalid_argument("perplexity needs at least 2 tokens");
  if (window == 0) throw std::invalid_argument("window must be > 0");
  RecurrentState state = RecurrentState::zeros(model.stack, 1);
  const std::size_t n = ids.size();
  double total_nll = 0.0;
  std::size_t pos = 0;
  while (pos + 1 < n) {
    const std::size_t steps = std::min(window, n - 1 - pos);
    LmBatchView batch;
    batch.inputs = ids.data() + pos;
    batch.targets = ids.data() + pos + 1;
    batch.batch = 1;
    batch.steps = steps;
    total_nll += lm_loss(model, batch, state) * static_cast<double>(steps);
    pos += steps;
  }
  return std::exp(total_nll / static_cast<double>(n - 1));
}

GradCheckResult gradient_check(const std::vector<Parameter*>& params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& grad_fn, double epsilon,
                               std::size_t samples_per_param, Rng& rng) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");

  for (Parameter* p : params) p->zero_grad();
  grad_fn();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) {
    analytic.push_back(p->grad.data);
    p->zero_grad();
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const std::size_t n = p.value.size();
    std::vector<std::size_t> coords;
    if (n <= samples_per_param) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      coords.reserve(samples_per_param);
      for (std::size_t i = 0; i < samples_per_param; ++i) {
        coords.push_back(static_cast<std::size_t>(rng.below(n)));
      }
    }
    for (std::size_t coord : coords) {
      const double original = p.value.data[coord];
      p.value.data[coord] = original + epsilon;
      const double up = loss_fn();
      p.value.data[coord] = original - epsilon;
      const double down = loss_fn();
      p.value.data[coord] = original;
      const double fd = (up - down) / (2.0 * epsilon);
      const double a = analytic[pi][coord];
      const double denom = std::max(1e-6, std::abs(a) + std::abs(fd));
      const double rel = std::abs(a - fd) / denom;
      if (rel > result.max_rel_error) result.max_rel_error = rel;
      ++result.coords_checked;
    }
  }
  return result;
}

}  // namespace claimlab::nn
