#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "claimlab/matrix.hpp"
#include "claimlab/rng.hpp"

namespace claimlab::nn {

// Training produced a non-finite loss or update.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.zero(); }
};

// Gate order is fixed as [input, forget, cell, output]: row block g*h..(g+1)*h
// of w_x / w_h / b belongs to gate g.
struct LstmLayer {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Parameter w_x;  // 4h x input
  Parameter w_h;  // 4h x hidden
  Parameter b;    // 1 x 4h

  LstmLayer() = default;
  LstmLayer(const std::string& prefix, std::size_t input, std::size_t hidden);
};

struct StackConfig {
  std::size_t vocab = 0;
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 256;
  std::size_t num_layers = 3;
  double dropout = 0.1;  // between stacked layers, training only
};

// Embedding plus stacked LSTM; shared by the language model and the
// classifier.
struct LstmStack {
  StackConfig cfg;
  Parameter embedding;  // V x d
  std::vector<LstmLayer> layers;

  static LstmStack create(const StackConfig& cfg, Rng& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t last_hidden() const { return cfg.hidden_dim; }
};

struct LanguageModel {
  LstmStack stack;
  bool tie_weights = false;
  Parameter decoder_w;  // V x h_last; unused storage when tied
  Parameter decoder_b;  // 1 x V

  static LanguageModel create(const StackConfig& cfg, bool tie_weights, Rng& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& decoder_weight() { return tie_weights ? stack.embedding : decoder_w; }
  const Parameter& decoder_weight() const { return tie_weights ? stack.embedding : decoder_w; }
  std::size_t vocab() const { return stack.cfg.vocab; }
};

// Carried hidden state, detached between BPTT windows.
struct RecurrentState {
  std::vector<Matrix> h;  // per layer, batch x hidden
  std::vector<Matrix> c;

  static RecurrentState zeros(const LstmStack& stack, std::size_t batch);
};

// Activations cached by the forward pass for exact BPTT.
struct StackCache {
  std::size_t batch = 0;
  std::size_t steps = 0;
  bool training = false;
  std::vector<int> ids;  // row-major batch x steps, for the embedding scatter
  // [layer][t]
  std::vector<std::vector<Matrix>> x;  // layer inputs after dropout
  std::vector<std::vector<Matrix>> gi, gf, gg, go;
  std::vector<std::vector<Matrix>> c, tanh_c, h;
  std::vector<Matrix> h0, c0;  // per layer
  std::vector<std::vector<Matrix>> drop_mask;  // [layer-1][t]; empty in eval mode
};

// ids: row-major batch x steps. Updates state in place (detached carry).
void stack_forward(const LstmStack& stack, const int* ids, std::size_t batch,
                   std::size_t steps, RecurrentState& state, bool training,
                   Rng* dropout_rng, StackCache& cache);

// d_h_top[t]: gradient w.r.t. the final layer's hidden state at step t.
// Accumulates into every parameter's grad buffer.
void stack_backward(LstmStack& stack, const StackCache& cache,
                    const std::vector<Matrix>& d_h_top);

// Single layer over a full window; the standard recurrence with sigmoid
// gates and tanh cell candidate.
struct LayerRun {
  std::vector<Matrix> h;  // per step, batch x hidden
  Matrix h_final, c_final;
};
LayerRun lstm_forward(const LstmLayer& layer, const std::vector<Matrix>& inputs,
                      const Matrix& h0, const Matrix& c0);

// Mean loss over rows; targets must be < cols. When d_logits is non-null it
// receives (softmax - onehot) / rows.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                             Matrix* d_logits);

struct LmBatchView {
  const int* inputs = nullptr;
  const int* targets = nullptr;
  std::size_t batch = 0;
  std::size_t steps = 0;
};

// Forward only; dropout active when training && dropout_rng.
double lm_loss(const LanguageModel& model, const LmBatchView& batch,
               RecurrentState& state, bool training = false, Rng* dropout_rng = nullptr);

// Forward + exact BPTT; accumulates gradients. Throws DivergenceError on a
// non-finite loss.
double lm_loss_and_grads(LanguageModel& model, const LmBatchView& batch,
                         RecurrentState& state, Rng* dropout_rng = nullptr);

struct Optimizer {
  enum class Kind { sgd, adam };

  Kind kind = Kind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.25;  // global-norm clip before each step; <= 0 disables
  std::size_t step_count = 0;

  explicit Optimizer(Kind k) : kind(k) {}

  // `trainable` masks the parameter list (same indexing); moments stay
  // aligned across freeze-plan changes. Gradients of every listed parameter
  // are zeroed after the step. Throws DivergenceError on a non-finite update.
  void step(const std::vector<Parameter*>& params, double lr);
  void step(const std::vector<Parameter*>& params, const std::vector<bool>& trainable,
            double lr);

 private:
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// exp(mean next-token NLL) streamed with carried state; ids.size() >= 2.
double perplexity(const LanguageModel& model, const std::vector<int>& ids,
                  std::size_t window = 64);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// Central finite differences on sampled coordinates of every parameter
// group. loss_fn must be a deterministic pure forward; grad_fn must fill the
// grad buffers from zero.
GradCheckResult gradient_check(const std::vector<Parameter*>& params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& grad_fn, double epsilon,
                               std::size_t samples_per_param, Rng& rng);

}  // namespace claimlab::nn
