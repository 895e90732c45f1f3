// Timing comparison between the serial reference kernels and the OpenMP
// variants, plus an end-to-end language-model training step at 1 thread vs
// all cores. Results are bitwise identical by construction; this target is
// about the speedup.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "claimlab/kernels.hpp"
#include "claimlab/nn.hpp"
#include "claimlab/rng.hpp"

using namespace claimlab;

namespace {

double time_best_of(int repeats, const std::function<void()>& fn) {
  double best = 1e100;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (s < best) best = s;
  }
  return best;
}

void report(const std::string& name, double serial_s, double parallel_s) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %.2fx\n", name.c_str(),
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

int main() {
  Rng rng(1);
  std::printf("OpenMP threads: %d\n\n", kernels::max_threads());

  struct MatShape {
    const char* label;
    std::size_t m, k, n;
  };
  const MatShape shapes[] = {
      {"matmul_nt 256x256x1024", 256, 256, 1024},
      {"matmul_nt 128x100x4096", 128, 100, 4096},
  };
  for (const auto& s : shapes) {
    const auto a = random_vec(s.m * s.k, rng);
    const auto b = random_vec(s.n * s.k, rng);
    std::vector<double> c(s.m * s.n);
    const double ser = time_best_of(5, [&] {
      kernels::serial::matmul_nt(a.data(), b.data(), c.data(), s.m, s.k, s.n);
    });
    const double par = time_best_of(5, [&] {
      kernels::matmul_nt(a.data(), b.data(), c.data(), s.m, s.k, s.n);
    });
    report(s.label, ser, par);
  }

  {
    const std::size_t m = 256, k = 1024, n = 256;
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    std::vector<double> c(m * n);
    const double ser = time_best_of(5, [&] {
      kernels::serial::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
    });
    const double par =
        time_best_of(5, [&] { kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n); });
    report("matmul_nn 256x1024x256", ser, par);
  }

  {
    const std::size_t m = 256, k = 1024, n = 256;
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(m * n, rng);
    std::vector<double> c(k * n, 0.0);
    const double ser = time_best_of(5, [&] {
      kernels::serial::matmul_tn_acc(a.data(), b.data(), c.data(), m, k, n);
    });
    const double par = time_best_of(
        5, [&] { kernels::matmul_tn_acc(a.data(), b.data(), c.data(), m, k, n); });
    report("matmul_tn_acc 256x1024x256", ser, par);
  }

  {
    const std::size_t m = 512, n = 10000;
    const auto logits = random_vec(m * n, rng);
    std::vector<double> probs(m * n);
    const double ser = time_best_of(
        5, [&] { kernels::serial::softmax_rows(logits.data(), probs.data(), m, n); });
    const double par =
        time_best_of(5, [&] { kernels::softmax_rows(logits.data(), probs.data(), m, n); });
    report("softmax_rows 512x10000", ser, par);
  }

  {
    const std::size_t n = 1 << 22;
    const auto x = random_vec(n, rng);
    volatile double sink = 0.0;
    const double ser =
        time_best_of(5, [&] { sink = kernels::serial::sum_squares(x.data(), n); });
    const double par = time_best_of(5, [&] { sink = kernels::sum_squares(x.data(), n); });
    (void)sink;
    report("sum_squares 4M", ser, par);
  }

  // end to end: one BPTT training step of a mid-sized LM
  {
    nn::StackConfig cfg;
    cfg.vocab = 10000;
    cfg.embed_dim = 100;
    cfg.hidden_dim = 256;
    cfg.num_layers = 3;
    cfg.dropout = 0.1;
    Rng init(7);
    auto model = nn::LanguageModel::create(cfg, false, init);
    const std::size_t batch = 32, steps = 32;
    std::vector<int> inputs(batch * steps), targets(batch * steps);
    for (auto& id : inputs) id = static_cast<int>(rng.below(cfg.vocab));
    for (auto& id : targets) id = static_cast<int>(rng.below(cfg.vocab));
    nn::LmBatchView view{inputs.data(), targets.data(), batch, steps};

    auto step_once = [&] {
      auto state = nn::RecurrentState::zeros(model.stack, batch);
      Rng drop(3);
      nn::lm_loss_and_grads(model, view, state, &drop);
      for (nn::Parameter* p : model.parameters()) p->zero_grad();
    };
    kernels::set_threads(1);
    const double ser = time_best_of(3, step_once);
    kernels::set_threads(0);
    const double par = time_best_of(3, step_once);
    report("lm step V=10k h=256 L=3", ser, par);
  }

  return 0;
}
