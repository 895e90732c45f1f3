#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "claimlab/kernels.hpp"
#include "claimlab/rng.hpp"

using namespace claimlab;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("matmul variants match the serial reference bitwise") {
  Rng rng(7);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {17, 13, 31}, {64, 33, 50}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const auto a = random_vec(m * k, rng);
    const auto b_nt = random_vec(n * k, rng);
    const auto b_nn = random_vec(k * n, rng);
    const auto b_tn = random_vec(m * n, rng);

    for (int threads : {1, 2, 4}) {
      kernels::set_threads(threads);

      std::vector<double> c_ref(m * n), c_par(m * n);
      kernels::serial::matmul_nt(a.data(), b_nt.data(), c_ref.data(), m, k, n);
      kernels::matmul_nt(a.data(), b_nt.data(), c_par.data(), m, k, n);
      CHECK(bitwise_equal(c_ref, c_par));

      kernels::serial::matmul_nn(a.data(), b_nn.data(), c_ref.data(), m, k, n);
      kernels::matmul_nn(a.data(), b_nn.data(), c_par.data(), m, k, n);
      CHECK(bitwise_equal(c_ref, c_par));

      std::vector<double> acc_ref = random_vec(k * n, rng);
      std::vector<double> acc_par = acc_ref;
      kernels::serial::matmul_tn_acc(a.data(), b_tn.data(), acc_ref.data(), m, k, n);
      kernels::matmul_tn_acc(a.data(), b_tn.data(), acc_par.data(), m, k, n);
      CHECK(bitwise_equal(acc_ref, acc_par));
    }
  }
  kernels::set_threads(0);
}

TEST_CASE("softmax, bias, column sums and elementwise kernels match serial") {
  Rng rng(11);
  const std::size_t m = 19, n = 41;
  const auto logits = random_vec(m * n, rng);
  const auto bias = random_vec(n, rng);

  for (int threads : {1, 3}) {
    kernels::set_threads(threads);

    std::vector<double> p_ref(m * n), p_par(m * n);
    kernels::serial::softmax_rows(logits.data(), p_ref.data(), m, n);
    kernels::softmax_rows(logits.data(), p_par.data(), m, n);
    CHECK(bitwise_equal(p_ref, p_par));

    std::vector<double> c_ref = logits, c_par = logits;
    kernels::serial::add_bias_rows(c_ref.data(), bias.data(), m, n);
    kernels::add_bias_rows(c_par.data(), bias.data(), m, n);
    CHECK(bitwise_equal(c_ref, c_par));

    std::vector<double> s_ref(n, 0.5), s_par(n, 0.5);
    kernels::serial::col_sums_acc(logits.data(), s_ref.data(), m, n);
    kernels::col_sums_acc(logits.data(), s_par.data(), m, n);
    CHECK(bitwise_equal(s_ref, s_par));

    std::vector<double> y_ref = bias, y_par = bias;
    kernels::serial::axpy(0.3, logits.data(), y_ref.data(), n);
    kernels::axpy(0.3, logits.data(), y_par.data(), n);
    CHECK(bitwise_equal(y_ref, y_par));

    std::vector<double> x_ref = logits, x_par = logits;
    kernels::serial::scale(-1.7, x_ref.data(), x_ref.size());
    kernels::scale(-1.7, x_par.data(), x_par.size());
    CHECK(bitwise_equal(x_ref, x_par));
  }
  kernels::set_threads(0);
}

TEST_CASE("softmax rows are normalized") {
  Rng rng(3);
  const std::size_t m = 5, n = 23;
  const auto logits = random_vec(m * n, rng);
  std::vector<double> probs(m * n);
  kernels::softmax_rows(logits.data(), probs.data(), m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(probs[i * n + j] > 0.0);
      sum += probs[i * n + j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sum_squares is thread-count invariant and matches serial") {
  Rng rng(23);
  for (std::size_t n : {1ul, 7ul, 4096ul, 4097ul, 100000ul}) {
    const auto x = random_vec(n, rng);
    const double ref = kernels::serial::sum_squares(x.data(), n);
    for (int threads : {1, 2, 4}) {
      kernels::set_threads(threads);
      CHECK(kernels::sum_squares(x.data(), n) == ref);
    }
  }
  kernels::set_threads(0);
}

TEST_CASE("gather and scatter match serial, including duplicate ids") {
  Rng rng(31);
  const std::size_t vocab = 13, width = 9, n_ids = 40;
  const auto table = random_vec(vocab * width, rng);
  std::vector<int> ids(n_ids);
  for (int& id : ids) id = static_cast<int>(rng.below(vocab));  // duplicates likely
  const auto grads = random_vec(n_ids * width, rng);

  for (int threads : {1, 2, 4}) {
    kernels::set_threads(threads);

    std::vector<double> out_ref(n_ids * width), out_par(n_ids * width);
    kernels::serial::gather_rows(table.data(), ids.data(), out_ref.data(), n_ids, width);
    kernels::gather_rows(table.data(), ids.data(), out_par.data(), n_ids, width);
    CHECK(bitwise_equal(out_ref, out_par));

    std::vector<double> acc_ref(vocab * width, 0.25), acc_par(vocab * width, 0.25);
    kernels::serial::scatter_rows_acc(ids.data(), grads.data(), acc_ref.data(), n_ids, width);
    kernels::scatter_rows_acc(ids.data(), grads.data(), acc_par.data(), n_ids, width);
    CHECK(bitwise_equal(acc_ref, acc_par));
  }
  kernels::set_threads(0);
}
