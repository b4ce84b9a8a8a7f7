#include "crest/digs.hpp"

#include <cmath>
#include <stdexcept>

#include "crest/grounding.hpp"

namespace crest {

MetaPatternBank make_meta_pattern_bank(std::size_t in_width, std::size_t pattern_count,
                                       std::size_t pattern_dim, double margin,
                                       std::mt19937_64& rng) {
  if (pattern_count < 2) {
    throw std::domain_error("meta-pattern bank needs at least 2 patterns");
  }
  MetaPatternBank bank;
  bank.margin = margin;
  // The triplet + compactness objective is summed (not averaged) over the
  // batch, so at the default batch size its gradients into the shared trunk
  // would dwarf the classification signal if queries started far from the
  // patterns. A small initial scale keeps the bank a gentle regularizer that
  // grows with training instead of dominating the first epochs.
  const double scale = 0.1;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(pattern_count * pattern_dim);
  const double s = scale / std::sqrt(double(pattern_dim));
  for (auto& x : v) x = normal(rng) * s;
  bank.patterns = Tensor(pattern_count, pattern_dim, std::move(v), /*requires_grad=*/true);
  auto scaled_uniform = [&](std::size_t rows, std::size_t cols) {
    Tensor t = init_uniform(rows, cols, rng);
    std::vector<double> w(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) w[i * cols + j] = scale * t.at(i, j);
    return Tensor(rows, cols, std::move(w), /*requires_grad=*/true);
  };
  bank.w_q = scaled_uniform(in_width, pattern_dim);
  bank.b_q = scaled_uniform(1, pattern_dim);
  bank.w_r = scaled_uniform(pattern_dim, in_width);
  return bank;
}

BankReadout bank_attend(const Tensor& f_attribute, const MetaPatternBank& bank) {
  if (f_attribute.cols() != bank.w_q.rows()) {
    throw shape_error("bank_attend: feature width " + f_attribute.shape_str() +
                      " vs projection " + bank.w_q.shape_str());
  }
  BankReadout r;
  r.queries = add(matmul(f_attribute, bank.w_q),
                  matmul(Tensor::full(f_attribute.rows(), 1, 1.0), bank.b_q));
  r.attention = softmax_rows(matmul(r.queries, transpose(bank.patterns)), 1.0);
  r.v_star = matmul(r.attention, bank.patterns);
  r.enriched = add(f_attribute, matmul(r.v_star, bank.w_r));
  return r;
}

std::pair<std::size_t, std::size_t> nearest_patterns(const std::vector<double>& query,
                                                     const Tensor& patterns) {
  const std::size_t phi = patterns.rows(), d = patterns.cols();
  if (phi < 2) throw std::domain_error("nearest_patterns: need at least 2 patterns");
  if (query.size() != d) {
    throw shape_error("nearest_patterns: query width " + std::to_string(query.size()) +
                      " vs patterns " + patterns.shape_str());
  }
  std::size_t best = 0, second = 1;
  double best_sim = -std::numeric_limits<double>::infinity();
  double second_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < phi; ++j) {
    double sim = 0.0;
    for (std::size_t k = 0; k < d; ++k) sim += query[k] * patterns.at(j, k);
    if (sim > best_sim) {
      second = best;
      second_sim = best_sim;
      best = j;
      best_sim = sim;
    } else if (sim > second_sim) {
      second = j;
      second_sim = sim;
    }
  }
  if (best == second) second = best == 0 ? 1 : 0;
  return {best, second};
}

Tensor digs_loss(const Tensor& queries, const Tensor& patterns, double margin) {
  const std::size_t b = queries.rows(), d = queries.cols();
  if (patterns.cols() != d) {
    throw shape_error("digs_loss: query width " + queries.shape_str() + " vs patterns " +
                      patterns.shape_str());
  }
  Tensor total;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> qv(d);
    for (std::size_t k = 0; k < d; ++k) qv[k] = queries.at(i, k);
    auto [p, n] = nearest_patterns(qv, patterns);
    Tensor q = row(queries, i);
    Tensor dp = sub(q, row(patterns, p));
    Tensor dn = sub(q, row(patterns, n));
    Tensor dist_p = sum_all(mul(dp, dp));
    Tensor dist_n = sum_all(mul(dn, dn));
    Tensor triplet = relu(add_scalar(sub(dist_p, dist_n), margin));
    Tensor term = add(triplet, dist_p);
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

}  // namespace crest
