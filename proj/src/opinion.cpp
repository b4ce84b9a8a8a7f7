#include "crest/opinion.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace crest {

namespace {

void require_same_k(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw std::domain_error(std::string(op) + ": class counts differ, " +
                            std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

void Opinion::validate() const {
  if (belief.size() != base_rate.size()) {
    throw std::domain_error("Opinion: belief/base_rate size mismatch");
  }
  double total = uncertainty;
  for (double b : belief) {
    if (b < -1e-9 || b > 1.0 + 1e-9) throw std::domain_error("Opinion: belief outside [0,1]");
    total += b;
  }
  if (uncertainty < -1e-9 || uncertainty > 1.0 + 1e-9) {
    throw std::domain_error("Opinion: uncertainty outside [0,1]");
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw std::domain_error("Opinion: sum(belief) + uncertainty = " +
                            std::to_string(total) + ", expected 1");
  }
}

double DirichletParams::strength() const {
  return std::accumulate(alpha.begin(), alpha.end(), 0.0);
}

std::vector<double> DirichletParams::evidence() const {
  std::vector<double> e(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) e[i] = alpha[i] - 1.0;
  return e;
}

void DirichletParams::validate() const {
  for (double a : alpha) {
    if (a < 1.0 - 1e-12) {
      throw std::domain_error("DirichletParams: alpha = " + std::to_string(a) +
                              " below 1 (negative evidence)");
    }
  }
}

std::vector<double> uniform_base_rate(std::size_t k) {
  return std::vector<double>(k, 1.0 / double(k));
}

Opinion opinion_from_evidence(const std::vector<double>& evidence,
                              const std::vector<double>& base_rate) {
  require_same_k(evidence.size(), base_rate.size(), "opinion_from_evidence");
  const std::size_t k = evidence.size();
  double strength = double(k);
  for (double e : evidence) {
    if (e < 0.0) {
      throw std::domain_error("opinion_from_evidence: negative evidence " +
                              std::to_string(e));
    }
    strength += e;
  }
  Opinion o;
  o.belief.resize(k);
  for (std::size_t i = 0; i < k; ++i) o.belief[i] = evidence[i] / strength;
  o.uncertainty = double(k) / strength;
  o.base_rate = base_rate;
  return o;
}

Opinion opinion_from_alpha(const DirichletParams& params) {
  params.validate();
  return opinion_from_evidence(params.evidence(), uniform_base_rate(params.K()));
}

std::vector<double> project(const Opinion& o) {
  std::vector<double> p(o.K());
  for (std::size_t i = 0; i < o.K(); ++i) {
    p[i] = o.belief[i] + o.base_rate[i] * o.uncertainty;
  }
  return p;
}

Opinion fuse(const Opinion& a, const Opinion& b) {
  require_same_k(a.K(), b.K(), "fuse");
  const double usum = a.uncertainty + b.uncertainty;
  if (usum <= 0.0) {
    throw std::domain_error("fuse: both opinions fully certain (u^A = u^B = 0)");
  }
  Opinion out;
  out.belief.resize(a.K());
  out.base_rate.resize(a.K());
  for (std::size_t i = 0; i < a.K(); ++i) {
    out.belief[i] = (a.belief[i] * b.uncertainty + b.belief[i] * a.uncertainty) / usum;
    out.base_rate[i] = 0.5 * (a.base_rate[i] + b.base_rate[i]);
  }
  out.uncertainty = 2.0 * a.uncertainty * b.uncertainty / usum;
  return out;
}

Opinion fuse_many(const std::vector<Opinion>& opinions) {
  if (opinions.empty()) throw std::domain_error("fuse_many: empty opinion list");
  Opinion acc = opinions.front();
  for (std::size_t i = 1; i < opinions.size(); ++i) acc = fuse(acc, opinions[i]);
  return acc;
}

double conflict(const Opinion& a, const Opinion& b) {
  require_same_k(a.K(), b.K(), "conflict");
  const auto pa = project(a);
  const auto pb = project(b);
  double tv = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) tv += std::fabs(pa[i] - pb[i]);
  tv *= 0.5;
  // Group the certainty product first so the result is exactly symmetric.
  const double cc = (1.0 - a.uncertainty) * (1.0 - b.uncertainty);
  return tv * cc;
}

}  // namespace crest
