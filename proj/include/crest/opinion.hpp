#pragma once

// Subjective-logic opinions over K classes and their Dirichlet-evidence view.
// All operations here are pure value functions; the differentiable versions
// used inside the losses live in edl.hpp.

#include <vector>

namespace crest {

struct Opinion {
  std::vector<double> belief;     // b_k in [0,1]
  double uncertainty = 1.0;       // u in [0,1], sum(b) + u = 1
  std::vector<double> base_rate;  // a_k, sums to 1

  std::size_t K() const { return belief.size(); }
  void validate() const;
};

struct DirichletParams {
  std::vector<double> alpha;  // each >= 1

  std::size_t K() const { return alpha.size(); }
  double strength() const;
  std::vector<double> evidence() const;  // alpha - 1
  void validate() const;
};

std::vector<double> uniform_base_rate(std::size_t k);

// alpha = e + 1, u = K/S, b_k = e_k/S.
Opinion opinion_from_evidence(const std::vector<double>& evidence,
                              const std::vector<double>& base_rate);
Opinion opinion_from_alpha(const DirichletParams& params);

// Projected probability p_k = b_k + a_k * u.
std::vector<double> project(const Opinion& o);

// The fusion rule: b = (b^A u^B + b^B u^A)/(u^A + u^B), u = 2 u^A u^B/(u^A + u^B),
// a = (a^A + a^B)/2. Rejects the degenerate u^A = u^B = 0 case.
Opinion fuse(const Opinion& a, const Opinion& b);

// Left-fold of fuse over the list, in input order.
Opinion fuse_many(const std::vector<Opinion>& opinions);

// Conflict degree c = c_p * c_c with c_p the projected total variation and
// c_c = (1 - u^A)(1 - u^B).
double conflict(const Opinion& a, const Opinion& b);

}  // namespace crest
