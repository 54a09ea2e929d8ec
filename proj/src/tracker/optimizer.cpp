#include <blockloc/core/error.hpp>
#include <blockloc/tracker/marginalization.hpp>
#include <blockloc/tracker/window.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <set>

namespace blockloc {
namespace {

std::vector<int> identity_offsets(size_t n) {
  std::vector<int> offsets(n);
  for (size_t i = 0; i < n; ++i) offsets[i] = static_cast<int>(i) * kStateDim;
  return offsets;
}

double total_cost(const SlidingWindow& w, const std::vector<KeyframeState>& states,
                  const std::vector<int>& offsets, MatXd* H, VecXd* g) {
  double cost = 0.0;
  for (const auto& f : w.factors) cost += f->accumulate(states, offsets, H, g);
  if (w.prior) cost += w.prior->accumulate(states, offsets, H, g);
  return cost;
}

}  // namespace

OptimizeReport optimize_window(SlidingWindow& w, const OptimizeOptions& opts) {
  if (w.states.empty() || (w.factors.empty() && !w.prior)) {
    throw Underconstrained("window has no states or no factors");
  }
  bool anchored = w.prior != nullptr;
  for (const auto& f : w.factors) anchored = anchored || f->anchors_pose();
  if (!anchored) {
    throw Underconstrained("no factor anchors the global pose");
  }

  const int dim = static_cast<int>(w.tangent_dim());
  const std::vector<int> offsets = identity_offsets(w.states.size());

  OptimizeReport report;
  MatXd H(dim, dim);
  VecXd g(dim);
  H.setZero();
  g.setZero();
  double cost = total_cost(w, w.states, offsets, &H, &g);
  report.initial_cost = cost;

  double lambda = opts.lambda_init;
  bool any_accept = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    ++report.iterations;
    if (g.lpNorm<Eigen::Infinity>() < opts.gradient_tol) {
      report.converged = true;
      break;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 10; ++attempt) {
      MatXd A = H;
      A.diagonal().array() += lambda;
      Eigen::LDLT<MatXd> ldlt(A);
      if (ldlt.info() != Eigen::Success) {
        lambda *= 10;
        continue;
      }
      const VecXd step = ldlt.solve(-g);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }

      std::vector<KeyframeState> cand = w.states;
      for (size_t i = 0; i < cand.size(); ++i) {
        cand[i] = retract(cand[i], step.segment<kStateDim>(i * kStateDim));
      }
      const double cand_cost = total_cost(w, cand, offsets, nullptr, nullptr);
      if (cand_cost <= cost) {
        w.states = std::move(cand);
        cost = cand_cost;
        lambda = std::max(lambda * 0.3, 1e-9);
        accepted = true;
        any_accept = true;
        if (step.norm() < opts.step_tol) report.converged = true;
        break;
      }
      lambda *= 10;
    }

    if (!accepted) {
      // No damping level decreased the cost: either we are at a minimum
      // (tiny gradient) or the linearization is unusable.
      report.converged = g.lpNorm<Eigen::Infinity>() < 1e2 * opts.gradient_tol;
      report.diverged = !report.converged && !any_accept;
      break;
    }
    if (report.converged) break;

    H.setZero();
    g.setZero();
    cost = total_cost(w, w.states, offsets, &H, &g);
  }
  report.final_cost = cost;
  return report;
}

void marginalize_states(SlidingWindow& w, int drop_count, double eig_clamp) {
  if (drop_count <= 0) return;
  if (drop_count >= static_cast<int>(w.states.size())) {
    throw DegenerateMarginalization("cannot marginalize the whole window");
  }

  // Factors to consume: everything touching a dropped state, plus the
  // existing prior (its information is re-expressed in the new prior).
  std::vector<size_t> consumed;
  std::set<int> involved;
  for (size_t fi = 0; fi < w.factors.size(); ++fi) {
    const auto& vars = w.factors[fi]->vars();
    const bool touches = std::any_of(vars.begin(), vars.end(),
                                     [&](int v) { return v < drop_count; });
    if (touches) {
      consumed.push_back(fi);
      involved.insert(vars.begin(), vars.end());
    }
  }
  if (w.prior) involved.insert(w.prior->vars().begin(), w.prior->vars().end());

  std::vector<int> local_vars(involved.begin(), involved.end());  // sorted
  std::vector<int> offsets(w.states.size(), -1);
  for (size_t i = 0; i < local_vars.size(); ++i) {
    offsets[local_vars[i]] = static_cast<int>(i) * kStateDim;
  }

  const int local_dim = static_cast<int>(local_vars.size()) * kStateDim;
  MatXd H(local_dim, local_dim);
  VecXd g(local_dim);
  H.setZero();
  g.setZero();
  for (size_t fi : consumed) w.factors[fi]->accumulate(w.states, offsets, &H, &g);
  if (w.prior) w.prior->accumulate(w.states, offsets, &H, &g);

  // Gauss-Newton convention H delta = b with b = -g.
  std::vector<int> keep_rows, drop_rows;
  std::vector<int> keep_vars;
  for (size_t i = 0; i < local_vars.size(); ++i) {
    const bool dropping = local_vars[i] < drop_count;
    for (int d = 0; d < kStateDim; ++d) {
      (dropping ? drop_rows : keep_rows).push_back(static_cast<int>(i) * kStateDim + d);
    }
    if (!dropping) keep_vars.push_back(local_vars[i]);
  }

  std::unique_ptr<MargPriorFactor> new_prior;
  if (!keep_rows.empty() && !drop_rows.empty()) {
    const MarginalSystem sys = schur_marginalize(H, -g, keep_rows, drop_rows, eig_clamp);
    std::vector<KeyframeState> lin;
    std::vector<int> prior_vars;
    for (int v : keep_vars) {
      lin.push_back(w.states[v]);
      prior_vars.push_back(v - drop_count);
    }
    new_prior = std::make_unique<MargPriorFactor>(std::move(prior_vars), sys.H, sys.b,
                                                  std::move(lin));
  } else if (drop_rows.empty() && w.prior) {
    // Nothing dropped from the prior's support; fold it through unchanged.
    const MarginalSystem sys{H, -g};
    std::vector<KeyframeState> lin;
    std::vector<int> prior_vars;
    for (int v : keep_vars) {
      lin.push_back(w.states[v]);
      prior_vars.push_back(v - drop_count);
    }
    new_prior = std::make_unique<MargPriorFactor>(std::move(prior_vars), sys.H, sys.b,
                                                  std::move(lin));
  }

  // Erase consumed factors, drop the states, shift the survivors.
  for (auto it = consumed.rbegin(); it != consumed.rend(); ++it) {
    w.factors.erase(w.factors.begin() + static_cast<long>(*it));
  }
  w.states.erase(w.states.begin(), w.states.begin() + drop_count);
  for (auto& f : w.factors) f->remap(-drop_count);
  w.prior = std::move(new_prior);
}

}  // namespace blockloc
