#include "morel/usad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace morel {

UsadOracle::UsadOracle(const TabularMdp& truth, const TabularCountModel& model, double alpha)
    : alpha_(alpha), unknown_(truth.n_states(), truth.n_actions()) {
  if (!(alpha > 0.0)) throw std::invalid_argument("UsadOracle: alpha must be positive");
  for (int s = 0; s < truth.n_states(); ++s) {
    for (int a = 0; a < truth.n_actions(); ++a) {
      if (!model.visited(s, a)) {
        unknown_.insert(s, a);
        continue;
      }
      const double tv = tv_distance(model.p_hat(s, a), truth.transition(s, a));
      if (tv <= alpha) {
        max_known_tv_ = std::max(max_known_tv_, tv);
      } else {
        unknown_.insert(s, a);
      }
    }
  }
}

UsadCount::UsadCount(const TabularCountModel& model, long n_min)
    : n_min_(n_min), unknown_(model.n_states(), model.n_actions()) {
  if (n_min < 1) throw std::invalid_argument("UsadCount: n_min must be >= 1");
  for (int s = 0; s < model.n_states(); ++s) {
    for (int a = 0; a < model.n_actions(); ++a) {
      if (model.visits(s, a) < n_min) unknown_.insert(s, a);
    }
  }
}

Vec max_pairwise_distance(const std::vector<Mat>& predictions) {
  const Eigen::Index n = predictions.front().cols();
  Vec out = Vec::Zero(n);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t j = i + 1; j < predictions.size(); ++j) {
      out = out.cwiseMax((predictions[i] - predictions[j]).colwise().norm().transpose());
    }
  }
  return out;
}

Vec disc_batch(const DynamicsEnsemble& ensemble, const Mat& states, const Mat& actions) {
  std::vector<Mat> preds;
  preds.reserve(ensemble.size());
  for (const GaussianMlpModel& m : ensemble.members()) preds.push_back(m.predict_batch(states, actions));
  return max_pairwise_distance(preds);
}

double disc(const DynamicsEnsemble& ensemble, const Vec& s, const Vec& a) {
  return disc_batch(ensemble, Mat(s), Mat(a))[0];
}

Calibration calibrate(const std::vector<double>& discs, double beta) {
  if (discs.empty()) throw std::invalid_argument("calibrate: no discrepancies");
  if (!(beta >= 0.0)) throw std::invalid_argument("calibrate: beta must be >= 0");
  Calibration c;
  c.beta = beta;
  const double n = static_cast<double>(discs.size());
  for (double d : discs) c.mu_d += d;
  c.mu_d /= n;
  double ss = 0.0;
  for (double d : discs) ss += (d - c.mu_d) * (d - c.mu_d);
  c.sigma_d = std::sqrt(ss / n);
  c.m_d = *std::max_element(discs.begin(), discs.end());
  if (c.sigma_d == 0.0) {
    c.threshold = c.mu_d;
    c.beta_max = 0.0;
    c.warnings.push_back("degenerate discrepancies (sigma_d = 0); threshold = mu_d");
    return c;
  }
  c.beta_max = (c.m_d - c.mu_d) / c.sigma_d;
  c.threshold = c.mu_d + beta * c.sigma_d;
  if (beta > c.beta_max) {
    std::ostringstream msg;
    msg << "beta " << beta << " exceeds beta_max " << c.beta_max
        << "; every dataset pair is known";
    c.warnings.push_back(msg.str());
  }
  return c;
}

UsadEnsemble::UsadEnsemble(const DynamicsEnsemble& ensemble, Calibration calibration)
    : ensemble_(&ensemble), calibration_(std::move(calibration)) {}

UsadEnsemble UsadEnsemble::disabled(const DynamicsEnsemble& ensemble) {
  Calibration c;
  c.threshold = std::numeric_limits<double>::infinity();
  UsadEnsemble u(ensemble, c);
  u.enabled_ = false;
  return u;
}

bool UsadEnsemble::is_unknown(const Vec& s, const Vec& a) const {
  return is_unknown_disc(disc(*ensemble_, s, a));
}

std::vector<double> dataset_discs(const DynamicsEnsemble& ensemble, const OfflineDataset& dataset) {
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Mat s(ensemble.state_dim(), n), a(ensemble.action_dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.col(i) = dataset.transitions[static_cast<std::size_t>(i)].s;
    a.col(i) = dataset.transitions[static_cast<std::size_t>(i)].a;
  }
  const Vec d = disc_batch(ensemble, s, a);
  return {d.data(), d.data() + d.size()};
}

UsadEnsemble calibrate_threshold(const DynamicsEnsemble& ensemble, const OfflineDataset& dataset,
                                 double beta) {
  if (dataset.transitions.empty()) throw std::invalid_argument("calibrate_threshold: empty dataset");
  return UsadEnsemble(ensemble, calibrate(dataset_discs(ensemble, dataset), beta));
}

}  // namespace morel
