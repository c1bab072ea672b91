#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "morel/dynamics_model.hpp"
#include "morel/env_zoo.hpp"
#include "morel/mlp.hpp"
#include "morel/tabular.hpp"
#include "test_support.hpp"

using namespace morel;

namespace {

// s' = 0.9 s + 0.1 a + N(0, noise^2), s and a uniform on [-1, 1]
OfflineDataset linear_dataset(std::size_t n, double noise, std::uint64_t seed) {
  Rng rng(seed);
  OfflineDataset d;
  d.meta.state_dim = 1;
  d.meta.action_dim = 1;
  d.meta.r_max = 1.0;
  d.meta.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    Transition tr;
    tr.episode = static_cast<int>(i);
    tr.s = Vec::Constant(1, rng.uniform(-1.0, 1.0));
    tr.a = Vec::Constant(1, rng.uniform(-1.0, 1.0));
    tr.s_next = 0.9 * tr.s + 0.1 * tr.a + Vec::Constant(1, noise * rng.normal());
    d.transitions.push_back(tr);
  }
  return d;
}

}  // namespace

TEST_CASE("adam_step") {
  Vec p = Vec::Constant(3, 0.7);
  AdamState st;
  adam_step(p, Vec::Zero(3), st, {0.1});
  CHECK(p == Vec::Constant(3, 0.7));

  Vec x = Vec::Zero(1);
  AdamState sx;
  adam_step(x, Vec::Ones(1), sx, {0.1});
  CHECK(x[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));

  // bias correction keeps the step size at lr for a constant gradient
  for (int i = 0; i < 9; ++i) adam_step(x, Vec::Ones(1), sx, {0.1});
  CHECK(x[0] == doctest::Approx(-1.0).epsilon(1e-6));

  Vec a = Vec::LinSpaced(4, -1, 1), b = a;
  AdamState sa, sb;
  Rng ra(3), rb(3);
  for (int i = 0; i < 20; ++i) {
    Vec ga(4), gb(4);
    for (int j = 0; j < 4; ++j) {
      ga[j] = ra.normal();
      gb[j] = rb.normal();
    }
    adam_step(a, ga, sa, {});
    adam_step(b, gb, sb, {});
    CHECK(a == b);
  }
  CHECK_THROWS_AS(adam_step(a, Vec::Zero(2), sa, {}), std::invalid_argument);
}

TEST_CASE("mlp forward matches a hand-written evaluation") {
  Mlp net({2, 3, 1}, Activation::tanh);
  Rng rng(8);
  net.init(rng);
  const Vec& p = net.params();
  // layout: W0 (3x2 column major), b0 (3), W1 (1x3), b1 (1)
  Vec x(2);
  x << 0.3, -0.8;
  double out = p[6 + 3 + 3];
  for (int j = 0; j < 3; ++j) {
    const double z = p[0 * 3 + j] * x[0] + p[1 * 3 + j] * x[1] + p[6 + j];
    out += p[9 + j] * std::tanh(z);
  }
  CHECK(net.forward(Mat(x))(0, 0) == doctest::Approx(out).epsilon(1e-14));
  CHECK(net.n_params() == 3 * 2 + 3 + 3 + 1);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(p[i]) <= 1.0 / std::sqrt(2.0));
}

TEST_CASE("mse gradient matches central finite differences") {
  Rng rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int in = 1 + static_cast<int>(rng.below(3));
    const int out = 1 + static_cast<int>(rng.below(2));
    Mlp net({in, 8, 8, out}, trial % 2 ? Activation::tanh : Activation::relu);
    Rng init = rng.split(static_cast<std::uint64_t>(trial));
    net.init(init);
    Mat x(in, 5), y(out, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    Vec grad;
    mse_loss_and_gradient(net, x, y, grad);
    const Vec fd = testing::central_difference(net.params(), 1e-5, [&](const Vec& theta) {
      Mlp probe = net;
      probe.params() = theta;
      Vec unused;
      return mse_loss_and_gradient(probe, x, y, unused);
    });
    worst = std::max(worst, testing::max_relative_error(grad, fd));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("per-sample gradients sum to the batch gradient") {
  Mlp net({3, 5, 2}, Activation::tanh);
  Rng rng(2);
  net.init(rng);
  Mat x = Mat::Random(3, 7);
  Mat dy = Mat::Random(2, 7);
  Mlp::Cache cache;
  net.forward(x, cache);
  Vec grad;
  net.backward(cache, dy, grad);
  const Mat per = net.per_sample_gradients(cache, dy);
  CHECK((per.rowwise().sum() - grad).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("residual parameterization and sampling") {
  NormStats st;
  st.mu_s = Vec::Constant(2, 0.5);
  st.sigma_s = Vec::Constant(2, 2.0);
  st.mu_a = Vec::Zero(1);
  st.sigma_a = Vec::Ones(1);
  st.sigma_delta = Vec::Constant(2, 0.3);
  GaussianMlpModel zero(Mlp({3, 4, 4, 2}, Activation::relu), st, Vec::Zero(2));
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    Vec s(2), a(1);
    s << rng.normal(), rng.normal();
    a << rng.normal();
    CHECK(zero.predict(s, a) == s);
    CHECK(zero.sample(s, a, rng) == s);
  }
  Vec bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(zero.predict(bad, Vec::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(zero.predict(Vec::Zero(3), Vec::Zero(1)), std::invalid_argument);

  GaussianMlpModel noisy(Mlp({3, 4, 2}, Activation::relu), st, Vec::Constant(2, 0.1));
  Vec s = Vec::Zero(2);
  double m = 0.0, v = 0.0;
  for (int i = 0; i < 4000; ++i) {
    const double x = noisy.sample(s, Vec::Zero(1), rng)[0];
    m += x;
    v += x * x;
  }
  m /= 4000;
  CHECK(std::sqrt(v / 4000 - m * m) == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("fit_ensemble on realizable linear dynamics") {
  const OfflineDataset d = linear_dataset(5000, 0.001, 1);
  EnsembleConfig cfg;
  cfg.width = 32;
  cfg.epochs = 20;
  cfg.step_size = 1e-3;
  cfg.K = 2;
  cfg.seed = 5;
  FitReport report;
  const DynamicsEnsemble ens = fit_ensemble(d, cfg, &report);
  REQUIRE(ens.size() == 2);

  // least-squares oracle on the same held-out split: noise floor in
  // normalized units
  const NormStats st = compute_stats(d);
  Mat design(4500, 3);
  Vec target(4500);
  for (int i = 0; i < 4500; ++i) {
    design.row(i) << d.transitions[i].s[0], d.transitions[i].a[0], 1.0;
    target[i] = d.transitions[i].s_next[0] - d.transitions[i].s[0];
  }
  const Vec coef = design.colPivHouseholderQr().solve(target);
  double floor = 0.0;
  for (int i = 4500; i < 5000; ++i) {
    const Transition& tr = d.transitions[i];
    const double pred = coef[0] * tr.s[0] + coef[1] * tr.a[0] + coef[2];
    const double err = (tr.s_next[0] - tr.s[0] - pred) / st.sigma_delta[0];
    floor += err * err;
  }
  floor /= 500.0;

  for (const MemberLog& log : report.members) {
    CHECK(log.final_holdout_mse < 0.01);
    CHECK(log.final_holdout_mse <= log.initial_holdout_mse);
    CHECK(log.final_holdout_mse >= floor * 0.5);
  }
  CHECK(floor < 1e-3);
  CHECK((ens.member(0).net().params() - ens.member(1).net().params()).norm() > 0.0);

  const DynamicsEnsemble again = fit_ensemble(d, cfg);
  for (int k = 0; k < 2; ++k) CHECK(again.member(k).net().params() == ens.member(k).net().params());

  cfg.K = 1;
  CHECK_THROWS_AS(fit_ensemble(d, cfg), std::invalid_argument);
}

TEST_CASE("fit_ensemble aborts on non-finite loss") {
  OfflineDataset d = linear_dataset(600, 0.01, 2);
  d.transitions[17].s_next[0] = std::nan("");
  EnsembleConfig cfg;
  cfg.width = 8;
  cfg.epochs = 2;
  cfg.K = 2;
  try {
    fit_ensemble(d, cfg);
    FAIL("expected an abort");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("member 0 at epoch 0, batch") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  const OfflineDataset d = linear_dataset(600, 0.01, 3);
  EnsembleConfig cfg;
  cfg.width = 16;
  cfg.epochs = 2;
  cfg.K = 2;
  const DynamicsEnsemble ens = fit_ensemble(d, cfg);
  std::stringstream buf;
  save_checkpoint(ens.member(1), buf, 42);
  const GaussianMlpModel back = load_checkpoint(buf);
  CHECK(back.net().params() == ens.member(1).net().params());
  CHECK(back.stats() == ens.member(1).stats());
  CHECK(back.noise_std() == ens.member(1).noise_std());
  Vec s = Vec::Constant(1, 0.3), a = Vec::Constant(1, -0.2);
  CHECK(back.predict(s, a) == ens.member(1).predict(s, a));

  std::stringstream bad("dynamics-checkpoint 2\n");
  CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);
}

TEST_CASE("tabular count model") {
  TabularCountModel m(2, 1);
  for (int i = 0; i < 3; ++i) m.add(0, 0, 1, 1.0);
  m.add(0, 0, 0, 0.0);
  CHECK(m.p_hat(0, 0)[1] == 0.75);
  CHECK(m.p_hat(0, 0)[0] == 0.25);
  CHECK(m.r_hat(0, 0) == 0.75);
  CHECK_FALSE(m.visited(1, 0));
  CHECK_THROWS_AS(m.p_hat(1, 0), std::logic_error);
  CHECK_THROWS_AS(m.add(0, 1, 0, 0.0), std::invalid_argument);

  // exact count ratios from a dataset
  const TabularMdp mdp = random_tabular(4, 2, 0.6, 10);
  const TabularEnv env(mdp);
  const TabularPolicy pi = TabularPolicy::uniform(4, 2);
  CollectOptions opts;
  opts.episode_length = 10;
  const OfflineDataset d = collect(env, Strategy::parse("Pure"), pi, pi, 300, 1, opts);
  const TabularCountModel fit = fit_tabular(d, 4, 2);
  long total = 0;
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 2; ++a) {
      long n = 0;
      std::vector<long> c(4, 0);
      for (const Transition& tr : d.transitions)
        if (tr.s[0] == s && tr.a[0] == a) {
          ++n;
          ++c[static_cast<int>(tr.s_next[0])];
        }
      CHECK(fit.visits(s, a) == n);
      total += n;
      if (n == 0) continue;
      const auto row = fit.p_hat(s, a);
      for (int x = 0; x < 4; ++x) CHECK(row[x] == static_cast<double>(c[x]) / static_cast<double>(n));
    }
  CHECK(total == 300);
}

TEST_CASE("tabular MLE error shrinks like n^-1/2") {
  const TabularMdp mdp = random_tabular(3, 2, 1.0, 4);
  const TabularEnv env(mdp);
  const TabularPolicy pi = TabularPolicy::uniform(3, 2);
  CollectOptions opts;
  opts.episode_length = 20;
  std::vector<double> log_n, log_err;
  for (std::size_t n : {400u, 1600u, 6400u, 25600u}) {
    double err = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const TabularCountModel m = fit_tabular(collect(env, Strategy::parse("Pure"), pi, pi, n, seed, opts), 3, 2);
      for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) {
          if (!m.visited(s, a)) continue;
          const auto row = m.p_hat(s, a);
          err += tv_distance(row, mdp.transition(s, a));
          ++count;
        }
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    log_err.push_back(std::log(err / count));
  }
  double mx = 0, my = 0;
  for (int i = 0; i < 4; ++i) {
    mx += log_n[i] / 4;
    my += log_err[i] / 4;
  }
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (log_n[i] - mx) * (log_err[i] - my);
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.4));  // within +-0.2
  CHECK(std::abs(slope + 0.5) <= 0.2);
}
