#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "qtrans/oracle.hpp"

using qtrans::GeneralMeasure;
using qtrans::JobSize;
using qtrans::ModelSpec;
using qtrans::ProcessKind;
using qtrans::SimConfig;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST(OracleSimulate, ReproducibleAcrossThreadCounts) {
  const ModelSpec spec{ProcessKind::mg1, 0.8, JobSize::exponential(1.0), false};
  SimConfig cfg{spec, GeneralMeasure::uniform(0, 2), 3.0, 5000, 99, 1};
  const auto a = qtrans::simulate(cfg);
  cfg.threads = 4;
  const auto b = qtrans::simulate(cfg);
  EXPECT_EQ(a, b);
  cfg.seed = 100;
  EXPECT_NE(qtrans::simulate(cfg), a);
}

TEST(OracleSimulate, NoJumpPathsDriftExactly) {
  const double lambda = 1.3, t = 0.5;
  const ModelSpec spec{ProcessKind::mg1, lambda, JobSize::uniform(1, 5), false};
  const auto q = qtrans::simulate({spec, GeneralMeasure::dirac(1), t, 200000, 3, 0});
  double hits = 0;
  for (double v : q) {
    EXPECT_TRUE(v == 0.5 || v > 1.4);
    hits += v == 0.5;
  }
  const double n = static_cast<double>(q.size());
  const double p = std::exp(-lambda * t);
  EXPECT_NEAR(hits / n, p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(OracleSimulate, SpectrallyNegativeStaysNonNegative) {
  const ModelSpec spec{ProcessKind::spectrally_negative, 2.0, JobSize::pareto(1, 1.5), false};
  const auto q = qtrans::simulate({spec, GeneralMeasure::dirac(1), 4.0, 20000, 5, 0});
  for (double v : q) EXPECT_GE(v, 0.0);
  const ModelSpec still{ProcessKind::spectrally_negative, 2.0, JobSize::deterministic(0), false};
  for (double v : qtrans::simulate({still, GeneralMeasure::dirac(1), 4.0, 100, 5, 0})) EXPECT_DOUBLE_EQ(v, 5.0);
}

TEST(OracleSimulate, AbsorbingZeroKeepsPathsAtZero) {
  const ModelSpec spec{ProcessKind::spectrally_negative, 3.0, JobSize::exponential(0.5), true};
  const auto early = qtrans::simulate({spec, GeneralMeasure::dirac(0.5), 1.0, 20000, 8, 0});
  const auto late = qtrans::simulate({spec, GeneralMeasure::dirac(0.5), 3.0, 20000, 8, 0});
  std::size_t z1 = 0, z2 = 0;
  for (std::size_t k = 0; k < early.size(); ++k) {
    z1 += early[k] == 0.0;
    z2 += late[k] == 0.0;
    // Same seed, same path prefix: once absorbed, still absorbed.
    if (early[k] == 0.0) EXPECT_EQ(late[k], 0.0);
  }
  EXPECT_GT(z1, 0u);
  EXPECT_GE(z2, z1);
}

TEST(OracleSimulate, StableAndOverloadedQueues) {
  const ModelSpec stable{ProcessKind::mg1, 0.5, JobSize::exponential(1.0), false};
  const double m1 = mean_of(qtrans::simulate({stable, GeneralMeasure::dirac(0), 50, 40000, 11, 0}));
  const double m2 = mean_of(qtrans::simulate({stable, GeneralMeasure::dirac(0), 100, 40000, 12, 0}));
  EXPECT_NEAR(m1, 1.0, 0.1);  // stationary mean rho E[B^2] / (2 E[B] (1 - rho))
  EXPECT_NEAR(m2, m1, 0.1);

  const ModelSpec heavy{ProcessKind::mg1, 0.4, JobSize::erlang(6, 2.0), false};
  const double h1 = mean_of(qtrans::simulate({heavy, GeneralMeasure::dirac(0), 20, 20000, 13, 0}));
  const double h2 = mean_of(qtrans::simulate({heavy, GeneralMeasure::dirac(0), 40, 20000, 14, 0}));
  EXPECT_GT(h2, h1 + 2.0);
}

TEST(OracleWasserstein, ExactSamplesConverge) {
  const qtrans::Grid g(0.25, 20, true);
  qtrans::LiftedDistribution m{g, 0.2, std::vector<double>(20, 0.04)};
  const auto gm = qtrans::to_general(m);
  std::vector<double> est;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    std::vector<double> s(n);
    auto rng = qtrans::detail::path_rng(21, n);
    for (double& x : s) x = qtrans::detail::sample_measure(gm, rng);
    const auto e = qtrans::empirical_wasserstein(s, m, 50);
    EXPECT_GT(e.std_error, 0.0);
    est.push_back(e.estimate);
  }
  EXPECT_GT(est[0], est[1]);
  EXPECT_GT(est[1], est[2]);
  EXPECT_GT(est[0] / est[2], 3.0);
  EXPECT_LT(est[0] / est[2], 30.0);
}

TEST(OracleWasserstein, AtomSamplesAgainstAtom) {
  qtrans::LiftedDistribution m{qtrans::Grid(0.5, 4, true), 1.0, {0, 0, 0, 0}};
  const auto e = qtrans::empirical_wasserstein(std::vector<double>(50, 0.0), m);
  EXPECT_EQ(e.estimate, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_THROW(qtrans::empirical_wasserstein({1.0}, m), qtrans::DomainError);
}
