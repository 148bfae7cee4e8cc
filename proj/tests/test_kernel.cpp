#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qtrans/kernel.hpp"

using qtrans::DiscreteDist;
using qtrans::Grid;
using qtrans::JobSize;
using qtrans::ModelSpec;
using qtrans::ProcessKind;
using qtrans::TransitionKernel;

namespace {

ModelSpec mg1(double lambda, JobSize job) { return {ProcessKind::mg1, lambda, std::move(job), false}; }
ModelSpec specneg(double lambda, JobSize job, bool absorbing = false) {
  return {ProcessKind::spectrally_negative, lambda, std::move(job), absorbing};
}

TransitionKernel build(const ModelSpec& s, double delta, int m_delta) {
  return TransitionKernel::build(s, s.grid(delta, m_delta));
}

double check_row_sum(const TransitionKernel& k, int i) {
  long double s = 0;
  for (int j = 0; j <= k.grid().m_delta; ++j) s += k.check_entry(i, j);
  return static_cast<double>(s);
}

struct RandomConfig {
  ModelSpec spec;
  double delta;
  int m_delta;
};

RandomConfig random_config(oracle::Rng& r, int max_states) {
  RandomConfig c;
  const bool sn = r.coin();
  c.spec = sn ? specneg(r.uniform(0.05, 3.0), oracle::random_job(r), r.integer(0, 3) == 0)
              : mg1(r.uniform(0.05, 3.0), oracle::random_job(r));
  c.delta = 1.0 / r.integer(2, 50);
  c.m_delta = r.integer(2, max_states);
  return c;
}

DiscreteDist random_dist(oracle::Rng& r, const Grid& g) {
  DiscreteDist d(g);
  double s = 0;
  for (int i = g.first_state(); i <= g.m_delta; ++i) s += d.p[i] = r.integer(0, 2) == 0 ? 0.0 : r.uniform(0, 1);
  if (s == 0) s = d.p[g.m_delta] = 1;
  for (double& x : d.p) x /= s;
  return d;
}

}  // namespace

TEST(KernelMg1, VanishingRateIsPureDrift) {
  const auto k = build(mg1(1e-12, JobSize::uniform(1, 5)), 0.5, 20);
  EXPECT_NEAR(k.entry(0, 0), 1.0, 1e-11);
  for (int i = 1; i <= 20; ++i) EXPECT_NEAR(k.entry(i, i - 1), 1.0, 1e-11) << i;
}

TEST(KernelMg1, EntryBelowJobSupportIsNoJumpProbability) {
  const auto k = build(mg1(0.25, JobSize::uniform(1, 5)), 0.5, 20);
  EXPECT_NEAR(k.check_entry(4, 3), std::exp(-0.125), 1e-15);
  const double riemann = oracle::riemann(
      [](double s) {
        const auto u = JobSize::uniform(1, 5);
        return u.cdf(s + 0.5) - u.cdf(s);
      },
      1.0, 1.5, 1e-7);
  EXPECT_NEAR(k.check_entry(4, 6), std::exp(-0.125) * 0.25 * riemann, 1e-12);
}

TEST(KernelMg1, SpecialRowsMatchRiemannSums) {
  const double lambda = 0.7, d = 0.25;
  const auto job = JobSize::exponential(1.3);
  const auto k = build(mg1(lambda, job), d, 24);
  const double e = std::exp(-lambda * d);
  auto win = [&](double s) { return job.cdf(s + d) - job.cdf(s); };
  for (int j : {0, 1, 2, 5, 9}) {
    const double a = (j - 1) * d, b = j * d;
    const double stay = j == 0 ? e : 0.0;
    const double r0 = oracle::riemann(win, a, b, 1e-6);
    EXPECT_NEAR(k.check_entry(0, j), stay + e * lambda * r0, 1e-10) << j;
    const double r1 = oracle::riemann([&](double s) { return (b - s) * win(s); }, a, b, 1e-6);
    EXPECT_NEAR(k.check_entry(1, j), stay + e * 2 * lambda / d * r1, 1e-10) << j;
  }
}

TEST(KernelSpecNeg, VanishingRateIsPureDrift) {
  const auto k = build(specneg(1e-12, JobSize::pareto(1, 1.5)), 0.1, 30);
  for (int i = 1; i < 30; ++i) EXPECT_NEAR(k.entry(i, i + 1), 1.0, 1e-11) << i;
  EXPECT_NEAR(k.entry(30, 30), 1.0, 1e-11);
}

TEST(KernelSpecNeg, ZeroJumpsKeepNoJumpAndOneJumpMass) {
  const double lambda = 0.8, d = 0.2;
  const auto k = build(specneg(lambda, JobSize::deterministic(0)), d, 15);
  const double e = std::exp(-lambda * d);
  for (int i = 1; i < 15; ++i) EXPECT_NEAR(check_row_sum(k, i), e * (1 + lambda * d), 1e-15) << i;
}

TEST(KernelSpecNeg, FirstColumnMatchesRiemannSum) {
  const double lambda = 1.0 / 3, d = 0.01;
  const auto job = JobSize::pareto(1, 1.5);
  const auto k = build(specneg(lambda, job), d, 5500);
  const double surv = oracle::riemann([&](double s) { return job.survival(s); }, 4.99, 5.0, 1e-7);
  EXPECT_NEAR(k.check_entry(500, 1), std::exp(-lambda * d) * lambda * surv, 1e-14);
}

TEST(KernelSpecNeg, AbsorbingZeroIsSink) {
  const auto k = build(specneg(0.9, JobSize::exponential(0.8), true), 0.1, 40);
  EXPECT_EQ(k.entry(0, 0), 1.0);
  for (int j = 1; j <= 40; ++j) EXPECT_EQ(k.entry(0, j), 0.0);
  for (int i = 1; i <= 40; ++i) {
    EXPECT_GE(k.check_entry(i, 0), 0.0);
    long double s = 0;
    for (int j = 0; j <= 40; ++j) s += k.entry(i, j);
    EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-12);
  }
  // Mass reaching 0 in one jump from state 1 is at most the one-jump mass.
  const auto plain = build(specneg(0.9, JobSize::exponential(0.8)), 0.1, 40);
  for (int i = 1; i <= 40; ++i)
    EXPECT_NEAR(k.check_entry(i, 0) + k.check_entry(i, 1), plain.check_entry(i, 1), 1e-15);
}

TEST(KernelValidation, GridAndKindMismatch) {
  const auto s = mg1(1, JobSize::uniform(0, 1));
  EXPECT_THROW(TransitionKernel::build(s, Grid(0.1, 10, false)), qtrans::DomainError);
  EXPECT_THROW(TransitionKernel::build(specneg(1, JobSize::uniform(0, 1)), Grid(0.1, 10, true)),
               qtrans::DomainError);
  const auto k = build(s, 0.1, 10);
  EXPECT_THROW(k.apply(DiscreteDist(Grid(0.1, 11, true))), qtrans::DomainError);
  EXPECT_THROW(build(mg1(0, JobSize::uniform(0, 1)), 0.1, 10), qtrans::DomainError);
}

TEST(KernelApply, StationaryPointOfVanishingRate) {
  const auto k = build(mg1(1e-12, JobSize::uniform(1, 5)), 0.1, 30);
  const auto p = DiscreteDist::one_hot(k.grid(), 0);
  const auto q = k.apply(p);
  EXPECT_NEAR(q.p[0], 1.0, 1e-12);
  for (int j = 1; j <= 30; ++j) EXPECT_NEAR(q.p[j], 0.0, 1e-12);
}

TEST(KernelApply, OneHotReproducesDenseRow) {
  oracle::Rng r(31);
  for (int c = 0; c < 20; ++c) {
    const auto cfg = random_config(r, 120);
    auto k = build(cfg.spec, cfg.delta, cfg.m_delta);
    const auto dense = k.dense();
    const std::size_t n = k.grid().size();
    for (std::size_t limit : {std::size_t{0}, std::size_t{1} << 20}) {
      k.set_direct_band_limit(limit);
      const int i = r.integer(k.grid().first_state(), cfg.m_delta);
      const auto q = k.apply(DiscreteDist::one_hot(k.grid(), i));
      for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(q.p[j], dense[i * n + j], 1e-12);
    }
  }
}

TEST(KernelApply, TenStepsMatchDenseMatrixPower) {
  const auto k = build(mg1(0.25, JobSize::uniform(1, 5)), 0.1, 500);
  const auto dense = k.dense();
  auto p = DiscreteDist::one_hot(k.grid(), 10);
  std::vector<double> x = p.p;
  for (int s = 0; s < 10; ++s) {
    p = k.apply(p);
    x = oracle::vec_mat(x, dense);
  }
  for (std::size_t j = 0; j < x.size(); ++j) EXPECT_NEAR(p.p[j], x[j], 1e-12) << j;
}

TEST(KernelProperties, ApplyMatchesDenseOnBothPaths) {
  oracle::Rng r(32);
  for (int c = 0; c < 60; ++c) {
    const auto cfg = random_config(r, 200);
    auto k = build(cfg.spec, cfg.delta, cfg.m_delta);
    const auto dense = k.dense();
    const auto p = random_dist(r, k.grid());
    const auto ref = oracle::vec_mat(p.p, dense);
    for (std::size_t limit : {std::size_t{0}, std::size_t{1} << 20}) {
      k.set_direct_band_limit(limit);
      double rounding = 0;
      const auto q = k.apply(p, &rounding);
      double l1 = 0;
      for (std::size_t j = 0; j < ref.size(); ++j) {
        EXPECT_NEAR(q.p[j], ref[j], 1e-12);
        l1 += std::abs(q.p[j] - ref[j]);
      }
      EXPECT_LE(l1, rounding + 1e-13);
    }
  }
}

TEST(KernelProperties, RowsAreStochastic) {
  oracle::Rng r(33);
  for (int c = 0; c < 200; ++c) {
    const auto cfg = random_config(r, 150);
    const auto k = build(cfg.spec, cfg.delta, cfg.m_delta);
    for (int i = k.grid().first_state(); i <= cfg.m_delta; ++i) {
      long double s = 0;
      for (int j = 0; j <= cfg.m_delta; ++j) {
        const double v = k.check_entry(i, j);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        s += k.entry(i, j);
      }
      EXPECT_LE(check_row_sum(k, i), 1.0 + 1e-14);
      EXPECT_GE(k.diag()[i], 0.0);
      EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-12);
    }
  }
}

TEST(KernelProperties, OnlyMultiJumpMassIsCutInsideTruncation) {
  oracle::Rng r(34);
  for (int c = 0; c < 100; ++c) {
    const JobSize job = oracle::random_job(r, false);
    if (!std::isfinite(job.support_upper())) continue;
    const double lambda = r.uniform(0.05, 3.0);
    const double d = 1.0 / r.integer(2, 40);
    const int m = static_cast<int>(std::ceil((job.support_upper() + 1) / d)) + r.integer(2, 40);
    const auto k = build(mg1(lambda, job), d, m);
    const double e = std::exp(-lambda * d);
    for (int i = 0; i <= m; ++i)
      if (i * d + job.support_upper() + d <= m * d) EXPECT_NEAR(k.diag()[i], 1 - e * (1 + lambda * d), 1e-12) << i;
  }
}

TEST(KernelProperties, RowSumsGrowWithTruncation) {
  oracle::Rng r(35);
  for (int c = 0; c < 60; ++c) {
    const auto cfg = random_config(r, 80);
    const auto a = build(cfg.spec, cfg.delta, cfg.m_delta);
    const auto b = build(cfg.spec, cfg.delta, cfg.m_delta + r.integer(1, 40));
    for (int i = a.grid().first_state(); i < cfg.m_delta; ++i)
      EXPECT_GE(check_row_sum(b, i), check_row_sum(a, i) - 1e-15) << i;
  }
}

TEST(KernelCustom, MatchesClosedFormWithinReportedError) {
  const auto u = JobSize::uniform(0.5, 1.5);
  const auto c = JobSize::custom([](double x) { return std::clamp(x - 0.5, 0.0, 1.0); }, 1.5);
  for (auto kind : {ProcessKind::mg1, ProcessKind::spectrally_negative}) {
    const auto ku = build({kind, 0.6, u, false}, 0.1, 30);
    const auto kc = build({kind, 0.6, c, false}, 0.1, 30);
    EXPECT_TRUE(kc.has_quadrature_error());
    for (int i = ku.grid().first_state(); i <= 30; ++i) {
      double diff = 0;
      for (int j = 0; j <= 30; ++j) diff += std::abs(ku.check_entry(i, j) - kc.check_entry(i, j));
      EXPECT_LE(diff, kc.row_error()[i] + 1e-14) << i;
    }
  }
}

TEST(KernelSpeed, NormalizationRescalesJobs) {
  const auto s = qtrans::normalize_speed(mg1(0.5, JobSize::uniform(1, 5)), 2.0);
  EXPECT_DOUBLE_EQ(s.job.cdf(1.5), 0.5);
  EXPECT_DOUBLE_EQ(*s.job.mean(), 1.5);
  const auto e = qtrans::normalize_speed(mg1(0.5, JobSize::exponential(1)), 4.0);
  EXPECT_DOUBLE_EQ(*e.job.mean(), 0.25);
  EXPECT_THROW(qtrans::normalize_speed(s, 0.0), qtrans::DomainError);
}
