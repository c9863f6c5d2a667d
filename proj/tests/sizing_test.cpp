// Copyright 2026 The amskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amskit/sizing.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>
#include <random>

#include "support/oracles.hpp"

using namespace amskit;
using sizing::Direction;
using sizing::FoMConfig;
using sizing::FoMTerm;
using sizing::ParameterSpace;

namespace {

MeasurementSet ms(std::map<std::string, double> v) {
  MeasurementSet m;
  m.values = std::move(v);
  return m;
}

FoMTerm maximize(const std::string& metric, std::optional<double> bound, double lo, double hi, bool log = false) {
  FoMTerm t;
  t.metric = metric;
  t.bound = bound;
  t.direction = Direction::Maximize;
  t.log_scale = log;
  t.norm = sizing::Norm{lo, hi};
  return t;
}

ParameterSpace unit_space(std::size_t d) {
  ParameterSpace s;
  for (std::size_t i = 0; i < d; ++i) s.params.push_back({"p" + std::to_string(i) + ".x", 0.0, 1.0});
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter space

TEST(Space, NoTiesIsIdentity) {
  auto s = unit_space(3);
  auto a = s.expand_tied({0.1, 0.2, 0.3});
  EXPECT_EQ(a, (Assignment{{"p0.x", 0.1}, {"p1.x", 0.2}, {"p2.x", 0.3}}));
  EXPECT_EQ(s.dim(), 3u);
}

TEST(Space, EqualAndRatioTies) {
  ParameterSpace s;
  s.params = {{"M1.W", 1e-7, 3e-6, sizing::Scale::Log},
              {"M2.W", 1e-7, 3e-6, sizing::Scale::Log},
              {"M3.W", 1e-7, 3e-6, sizing::Scale::Log},
              {"M4.W", 1e-7, 3e-6, sizing::Scale::Log}};
  s.ties = {{"M1.W", {"M2.W"}, kg::TieMode::Equal, 1.0}, {"M3.W", {"M4.W"}, kg::TieMode::Ratio, 2.0}};
  EXPECT_EQ(s.dim(), 2u);
  auto a = s.expand_tied({1e-6, 1e-6});
  EXPECT_EQ(a.at("M2.W"), a.at("M1.W"));
  EXPECT_DOUBLE_EQ(a.at("M4.W"), 2e-6);
  EXPECT_THROW(s.expand_tied({1e-6, 2e-6}), sizing::SizingError);
  EXPECT_THROW(s.expand_tied({5e-6, 1e-6}), sizing::SizingError);
}

TEST(Space, FollowerInTwoTiesRejected) {
  auto s = unit_space(3);
  s.ties = {{"p0.x", {"p2.x"}, kg::TieMode::Equal, 1}, {"p1.x", {"p2.x"}, kg::TieMode::Equal, 1}};
  EXPECT_THROW(s.validate(), sizing::SizingError);
  s.ties = {{"p0.x", {"p1.x"}, kg::TieMode::Equal, 1}, {"p1.x", {"p2.x"}, kg::TieMode::Equal, 1}};
  EXPECT_THROW(s.validate(), sizing::SizingError);
  auto bad = unit_space(1);
  bad.params[0].lower = 1.0;
  EXPECT_THROW(bad.validate(), sizing::SizingError);
}

TEST(Space, EncodeDecodeRoundTrip) {
  ParameterSpace s;
  s.params = {{"M1.W", 1e-7, 3e-6, sizing::Scale::Log}, {"M1.nf", 1, 8, sizing::Scale::Linear, true}};
  Eigen::VectorXd u(2);
  u << 0.37, 0.61;
  auto r = s.decode(u);
  EXPECT_NEAR(r[0], std::exp(std::log(1e-7) + 0.37 * (std::log(3e-6) - std::log(1e-7))), 1e-18);
  EXPECT_EQ(r[1], std::round(1 + 0.61 * 7));
  auto back = s.encode(r);
  EXPECT_NEAR(back[0], 0.37, 1e-12);
  EXPECT_EQ(s.decode(back), r);
}

TEST(Space, TiedPropertyBitwiseEqual) {
  std::mt19937_64 rng(3);
  ParameterSpace s;
  for (int i = 0; i < 8; ++i) s.params.push_back({"M" + std::to_string(i) + ".L", 3e-8, 1e-6, sizing::Scale::Log});
  s.ties = {{"M0.L", {"M1.L", "M2.L"}, kg::TieMode::Equal, 1}, {"M4.L", {"M5.L"}, kg::TieMode::Equal, 1}};
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(s.dim()));
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = sizing::uniform01(rng);
    auto a = s.expand_tied(s.decode(u));
    EXPECT_EQ(a.size(), 8u);
    EXPECT_EQ(std::memcmp(&a.at("M0.L"), &a.at("M1.L"), sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&a.at("M0.L"), &a.at("M2.L"), sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&a.at("M4.L"), &a.at("M5.L"), sizeof(double)), 0);
  }
}

TEST(Space, FromTieGroups) {
  std::vector<std::string> paths = {"M1.W", "M1.L", "M2.W", "M2.L", "M3.W", "M3.L", "C1.C"};
  std::vector<kg::TieGroup> groups = {{{"M1", "M2", "M3"}, {"W", "L"}, kg::TieMode::Equal, 1.0}};
  auto tied = sizing::space_from_paths(paths, groups, true);
  EXPECT_EQ(tied.dim(), 3u);
  EXPECT_EQ(tied.free_paths(), (std::vector<std::string>{"M1.W", "M1.L", "C1.C"}));
  auto untied = sizing::space_from_paths(paths, groups, false);
  EXPECT_EQ(untied.dim(), 7u);
  EXPECT_EQ(tied.param("C1.C").lower, 10e-15);
  EXPECT_EQ(tied.param("M1.L").lower, 30e-9);
  EXPECT_EQ(tied.param("M1.W").upper, 3e-6);
  auto back = sizing::space_from_json(sizing::to_json(tied));
  EXPECT_EQ(sizing::to_json(back), sizing::to_json(tied));
}

// ---------------------------------------------------------------------------
// FoM

TEST(FoM, SingleMaximizeAtBoundIsOne) {
  FoMConfig c;
  c.terms = {maximize("gain", 80.0, 0.0, 80.0)};
  EXPECT_DOUBLE_EQ(sizing::compute_fom(ms({{"gain", 80.0}}), c), 1.0);
}

TEST(FoM, BoundSaturates) {
  FoMConfig c;
  c.terms = {maximize("gain", 80.0, 40.0, 90.0)};
  double at = sizing::compute_fom(ms({{"gain", 80.0}}), c);
  for (double g : {80.0, 80.5, 85.0, 1e6}) EXPECT_EQ(sizing::compute_fom(ms({{"gain", g}}), c), at);
  EXPECT_LT(sizing::compute_fom(ms({{"gain", 79.0}}), c), at);
}

TEST(FoM, PhaseMarginAtTargetHasNoPenalty) {
  FoMConfig c;
  FoMTerm pm;
  pm.metric = "phase_margin";
  pm.direction = Direction::Target;
  pm.target = 60.0;
  pm.norm = sizing::Norm{30.0, 90.0};
  c.terms = {pm};
  EXPECT_EQ(sizing::compute_fom(ms({{"phase_margin", 60.0}}), c), 0.0);
  EXPECT_DOUBLE_EQ(sizing::compute_fom(ms({{"phase_margin", 75.0}}), c), -0.25);
  EXPECT_DOUBLE_EQ(sizing::compute_fom(ms({{"phase_margin", 45.0}}), c), -0.25);
}

TEST(FoM, ComparatorHandCase) {
  // ov term: lg(1e-4) = -4, clamp at -4: -(-4 - (-3)) / (-3 - (-5)) = 1/2
  // pd term: lg(1e-9) = -9, clamp at -9: -(-9 - (-8)) / (-8 - (-11)) = 1/3
  // p term:  same shape as ov = 1/2
  FoMConfig c;
  auto term = [](const std::string& m, double bound, double lo, double hi) {
    FoMTerm t;
    t.metric = m;
    t.direction = Direction::Minimize;
    t.bound = bound;
    t.log_scale = true;
    t.norm = sizing::Norm{std::log10(lo), std::log10(hi)};
    return t;
  };
  c.terms = {term("offset_voltage", 1e-4, 1e-5, 1e-3), term("propagation_delay", 1e-9, 1e-11, 1e-8),
             term("power", 1e-4, 1e-5, 1e-3)};
  double got = sizing::compute_fom(ms({{"offset_voltage", 1e-4}, {"propagation_delay", 1e-9}, {"power", 1e-4}}), c);
  EXPECT_NEAR(got, 0.5 + 1.0 / 3.0 + 0.5, 1e-12);
}

TEST(FoM, MissingOrBadMetric) {
  FoMConfig c;
  c.terms = {maximize("gbw", 1e7, 6, 8, true)};
  EXPECT_THROW(sizing::compute_fom(ms({}), c), sizing::FoMError);
  EXPECT_THROW(sizing::compute_fom(ms({{"gbw", -1.0}}), c), sizing::FoMError);
  EXPECT_THROW(sizing::compute_fom(ms({{"gbw", std::nan("")}}), c), sizing::FoMError);
  EXPECT_THROW(sizing::compute_fom(MeasurementSet::failed("timeout"), c), sizing::FoMError);
}

TEST(Norms, MinMaxOfSamples) {
  FoMConfig c;
  c.terms = {maximize("gain", 80.0, 0, 1), maximize("gbw", 1e7, 0, 1, true)};
  c.terms[0].norm.reset();
  c.terms[1].norm.reset();
  auto out = sizing::estimate_norms({ms({{"gain", 40.0}, {"gbw", 1e6}}), ms({{"gain", 80.0}, {"gbw", 1e8}})}, c);
  EXPECT_EQ(out.terms[0].norm->lo, 40.0);
  EXPECT_EQ(out.terms[0].norm->hi, 80.0);
  EXPECT_DOUBLE_EQ(out.terms[1].norm->lo, 6.0);
  EXPECT_DOUBLE_EQ(out.terms[1].norm->hi, 8.0);
}

TEST(Norms, DegenerateMetricIsWidened) {
  FoMConfig c;
  FoMTerm t;
  t.metric = "gain";
  c.terms = {t};
  auto out = sizing::estimate_norms({ms({{"gain", 50.0}}), ms({{"gain", 50.0}})}, c);
  EXPECT_LT(out.terms[0].norm->lo, 50.0);
  EXPECT_GT(out.terms[0].norm->hi, 50.0);
  EXPECT_THROW(sizing::estimate_norms({ms({{"gain", 50.0}})}, c), sizing::FoMError);
}

TEST(FoM, JsonRoundTrip) {
  auto j = nlohmann::json::parse(R"({
    "terms": [
      {"metric": "dm_gain", "bound": 80},
      {"metric": "gbw", "bound": 1e7, "log": true, "norm": [6, 8]},
      {"metric": "phase_margin", "direction": "target", "target": 60, "weight": 2}
    ],
    "constraints": [{"metric": "dm_gain", "op": ">", "value": 80}, {"metric": "power", "op": "≤", "value": 1e-4}]
  })");
  auto c = sizing::fom_from_json(j);
  ASSERT_EQ(c.terms.size(), 3u);
  EXPECT_EQ(c.terms[2].direction, Direction::Target);
  EXPECT_EQ(c.terms[2].weight, 2.0);
  EXPECT_EQ(c.constraints[1].op, "<=");
  EXPECT_EQ(sizing::to_json(sizing::fom_from_json(sizing::to_json(c))), sizing::to_json(c));
  EXPECT_EQ(sizing::violations(ms({{"dm_gain", 81}, {"power", 1e-4}}), c).size(), 0u);
  EXPECT_EQ(sizing::violations(ms({{"dm_gain", 80}, {"power", 2e-4}}), c).size(), 2u);
}

// ---------------------------------------------------------------------------
// Gaussian process

TEST(GP, SinglePointInterpolates) {
  Eigen::MatrixXd X(1, 2);
  X << 0.3, 0.4;
  Eigen::VectorXd y(1);
  y << 2.5;
  auto m = gp::Model::fit(X, y, gp::Hyper::isotropic(2, 0.5, 1.0, 0.0));
  auto p = m.predict(X.row(0).transpose());
  EXPECT_NEAR(p.mean, 2.5, 1e-12);
  EXPECT_NEAR(p.variance, 0.0, 1e-12);
}

TEST(GP, TwoPointHandSolve) {
  // x = {0, 1}, y = {1, 2}, unit SE kernel, noise 0, predict at 0.5:
  //   r = exp(-1/2), k* = (exp(-1/8), exp(-1/8))
  //   mean = 3 exp(-1/8) / (1 + r)
  //   var  = 1 - 2 exp(-1/4) / (1 + r)
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  auto m = gp::Model::fit(X, y, gp::Hyper::isotropic(1, 1.0, 1.0, 0.0), false);
  Eigen::VectorXd x(1);
  x << 0.5;
  auto p = m.predict(x);
  double r = std::exp(-0.5);
  EXPECT_NEAR(p.mean, 3.0 * std::exp(-0.125) / (1.0 + r), 1e-10);
  EXPECT_NEAR(p.variance, 1.0 - 2.0 * std::exp(-0.25) / (1.0 + r), 1e-10);
}

TEST(GP, DuplicateRowsRejected) {
  Eigen::MatrixXd X(2, 1);
  X << 0.2, 0.2;
  Eigen::VectorXd y(2);
  y << 1.0, 1.0;
  EXPECT_THROW(gp::Model::fit(X, y, gp::Hyper::isotropic(1, 1.0)), gp::GPError);
}

TEST(GP, FarPointsRevertToPrior) {
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 0.1;
  Eigen::VectorXd y(2);
  y << 3.0, 4.0;
  auto m = gp::Model::fit(X, y, gp::Hyper::isotropic(1, 0.01, 1.7, 0.0), false);
  Eigen::VectorXd x(1);
  x << 0.9;
  auto p = m.predict(x);
  EXPECT_NEAR(p.mean, 0.0, 1e-12);
  EXPECT_NEAR(p.variance, 1.7, 1e-12);
}

TEST(GP, MatchesDenseConditioning) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto ds = oracle::random_gp_dataset(rng, 8, 4);
    for (bool standardize : {false, true}) {
      auto m = gp::Model::fit(ds.X, ds.y, ds.hyper, standardize);
      for (int q = 0; q < 5; ++q) {
        Eigen::VectorXd x = oracle::random_unit(rng, ds.X.cols());
        auto want = oracle::dense_posterior(ds.X, ds.y, m.hyper(), x, standardize);
        auto got = m.predict(x);
        EXPECT_NEAR(got.mean, want.first, 1e-8);
        EXPECT_NEAR(got.variance, want.second, 1e-8);
      }
      for (Eigen::Index i = 0; i < ds.X.rows(); ++i)
        EXPECT_LE(m.predict(ds.X.row(i).transpose()).variance, 1e-10);
    }
  }
}

TEST(GP, IncrementalUpdateMatchesRefit) {
  std::mt19937_64 rng(9);
  auto ds = oracle::random_gp_dataset(rng, 8, 3);
  Eigen::MatrixXd X0 = ds.X.topRows(ds.X.rows() - 1);
  Eigen::VectorXd y0 = ds.y.head(ds.y.size() - 1);
  auto m0 = gp::Model::fit(X0, y0, ds.hyper);
  auto inc = m0.with_point(ds.X.row(ds.X.rows() - 1).transpose(), ds.y[ds.y.size() - 1]);
  auto full = gp::Model::fit(ds.X, ds.y, ds.hyper);
  for (int q = 0; q < 10; ++q) {
    Eigen::VectorXd x = oracle::random_unit(rng, 3);
    EXPECT_NEAR(inc.predict(x).mean, full.predict(x).mean, 1e-9);
    EXPECT_NEAR(inc.predict(x).variance, full.predict(x).variance, 1e-9);
  }
  // A new noiseless observation is reproduced.
  Eigen::VectorXd xn = ds.X.row(ds.X.rows() - 1).transpose();
  EXPECT_NEAR(inc.predict(xn).mean, ds.y[ds.y.size() - 1], 1e-6);
}

TEST(GP, HyperOptimizationImprovesLikelihood) {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd X(30, 2);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) {
    X(i, 0) = sizing::uniform01(rng);
    X(i, 1) = sizing::uniform01(rng);
    y[i] = std::sin(6 * X(i, 0)) + 0.1 * X(i, 1);
  }
  auto start = gp::Hyper::isotropic(2, 2.0, 1.0, 1e-6);
  auto tuned = gp::optimize_hyper(X, y, start);
  double before = gp::Model::fit(X, y, start).log_marginal_likelihood();
  double after = gp::Model::fit(X, y, tuned).log_marginal_likelihood();
  EXPECT_GT(after, before);
  // The irrelevant second input gets the longer lengthscale.
  EXPECT_GT(tuned.lengthscales[1], tuned.lengthscales[0]);
}

// ---------------------------------------------------------------------------
// Expected improvement

TEST(EI, ClosedFormCorners) {
  EXPECT_EQ(gp::expected_improvement(1.0, 0.0, 2.0), 0.0);
  EXPECT_EQ(gp::expected_improvement(3.0, 0.0, 2.0), 1.0);
  EXPECT_NEAR(gp::expected_improvement(1.0, 1.0, 1.0), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(gp::expected_improvement(1.0, 1e-300, 1.0), 0.0, 1e-200);
}

TEST(EI, MatchesMonteCarlo) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    double mu = 4.0 * sizing::uniform01(rng) - 2.0;
    double sigma = 0.05 + 2.0 * sizing::uniform01(rng);
    double best = 4.0 * sizing::uniform01(rng) - 2.0;
    double mc = oracle::monte_carlo_ei(mu, sigma, best, 1000000, rng());
    EXPECT_NEAR(gp::expected_improvement(mu, sigma, best), mc, 1e-3) << mu << " " << sigma << " " << best;
  }
}

TEST(EI, NonNegativeEverywhere) {
  for (double mu = -5; mu <= 5; mu += 0.37)
    for (double s : {0.0, 1e-12, 1e-3, 0.5, 3.0})
      for (double best : {-2.0, 0.0, 4.0}) EXPECT_GE(gp::expected_improvement(mu, s, best), 0.0);
}

// ---------------------------------------------------------------------------
// Proposal

TEST(Propose, SingleCandidateNoRefinement) {
  Eigen::MatrixXd X(2, 2);
  X << 0.1, 0.1, 0.9, 0.9;
  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  auto m = gp::Model::fit(X, y, gp::Hyper::isotropic(2, 0.3));
  sizing::AcqConfig acq;
  acq.candidates = 1;
  acq.local_candidates = 0;
  acq.refine_rounds = 0;
  auto rng = sizing::stream_rng(1, 1);
  auto rng_copy = rng;
  auto got = sizing::propose_next(m, acq, rng);
  sizing::ScrambledHalton h(2, rng_copy);
  EXPECT_EQ(got, h.point(1));
}

TEST(Propose, FindsGridArgmaxIn1D) {
  Eigen::MatrixXd X(4, 1);
  X << 0.05, 0.3, 0.55, 0.95;
  Eigen::VectorXd y(4);
  y << 0.1, 0.8, 0.9, -0.5;
  auto m = gp::Model::fit(X, y, gp::Hyper::isotropic(1, 0.15, 1.0, 1e-9));
  double best = y.maxCoeff();
  double grid_x = 0, grid_v = -1;
  for (int i = 0; i <= 100000; ++i) {
    Eigen::VectorXd x(1);
    x << i / 100000.0;
    double v = gp::expected_improvement(m, x, best);
    if (v > grid_v) {
      grid_v = v;
      grid_x = x[0];
    }
  }
  sizing::AcqConfig acq;
  acq.candidates = 16;
  auto rng = sizing::stream_rng(4, 4);
  auto got = sizing::propose_next(m, acq, rng);
  EXPECT_NEAR(got[0], grid_x, 1e-3);
  EXPECT_GE(gp::expected_improvement(m, got, best), grid_v * (1 - 1e-6));
}

TEST(Propose, DeterministicForSeed) {
  std::mt19937_64 g(8);
  auto ds = oracle::random_gp_dataset(g, 8, 4);
  auto m = gp::Model::fit(ds.X, ds.y, ds.hyper);
  auto r1 = sizing::stream_rng(7, 3);
  auto r2 = sizing::stream_rng(7, 3);
  EXPECT_EQ(sizing::propose_next(m, {}, r1), sizing::propose_next(m, {}, r2));
}

// ---------------------------------------------------------------------------
// Loop

namespace {

FoMConfig sphere_fom() {
  FoMConfig c;
  FoMTerm t;
  t.metric = "sphere";
  t.direction = Direction::Minimize;
  c.terms = {t};
  return c;
}

struct Sphere {
  std::vector<double> center;
  std::size_t* calls;
  MeasurementSet operator()(const Assignment& a) const {
    ++*calls;
    double s = 0;
    std::size_t i = 0;
    for (const auto& [k, v] : a) s += (v - center[i]) * (v - center[i]), ++i;
    return ms({{"sphere", s}});
  }
};

}  // namespace

TEST(RunBO, NoIterationsGivesBestInitialSample) {
  std::size_t calls = 0;
  sizing::BOConfig cfg;
  cfg.n_init = 12;
  cfg.n_iter = 0;
  auto r = sizing::run_bo(unit_space(2), Sphere{{0.4, 0.6}, &calls}, sphere_fom(), cfg);
  EXPECT_EQ(calls, 12u);
  double best = -1e300;
  for (const auto& rec : r.records) best = std::max(best, rec.fom);
  EXPECT_EQ(r.best().fom, best);
}

TEST(RunBO, SphereConvergesAndCountsCalls) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::size_t calls = 0;
    sizing::BOConfig cfg;
    cfg.n_init = 20;
    cfg.n_iter = 180;
    cfg.seed = seed;
    std::vector<double> c = {0.31, 0.73};
    auto r = sizing::run_bo(unit_space(2), Sphere{c, &calls}, sphere_fom(), cfg);
    EXPECT_EQ(calls, 200u);
    EXPECT_EQ(r.records.size(), 200u);
    const auto& x = r.best().x;
    double dist = std::hypot(x.at("p0.x") - c[0], x.at("p1.x") - c[1]);
    EXPECT_LT(dist, 1e-2) << "seed " << seed;
    for (std::size_t i = 1; i < r.best_so_far.size(); ++i) EXPECT_GE(r.best_so_far[i], r.best_so_far[i - 1]);
    for (const auto& rec : r.records) EXPECT_DOUBLE_EQ(rec.fom, sizing::compute_fom(rec.measurements, r.fom));
  }
}

TEST(RunBO, FailuresGetPenalty) {
  std::size_t calls = 0;
  Sphere inner{{0.5, 0.5}, &calls};
  auto eval = [&](const Assignment& a) {
    if (a.at("p0.x") > 0.8) return MeasurementSet::failed("diverged");
    return inner(a);
  };
  sizing::BOConfig cfg;
  cfg.n_init = 16;
  cfg.n_iter = 20;
  cfg.failure_fom = -42.0;
  auto r = sizing::run_bo(unit_space(2), eval, sphere_fom(), cfg);
  std::size_t failed = 0;
  for (const auto& rec : r.records)
    if (!rec.ok) {
      ++failed;
      EXPECT_EQ(rec.fom, -42.0);
    }
  EXPECT_GT(failed, 0u);
  EXPECT_GT(r.best().fom, -42.0);
}

TEST(RunBO, ThrowingEvaluatorRetriedThenFatal) {
  int calls = 0;
  auto flaky = [&](const Assignment& a) {
    if (++calls % 2 == 1) throw std::runtime_error("transient");
    return ms({{"sphere", a.at("p0.x")}});
  };
  sizing::BOConfig cfg;
  cfg.n_init = 4;
  cfg.n_iter = 2;
  EXPECT_NO_THROW(sizing::run_bo(unit_space(1), flaky, sphere_fom(), cfg));
  auto broken = [](const Assignment&) -> MeasurementSet { throw std::runtime_error("always"); };
  EXPECT_THROW(sizing::run_bo(unit_space(1), broken, sphere_fom(), cfg), sizing::SizingError);
}

TEST(RunBO, BudgetEnforced) {
  std::size_t calls = 0;
  sizing::BOConfig cfg;
  cfg.n_init = 10;
  cfg.n_iter = 10;
  cfg.budget = 15;
  EXPECT_THROW(sizing::run_bo(unit_space(2), Sphere{{0.5, 0.5}, &calls}, sphere_fom(), cfg), sizing::SizingError);
  cfg.budget = 20;
  cfg.n_init = 1;
  EXPECT_THROW(sizing::run_bo(unit_space(2), Sphere{{0.5, 0.5}, &calls}, sphere_fom(), cfg), sizing::SizingError);
}

TEST(RunBO, SameSeedSameCsvAndResumeMatches) {
  std::size_t calls = 0;
  sizing::BOConfig cfg;
  cfg.n_init = 10;
  cfg.n_iter = 15;
  cfg.seed = 99;
  auto space = unit_space(3);
  Sphere f{{0.2, 0.5, 0.8}, &calls};
  auto a = sizing::run_bo(space, f, sphere_fom(), cfg);
  auto b = sizing::run_bo(space, f, sphere_fom(), cfg);
  EXPECT_EQ(sizing::trajectory_csv(a), sizing::trajectory_csv(b));

  // Snapshot the first 18 records and resume: the evaluator sees only the rest.
  auto snap = sizing::snapshot(a, space, cfg);
  auto recs = sizing::records_from_snapshot(nlohmann::json::parse(snap.dump()));
  recs.resize(18);
  calls = 0;
  auto c = sizing::run_bo(space, f, sphere_fom(), cfg, recs);
  EXPECT_EQ(calls, 7u);
  EXPECT_EQ(sizing::trajectory_csv(c), sizing::trajectory_csv(a));
}

TEST(RunBO, ParallelInitialBatchMatchesSerial) {
  auto eval = [](const Assignment& a) {
    double s = 0;
    for (const auto& [k, v] : a) s += (v - 0.3) * (v - 0.3);
    return ms({{"sphere", s}});
  };
  sizing::BOConfig cfg;
  cfg.n_init = 32;
  cfg.n_iter = 3;
  auto serial = sizing::run_bo(unit_space(4), eval, sphere_fom(), cfg);
  cfg.init_workers = 4;
  auto parallel = sizing::run_bo(unit_space(4), eval, sphere_fom(), cfg);
  EXPECT_EQ(sizing::trajectory_csv(serial), sizing::trajectory_csv(parallel));
}

TEST(RunBO, CsvLayout) {
  std::size_t calls = 0;
  sizing::BOConfig cfg;
  cfg.n_init = 3;
  cfg.n_iter = 1;
  auto r = sizing::run_bo(unit_space(1), Sphere{{0.5}, &calls}, sphere_fom(), cfg);
  auto csv = sizing::trajectory_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "eval,fom,best,ok,sphere");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
