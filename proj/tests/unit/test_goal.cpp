// SPDX-License-Identifier: Apache-2.0

#include "support/gradcheck.hpp"
#include "trajpred/errors.hpp"
#include "trajpred/goal.hpp"

#include <gtest/gtest.h>

#include <limits>

namespace trajpred {
namespace {

GoalSpec small_spec() {
  GoalSpec s;
  s.encoder_hidden = 5;
  s.latent_dim = 2;
  s.mlp_hidden = 3;
  return s;
}

void zero_mlp(const nn::Mlp2& m) {
  m.hidden.weight->value.setZero();
  m.hidden.bias->value.setZero();
  m.output.weight->value.setZero();
  m.output.bias->value.setZero();
}

Mat random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  nn::Rng rng(seed);
  return standard_normal(r, c, rng);
}

TEST(Encoders, DeterministicAndSingleStep) {
  nn::ParameterSet ps;
  nn::Rng rng(1);
  MotionEncoders enc(ps, GoalSpec{}, rng);
  const Mat x = random_mat(8, 6, 2);
  const auto a = encode_sequence(enc.history, sequence_steps(x));
  const auto b = encode_sequence(enc.history, sequence_steps(x));
  EXPECT_EQ(a->value, b->value);
  EXPECT_EQ(a->cols(), 64);

  const Mat one = x.topRows(1);
  const auto h1 = encode_sequence(enc.history, sequence_steps(one));
  const auto manual = enc.history.step(nn::constant(one), nn::constant(Mat::Zero(1, 64)));
  EXPECT_EQ(h1->value, manual->value);
}

TEST(Encoders, NanAndEmptyInputRejected) {
  nn::ParameterSet ps;
  nn::Rng rng(1);
  MotionEncoders enc(ps, GoalSpec{}, rng);
  Mat y = random_mat(12, 2, 3);
  y(4, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(encode_sequence(enc.future, sequence_steps(y)), ContractError);
  EXPECT_THROW(encode_sequence(enc.future, {}), ContractError);
}

TEST(GoalModule, ZeroNetworkGivesStandardNormal) {
  nn::ParameterSet ps;
  nn::Rng rng(4);
  GoalModule g(ps, small_spec(), rng);
  zero_mlp(g.posterior_net());
  zero_mlp(g.prior_net());
  const auto hx = nn::constant(random_mat(3, 5, 5));
  const auto hy = nn::constant(random_mat(3, 5, 6));
  for (const auto& d : {g.joint_posterior(hx, hy), g.prior(hx)}) {
    EXPECT_TRUE(d.mean->value.isZero(0.0));
    EXPECT_TRUE(d.log_var->value.isZero(0.0));
  }
}

TEST(GoalModule, HandSetWeightsMatchMatrixArithmetic) {
  nn::ParameterSet ps;
  nn::Rng rng(7);
  GoalSpec spec = small_spec();
  spec.encoder_hidden = 2;
  spec.mlp_hidden = 2;
  GoalModule g(ps, spec, rng);
  const auto& p = g.prior_net();
  p.hidden.weight->value << 1.0, -0.5, 0.25, 2.0;
  p.hidden.bias->value << 0.1, -0.2;
  p.output.weight->value << 1, 0, 0.5, -1, 0, 1, 2, 0.3;  // [2, 4]
  p.output.bias->value << 0.0, 0.1, -0.1, 0.2;
  const double h0 = 0.4, h1 = -0.3;
  const double a0 = std::tanh(1.0 * h0 + 0.25 * h1 + 0.1);
  const double a1 = std::tanh(-0.5 * h0 + 2.0 * h1 - 0.2);
  const double out[4] = {1 * a0 + 0 * a1 + 0.0, 0 * a0 + 1 * a1 + 0.1, 0.5 * a0 + 2 * a1 - 0.1,
                         -1 * a0 + 0.3 * a1 + 0.2};
  Mat hx(1, 2);
  hx << h0, h1;
  const auto d = g.prior(nn::constant(hx));
  EXPECT_NEAR(d.mean->value(0, 0), out[0], 1e-14);
  EXPECT_NEAR(d.mean->value(0, 1), out[1], 1e-14);
  EXPECT_NEAR(d.log_var->value(0, 0), out[2], 1e-14);
  EXPECT_NEAR(d.log_var->value(0, 1), out[3], 1e-14);
}

TEST(GoalModule, LogVarIsClamped) {
  nn::ParameterSet ps;
  nn::Rng rng(8);
  GoalModule g(ps, small_spec(), rng);
  zero_mlp(g.prior_net());
  g.prior_net().output.bias->value << 0.0, 0.0, 50.0, -50.0;
  const auto d = g.prior(nn::constant(Mat::Zero(1, 5)));
  EXPECT_EQ(d.log_var->value(0, 0), 10.0);
  EXPECT_EQ(d.log_var->value(0, 1), -10.0);
}

TEST(Sampling, DegenerateVarianceReturnsMean) {
  LatentDistribution d{nn::constant(random_mat(2, 4, 9)), nn::constant(Mat::Constant(2, 4, -40.0))};
  nn::Rng rng(10);
  const auto z = sample_latent(d, 5, rng);
  ASSERT_EQ(z->rows(), 10);
  for (int b = 0; b < 2; ++b) {
    for (int k = 0; k < 5; ++k) {
      EXPECT_LT((z->value.row(b * 5 + k) - d.mean->value.row(b)).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Sampling, MomentsAndReproducibility) {
  LatentDistribution d{nn::constant(Mat::Zero(1, 1)), nn::constant(Mat::Zero(1, 1))};
  nn::Rng rng(11);
  const auto z = sample_latent(d, 100000, rng);
  const double mean = z->value.mean();
  const double var = (z->value.array() - mean).square().sum() / (z->rows() - 1);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
  nn::Rng again(11);
  EXPECT_EQ(sample_latent(d, 100000, again)->value, z->value);
}

TEST(Sampling, ReparameterisedGradient) {
  nn::ParameterSet ps;
  nn::Rng rng(12);
  GoalModule g(ps, small_spec(), rng);
  nn::Var mean = nn::parameter(random_mat(1, 2, 13));
  nn::Var log_var = nn::parameter(random_mat(1, 2, 14));
  const Mat eps = random_mat(4, 2, 15);
  const auto hx = nn::constant(random_mat(1, 5, 16));
  auto loss = [&] { return nn::mean(g.decode_goals(sample_latent({mean, log_var}, 4, eps), hx, 4)); };
  const auto r = testing::gradient_check({mean, log_var}, loss, 20, 17);
  EXPECT_EQ(r.failures, 0) << "max rel error " << r.max_rel_error;
}

TEST(GoalModule, DecodeGoals) {
  nn::ParameterSet ps;
  nn::Rng rng(18);
  GoalModule g(ps, small_spec(), rng);
  const auto hx = nn::constant(random_mat(1, 5, 19));
  Mat same(6, 2);
  same.rowwise() = random_mat(1, 2, 20).row(0);
  const auto goals = g.decode_goals(nn::constant(same), hx, 6);
  ASSERT_EQ(goals->rows(), 6);
  for (int k = 1; k < 6; ++k) EXPECT_EQ(goals->value.row(k), goals->value.row(0));

  const auto distinct = g.decode_goals(nn::constant(random_mat(6, 2, 21)), hx, 6);
  EXPECT_GT((distinct->value.row(0) - distinct->value.row(1)).norm(), 1e-6);

  zero_mlp(g.goal_decoder());
  g.goal_decoder().output.bias->value << 0.7, -1.3;
  const auto flat = g.decode_goals(nn::constant(random_mat(3, 2, 22)), hx, 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(flat->value(k, 0), 0.7);
    EXPECT_EQ(flat->value(k, 1), -1.3);
  }
  EXPECT_THROW(g.decode_goals(nn::constant(random_mat(5, 2, 23)), hx, 3), ContractError);
}

TEST(Kld, ClosedFormCases) {
  using V = Eigen::VectorXd;
  const V zero = V::Zero(1);
  const V one = V::Ones(1);
  EXPECT_EQ(kld_value(zero, zero, zero, zero), 0.0);
  EXPECT_NEAR(kld_value(zero, zero, one, zero), 0.5, 1e-9);
  EXPECT_NEAR(kld_value(zero, one, zero, zero), 0.5 * (std::exp(1.0) - 2.0), 1e-9);
  EXPECT_NEAR(kld_value(zero, one, zero, zero), 0.3591, 1e-4);

  LatentDistribution q{nn::constant(Mat::Zero(1, 1)), nn::constant(Mat::Ones(1, 1))};
  LatentDistribution p{nn::constant(Mat::Zero(1, 1)), nn::constant(Mat::Zero(1, 1))};
  EXPECT_NEAR(kld(q, p)->value(0, 0), 0.5 * (std::exp(1.0) - 2.0), 1e-12);
}

TEST(Kld, NonnegativeAndZeroOnSelf) {
  nn::Rng rng(24);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 10000; ++trial) {
    Eigen::VectorXd mq(3), lq(3), mp(3), lp(3);
    for (int i = 0; i < 3; ++i) {
      mq[i] = n(rng);
      lq[i] = n(rng);
      mp[i] = n(rng);
      lp[i] = n(rng);
    }
    ASSERT_GE(kld_value(mq, lq, mp, lp), 0.0);
    ASSERT_EQ(kld_value(mq, lq, mq, lq), 0.0);
  }
}

TEST(Kld, GradientCheck) {
  nn::Var mq = nn::parameter(random_mat(2, 3, 25));
  nn::Var lq = nn::parameter(random_mat(2, 3, 26));
  nn::Var mp = nn::parameter(random_mat(2, 3, 27));
  nn::Var lp = nn::parameter(random_mat(2, 3, 28));
  const auto r = testing::gradient_check(
      {mq, lq, mp, lp}, [&] { return nn::sum(kld({mq, lq}, {mp, lp})); }, 24, 29);
  EXPECT_EQ(r.failures, 0) << "max rel error " << r.max_rel_error;
}

}  // namespace
}  // namespace trajpred
