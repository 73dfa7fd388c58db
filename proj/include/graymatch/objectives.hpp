#pragma once

#include <span>
#include <vector>

namespace graymatch {

// Single margin hinge max(0, mu - s_hi + s_lo). The subgradient convention at
// the kink: inactive (both partials zero) when the argument is exactly 0.
struct HingeLoss {
  double value = 0.0;
  double d_hi = 0.0;  // partial w.r.t. s_hi
  double d_lo = 0.0;  // partial w.r.t. s_lo
};

HingeLoss hinge(double mu, double s_hi, double s_lo);

// ground truth > random
struct PairLoss {
  double value = 0.0;
  double d_gt = 0.0;
  double d_rand = 0.0;
};

PairLoss loss_ran(double mu, double s_gt, double s_rand);

// ground truth > middle tier > random, averaged over middle-tier members so
// the margin and learning rate do not rescale with pool size.
struct ChainLoss {
  double value = 0.0;
  double d_gt = 0.0;
  std::vector<double> d_mid;  // aligned with the middle-tier scores
  double d_rand = 0.0;
};

ChainLoss loss_ret(double mu, double s_gt, std::span<const double> s_retrieval, double s_rand);
ChainLoss loss_gen(double mu, double s_gt, std::span<const double> s_generation, double s_rand);

// L_Uni = L_Ran + L_Ret + L_Gen; empty tiers contribute nothing.
struct UniLoss {
  double value = 0.0;
  double ran_value = 0.0;
  double ret_value = 0.0;
  double gen_value = 0.0;
  double d_gt = 0.0;
  std::vector<double> d_ret;
  std::vector<double> d_gen;
  double d_rand = 0.0;
};

UniLoss loss_uni(double mu, double s_gt, std::span<const double> s_retrieval,
                 std::span<const double> s_generation, double s_rand);

// Negated binary classification objective, expectation over negatives taken
// as the mean. Scores are clamped to [eps, 1-eps], eps = 1e-7.
struct BceLoss {
  double value = 0.0;
  double d_pos = 0.0;
  std::vector<double> d_negs;
};

BceLoss loss_bce(double s_pos, std::span<const double> s_negs);

}  // namespace graymatch
