#include "graymatch/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace graymatch {

HingeLoss hinge(double mu, double s_hi, double s_lo) {
  HingeLoss loss;
  const double arg = mu - s_hi + s_lo;
  if (arg > 0.0) {
    loss.value = arg;
    loss.d_hi = -1.0;
    loss.d_lo = 1.0;
  }
  return loss;
}

PairLoss loss_ran(double mu, double s_gt, double s_rand) {
  const HingeLoss h = hinge(mu, s_gt, s_rand);
  return PairLoss{h.value, h.d_hi, h.d_lo};
}

namespace {

// Shared body of loss_ret / loss_gen: (1/K) sum_k [hinge(gt, mid_k) + hinge(mid_k, rand)]
ChainLoss chain_loss(double mu, double s_gt, std::span<const double> s_mid, double s_rand) {
  ChainLoss loss;
  loss.d_mid.assign(s_mid.size(), 0.0);
  if (s_mid.empty()) return loss;
  const double inv_k = 1.0 / static_cast<double>(s_mid.size());
  for (std::size_t k = 0; k < s_mid.size(); ++k) {
    const HingeLoss upper = hinge(mu, s_gt, s_mid[k]);
    const HingeLoss lower = hinge(mu, s_mid[k], s_rand);
    loss.value += inv_k * (upper.value + lower.value);
    loss.d_gt += inv_k * upper.d_hi;
    loss.d_mid[k] += inv_k * (upper.d_lo + lower.d_hi);
    loss.d_rand += inv_k * lower.d_lo;
  }
  return loss;
}

}  // namespace

ChainLoss loss_ret(double mu, double s_gt, std::span<const double> s_retrieval, double s_rand) {
  return chain_loss(mu, s_gt, s_retrieval, s_rand);
}

ChainLoss loss_gen(double mu, double s_gt, std::span<const double> s_generation, double s_rand) {
  return chain_loss(mu, s_gt, s_generation, s_rand);
}

UniLoss loss_uni(double mu, double s_gt, std::span<const double> s_retrieval,
                 std::span<const double> s_generation, double s_rand) {
  const PairLoss ran = loss_ran(mu, s_gt, s_rand);
  const ChainLoss ret = loss_ret(mu, s_gt, s_retrieval, s_rand);
  const ChainLoss gen = loss_gen(mu, s_gt, s_generation, s_rand);

  UniLoss loss;
  loss.ran_value = ran.value;
  loss.ret_value = ret.value;
  loss.gen_value = gen.value;
  loss.value = ran.value + ret.value + gen.value;
  loss.d_gt = ran.d_gt + ret.d_gt + gen.d_gt;
  loss.d_ret = ret.d_mid;
  loss.d_gen = gen.d_mid;
  loss.d_rand = ran.d_rand + ret.d_rand + gen.d_rand;
  return loss;
}

BceLoss loss_bce(double s_pos, std::span<const double> s_negs) {
  static constexpr double kEps = 1e-7;
  auto clamp = [](double s) { return std::clamp(s, kEps, 1.0 - kEps); };

  BceLoss loss;
  const double pos = clamp(s_pos);
  loss.value = -std::log(pos);
  loss.d_pos = -1.0 / pos;
  loss.d_negs.assign(s_negs.size(), 0.0);
  if (s_negs.empty()) return loss;

  const double inv_n = 1.0 / static_cast<double>(s_negs.size());
  double neg_sum = 0.0;
  for (std::size_t j = 0; j < s_negs.size(); ++j) {
    const double neg = clamp(s_negs[j]);
    neg_sum += std::log(1.0 - neg);
    loss.d_negs[j] = inv_n / (1.0 - neg);
  }
  loss.value -= inv_n * neg_sum;
  return loss;
}

}  // namespace graymatch
