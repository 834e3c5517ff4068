#include "rf/train/optim.hpp"

#include <cmath>
#include <numbers>

namespace rf::train {

double lr_schedule(long step, long total_steps, double initial_lr, double eta_min, long warmup_steps) {
  if (step < 0 || step > total_steps) throw Error(Errc::StepOutOfRange, "step " + std::to_string(step) + " outside [0, " +
                                                                            std::to_string(total_steps) + "]");
  if (step < warmup_steps) return initial_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return step == total_steps && step > warmup_steps ? eta_min : initial_lr;
  const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return eta_min + (initial_lr - eta_min) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

Adam::Adam(std::vector<nn::Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const nn::Parameter* p : params_) {
    m_.push_back(nn::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(nn::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double lr) {
  for (const nn::Parameter* p : params_)
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      throw Error(Errc::ShapeMismatch, "gradient shape differs for " + p->name);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    nn::Parameter& p = *params_[i];
    nn::Matrix g = p.grad;
    if (cfg_.decoupled)
      p.value *= 1.0 - lr * cfg_.weight_decay;
    else
      g += cfg_.weight_decay * p.value;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace rf::train
