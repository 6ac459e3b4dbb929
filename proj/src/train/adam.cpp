#include "dfd/adam.hpp"

#include "dfd/error.hpp"

#include <cmath>

namespace dfd {

Adam::Adam(AdamConfig cfg, std::vector<std::string> names) : cfg_(cfg), names_(std::move(names)) {
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(cfg_.eps > 0.0) || !(cfg_.weight_decay >= 0.0)) throw ConfigError("Adam eps must be > 0, weight decay >= 0");
}

void Adam::step(Model& model, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  ++t_;
  for (const auto& name : names_) {
    auto node = model.param(name).node();
    if (node->grad.size() == 0) continue;
    Matrix g = node->grad;
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * node->value;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() == 0) {
      m = Matrix::Zero(g.rows(), g.cols());
      v = Matrix::Zero(g.rows(), g.cols());
    }
    const long k = ++count_[name];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(k));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(k));
    const Matrix update = (m / c1).array() / ((v / c2).array().sqrt() + cfg_.eps);
    node->value -= lr * update;
  }
}

}  // namespace dfd
