#pragma once

#include "dfd/backbone.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace dfd {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 added to the gradient
};

// Adam over named model parameters. Moments stay in double precision
// regardless of the forward precision. Parameters without a gradient this
// step are left alone and their moments do not advance.
class Adam {
 public:
  Adam(AdamConfig cfg, std::vector<std::string> names);

  void step(Model& model, double lr);
  long steps() const { return t_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  AdamConfig cfg_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, Matrix> m_, v_;
  std::unordered_map<std::string, long> count_;
  long t_ = 0;
};

}  // namespace dfd
