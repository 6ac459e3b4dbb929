#include "dfd/schedule.hpp"

#include "dfd/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace dfd {

double cosine_lr(long step, long total_steps, double lr_initial, double lr_final) {
  if (total_steps <= 0) throw ConfigError("schedule needs total_steps > 0");
  if (step < 0 || step > total_steps) {
    throw ConfigError("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  if (!(lr_final <= lr_initial) || !(lr_final >= 0.0)) throw ConfigError("need 0 <= lr_final <= lr_initial");
  const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
  // w is exactly 1 at step 0 and exactly 0 at the end (cos(pi) = -1).
  return lr_final + (lr_initial - lr_final) * w;
}

double cosine_lr_with_floor(long step, long total_steps, double lr_initial, double lr_final) {
  if (total_steps > 0 && step > total_steps) step = total_steps;
  return cosine_lr(step, total_steps, lr_initial, lr_final);
}

}  // namespace dfd
