#pragma once

namespace dfd {

// Cosine decay from lr_initial at step 0 to lr_final at total_steps:
//   lr_final + (lr_initial - lr_final) * 0.5 * (1 + cos(pi * step / total_steps))
// ConfigError if total_steps <= 0, step is outside [0, total_steps], or lr_final > lr_initial.
double cosine_lr(long step, long total_steps, double lr_initial, double lr_final);

// Same curve, held at lr_final once step passes total_steps.
double cosine_lr_with_floor(long step, long total_steps, double lr_initial, double lr_final);

}  // namespace dfd
