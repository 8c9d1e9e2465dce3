#pragma once

#include <limits>

namespace orthosep {

struct PlateauConfig {
  double factor = 0.5;
  int patience = 5;
  double rel_threshold = 1e-4;
  double min_lr = 1e-8;
};

/// Reduce-on-plateau over the training loss: a loss below
/// best*(1 - rel_threshold) resets the stall counter; once the counter
/// exceeds patience the rate is halved (clamped at min_lr) and the counter
/// resets.
class PlateauScheduler {
 public:
  PlateauScheduler(const PlateauConfig& config, double initial_lr)
      : config_(config), lr_(initial_lr) {}

  /// Call once per epoch with the epoch loss; returns the rate for the next
  /// epoch.
  double step(double epoch_loss) {
    if (epoch_loss < best_ * (1.0 - config_.rel_threshold)) {
      best_ = epoch_loss;
      stall_count_ = 0;
    } else {
      ++stall_count_;
      if (stall_count_ > config_.patience) {
        const double next = lr_ * config_.factor;
        lr_ = next > config_.min_lr ? next : config_.min_lr;
        stall_count_ = 0;
      }
    }
    return lr_;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  int stall_count() const { return stall_count_; }

  /// Checkpoint support.
  void restore(double lr, double best, int stall_count) {
    lr_ = lr;
    best_ = best;
    stall_count_ = stall_count;
  }

 private:
  PlateauConfig config_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int stall_count_ = 0;
};

}  // namespace orthosep
