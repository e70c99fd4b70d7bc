#pragma once

// Trainer-agnostic learning-rate decay / early-stop / epoch-cap controller.
// Feed one validation loss per epoch and act on the returned decision.

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <variant>

#include <json.hpp>

#include "dialogsep/error.hpp"

namespace dialogsep {

struct ScheduleConfig {
  double decay_factor = 0.3;
  int decay_patience = 5;
  int stop_patience = 10;
  int max_epochs = 100;
  double improvement_epsilon = 0.0;

  void validate() const {
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ArgumentError("ScheduleConfig: decay_factor must be in (0, 1]");
    if (decay_patience < 1 || stop_patience < 1 || max_epochs < 1) {
      throw ArgumentError("ScheduleConfig: patience values and max_epochs must be >= 1");
    }
    if (!(improvement_epsilon >= 0.0)) throw ArgumentError("ScheduleConfig: improvement_epsilon must be >= 0");
  }
};

struct Continue {
  friend bool operator==(const Continue&, const Continue&) = default;
};

struct DecayLr {
  double new_factor;
  friend bool operator==(const DecayLr&, const DecayLr&) = default;
};

enum class StopReason { EarlyStop, EpochCap, Diverged };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::EarlyStop:
      return "early_stop";
    case StopReason::EpochCap:
      return "epoch_cap";
    case StopReason::Diverged:
      return "diverged";
  }
  return "unknown";
}

struct Stop {
  StopReason reason;
  friend bool operator==(const Stop&, const Stop&) = default;
};

using Decision = std::variant<Continue, DecayLr, Stop>;

/// Snapshot-able controller state. `epoch` counts observed losses.
struct ScheduleState {
  ScheduleConfig config;
  double best_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  int decays = 0;
  double lr_factor = 1.0;
  int epoch = 0;
  bool stopped = false;

  explicit ScheduleState(ScheduleConfig cfg = {}) : config(cfg) { config.validate(); }
};

/// Advances the state by one epoch. A decay fires when the non-improvement
/// streak reaches decay_patience; the decay itself does not reset the
/// streak, only an improvement does. Precedence: divergence, epoch cap,
/// early stop, decay.
inline Decision observe(ScheduleState& state, double val_loss) {
  if (state.stopped) throw ArgumentError("observe: schedule has already stopped");
  if (std::isinf(val_loss)) throw ArgumentError("observe: validation loss must be finite");
  ++state.epoch;
  const ScheduleConfig& cfg = state.config;
  auto stop = [&](StopReason r) {
    state.stopped = true;
    return Decision{Stop{r}};
  };

  if (std::isnan(val_loss)) return stop(StopReason::Diverged);

  if (val_loss < state.best_loss - cfg.improvement_epsilon) {
    state.best_loss = val_loss;
    state.epochs_since_improvement = 0;
  } else {
    ++state.epochs_since_improvement;
  }

  if (state.epoch >= cfg.max_epochs) return stop(StopReason::EpochCap);
  if (state.epochs_since_improvement >= cfg.stop_patience) return stop(StopReason::EarlyStop);
  if (state.epochs_since_improvement == cfg.decay_patience) {
    ++state.decays;
    state.lr_factor = std::pow(cfg.decay_factor, state.decays);
    return DecayLr{state.lr_factor};
  }
  return Continue{};
}

inline std::string decision_name(const Decision& d) {
  if (std::holds_alternative<Continue>(d)) return "continue";
  if (std::holds_alternative<DecayLr>(d)) return "decay_lr";
  return "stop";
}

/// One JSON-lines record: epoch, loss, decision, lr_factor (+ reason on stop).
inline nlohmann::json decision_record(const ScheduleState& state, double loss, const Decision& d) {
  nlohmann::json j;
  j["epoch"] = state.epoch;
  j["loss"] = std::isfinite(loss) ? nlohmann::json(loss) : nlohmann::json(nullptr);
  j["decision"] = decision_name(d);
  j["lr_factor"] = state.lr_factor;
  if (const auto* s = std::get_if<Stop>(&d)) j["reason"] = to_string(s->reason);
  return j;
}

}  // namespace dialogsep
