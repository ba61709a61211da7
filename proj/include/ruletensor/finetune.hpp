#pragma once

#include <string>
#include <vector>

#include "ruletensor/dataset.hpp"
#include "ruletensor/rule_model.hpp"

namespace ruletensor {

enum class Optimizer {
    gradient_descent,  // plain full-batch steps
    adam,              // adaptive-moment steps, decay 0.9/0.999, stabilizer 1e-8
};

Optimizer optimizer_from_name(const std::string& name);
std::string optimizer_name(Optimizer o);

/// Settings for the differentiable relaxation and the tuning loop.
struct SoftConfig {
    double temperature = 5.0;  // sigmoid sharpness k; hard semantics is k -> inf
    double learning_rate = 0.05;
    int epochs = 50;
    Optimizer optimizer = Optimizer::adam;
    double clamp_eps = 1e-7;  // probability clamp inside the loss
};

/// Per-rule gradients, shaped exactly like the rule set. Entries are exactly
/// zero wherever the weight mask is unset or the bias is frozen.
struct GradientSet {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
};

/// Soft first-match probability of class 1 for every sample. Each condition
/// activates a = sigmoid(k * margin), a rule activates A = prod(a), and the
/// ordered rules decompose into P_r = A_r * prod_{r'<r}(1 - A_{r'}) with
/// P_default = prod_r(1 - A_r); the output sums P over class-1 rules (plus
/// P_default if the default class is 1). The P's sum to 1 by construction.
std::vector<double> soft_forward(const RuleSet& rs, const Matrix& batch, double temperature);

/// Mean binary cross-entropy with predictions clamped to
/// [clamp_eps, 1 - clamp_eps].
double bce_loss(const std::vector<double>& predictions, const std::vector<int>& labels,
                double clamp_eps);

/// Loss and exact analytic gradients of bce_loss(soft_forward(...)) with
/// respect to every unmasked weight and unfrozen bias.
std::pair<double, GradientSet> compute_gradients(const RuleSet& rs, const Matrix& batch,
                                                 const std::vector<int>& labels,
                                                 const SoftConfig& cfg);

/// Central-finite-difference validation of compute_gradients over every free
/// coefficient. Returns the maximum of |analytic - numeric| /
/// max(1, |analytic|, |numeric|); 0 when there are no free coefficients.
double gradient_check(const RuleSet& rs, const Matrix& batch, const std::vector<int>& labels,
                      const SoftConfig& cfg, double eps = 1e-5);

struct EpochRecord {
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double accuracy = 0.0;
};

struct FineTuneResult {
    RuleSet tuned;
    std::vector<EpochRecord> history;
    int diverged_at = -1;  // epoch index at which a non-finite value appeared, -1 if none

    bool diverged() const { return diverged_at >= 0; }
};

/// Runs cfg.epochs full-batch gradient steps on a copy of the rule set.
/// The structure signature never changes: masked weights stay exactly zero
/// and frozen biases are untouched. Each history entry records the loss the
/// step was computed from and the hard accuracy after the step. Deterministic
/// for fixed inputs. record_history = false skips the per-epoch accuracy
/// bookkeeping (the tuned coefficients are identical either way).
FineTuneResult fine_tune(const RuleSet& rs, const Dataset& train, const SoftConfig& cfg,
                         bool record_history = true);

}  // namespace ruletensor
