#include "ruletensor/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ruletensor/errors.hpp"
#include "ruletensor/eval_engine.hpp"

namespace ruletensor {

Optimizer optimizer_from_name(const std::string& name) {
    if (name == "gd") return Optimizer::gradient_descent;
    if (name == "adam") return Optimizer::adam;
    throw ConfigError("unknown optimizer '" + name + "' (expected gd or adam)");
}

std::string optimizer_name(Optimizer o) {
    return o == Optimizer::gradient_descent ? "gd" : "adam";
}

namespace {

void check_soft_config(const SoftConfig& cfg) {
    if (!(cfg.temperature > 0.0)) throw ConfigError("temperature k must be > 0");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(cfg.clamp_eps > 0.0 && cfg.clamp_eps < 0.5)) {
        throw ConfigError("clamp_eps must be in (0, 0.5)");
    }
    if (cfg.learning_rate < 0.0) throw ConfigError("learning rate must be >= 0");
}

void check_batch(const RuleSet& rs, const Matrix& batch) {
    if (batch.rows() > 0 && batch.cols() != rs.num_features) {
        throw std::invalid_argument("batch has " + std::to_string(batch.cols()) +
                                    " feature columns, rule set expects " +
                                    std::to_string(rs.num_features));
    }
}

inline double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Masked (condition, feature) coordinates per rule; the soft path only ever
/// touches coefficients inside the structure mask.
struct SparseStructure {
    // per rule, per condition: sorted masked feature indices
    std::vector<std::vector<std::vector<int>>> features;

    explicit SparseStructure(const RuleSet& rs) {
        features.resize(rs.rules.size());
        for (size_t r = 0; r < rs.rules.size(); ++r) {
            const Rule& rule = rs.rules[r];
            features[r].resize(rule.num_conditions());
            for (int c = 0; c < rule.num_conditions(); ++c) {
                for (int f = 0; f < rule.weights.cols(); ++f) {
                    if (rule.weight_mask(c, f)) features[r][c].push_back(f);
                }
            }
        }
    }
};

/// Per-sample forward scratch, reused across samples.
struct ForwardScratch {
    std::vector<std::vector<double>> activations;  // a[r][c]
    std::vector<double> rule_activation;           // A[r]
    std::vector<double> prefix;                    // Q[r] = prod_{r'<r} (1 - A_{r'})
    std::vector<double> suffix;                    // H[r] as below, size R+1

    void resize(const RuleSet& rs) {
        activations.resize(rs.rules.size());
        for (size_t r = 0; r < rs.rules.size(); ++r) {
            activations[r].assign(rs.rules[r].num_conditions(), 0.0);
        }
        rule_activation.assign(rs.rules.size(), 0.0);
        prefix.assign(rs.rules.size(), 1.0);
        suffix.assign(rs.rules.size() + 1, 0.0);
    }
};

/// Forward pass for one sample. Fills the scratch and returns p = P(class 1).
///
/// suffix[j] is the probability of eventually outputting class 1 given that
/// rules 0..j-1 all failed, counting only rules j..R-1 and the default:
///   suffix[R] = [default == 1]
///   suffix[j] = c_j * A_j + (1 - A_j) * suffix[j+1]
/// so p = suffix[0], and dp/dA_j = Q_j * (c_j - suffix[j+1]).
double soft_sample(const RuleSet& rs, const SparseStructure& sparse, const double* x, double k,
                   ForwardScratch& s) {
    const int num_rules = rs.num_rules();
    for (int r = 0; r < num_rules; ++r) {
        const Rule& rule = rs.rules[r];
        double product = 1.0;
        for (int c = 0; c < rule.num_conditions(); ++c) {
            double margin = rule.biases[c];
            for (int f : sparse.features[r][c]) margin += rule.weights(c, f) * x[f];
            const double a = sigmoid(k * margin);
            s.activations[r][c] = a;
            product *= a;
        }
        s.rule_activation[r] = product;
    }
    double q = 1.0;
    for (int r = 0; r < num_rules; ++r) {
        s.prefix[r] = q;
        q *= 1.0 - s.rule_activation[r];
    }
    s.suffix[num_rules] = rs.default_class == 1 ? 1.0 : 0.0;
    for (int r = num_rules - 1; r >= 0; --r) {
        const double c_r = rs.rules[r].class_label == 1 ? 1.0 : 0.0;
        s.suffix[r] = c_r * s.rule_activation[r] + (1.0 - s.rule_activation[r]) * s.suffix[r + 1];
    }
    return s.suffix[0];
}

inline double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

}  // namespace

std::vector<double> soft_forward(const RuleSet& rs, const Matrix& batch, double temperature) {
    require_valid(rs);
    check_batch(rs, batch);
    if (!(temperature > 0.0)) throw ConfigError("temperature k must be > 0");

    const SparseStructure sparse(rs);
    ForwardScratch scratch;
    scratch.resize(rs);
    std::vector<double> out(batch.rows());
    for (int i = 0; i < batch.rows(); ++i) {
        out[i] = soft_sample(rs, sparse, batch.row(i), temperature, scratch);
    }
    return out;
}

double bce_loss(const std::vector<double>& predictions, const std::vector<int>& labels,
                double clamp_eps) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("bce_loss: " + std::to_string(predictions.size()) +
                                    " predictions vs " + std::to_string(labels.size()) +
                                    " labels");
    }
    if (predictions.empty()) throw std::invalid_argument("bce_loss: empty input");
    double total = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double p = clamp_prob(predictions[i], clamp_eps);
        total += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(predictions.size());
}

std::pair<double, GradientSet> compute_gradients(const RuleSet& rs, const Matrix& batch,
                                                 const std::vector<int>& labels,
                                                 const SoftConfig& cfg) {
    require_valid(rs);
    check_batch(rs, batch);
    check_soft_config(cfg);
    if (static_cast<size_t>(batch.rows()) != labels.size()) {
        throw std::invalid_argument("compute_gradients: batch rows and labels differ");
    }
    if (batch.rows() == 0) throw std::invalid_argument("compute_gradients: empty batch");

    GradientSet grads;
    grads.weight_grads.reserve(rs.rules.size());
    grads.bias_grads.reserve(rs.rules.size());
    for (const Rule& rule : rs.rules) {
        grads.weight_grads.emplace_back(rule.num_conditions(), rs.num_features);
        grads.bias_grads.emplace_back(rule.num_conditions(), 0.0);
    }

    const SparseStructure sparse(rs);
    ForwardScratch s;
    s.resize(rs);
    const double k = cfg.temperature;
    const int n = batch.rows();
    const double inv_n = 1.0 / n;
    double total_loss = 0.0;

    // Samples accumulate in index order so gradients are deterministic.
    for (int i = 0; i < n; ++i) {
        const double* x = batch.row(i);
        const double p = soft_sample(rs, sparse, x, k, s);
        const double p_clamped = clamp_prob(p, cfg.clamp_eps);
        total_loss += labels[i] == 1 ? -std::log(p_clamped) : -std::log(1.0 - p_clamped);

        // d(mean loss)/dp, zero where the clamp is active.
        double dldp = 0.0;
        if (p > cfg.clamp_eps && p < 1.0 - cfg.clamp_eps) {
            dldp = (labels[i] == 1 ? -1.0 / p_clamped : 1.0 / (1.0 - p_clamped)) * inv_n;
        }
        if (dldp == 0.0) continue;

        for (int r = 0; r < rs.num_rules(); ++r) {
            const Rule& rule = rs.rules[r];
            const double c_r = rule.class_label == 1 ? 1.0 : 0.0;
            const double dpda_rule = s.prefix[r] * (c_r - s.suffix[r + 1]);
            const double dld_rule = dldp * dpda_rule;
            if (dld_rule == 0.0) continue;
            const int c_count = rule.num_conditions();
            for (int c = 0; c < c_count; ++c) {
                // product of the other conditions' activations
                double others = 1.0;
                for (int c2 = 0; c2 < c_count; ++c2) {
                    if (c2 != c) others *= s.activations[r][c2];
                }
                const double a = s.activations[r][c];
                const double dmargin = dld_rule * others * k * a * (1.0 - a);
                if (!rule.bias_frozen[c]) grads.bias_grads[r][c] += dmargin;
                for (int f : sparse.features[r][c]) {
                    grads.weight_grads[r](c, f) += dmargin * x[f];
                }
            }
        }
    }

    const double loss = total_loss * inv_n;
    if (!std::isfinite(loss)) throw NumericError("compute_gradients: non-finite loss");
    return {loss, std::move(grads)};
}

namespace {

/// One trainable coefficient: a masked weight, or (feature == -1) an
/// unfrozen bias.
struct FreeCoordinate {
    int rule = 0;
    int condition = 0;
    int feature = -1;
};

std::vector<FreeCoordinate> free_coordinates(const RuleSet& rs) {
    std::vector<FreeCoordinate> coords;
    for (int r = 0; r < rs.num_rules(); ++r) {
        const Rule& rule = rs.rules[r];
        for (int c = 0; c < rule.num_conditions(); ++c) {
            for (int f = 0; f < rs.num_features; ++f) {
                if (rule.weight_mask(c, f)) coords.push_back({r, c, f});
            }
            if (!rule.bias_frozen[c]) coords.push_back({r, c, -1});
        }
    }
    return coords;
}

double& coordinate(RuleSet& rs, const FreeCoordinate& fc) {
    Rule& rule = rs.rules[fc.rule];
    return fc.feature >= 0 ? rule.weights(fc.condition, fc.feature) : rule.biases[fc.condition];
}

double gradient_entry(const GradientSet& g, const FreeCoordinate& fc) {
    return fc.feature >= 0 ? g.weight_grads[fc.rule](fc.condition, fc.feature)
                           : g.bias_grads[fc.rule][fc.condition];
}

}  // namespace

double gradient_check(const RuleSet& rs, const Matrix& batch, const std::vector<int>& labels,
                      const SoftConfig& cfg, double eps) {
    const auto coords = free_coordinates(rs);
    if (coords.empty()) return 0.0;

    const auto [loss, grads] = compute_gradients(rs, batch, labels, cfg);
    (void)loss;

    RuleSet probe = rs;
    double max_rel_error = 0.0;
    for (const FreeCoordinate& fc : coords) {
        double& theta = coordinate(probe, fc);
        const double saved = theta;
        theta = saved + eps;
        const double loss_hi = bce_loss(soft_forward(probe, batch, cfg.temperature), labels,
                                        cfg.clamp_eps);
        theta = saved - eps;
        const double loss_lo = bce_loss(soft_forward(probe, batch, cfg.temperature), labels,
                                        cfg.clamp_eps);
        theta = saved;

        const double numeric = (loss_hi - loss_lo) / (2.0 * eps);
        const double analytic = gradient_entry(grads, fc);
        const double rel = std::fabs(analytic - numeric) /
                           std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
        max_rel_error = std::max(max_rel_error, rel);
    }
    return max_rel_error;
}

FineTuneResult fine_tune(const RuleSet& rs, const Dataset& train, const SoftConfig& cfg,
                         bool record_history) {
    require_valid(rs);
    check_soft_config(cfg);
    if (train.num_samples() == 0) throw std::invalid_argument("fine_tune: empty training set");

    FineTuneResult result;
    result.tuned = rs;
    const auto coords = free_coordinates(result.tuned);

    // Adam moment estimates, indexed like coords.
    std::vector<double> m(coords.size(), 0.0), v(coords.size(), 0.0);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kStabilizer = 1e-8;

    const EvalContext eval_ctx{Backend::batched, 0};
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss = 0.0;
        GradientSet grads;
        try {
            std::tie(loss, grads) = compute_gradients(result.tuned, train.features, train.labels, cfg);
        } catch (const NumericError&) {
            result.diverged_at = epoch;
            break;
        }

        bool finite = std::isfinite(loss);
        for (size_t j = 0; finite && j < coords.size(); ++j) {
            finite = std::isfinite(gradient_entry(grads, coords[j]));
        }
        if (!finite) {
            result.diverged_at = epoch;
            break;
        }

        if (cfg.optimizer == Optimizer::gradient_descent) {
            for (size_t j = 0; j < coords.size(); ++j) {
                coordinate(result.tuned, coords[j]) -=
                    cfg.learning_rate * gradient_entry(grads, coords[j]);
            }
        } else {
            const double t = epoch + 1;
            const double bias_fix1 = 1.0 - std::pow(kBeta1, t);
            const double bias_fix2 = 1.0 - std::pow(kBeta2, t);
            for (size_t j = 0; j < coords.size(); ++j) {
                const double g = gradient_entry(grads, coords[j]);
                m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g;
                v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g * g;
                const double m_hat = m[j] / bias_fix1;
                const double v_hat = v[j] / bias_fix2;
                coordinate(result.tuned, coords[j]) -=
                    cfg.learning_rate * m_hat / (std::sqrt(v_hat) + kStabilizer);
            }
        }

        for (size_t j = 0; j < coords.size(); ++j) {
            if (!std::isfinite(coordinate(result.tuned, coords[j]))) {
                result.diverged_at = epoch;
                break;
            }
        }
        if (result.diverged()) break;

        if (record_history) {
            result.history.push_back(
                {epoch + 1, loss, evaluate_accuracy(result.tuned, train, eval_ctx)});
        }
    }
    return result;
}

}  // namespace ruletensor
