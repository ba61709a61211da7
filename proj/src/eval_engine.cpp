#include "ruletensor/eval_engine.hpp"

#include <stdexcept>

#include "ruletensor/errors.hpp"
#include "ruletensor/thread_pool.hpp"

namespace ruletensor {

Backend backend_from_name(const std::string& name) {
    if (name == "reference") return Backend::reference;
    if (name == "batched") return Backend::batched;
    if (name == "parallel") return Backend::parallel;
    throw ConfigError("unknown backend '" + name + "' (expected reference, batched or parallel)");
}

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::reference: return "reference";
        case Backend::batched: return "batched";
        case Backend::parallel: return "parallel";
    }
    return "?";
}

namespace {

/// Single accumulation-order-defining kernel shared by every backend:
/// start from the bias, add weight*feature in increasing feature order.
/// Keeping this the one definition is what makes cross-backend margins
/// bit-identical.
inline double condition_margin(const double* w, double bias, const double* x, int num_features) {
    double m = bias;
    for (int f = 0; f < num_features; ++f) m += w[f] * x[f];
    return m;
}

void check_batch(const RuleSet& rs, const Matrix& batch) {
    if (batch.rows() > 0 && batch.cols() != rs.num_features) {
        throw std::invalid_argument("batch has " + std::to_string(batch.cols()) +
                                    " feature columns, rule set expects " +
                                    std::to_string(rs.num_features));
    }
}

/// Rule set flattened to contiguous tensors: one (total_conditions x F)
/// weight matrix, bias vector, and per-rule condition ranges. Built once per
/// call and amortized over the whole batch.
struct FlatRuleSet {
    Matrix weights;  // total_conditions x F
    std::vector<double> biases;
    std::vector<int> rule_offset;  // per rule, first condition row
    std::vector<int> rule_count;
    std::vector<int> rule_class;
    int num_features = 0;
    int default_class = 0;

    explicit FlatRuleSet(const RuleSet& rs)
        : num_features(rs.num_features), default_class(rs.default_class) {
        const int total = rs.total_conditions();
        weights = Matrix(total, rs.num_features);
        biases.reserve(total);
        int row = 0;
        for (const Rule& rule : rs.rules) {
            rule_offset.push_back(row);
            rule_count.push_back(rule.num_conditions());
            rule_class.push_back(rule.class_label);
            for (int c = 0; c < rule.num_conditions(); ++c) {
                for (int f = 0; f < rs.num_features; ++f) {
                    weights(row, f) = rule.weights(c, f);
                }
                biases.push_back(rule.biases[c]);
                ++row;
            }
        }
    }

    int num_rules() const { return static_cast<int>(rule_offset.size()); }
    int total_conditions() const { return weights.rows(); }
};

// --- REFERENCE: scalar interpreter, sample by sample ----------------------
// Walks the rule structures directly and evaluates the full margin tensor
// for each sample before resolving first-match, so all backends perform the
// same arithmetic and differ only in execution strategy.

void reference_margins(const RuleSet& rs, const Matrix& batch, MarginTensor& out) {
    for (int i = 0; i < batch.rows(); ++i) {
        const double* x = batch.row(i);
        for (int r = 0; r < rs.num_rules(); ++r) {
            const Rule& rule = rs.rules[r];
            for (int c = 0; c < rule.num_conditions(); ++c) {
                out[r](i, c) =
                    condition_margin(rule.weights.row(c), rule.biases[c], x, rs.num_features);
            }
        }
    }
}

void reference_predict(const RuleSet& rs, const Matrix& batch, std::vector<int>& out) {
    for (int i = 0; i < batch.rows(); ++i) {
        const double* x = batch.row(i);
        int predicted = rs.default_class;
        bool decided = false;
        for (const Rule& rule : rs.rules) {
            bool fires = true;
            for (int c = 0; c < rule.num_conditions(); ++c) {
                const double m =
                    condition_margin(rule.weights.row(c), rule.biases[c], x, rs.num_features);
                if (!(m > 0.0)) fires = false;
            }
            if (fires && !decided) {
                predicted = rule.class_label;
                decided = true;
            }
        }
        out[i] = predicted;
    }
}

// --- BATCHED: flattened tensors, condition-major over the whole range -----

void batched_margins_range(const FlatRuleSet& flat, const Matrix& batch, int64_t begin,
                           int64_t end, MarginTensor& out) {
    for (int r = 0; r < flat.num_rules(); ++r) {
        Matrix& rule_out = out[r];
        for (int c = 0; c < flat.rule_count[r]; ++c) {
            const int row = flat.rule_offset[r] + c;
            const double* w = flat.weights.row(row);
            const double bias = flat.biases[row];
            for (int64_t i = begin; i < end; ++i) {
                rule_out(static_cast<int>(i), c) =
                    condition_margin(w, bias, batch.row(static_cast<int>(i)), flat.num_features);
            }
        }
    }
}

void batched_predict_range(const FlatRuleSet& flat, const Matrix& batch, int64_t begin,
                           int64_t end, std::vector<int>& out,
                           std::vector<uint8_t>& fires_scratch) {
    const int total = flat.total_conditions();
    // fires_scratch holds one byte per (sample, condition) of this range.
    for (int j = 0; j < total; ++j) {
        const double* w = flat.weights.row(j);
        const double bias = flat.biases[j];
        uint8_t* dst = fires_scratch.data() + static_cast<size_t>(j) * (end - begin);
        for (int64_t i = begin; i < end; ++i) {
            dst[i - begin] =
                condition_margin(w, bias, batch.row(static_cast<int>(i)), flat.num_features) > 0.0;
        }
    }
    for (int64_t i = begin; i < end; ++i) {
        int predicted = flat.default_class;
        for (int r = 0; r < flat.num_rules(); ++r) {
            bool fires = true;
            const int offset = flat.rule_offset[r];
            for (int c = 0; c < flat.rule_count[r]; ++c) {
                fires &= fires_scratch[static_cast<size_t>(offset + c) * (end - begin) +
                                       (i - begin)] != 0;
            }
            if (fires) {
                predicted = flat.rule_class[r];
                break;
            }
        }
        out[i] = predicted;
    }
}

int resolve_chunks(const EvalContext& ctx) {
    if (ctx.backend != Backend::parallel) return 1;
    return ctx.threads > 0 ? ctx.threads : ThreadPool::instance().executor_count();
}

}  // namespace

MarginTensor condition_margins(const RuleSet& rs, const Matrix& batch, const EvalContext& ctx) {
    check_batch(rs, batch);
    MarginTensor out;
    out.reserve(rs.rules.size());
    for (const Rule& rule : rs.rules) out.emplace_back(batch.rows(), rule.num_conditions());
    if (batch.rows() == 0) return out;

    if (ctx.backend == Backend::reference) {
        reference_margins(rs, batch, out);
        return out;
    }
    const FlatRuleSet flat(rs);
    if (ctx.backend == Backend::batched) {
        batched_margins_range(flat, batch, 0, batch.rows(), out);
    } else {
        ThreadPool::instance().parallel_ranges(
            batch.rows(), resolve_chunks(ctx),
            [&](int64_t begin, int64_t end) { batched_margins_range(flat, batch, begin, end, out); });
    }
    return out;
}

std::vector<int> hard_predict(const RuleSet& rs, const Matrix& batch, const EvalContext& ctx) {
    check_batch(rs, batch);
    std::vector<int> out(batch.rows(), rs.default_class);
    if (batch.rows() == 0 || rs.rules.empty()) return out;

    if (ctx.backend == Backend::reference) {
        reference_predict(rs, batch, out);
        return out;
    }
    const FlatRuleSet flat(rs);
    if (ctx.backend == Backend::batched) {
        std::vector<uint8_t> scratch(static_cast<size_t>(flat.total_conditions()) * batch.rows());
        batched_predict_range(flat, batch, 0, batch.rows(), out, scratch);
    } else {
        ThreadPool::instance().parallel_ranges(
            batch.rows(), resolve_chunks(ctx), [&](int64_t begin, int64_t end) {
                std::vector<uint8_t> scratch(static_cast<size_t>(flat.total_conditions()) *
                                             (end - begin));
                batched_predict_range(flat, batch, begin, end, out, scratch);
            });
    }
    return out;
}

double evaluate_accuracy(const RuleSet& rs, const Dataset& d, const EvalContext& ctx) {
    if (d.num_samples() == 0) throw std::invalid_argument("evaluate_accuracy: empty dataset");
    const std::vector<int> predicted = hard_predict(rs, d.features, ctx);
    int correct = 0;
    for (int i = 0; i < d.num_samples(); ++i) correct += predicted[i] == d.labels[i];
    return static_cast<double>(correct) / d.num_samples();
}

}  // namespace ruletensor
