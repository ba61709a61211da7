#pragma once

#include <string>
#include <vector>

#include "ruletensor/dataset.hpp"
#include "ruletensor/rule_model.hpp"

namespace ruletensor {

/// Interchangeable evaluation strategies. All three satisfy the same
/// contract and produce bit-identical margins: every backend accumulates
/// each condition margin in the same feature-index order, and PARALLEL
/// partitions by sample only, never by condition.
enum class Backend {
    reference,  // per-sample, per-condition scalar interpreter
    batched,    // single-threaded flattened-tensor evaluation over the batch
    parallel,   // batched evaluation partitioned over samples
};

Backend backend_from_name(const std::string& name);
std::string backend_name(Backend b);

struct EvalContext {
    Backend backend = Backend::batched;
    int threads = 0;  // PARALLEL only; 0 = hardware default
};

/// Per rule, a (batch x conditions) matrix of margins m = w.x + b.
using MarginTensor = std::vector<Matrix>;

MarginTensor condition_margins(const RuleSet& rs, const Matrix& batch, const EvalContext& ctx);

/// First-match inference: a condition holds iff its margin is strictly
/// positive, a rule fires iff all its conditions hold, and each sample gets
/// the class of the first firing rule, else the default class.
std::vector<int> hard_predict(const RuleSet& rs, const Matrix& batch, const EvalContext& ctx);

/// Fraction of samples where hard_predict matches the label.
double evaluate_accuracy(const RuleSet& rs, const Dataset& d, const EvalContext& ctx);

}  // namespace ruletensor
