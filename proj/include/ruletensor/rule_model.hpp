#pragma once

#include <array>
#include <string>
#include <vector>

#include "ruletensor/matrix.hpp"

namespace ruletensor {

/// One conjunctive rule in tensor form. Row c of `weights` holds condition
/// c's feature coefficients; condition c is true for sample x iff
/// weights.row(c) . x + biases[c] > 0 (strictly).
///
/// `weight_mask` is the logical structure: coefficients may only be nonzero
/// (and may only be trained) where the mask is set. A frozen bias is fixed
/// at its creation value, which is always 0 — it marks a feature-to-feature
/// comparison that has no constant term.
struct Rule {
    Matrix weights;                    // C x F
    std::vector<double> biases;        // C
    Mask weight_mask;                  // C x F
    std::vector<uint8_t> bias_frozen;  // C
    int class_label = 0;

    int num_conditions() const { return weights.rows(); }
    bool operator==(const Rule&) const = default;
};

/// Ordered rule list plus a default class: the evolvable genome and the
/// evaluable model. Inference is first-match — the prediction is the class
/// of the earliest rule whose conditions all hold, else default_class.
struct RuleSet {
    std::vector<Rule> rules;
    int default_class = 0;
    int num_features = 0;

    int num_rules() const { return static_cast<int>(rules.size()); }
    int total_conditions() const {
        int n = 0;
        for (const auto& r : rules) n += r.num_conditions();
        return n;
    }
    bool operator==(const RuleSet&) const = default;
};

/// Every violated invariant, with rule/condition indices in the message.
/// Empty means the rule set is valid.
std::vector<std::string> validate_ruleset(const RuleSet& rs);

/// Throws std::invalid_argument listing all violations.
void require_valid(const RuleSet& rs);

/// The logical form of a rule set, independent of coefficient values:
/// rule order, classes, which features each condition uses, which biases
/// are frozen. Fine-tuning must leave this unchanged.
struct StructureSignature {
    struct RuleSig {
        int class_label = 0;
        std::vector<std::vector<int>> condition_features;  // sorted masked indices
        std::vector<uint8_t> bias_frozen;
        bool operator==(const RuleSig&) const = default;
    };
    int num_features = 0;
    std::vector<RuleSig> rules;
    bool operator==(const StructureSignature&) const = default;
};

StructureSignature structure_signature(const RuleSet& rs);

/// Address of one trainable coefficient: a masked weight, or (feature == -1)
/// an unfrozen bias.
struct CoefficientRef {
    int rule = 0;
    int condition = 0;
    int feature = -1;

    bool operator==(const CoefficientRef&) const = default;
};

/// Every trainable coefficient, in (rule, condition, weights-then-bias) order.
std::vector<CoefficientRef> free_coefficients(const RuleSet& rs);

double& coefficient(RuleSet& rs, const CoefficientRef& ref);
double coefficient(const RuleSet& rs, const CoefficientRef& ref);

/// Class display names, indexed by class label: [0] negative, [1] positive.
using ClassNames = std::array<std::string, 2>;

struct PrintOptions {
    /// Significant digits for thresholds/coefficients; 0 = shortest decimal
    /// that round-trips exactly.
    int precision = 0;
};

/// Parses the readable rule grammar:
///
///   ruleset   := rule_line+ [default_line]
///   rule_line := INDEX '.' clause ('&' clause)* '->' CLASSNAME [',']
///   clause    := '(' ['-'] FEATURE '>' NUMBER ['×'|'*' FEATURE] ')'
///
/// '->' may also be written '⟶', '×' as '*'. Feature names may contain
/// spaces and are matched greedily (longest name first) against
/// feature_names. Encoding: `[-]a > K` gives the lead feature weight ±1 and
/// bias -K; `[-]a > K × b` gives lead weight ±1, weight -K on b, and a
/// frozen zero bias. The default class is taken from the optional trailing
/// "default -> CLASSNAME" line, else from the default_class argument.
///
/// Throws DataError naming line and offset on malformed input.
RuleSet parse_ruleset(const std::string& text, const std::vector<std::string>& feature_names,
                      int default_class, const ClassNames& class_names);

/// Renders the rule set in the same grammar, one numbered rule per block and
/// one condition per line. Each condition is normalized so the lead
/// coefficient (lowest masked feature index) has magnitude 1: the whole
/// inequality is divided by |lead weight|, preserving its sign. An empty
/// rule set prints only the default-class line.
std::string print_ruleset(const RuleSet& rs, const std::vector<std::string>& feature_names,
                          const ClassNames& class_names, const PrintOptions& opts = {});

/// Lossless, versioned JSON round-trip of every field including masks and
/// frozen flags.
std::string serialize_ruleset(const RuleSet& rs);
RuleSet deserialize_ruleset(const std::string& bytes);

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

}  // namespace ruletensor
