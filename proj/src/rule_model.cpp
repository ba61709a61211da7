#include "ruletensor/rule_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ruletensor/errors.hpp"

namespace ruletensor {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace {

std::string format_double_prec(double x, int precision) {
    if (precision <= 0) return format_double(x);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
    return buf;
}

std::vector<int> masked_features(const Rule& rule, int c) {
    std::vector<int> out;
    for (int f = 0; f < rule.weights.cols(); ++f) {
        if (rule.weight_mask(c, f)) out.push_back(f);
    }
    return out;
}

}  // namespace

std::vector<std::string> validate_ruleset(const RuleSet& rs) {
    std::vector<std::string> violations;
    auto flag = [&](const std::string& msg) { violations.push_back(msg); };

    if (rs.num_features < 1) flag("num_features must be >= 1");
    if (rs.default_class != 0 && rs.default_class != 1) flag("default_class must be 0 or 1");

    for (int r = 0; r < rs.num_rules(); ++r) {
        const Rule& rule = rs.rules[r];
        const std::string where = "rule " + std::to_string(r);
        if (rule.class_label != 0 && rule.class_label != 1) flag(where + ": class must be 0 or 1");
        const int c_count = rule.weights.rows();
        if (c_count < 1) {
            flag(where + ": no conditions");
            continue;
        }
        if (rule.weights.cols() != rs.num_features)
            flag(where + ": weights have " + std::to_string(rule.weights.cols()) +
                 " columns, rule set has " + std::to_string(rs.num_features) + " features");
        if (rule.weight_mask.rows() != rule.weights.rows() ||
            rule.weight_mask.cols() != rule.weights.cols()) {
            flag(where + ": weight_mask shape differs from weights");
            continue;
        }
        if (static_cast<int>(rule.biases.size()) != c_count)
            flag(where + ": " + std::to_string(rule.biases.size()) + " biases for " +
                 std::to_string(c_count) + " conditions");
        if (static_cast<int>(rule.bias_frozen.size()) != c_count)
            flag(where + ": " + std::to_string(rule.bias_frozen.size()) + " frozen flags for " +
                 std::to_string(c_count) + " conditions");
        if (static_cast<int>(rule.biases.size()) != c_count ||
            static_cast<int>(rule.bias_frozen.size()) != c_count)
            continue;

        for (int c = 0; c < c_count; ++c) {
            const std::string at = where + " condition " + std::to_string(c);
            bool any_masked = false;
            for (int f = 0; f < rule.weights.cols(); ++f) {
                const double w = rule.weights(c, f);
                if (rule.weight_mask(c, f)) {
                    any_masked = true;
                } else if (w != 0.0) {
                    flag(at + " feature " + std::to_string(f) + ": unmasked nonzero weight " +
                         format_double(w));
                }
                if (!std::isfinite(w))
                    flag(at + " feature " + std::to_string(f) + ": non-finite weight");
            }
            if (!any_masked) flag(at + ": empty condition (no masked features)");
            if (!std::isfinite(rule.biases[c])) flag(at + ": non-finite bias");
            if (rule.bias_frozen[c] && rule.biases[c] != 0.0)
                flag(at + ": frozen bias must stay at its creation value 0, got " +
                     format_double(rule.biases[c]));
        }
    }
    return violations;
}

void require_valid(const RuleSet& rs) {
    const auto violations = validate_ruleset(rs);
    if (violations.empty()) return;
    std::string msg = "invalid rule set:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw std::invalid_argument(msg);
}

StructureSignature structure_signature(const RuleSet& rs) {
    StructureSignature sig;
    sig.num_features = rs.num_features;
    sig.rules.reserve(rs.rules.size());
    for (const Rule& rule : rs.rules) {
        StructureSignature::RuleSig rsig;
        rsig.class_label = rule.class_label;
        rsig.bias_frozen = rule.bias_frozen;
        for (int c = 0; c < rule.num_conditions(); ++c) {
            rsig.condition_features.push_back(masked_features(rule, c));
        }
        sig.rules.push_back(std::move(rsig));
    }
    return sig;
}

// ---------------------------------------------------------------------------
// Rule DSL parser
// ---------------------------------------------------------------------------

namespace {

// Multi-byte tokens the grammar accepts alongside their ASCII forms.
constexpr const char* kTimesUtf8 = "\xC3\x97";        // ×
constexpr const char* kArrowUtf8 = "\xE2\x9F\xB6";    // ⟶
constexpr const char* kMinusUtf8 = "\xE2\x88\x92";    // − (math minus)

class Cursor {
public:
    Cursor(const std::string& text, const std::vector<std::string>& feature_names)
        : text_(text) {
        // Longest name first so greedy matching prefers e.g.
        // "mean radius error" over "mean radius".
        by_length_.resize(feature_names.size());
        std::iota(by_length_.begin(), by_length_.end(), 0);
        std::stable_sort(by_length_.begin(), by_length_.end(), [&](int a, int b) {
            return feature_names[a].size() > feature_names[b].size();
        });
        names_ = &feature_names;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eof() {
        skip_ws();
        return pos_ >= text_.size();
    }

    [[noreturn]] void fail(const std::string& msg) const {
        size_t line = 1, col = 1;
        for (size_t i = 0; i < pos_ && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw DataError("rule text line " + std::to_string(line) + ", offset " +
                        std::to_string(col) + ": " + msg);
    }

    bool try_literal(const char* lit) {
        skip_ws();
        const size_t len = std::strlen(lit);
        if (text_.compare(pos_, len, lit) == 0) {
            pos_ += len;
            return true;
        }
        return false;
    }

    void expect(const char* lit, const char* what) {
        if (!try_literal(lit)) fail(std::string("expected '") + what + "'");
    }

    bool try_arrow() { return try_literal("->") || try_literal(kArrowUtf8); }
    bool try_times() { return try_literal("*") || try_literal(kTimesUtf8); }
    bool try_minus() { return try_literal("-") || try_literal(kMinusUtf8); }

    int parse_index() {
        skip_ws();
        size_t i = pos_;
        while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i;
        if (i == pos_) fail("expected a rule index");
        int value = 0;
        std::from_chars(text_.data() + pos_, text_.data() + i, value);
        pos_ = i;
        return value;
    }

    double parse_number() {
        skip_ws();
        double sign = 1.0;
        if (try_literal(kMinusUtf8)) sign = -1.0;
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("expected a number");
        if (!std::isfinite(v)) fail("non-finite number");
        pos_ += static_cast<size_t>(end - begin);
        return sign * v;
    }

    /// Greedy longest match against the configured feature names. A single
    /// space inside a name matches any whitespace run in the text.
    int parse_feature() {
        skip_ws();
        for (int idx : by_length_) {
            const std::string& name = (*names_)[idx];
            size_t p = pos_;
            bool ok = !name.empty();
            for (char ch : name) {
                if (ch == ' ') {
                    size_t q = p;
                    while (q < text_.size() &&
                           std::isspace(static_cast<unsigned char>(text_[q])))
                        ++q;
                    if (q == p) {
                        ok = false;
                        break;
                    }
                    p = q;
                } else if (p < text_.size() && text_[p] == ch) {
                    ++p;
                } else {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                pos_ = p;
                return idx;
            }
        }
        fail("unknown feature name");
    }

    int parse_class(const ClassNames& class_names) {
        skip_ws();
        const int first = class_names[0].size() >= class_names[1].size() ? 0 : 1;
        for (int cand : {first, 1 - first}) {
            if (text_.compare(pos_, class_names[cand].size(), class_names[cand]) == 0) {
                pos_ += class_names[cand].size();
                return cand;
            }
        }
        fail("expected a class name ('" + class_names[0] + "' or '" + class_names[1] + "')");
    }

    bool peek_is(char ch) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == ch;
    }

private:
    const std::string& text_;
    size_t pos_ = 0;
    const std::vector<std::string>* names_ = nullptr;
    std::vector<int> by_length_;
};

struct Clause {
    int lead_feature = 0;
    double lead_sign = 1.0;
    double threshold = 0.0;   // K in `lead > K` or `lead > K x other`
    int other_feature = -1;   // -1 for single-feature conditions
};

Clause parse_clause(Cursor& cur) {
    cur.expect("(", "(");
    Clause cl;
    cl.lead_sign = cur.try_minus() ? -1.0 : 1.0;
    cl.lead_feature = cur.parse_feature();
    cur.expect(">", ">");
    cl.threshold = cur.parse_number();
    if (cur.try_times()) {
        cl.other_feature = cur.parse_feature();
        if (cl.other_feature == cl.lead_feature) {
            cur.fail("duplicate feature within one condition");
        }
    }
    cur.expect(")", ")");
    return cl;
}

Rule build_rule(const std::vector<Clause>& clauses, int num_features, int class_label) {
    const int c_count = static_cast<int>(clauses.size());
    Rule rule;
    rule.weights = Matrix(c_count, num_features);
    rule.weight_mask = Mask(c_count, num_features);
    rule.biases.assign(c_count, 0.0);
    rule.bias_frozen.assign(c_count, 0);
    rule.class_label = class_label;
    for (int c = 0; c < c_count; ++c) {
        const Clause& cl = clauses[c];
        rule.weights(c, cl.lead_feature) = cl.lead_sign;
        rule.weight_mask(c, cl.lead_feature) = 1;
        if (cl.other_feature >= 0) {
            rule.weights(c, cl.other_feature) = -cl.threshold;
            rule.weight_mask(c, cl.other_feature) = 1;
            rule.bias_frozen[c] = 1;
        } else {
            rule.biases[c] = -cl.threshold;
        }
    }
    return rule;
}

}  // namespace

RuleSet parse_ruleset(const std::string& text, const std::vector<std::string>& feature_names,
                      int default_class, const ClassNames& class_names) {
    Cursor cur(text, feature_names);
    RuleSet rs;
    rs.num_features = static_cast<int>(feature_names.size());
    rs.default_class = default_class;

    bool saw_default_line = false;
    while (!cur.eof()) {
        if (saw_default_line) cur.fail("content after the default-class line");
        if (cur.try_literal("default")) {
            if (!cur.try_arrow()) cur.fail("expected '->' after 'default'");
            rs.default_class = cur.parse_class(class_names);
            saw_default_line = true;
            continue;
        }
        const int index = cur.parse_index();
        if (index != rs.num_rules() + 1) {
            cur.fail("rule index " + std::to_string(index) + ", expected " +
                     std::to_string(rs.num_rules() + 1));
        }
        cur.expect(".", ". after the rule index");

        std::vector<Clause> clauses;
        clauses.push_back(parse_clause(cur));
        while (cur.try_literal("&")) clauses.push_back(parse_clause(cur));
        if (!cur.try_arrow()) cur.fail("expected '&' or '->'");
        const int class_label = cur.parse_class(class_names);
        cur.try_literal(",");

        rs.rules.push_back(build_rule(clauses, rs.num_features, class_label));
    }
    if (rs.rules.empty() && !saw_default_line) cur.fail("expected at least one rule");
    require_valid(rs);
    return rs;
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

std::string condition_text(const Rule& rule, int c, const std::vector<std::string>& feature_names,
                           const PrintOptions& opts) {
    const std::vector<int> masked = masked_features(rule, c);
    if (masked.empty()) throw std::invalid_argument("cannot print an empty condition");
    if (masked.size() > 2) {
        throw std::invalid_argument("condition uses " + std::to_string(masked.size()) +
                                    " features; the rule grammar expresses at most two");
    }
    const int lead = masked[0];
    const double w_lead = rule.weights(c, lead);
    if (w_lead == 0.0) {
        throw std::invalid_argument("lead coefficient of a condition is zero; cannot normalize");
    }
    const double denom = std::fabs(w_lead);

    std::string out = "(";
    if (w_lead < 0.0) out += "-";
    out += feature_names[lead];
    out += " > ";
    if (masked.size() == 1) {
        out += format_double_prec(-rule.biases[c] / denom, opts.precision);
    } else {
        if (rule.biases[c] != 0.0) {
            throw std::invalid_argument(
                "two-feature condition with a nonzero bias cannot be expressed in the rule grammar");
        }
        const int other = masked[1];
        out += format_double_prec(-rule.weights(c, other) / denom, opts.precision);
        out += " ";
        out += kTimesUtf8;
        out += " ";
        out += feature_names[other];
    }
    out += ")";
    return out;
}

}  // namespace

std::string print_ruleset(const RuleSet& rs, const std::vector<std::string>& feature_names,
                          const ClassNames& class_names, const PrintOptions& opts) {
    require_valid(rs);
    if (static_cast<int>(feature_names.size()) != rs.num_features) {
        throw std::invalid_argument("print_ruleset: " + std::to_string(feature_names.size()) +
                                    " feature names for " + std::to_string(rs.num_features) +
                                    " features");
    }
    if (rs.rules.empty()) {
        return "default -> " + class_names[rs.default_class] + "\n";
    }
    std::string out;
    for (int r = 0; r < rs.num_rules(); ++r) {
        const Rule& rule = rs.rules[r];
        const std::string prefix = std::to_string(r + 1) + ". ";
        const std::string indent(prefix.size(), ' ');
        out += prefix;
        for (int c = 0; c < rule.num_conditions(); ++c) {
            if (c > 0) out += indent;
            out += condition_text(rule, c, feature_names, opts);
            out += (c + 1 < rule.num_conditions()) ? " &\n" : "";
        }
        out += " -> " + class_names[rule.class_label];
        out += (r + 1 < rs.num_rules()) ? ",\n" : "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

std::string serialize_ruleset(const RuleSet& rs) {
    nlohmann::json j;
    j["version"] = 1;
    j["num_features"] = rs.num_features;
    j["default_class"] = rs.default_class;
    nlohmann::json rules = nlohmann::json::array();
    for (const Rule& rule : rs.rules) {
        nlohmann::json jr;
        jr["class"] = rule.class_label;
        nlohmann::json weights = nlohmann::json::array();
        nlohmann::json mask = nlohmann::json::array();
        for (int c = 0; c < rule.num_conditions(); ++c) {
            nlohmann::json wrow = nlohmann::json::array();
            nlohmann::json mrow = nlohmann::json::array();
            for (int f = 0; f < rule.weights.cols(); ++f) {
                wrow.push_back(rule.weights(c, f));
                mrow.push_back(static_cast<bool>(rule.weight_mask(c, f)));
            }
            weights.push_back(std::move(wrow));
            mask.push_back(std::move(mrow));
        }
        jr["weights"] = std::move(weights);
        jr["weight_mask"] = std::move(mask);
        jr["biases"] = rule.biases;
        nlohmann::json frozen = nlohmann::json::array();
        for (uint8_t b : rule.bias_frozen) frozen.push_back(static_cast<bool>(b));
        jr["bias_frozen"] = std::move(frozen);
        rules.push_back(std::move(jr));
    }
    j["rules"] = std::move(rules);
    return j.dump(2) + "\n";
}

RuleSet deserialize_ruleset(const std::string& bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("rule file is not valid JSON: ") + e.what());
    }

    RuleSet rs;
    try {
        if (!j.is_object()) throw DataError("rule file: top level must be an object");
        if (!j.contains("version") || !j["version"].is_number_integer()) {
            throw DataError("rule file: missing integer 'version'");
        }
        const int version = j["version"].get<int>();
        if (version != 1) {
            throw DataError("rule file: unsupported version " + std::to_string(version) +
                            " (expected 1)");
        }
        rs.num_features = j.at("num_features").get<int>();
        rs.default_class = j.at("default_class").get<int>();
        for (const auto& jr : j.at("rules")) {
            Rule rule;
            rule.class_label = jr.at("class").get<int>();
            const auto& weights = jr.at("weights");
            const auto& mask = jr.at("weight_mask");
            const int c_count = static_cast<int>(weights.size());
            if (static_cast<int>(mask.size()) != c_count) {
                throw DataError("rule file: weight_mask row count differs from weights");
            }
            rule.weights = Matrix(c_count, rs.num_features);
            rule.weight_mask = Mask(c_count, rs.num_features);
            for (int c = 0; c < c_count; ++c) {
                const auto& wrow = weights[c];
                const auto& mrow = mask[c];
                if (static_cast<int>(wrow.size()) != rs.num_features ||
                    static_cast<int>(mrow.size()) != rs.num_features) {
                    throw DataError("rule file: condition row length differs from num_features");
                }
                for (int f = 0; f < rs.num_features; ++f) {
                    const double w = wrow[f].get<double>();
                    if (!std::isfinite(w)) throw DataError("rule file: non-finite weight");
                    rule.weights(c, f) = w;
                    rule.weight_mask(c, f) = mrow[f].get<bool>() ? 1 : 0;
                }
            }
            for (const auto& b : jr.at("biases")) {
                const double v = b.get<double>();
                if (!std::isfinite(v)) throw DataError("rule file: non-finite bias");
                rule.biases.push_back(v);
            }
            for (const auto& b : jr.at("bias_frozen")) {
                rule.bias_frozen.push_back(b.get<bool>() ? 1 : 0);
            }
            rs.rules.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("rule file schema violation: ") + e.what());
    }

    const auto violations = validate_ruleset(rs);
    if (!violations.empty()) {
        std::string msg = "rule file violates rule-set invariants:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw DataError(msg);
    }
    return rs;
}

}  // namespace ruletensor
