#include "ruletensor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "ruletensor/errors.hpp"
#include "ruletensor/rng.hpp"

namespace ruletensor {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_finite(const std::string& cell, double& out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') return false;
    return std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_label) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file, expected a header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split_line(line);
    std::set<std::string> seen;
    for (const auto& name : header) {
        if (name.empty()) throw DataError(path + ": empty column name in header");
        if (!seen.insert(name).second) throw DataError(path + ": duplicate header column '" + name + "'");
    }
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end())
        throw DataError(path + ": label column '" + label_column + "' not found in header");
    const int label_idx = static_cast<int>(label_it - header.begin());
    const int num_cols = static_cast<int>(header.size());
    const int num_features = num_cols - 1;
    if (num_features < 1) throw DataError(path + ": no feature columns besides the label");

    std::vector<std::string> feature_names;
    feature_names.reserve(num_features);
    for (int c = 0; c < num_cols; ++c) {
        if (c != label_idx) feature_names.push_back(header[c]);
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::set<std::string> observed_labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (static_cast<int>(cells.size()) != num_cols) {
            throw DataError(path + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(num_cols));
        }
        for (int c = 0; c < num_cols; ++c) {
            if (c == label_idx) continue;
            double v = 0.0;
            if (!parse_finite(cells[c], v)) {
                throw DataError(path + ": line " + std::to_string(line_no) + ", column '" +
                                header[c] + "': cell '" + cells[c] +
                                "' is not a finite number");
            }
            values.push_back(v);
        }
        const std::string& label = cells[label_idx];
        observed_labels.insert(label);
        if (observed_labels.size() > 2) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": label '" + label +
                            "' is a third distinct class; exactly two are supported");
        }
        labels.push_back(label == positive_label ? 1 : 0);
    }

    const int n = static_cast<int>(labels.size());
    if (n == 0) throw DataError(path + ": no data rows");
    if (observed_labels.size() == 2 && observed_labels.count(positive_label) == 0) {
        throw DataError(path + ": positive label '" + positive_label +
                        "' never occurs; observed classes are '" + *observed_labels.begin() +
                        "' and '" + *std::next(observed_labels.begin()) + "'");
    }

    Dataset d;
    d.features = Matrix(n, num_features);
    std::copy(values.begin(), values.end(), d.features.data().begin());
    d.labels = std::move(labels);
    d.feature_names = std::move(feature_names);
    return d;
}

Dataset standardize(const Dataset& raw, const NormStats* stats_from) {
    const int n = raw.num_samples();
    const int f = raw.num_features();
    if (stats_from && stats_from->size() != f) {
        throw std::invalid_argument("standardize: stats_from has " +
                                    std::to_string(stats_from->size()) + " entries, dataset has " +
                                    std::to_string(f) + " features");
    }

    NormStats stats;
    if (stats_from) {
        stats = *stats_from;
    } else {
        stats.mean.resize(f);
        stats.stddev.resize(f);
        for (int c = 0; c < f; ++c) {
            double sum = 0.0;
            for (int r = 0; r < n; ++r) sum += raw.features(r, c);
            const double mean = sum / n;
            double sq = 0.0;
            for (int r = 0; r < n; ++r) {
                const double d = raw.features(r, c) - mean;
                sq += d * d;
            }
            const double sd = std::sqrt(sq / n);
            stats.mean[c] = mean;
            stats.stddev[c] = sd == 0.0 ? 1.0 : sd;
        }
    }

    Dataset out;
    out.features = Matrix(n, f);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < f; ++c) {
            out.features(r, c) = (raw.features(r, c) - stats.mean[c]) / stats.stddev[c];
        }
    }
    out.labels = raw.labels;
    out.feature_names = raw.feature_names;
    out.norm_stats = std::move(stats);
    return out;
}

namespace {

Dataset take_rows(const Dataset& d, const std::vector<int>& rows) {
    Dataset out;
    out.features = Matrix(static_cast<int>(rows.size()), d.num_features());
    out.labels.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < d.num_features(); ++c) {
            out.features(static_cast<int>(i), c) = d.features(rows[i], c);
        }
        out.labels.push_back(d.labels[rows[i]]);
    }
    out.feature_names = d.feature_names;
    out.norm_stats = d.norm_stats;
    return out;
}

}  // namespace

Split stratified_split(const Dataset& d, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must be in (0, 1), got " + std::to_string(train_fraction));
    }
    std::vector<int> by_class[2];
    for (int r = 0; r < d.num_samples(); ++r) by_class[d.labels[r]].push_back(r);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < 2) {
            throw DataError("stratified split needs at least 2 samples of class " +
                            std::to_string(c) + ", got " + std::to_string(by_class[c].size()));
        }
    }

    Rng rng = Rng::substream(seed, "split");
    SplitIndices idx;
    for (int c = 0; c < 2; ++c) {
        std::vector<int>& rows = by_class[c];
        for (int i = static_cast<int>(rows.size()) - 1; i > 0; --i) {
            std::swap(rows[i], rows[rng.index(i + 1)]);
        }
        const int n_c = static_cast<int>(rows.size());
        int n_train = static_cast<int>(std::llround(train_fraction * n_c));
        n_train = std::clamp(n_train, 1, n_c - 1);
        idx.train.insert(idx.train.end(), rows.begin(), rows.begin() + n_train);
        idx.test.insert(idx.test.end(), rows.begin() + n_train, rows.end());
    }
    std::sort(idx.train.begin(), idx.train.end());
    std::sort(idx.test.begin(), idx.test.end());

    Split split;
    split.train = take_rows(d, idx.train);
    split.test = take_rows(d, idx.test);
    split.indices = std::move(idx);
    return split;
}

Dataset select_features(const Dataset& d, const std::vector<std::string>& names) {
    std::vector<int> cols;
    cols.reserve(names.size());
    for (const auto& name : names) {
        const auto it = std::find(d.feature_names.begin(), d.feature_names.end(), name);
        if (it == d.feature_names.end()) throw DataError("unknown feature '" + name + "'");
        cols.push_back(static_cast<int>(it - d.feature_names.begin()));
    }
    Dataset out;
    out.features = Matrix(d.num_samples(), static_cast<int>(cols.size()));
    for (int r = 0; r < d.num_samples(); ++r) {
        for (size_t j = 0; j < cols.size(); ++j) {
            out.features(r, static_cast<int>(j)) = d.features(r, cols[j]);
        }
    }
    out.labels = d.labels;
    out.feature_names = names;
    if (!d.norm_stats.empty()) {
        for (int c : cols) {
            out.norm_stats.mean.push_back(d.norm_stats.mean[c]);
            out.norm_stats.stddev.push_back(d.norm_stats.stddev[c]);
        }
    }
    return out;
}

int majority_class(const Dataset& d) {
    int ones = 0;
    for (int y : d.labels) ones += y;
    const int zeros = d.num_samples() - ones;
    return ones > zeros ? 1 : 0;
}

std::string format_split_manifest(const SplitIndices& idx, double train_fraction, uint64_t seed) {
    std::ostringstream os;
    os << "seed = " << seed << "\n";
    os << "fraction = " << train_fraction << "\n";
    os << "[train]\n";
    for (int r : idx.train) os << r << "\n";
    os << "[test]\n";
    for (int r : idx.test) os << r << "\n";
    return os.str();
}

}  // namespace ruletensor
