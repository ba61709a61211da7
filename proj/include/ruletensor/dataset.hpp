#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ruletensor/matrix.hpp"

namespace ruletensor {

/// Per-feature mean/stddev of the raw training data. Empty until
/// standardize() has run.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    bool empty() const { return mean.empty(); }
    int size() const { return static_cast<int>(mean.size()); }
    bool operator==(const NormStats&) const = default;
};

/// Labeled tabular data. Immutable after construction; share freely across
/// threads.
struct Dataset {
    Matrix features;                         // N x F
    std::vector<int> labels;                 // {0,1}, length N
    std::vector<std::string> feature_names;  // F
    NormStats norm_stats;                    // stats the features were standardized with

    int num_samples() const { return features.rows(); }
    int num_features() const { return features.cols(); }
};

/// Reads a headered CSV. Every column except label_column becomes a feature,
/// in header order. Rows whose label equals positive_label get label 1, the
/// other observed class gets 0. Throws DataError on malformed input, naming
/// the offending line and column.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_label);

/// Z-scores each column: (x - mean) / stddev with population stddev.
/// With stats_from (the test-set path) the provided statistics are applied
/// unchanged; otherwise they are computed from `raw`. Constant columns map
/// to all-zeros and store stddev 1.
Dataset standardize(const Dataset& raw, const NormStats* stats_from = nullptr);

struct SplitIndices {
    std::vector<int> train;  // sorted row indices
    std::vector<int> test;
};

struct Split {
    Dataset train;
    Dataset test;
    SplitIndices indices;
};

/// Deterministic stratified split: per-class shuffles driven by `seed`, train
/// takes round(fraction * class_count) of each class (at least one sample per
/// class on each side). Row order within each split follows the original.
Split stratified_split(const Dataset& d, double train_fraction, uint64_t seed);

/// Projects the dataset onto the named columns, in the given order.
Dataset select_features(const Dataset& d, const std::vector<std::string>& names);

/// Most frequent label; ties go to 0.
int majority_class(const Dataset& d);

/// Replay record for a split: seed, fraction, and the sorted row indices of
/// each side, one per line.
std::string format_split_manifest(const SplitIndices& idx, double train_fraction, uint64_t seed);

}  // namespace ruletensor
