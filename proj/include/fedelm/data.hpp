#pragma once

#include <string>
#include <vector>

#include "fedelm/matrix.hpp"

namespace fedelm {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabeledDataset {
    Matrix features;                  // rows x n
    std::vector<std::string> labels;  // one per row
    std::string name;

    std::vector<std::string> classes() const;
    // Row indices whose label equals `label`.
    std::vector<std::size_t> rows_with_label(const std::string& label) const;
    Matrix rows(const std::vector<std::size_t>& indices) const;
};

// Standard IDX files; pixels divided by 255 into [0,1], labels "0".."9".
LabeledDataset load_mnist(const std::string& images_path, const std::string& labels_path);

// 561-wide numeric rows plus activity ids 1-6 mapped to activity names.
LabeledDataset load_har(const std::string& features_path, const std::string& labels_path);

// One km/h sample per second, quantized to 15 levels of 10 km/h; the
// row-normalized 15x15 transition table flattened to 225 features.
Matrix driving_features(const std::vector<double>& speeds_kmh);

// Reads a plain one-value-per-line speed series and windows it.
LabeledDataset load_driving(const std::string& speeds_path, const std::string& label,
                            std::size_t window = 60);

// Deterministic Gaussian clusters (sigma 0.1, features clipped to [0,1],
// class means pairwise at least 3 sigma apart). Labels "c0", "c1", ...
LabeledDataset synth_clusters(std::size_t n_features, std::size_t n_classes,
                              std::size_t rows_per_class, std::uint64_t seed);

struct SplitDataset {
    LabeledDataset train;
    LabeledDataset test;
};

// Seeded shuffle + fraction split; test anomalies (rows whose label differs
// from `normal_label`) capped at anomaly_ratio_cap times the normal count.
SplitDataset split(const LabeledDataset& ds, const std::string& normal_label,
                   double train_fraction, double anomaly_ratio_cap, std::uint64_t seed);

}  // namespace fedelm
