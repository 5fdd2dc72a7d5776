#pragma once

#include <optional>

#include "fedelm/oselm.hpp"

namespace fedelm {

class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Autoencoder wrapper: the model reconstructs its input and the
// reconstruction MSE is the anomaly score. Requires n_output == n_input
// and n_hidden < n_input.
struct AnomalyDetector {
    SlfnModel model;
    std::optional<double> threshold;
    // When set, train_normal skips samples whose loss exceeds the
    // threshold (high-loss data is assumed anomalous and rejected).
    bool reject_above_threshold = false;
};

AnomalyDetector make_detector(const SlfnModel& model);

// (1/n) sum (x_i - y_i)^2 over a single row.
double loss(const AnomalyDetector& detector, const Matrix& x);

// One sequential autoencoder step with t = x.
AnomalyDetector train_normal(const AnomalyDetector& detector, const Matrix& x);

struct AnomalyVerdict {
    bool anomalous = false;
    double score = 0.0;
};

AnomalyVerdict is_anomaly(const AnomalyDetector& detector, const Matrix& x);

}  // namespace fedelm
