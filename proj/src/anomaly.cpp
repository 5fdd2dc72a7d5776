#include "fedelm/anomaly.hpp"

namespace fedelm {

AnomalyDetector make_detector(const SlfnModel& model) {
    const Topology& t = model.topology;
    if (t.n_output != t.n_input) {
        throw DimensionError("autoencoder requires n_output == n_input");
    }
    if (t.n_hidden >= t.n_input) {
        throw DimensionError("autoencoder requires n_hidden < n_input");
    }
    return AnomalyDetector{model, std::nullopt, false};
}

double loss(const AnomalyDetector& detector, const Matrix& x) {
    if (x.rows() != 1) throw DimensionError("loss expects a single row");
    const Matrix y = predict(detector.model, x);
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double d = x(0, j) - y(0, j);
        s += d * d;
    }
    return s / static_cast<double>(x.cols());
}

AnomalyDetector train_normal(const AnomalyDetector& detector, const Matrix& x) {
    if (x.rows() != 1) throw DimensionError("train_normal expects a single row");
    if (detector.reject_above_threshold && detector.threshold &&
        loss(detector, x) > *detector.threshold) {
        return detector;
    }
    AnomalyDetector out = detector;
    out.model = update(detector.model, Chunk{x, x});
    return out;
}

AnomalyVerdict is_anomaly(const AnomalyDetector& detector, const Matrix& x) {
    if (!detector.threshold) {
        throw ConfigurationError("anomaly threshold is not set");
    }
    const double score = loss(detector, x);
    return AnomalyVerdict{score > *detector.threshold, score};
}

}  // namespace fedelm
