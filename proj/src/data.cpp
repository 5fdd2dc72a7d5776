#include "fedelm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace fedelm {

std::vector<std::string> LabeledDataset::classes() const {
    std::set<std::string> uniq(labels.begin(), labels.end());
    return {uniq.begin(), uniq.end()};
}

std::vector<std::size_t> LabeledDataset::rows_with_label(const std::string& label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) out.push_back(i);
    return out;
}

Matrix LabeledDataset::rows(const std::vector<std::size_t>& indices) const {
    Matrix out(indices.size(), features.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < features.cols(); ++j)
            out(i, j) = features(indices[i], j);
    return out;
}

// ---------------------------------------------------------------------------
// IDX / MNIST

static std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("unexpected end of file in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

LabeledDataset load_mnist(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError("cannot open " + images_path);
    if (read_be_u32(img, images_path) != 0x00000803u) {
        throw DataError("bad IDX image magic in " + images_path);
    }
    const std::uint32_t count = read_be_u32(img, images_path);
    const std::uint32_t rows = read_be_u32(img, images_path);
    const std::uint32_t cols = read_be_u32(img, images_path);
    const std::size_t n = static_cast<std::size_t>(rows) * cols;

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("cannot open " + labels_path);
    if (read_be_u32(lab, labels_path) != 0x00000801u) {
        throw DataError("bad IDX label magic in " + labels_path);
    }
    const std::uint32_t label_count = read_be_u32(lab, labels_path);
    if (label_count != count) {
        throw DataError("image/label count mismatch: " + std::to_string(count) + " vs " +
                        std::to_string(label_count));
    }

    LabeledDataset ds;
    ds.name = "mnist";
    ds.features = Matrix(count, n);
    std::vector<unsigned char> buf(n);
    for (std::uint32_t i = 0; i < count; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!img) throw DataError("truncated image data in " + images_path);
        for (std::size_t j = 0; j < n; ++j)
            ds.features(i, j) = static_cast<double>(buf[j]) / 255.0;
        const int c = lab.get();
        if (c < 0) throw DataError("truncated label data in " + labels_path);
        if (c > 9) throw DataError("label out of range: " + std::to_string(c));
        ds.labels.push_back(std::to_string(c));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// HAR

static const char* kActivityNames[6] = {
    "walking", "walking_upstairs", "walking_downstairs", "sitting", "standing", "laying"};

LabeledDataset load_har(const std::string& features_path, const std::string& labels_path) {
    std::ifstream feat(features_path);
    if (!feat) throw DataError("cannot open " + features_path);

    LabeledDataset ds;
    ds.name = "har";
    std::vector<double> values;
    std::string line;
    std::size_t row = 0;
    while (std::getline(feat, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream is(line);
        std::string tok;
        std::size_t col = 0;
        while (is >> tok) {
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
                values.push_back(v);
            } catch (const std::exception&) {
                throw DataError("non-numeric token '" + tok + "' at row " +
                                std::to_string(row + 1) + ", column " + std::to_string(col + 1));
            }
            ++col;
        }
        if (col != 561) {
            throw DataError("row " + std::to_string(row + 1) + " has width " +
                            std::to_string(col) + ", expected 561");
        }
        ++row;
    }
    ds.features = Matrix(row, 561, std::move(values));

    std::ifstream lab(labels_path);
    if (!lab) throw DataError("cannot open " + labels_path);
    int id = 0;
    while (lab >> id) {
        if (id < 1 || id > 6) throw DataError("unknown activity id " + std::to_string(id));
        ds.labels.push_back(kActivityNames[id - 1]);
    }
    if (ds.labels.size() != row) {
        throw DataError("feature/label row mismatch: " + std::to_string(row) + " vs " +
                        std::to_string(ds.labels.size()));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Driving transition table

Matrix driving_features(const std::vector<double>& speeds_kmh) {
    if (speeds_kmh.size() < 2) throw DataError("driving window needs at least 2 speed samples");
    constexpr std::size_t kLevels = 15;
    double counts[kLevels][kLevels] = {};
    auto level = [](double v) {
        const double clamped = std::clamp(v, 0.0, 149.999);
        return static_cast<std::size_t>(clamped / 10.0);
    };
    for (std::size_t i = 0; i + 1 < speeds_kmh.size(); ++i) {
        counts[level(speeds_kmh[i])][level(speeds_kmh[i + 1])] += 1.0;
    }
    Matrix row(1, kLevels * kLevels);
    for (std::size_t i = 0; i < kLevels; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < kLevels; ++j) total += counts[i][j];
        if (total > 0.0) {
            for (std::size_t j = 0; j < kLevels; ++j)
                row(0, i * kLevels + j) = counts[i][j] / total;
        }
    }
    return row;
}

LabeledDataset load_driving(const std::string& speeds_path, const std::string& label,
                            std::size_t window) {
    if (window < 2) throw DataError("window must be at least 2");
    std::ifstream in(speeds_path);
    if (!in) throw DataError("cannot open " + speeds_path);
    std::vector<double> speeds;
    double v = 0.0;
    while (in >> v) speeds.push_back(v);
    if (speeds.size() < window) {
        throw DataError("speed series shorter than one window (" + std::to_string(speeds.size()) +
                        " < " + std::to_string(window) + ")");
    }
    LabeledDataset ds;
    ds.name = "driving";
    const std::size_t n_rows = speeds.size() / window;
    ds.features = Matrix(n_rows, 225);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::vector<double> win(speeds.begin() + static_cast<std::ptrdiff_t>(r * window),
                                      speeds.begin() + static_cast<std::ptrdiff_t>((r + 1) * window));
        const Matrix feats = driving_features(win);
        for (std::size_t j = 0; j < 225; ++j) ds.features(r, j) = feats(0, j);
        ds.labels.push_back(label);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic clusters

LabeledDataset synth_clusters(std::size_t n_features, std::size_t n_classes,
                              std::size_t rows_per_class, std::uint64_t seed) {
    if (n_features < 2) throw DataError("synth_clusters needs at least 2 features");
    constexpr double kSigma = 0.1;
    std::mt19937_64 gen(seed);
    auto u01 = [&gen] { return static_cast<double>(gen() >> 11) * 0x1p-53; };
    // Box-Muller; deterministic given the seed.
    auto gauss = [&] {
        const double u1 = std::max(u01(), 1e-300);
        const double u2 = u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };

    // Re-draw means until every pair is at least 3 sigma apart.
    std::vector<std::vector<double>> means;
    while (means.size() < n_classes) {
        std::vector<double> mean(n_features);
        for (double& m : mean) m = u01();
        bool ok = true;
        for (const auto& other : means) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < n_features; ++j) {
                const double d = mean[j] - other[j];
                d2 += d * d;
            }
            if (std::sqrt(d2) < 3.0 * kSigma) {
                ok = false;
                break;
            }
        }
        if (ok) means.push_back(std::move(mean));
    }

    LabeledDataset ds;
    ds.name = "synth";
    ds.features = Matrix(n_classes * rows_per_class, n_features);
    std::size_t r = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t k = 0; k < rows_per_class; ++k, ++r) {
            for (std::size_t j = 0; j < n_features; ++j) {
                ds.features(r, j) = std::clamp(means[c][j] + kSigma * gauss(), 0.0, 1.0);
            }
            ds.labels.push_back("c" + std::to_string(c));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Split

SplitDataset split(const LabeledDataset& ds, const std::string& normal_label,
                   double train_fraction, double anomaly_ratio_cap, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw DataError("train_fraction must be in (0, 1)");
    }
    if (ds.rows_with_label(normal_label).empty()) {
        throw DataError("no rows labeled '" + normal_label + "' in dataset " + ds.name);
    }
    std::vector<std::size_t> order(ds.labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 gen(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[gen() % i]);
    }

    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
    std::vector<std::size_t> train_idx(order.begin(),
                                       order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_pool(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                                       order.end());

    std::size_t n_normal_test = 0;
    for (std::size_t i : test_pool)
        if (ds.labels[i] == normal_label) ++n_normal_test;
    const std::size_t anomaly_cap = static_cast<std::size_t>(
        std::floor(anomaly_ratio_cap * static_cast<double>(n_normal_test)));

    std::vector<std::size_t> test_idx;
    std::size_t anomalies_taken = 0;
    for (std::size_t i : test_pool) {
        if (ds.labels[i] == normal_label) {
            test_idx.push_back(i);
        } else if (anomalies_taken < anomaly_cap) {
            test_idx.push_back(i);
            ++anomalies_taken;
        }
    }

    auto build = [&ds](const std::vector<std::size_t>& idx) {
        LabeledDataset out;
        out.name = ds.name;
        out.features = ds.rows(idx);
        for (std::size_t i : idx) out.labels.push_back(ds.labels[i]);
        return out;
    };
    return SplitDataset{build(train_idx), build(test_idx)};
}

}  // namespace fedelm
