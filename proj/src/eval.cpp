#include "fedelm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "fedelm/oselm.hpp"

namespace fedelm {

double roc_auc(const std::vector<double>& scores_normal,
               const std::vector<double>& scores_anomalous) {
    if (scores_normal.empty() || scores_anomalous.empty()) {
        throw std::invalid_argument("roc_auc requires non-empty score lists");
    }
    for (double v : scores_normal)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite normal score");
    for (double v : scores_anomalous)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite anomalous score");

    std::vector<double> normals = scores_normal;
    std::sort(normals.begin(), normals.end());
    double wins = 0.0;  // #(anom > normal) + 0.5 * #(anom == normal), exact
    for (double a : scores_anomalous) {
        const auto lo = std::lower_bound(normals.begin(), normals.end(), a);
        const auto hi = std::upper_bound(normals.begin(), normals.end(), a);
        wins += static_cast<double>(lo - normals.begin());
        wins += 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(normals.size()) *
                   static_cast<double>(scores_anomalous.size()));
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SlfnModel train_autoencoder(const Topology& topology, const Matrix& rows, double ridge) {
    SlfnModel model = init_model(topology);
    const std::size_t n0 = std::min(rows.rows(), topology.n_hidden);
    std::vector<std::size_t> head(n0);
    for (std::size_t i = 0; i < n0; ++i) head[i] = i;
    Matrix x0(n0, rows.cols());
    for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < rows.cols(); ++j) x0(i, j) = rows(i, j);
    model = init_sequential(model, Chunk{x0, x0}, ridge);
    for (std::size_t i = n0; i < rows.rows(); ++i) {
        const Matrix x = rows.row(i);
        model = update(model, Chunk{x, x});
    }
    return model;
}

double mean_loss(const SlfnModel& model, const Matrix& rows) {
    if (rows.rows() == 0) throw std::invalid_argument("mean_loss on empty set");
    double total = 0.0;
    const Matrix y = predict(model, rows);
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < rows.cols(); ++j) {
            const double d = rows(i, j) - y(i, j);
            s += d * d;
        }
        total += s / static_cast<double>(rows.cols());
    }
    return total / static_cast<double>(rows.rows());
}

LabeledDataset load_experiment_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset == "synth") {
        return synth_clusters(cfg.synth_features, cfg.synth_classes,
                              cfg.synth_rows_per_class, cfg.seed);
    }
    const std::string dir = cfg.dataset_dir.empty() ? "." : cfg.dataset_dir;
    if (cfg.dataset == "mnist") {
        return load_mnist(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    }
    if (cfg.dataset == "har") {
        return load_har(dir + "/X_train.txt", dir + "/y_train.txt");
    }
    throw DataError("unknown dataset '" + cfg.dataset + "'");
}

static nlohmann::json config_json(const ExperimentConfig& cfg) {
    return nlohmann::json{{"dataset", cfg.dataset},
                          {"pattern_a", cfg.pattern_a},
                          {"pattern_b", cfg.pattern_b},
                          {"n_hidden", cfg.n_hidden},
                          {"activation", activation_name(cfg.activation)},
                          {"ridge", cfg.ridge},
                          {"trials", cfg.trials},
                          {"seed", cfg.seed},
                          {"library_version", kLibraryVersion}};
}

// Per-trial training rows for one class: seeded subsample so trials differ.
static Matrix class_rows(const LabeledDataset& ds, const std::string& label,
                         std::size_t max_rows, std::uint64_t seed) {
    std::vector<std::size_t> idx = ds.rows_with_label(label);
    if (idx.empty()) throw DataError("pattern '" + label + "' not present in dataset");
    std::mt19937_64 gen(seed);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[gen() % i]);
    if (idx.size() > max_rows) idx.resize(max_rows);
    return ds.rows(idx);
}

static Topology make_topology(const ExperimentConfig& cfg, std::size_t n_features,
                              std::uint64_t seed) {
    return Topology{n_features, cfg.n_hidden, n_features, cfg.activation, seed};
}

nlohmann::json experiment_merge_loss(const ExperimentConfig& cfg) {
    const LabeledDataset ds = load_experiment_dataset(cfg);
    const auto classes = ds.classes();
    const std::string pa = cfg.pattern_a.empty() ? classes.at(0) : cfg.pattern_a;
    const std::string pb = cfg.pattern_b.empty() ? classes.at(1) : cfg.pattern_b;

    std::vector<double> before_a(cfg.trials), before_b(cfg.trials);
    std::vector<double> after_a(cfg.trials), after_b(cfg.trials);
    std::vector<double> device_b_a(cfg.trials), device_b_b(cfg.trials);
    std::vector<double> table_diff(cfg.trials);

    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t trial_seed = cfg.seed + trial;
        const Matrix rows_a = class_rows(ds, pa, cfg.max_rows_per_class, trial_seed * 2 + 1);
        const Matrix rows_b = class_rows(ds, pb, cfg.max_rows_per_class, trial_seed * 2 + 2);
        const Topology topo = make_topology(cfg, ds.features.cols(), trial_seed);

        SlfnModel a = train_autoencoder(topo, rows_a, cfg.ridge);
        SlfnModel b = train_autoencoder(topo, rows_b, cfg.ridge);

        before_a[trial] = mean_loss(a, rows_a);
        before_b[trial] = mean_loss(a, rows_b);

        const Intermediates ia = extract(a);
        const Intermediates ib = extract(b);
        const SlfnModel merged_a = rebuild(combine(ia, ib));
        const SlfnModel merged_b = rebuild(combine(ib, ia));

        after_a[trial] = mean_loss(merged_a, rows_a);
        after_b[trial] = mean_loss(merged_a, rows_b);
        device_b_a[trial] = mean_loss(merged_b, rows_a);
        device_b_b[trial] = mean_loss(merged_b, rows_b);
        table_diff[trial] = std::max(std::fabs(after_a[trial] - device_b_a[trial]),
                                     std::fabs(after_b[trial] - device_b_b[trial]));
    }

    nlohmann::json report;
    report["experiment"] = "merge-loss";
    report["config"] = config_json(cfg);
    report["patterns"] = {pa, pb};
    report["median"] = {
        {"device_a_before", {{"own_pattern", median(before_a)}, {"peer_pattern", median(before_b)}}},
        {"device_a_after", {{"own_pattern", median(after_a)}, {"peer_pattern", median(after_b)}}},
        {"device_b_after", {{"own_pattern", median(device_b_b)}, {"peer_pattern", median(device_b_a)}}},
    };
    report["median_peer_loss_drop_factor"] = median(before_b) / std::max(median(after_b), 1e-300);
    report["median_own_loss_growth_factor"] = median(after_a) / std::max(median(before_a), 1e-300);
    report["max_merged_table_difference"] = *std::max_element(table_diff.begin(), table_diff.end());
    return report;
}

struct PairAuc {
    std::string pattern_a, pattern_b;
    double auc_before = 0.0, auc_after = 0.0;
};

static PairAuc evaluate_pair(const LabeledDataset& ds, const ExperimentConfig& cfg,
                             const std::string& pa, const std::string& pb) {
    std::vector<double> before(cfg.trials), after(cfg.trials);
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t trial_seed = cfg.seed + trial;
        const Matrix rows_a = class_rows(ds, pa, cfg.max_rows_per_class, trial_seed * 2 + 1);
        const Matrix rows_b = class_rows(ds, pb, cfg.max_rows_per_class, trial_seed * 2 + 2);
        const Topology topo = make_topology(cfg, ds.features.cols(), trial_seed);

        SlfnModel a = train_autoencoder(topo, rows_a, cfg.ridge);
        SlfnModel b = train_autoencoder(topo, rows_b, cfg.ridge);
        const SlfnModel merged = rebuild(combine(extract(a), extract(b)));

        // Normals: the trained patterns; anomalies: every other class.
        std::vector<double> norm_before, norm_after, anom_before, anom_after;
        std::mt19937_64 gen(trial_seed * 3 + 7);
        for (const std::string& cls : ds.classes()) {
            const Matrix rows = class_rows(ds, cls, std::min<std::size_t>(cfg.max_rows_per_class, 100),
                                           gen());
            for (std::size_t i = 0; i < rows.rows(); ++i) {
                const Matrix x = rows.row(i);
                const double sb = mean_loss(a, x);
                const double sa = mean_loss(merged, x);
                const bool normal_before = cls == pa;
                const bool normal_after = cls == pa || cls == pb;
                (normal_before ? norm_before : anom_before).push_back(sb);
                (normal_after ? norm_after : anom_after).push_back(sa);
            }
        }
        before[trial] = roc_auc(norm_before, anom_before);
        after[trial] = roc_auc(norm_after, anom_after);
    }
    PairAuc out;
    out.pattern_a = pa;
    out.pattern_b = pb;
    double sb = 0.0, sa = 0.0;
    for (std::size_t i = 0; i < cfg.trials; ++i) {
        sb += before[i];
        sa += after[i];
    }
    out.auc_before = sb / static_cast<double>(cfg.trials);
    out.auc_after = sa / static_cast<double>(cfg.trials);
    return out;
}

nlohmann::json experiment_roc_heatmap(const ExperimentConfig& cfg) {
    const LabeledDataset ds = load_experiment_dataset(cfg);
    const auto classes = ds.classes();
    if (classes.size() < 2) throw DataError("roc-heatmap needs at least 2 classes");

    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& a : classes)
        for (const auto& b : classes)
            if (a != b) pairs.emplace_back(a, b);
    if (pairs.size() > cfg.pairs) {
        std::mt19937_64 gen(cfg.seed ^ 0x9e3779b97f4a7c15ull);
        for (std::size_t i = pairs.size(); i > 1; --i)
            std::swap(pairs[i - 1], pairs[gen() % i]);
        pairs.resize(cfg.pairs);
    }

    nlohmann::json cells = nlohmann::json::array();
    double mean_before = 0.0, mean_after = 0.0;
    for (const auto& [pa, pb] : pairs) {
        const PairAuc cell = evaluate_pair(ds, cfg, pa, pb);
        cells.push_back({{"pattern_a", cell.pattern_a},
                         {"pattern_b", cell.pattern_b},
                         {"auc_before", cell.auc_before},
                         {"auc_after", cell.auc_after}});
        mean_before += cell.auc_before;
        mean_after += cell.auc_after;
    }
    mean_before /= static_cast<double>(pairs.size());
    mean_after /= static_cast<double>(pairs.size());

    nlohmann::json report;
    report["experiment"] = "roc-heatmap";
    report["config"] = config_json(cfg);
    report["cells"] = cells;
    report["mean_auc_before"] = mean_before;
    report["mean_auc_after"] = mean_after;
    return report;
}

static double time_median_msec(std::size_t reps, const std::function<void()>& op) {
    std::vector<double> samples;
    samples.reserve(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        op();
        const auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return median(std::move(samples));
}

nlohmann::json bench_latencies(const ExperimentConfig& cfg) {
    const std::size_t n = 561;
    nlohmann::json rows = nlohmann::json::array();
    for (const std::size_t n_hidden : {std::size_t{64}, std::size_t{128}}) {
        const Topology topo{n, n_hidden, n, cfg.activation, cfg.seed};
        std::mt19937_64 gen(cfg.seed + n_hidden);
        auto u01 = [&gen] { return static_cast<double>(gen() >> 11) * 0x1p-53; };
        Matrix warmup(n_hidden, n);
        for (std::size_t i = 0; i < warmup.size(); ++i) warmup.data()[i] = u01();
        SlfnModel model = train_autoencoder(topo, warmup, cfg.ridge);

        Matrix x(1, n);
        for (std::size_t j = 0; j < n; ++j) x(0, j) = u01();

        SlfnModel scratch = model;
        const double train_ms = time_median_msec(cfg.bench_reps, [&] {
            scratch = update(scratch, Chunk{x, x});
        });
        volatile double sink = 0.0;
        const double predict_ms = time_median_msec(cfg.bench_reps, [&] {
            sink = predict(model, x)(0, 0);
        });
        (void)sink;
        const Intermediates peer = extract(scratch);
        const std::size_t merge_reps = std::max<std::size_t>(cfg.bench_reps / 10, 20);
        const double merge_ms = time_median_msec(merge_reps, [&] {
            const SlfnModel merged = rebuild(combine(extract(model), peer));
            (void)merged;
        });
        rows.push_back({{"n_hidden", n_hidden},
                        {"train_msec", train_ms},
                        {"predict_msec", predict_ms},
                        {"merge_msec", merge_ms}});
    }
    nlohmann::json report;
    report["experiment"] = "latency";
    report["config"] = config_json(cfg);
    report["n_input"] = n;
    report["measurements"] = rows;
    report["reference_msec"] = {
        {"n_hidden_64", {{"train", 0.471}, {"predict", 0.089}, {"merge", 5.78}}},
        {"n_hidden_128", {{"train", 0.794}, {"predict", 0.106}, {"merge", 21.8}}},
        {"note", "published values from a different machine; reported, not asserted"}};
    return report;
}

nlohmann::json experiment_convergence(const ExperimentConfig& cfg) {
    const LabeledDataset ds = load_experiment_dataset(cfg);
    const auto classes = ds.classes();
    const std::string pa = cfg.pattern_a.empty() ? classes.at(0) : cfg.pattern_a;
    const std::string pb = cfg.pattern_b.empty() ? classes.at(1) : cfg.pattern_b;

    const Matrix rows_a = class_rows(ds, pa, cfg.max_rows_per_class, cfg.seed * 2 + 1);
    const Matrix rows_b = class_rows(ds, pb, cfg.max_rows_per_class, cfg.seed * 2 + 2);
    const Topology topo = make_topology(cfg, ds.features.cols(), cfg.seed);

    SlfnModel a = train_autoencoder(topo, rows_a, cfg.ridge);
    SlfnModel b = train_autoencoder(topo, rows_b, cfg.ridge);
    const SlfnModel merged = rebuild(combine(extract(b), extract(a)));
    const double merged_loss = mean_loss(merged, rows_a);

    const bool recycled = cfg.updates > rows_a.rows();
    SlfnModel sequential = b;
    nlohmann::json curve = nlohmann::json::array();
    std::int64_t crossover = -1;
    curve.push_back({{"updates", 0}, {"loss", mean_loss(sequential, rows_a)}});
    for (std::size_t i = 0; i < cfg.updates; ++i) {
        const Matrix x = rows_a.row(i % rows_a.rows());
        sequential = update(sequential, Chunk{x, x});
        if ((i + 1) % cfg.report_every == 0 || i + 1 == cfg.updates) {
            const double l = mean_loss(sequential, rows_a);
            curve.push_back({{"updates", i + 1}, {"loss", l}});
            if (crossover < 0 && l <= 2.0 * merged_loss) {
                crossover = static_cast<std::int64_t>(i + 1);
            }
        }
    }

    nlohmann::json report;
    report["experiment"] = "convergence";
    report["config"] = config_json(cfg);
    report["patterns"] = {pa, pb};
    report["merged_loss"] = merged_loss;
    report["sequential_curve"] = curve;
    report["crossover_updates"] = crossover;
    report["samples_recycled"] = recycled;
    return report;
}

std::string report_to_text(const nlohmann::json& report) {
    std::ostringstream os;
    const std::string kind = report.value("experiment", "?");
    os << "experiment: " << kind << "\n";
    if (kind == "merge-loss") {
        const auto& m = report["median"];
        os << "pattern A = " << report["patterns"][0].get<std::string>()
           << ", pattern B = " << report["patterns"][1].get<std::string>() << "\n";
        os << "                          own-pattern     peer-pattern\n";
        for (const char* key : {"device_a_before", "device_a_after", "device_b_after"}) {
            os << "  " << key;
            for (std::size_t i = std::string(key).size(); i < 22; ++i) os << ' ';
            os << m[key]["own_pattern"].get<double>() << "    "
               << m[key]["peer_pattern"].get<double>() << "\n";
        }
        os << "peer-loss drop factor (median): "
           << report["median_peer_loss_drop_factor"].get<double>() << "\n";
    } else if (kind == "roc-heatmap") {
        os << "pattern_a  pattern_b  auc_before  auc_after\n";
        for (const auto& c : report["cells"]) {
            os << "  " << c["pattern_a"].get<std::string>() << "  "
               << c["pattern_b"].get<std::string>() << "  "
               << c["auc_before"].get<double>() << "  " << c["auc_after"].get<double>() << "\n";
        }
        os << "mean before = " << report["mean_auc_before"].get<double>()
           << ", mean after = " << report["mean_auc_after"].get<double>() << "\n";
    } else if (kind == "latency") {
        os << "n_hidden  train_msec  predict_msec  merge_msec\n";
        for (const auto& r : report["measurements"]) {
            os << "  " << r["n_hidden"].get<std::size_t>() << "  "
               << r["train_msec"].get<double>() << "  " << r["predict_msec"].get<double>()
               << "  " << r["merge_msec"].get<double>() << "\n";
        }
    } else if (kind == "convergence") {
        os << "merged loss = " << report["merged_loss"].get<double>() << "\n";
        os << "updates  sequential_loss\n";
        for (const auto& p : report["sequential_curve"]) {
            os << "  " << p["updates"].get<std::size_t>() << "  " << p["loss"].get<double>() << "\n";
        }
        os << "crossover at " << report["crossover_updates"].get<std::int64_t>()
           << " updates\n";
    }
    return os.str();
}

}  // namespace fedelm
