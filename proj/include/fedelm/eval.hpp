#pragma once

#include <string>
#include <vector>

#include "nlohmann/json.hpp"

#include "fedelm/data.hpp"
#include "fedelm/federation.hpp"

namespace fedelm {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Probability that a random anomalous score exceeds a random normal score,
// ties counted 1/2 (Mann-Whitney rank statistic). Exact up to the final
// division: pair wins are accumulated as dyadic rationals.
double roc_auc(const std::vector<double>& scores_normal,
               const std::vector<double>& scores_anomalous);

// Sequential autoencoder training: P0 from an initial chunk of n_hidden
// rows (ridge-regularized), then one k=1 update per remaining row.
SlfnModel train_autoencoder(const Topology& topology, const Matrix& rows,
                            double ridge = 1e-6);

double mean_loss(const SlfnModel& model, const Matrix& rows);

struct ExperimentConfig {
    std::string dataset = "synth";     // synth | mnist | har | driving
    std::string dataset_dir;           // where real dataset files live
    std::string pattern_a;             // class trained by Device-A
    std::string pattern_b;             // class trained by Device-B
    std::size_t n_hidden = 16;
    std::size_t synth_features = 32;
    std::size_t synth_classes = 4;
    std::size_t synth_rows_per_class = 200;
    Activation activation = Activation::Identity;
    double ridge = 1e-6;
    std::size_t trials = 50;
    std::uint64_t seed = 42;
    std::size_t max_rows_per_class = 1000;
    std::size_t pairs = 10;            // roc-heatmap: random ordered pairs cap
    std::size_t updates = 1000;        // convergence: sequential update budget
    std::size_t report_every = 50;     // convergence: curve sampling stride
    std::size_t bench_reps = 1000;
};

LabeledDataset load_experiment_dataset(const ExperimentConfig& cfg);

nlohmann::json experiment_merge_loss(const ExperimentConfig& cfg);
nlohmann::json experiment_roc_heatmap(const ExperimentConfig& cfg);
nlohmann::json bench_latencies(const ExperimentConfig& cfg);
nlohmann::json experiment_convergence(const ExperimentConfig& cfg);

// Human-readable rendering of any of the reports above.
std::string report_to_text(const nlohmann::json& report);

double median(std::vector<double> values);

}  // namespace fedelm
