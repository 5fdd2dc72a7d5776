// Command-line front end: train / serve / merge / experiment.
//
// Exit codes: 0 ok, 1 environment, 2 usage, 3 incompatibility,
// 4 remote or missing resource.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "fedelm/eval.hpp"
#include "fedelm/model_io.hpp"
#include "fedelm/oselm.hpp"

using namespace fedelm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEnvironment = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIncompatible = 3;
constexpr int kExitRemote = 4;

Activation parse_activation(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "relu") return Activation::Relu;
    throw CLI::ValidationError("activation must be identity, sigmoid or relu");
}

// Table-derived defaults: driving {sigmoid, 16}, har {identity, 128},
// mnist {identity, 64}; synth mirrors the scaled desk configuration.
void apply_dataset_defaults(const std::string& dataset, bool hidden_set, bool act_set,
                            std::size_t& hidden, Activation& act) {
    if (dataset == "driving") {
        if (!hidden_set) hidden = 16;
        if (!act_set) act = Activation::Sigmoid;
    } else if (dataset == "har") {
        if (!hidden_set) hidden = 128;
        if (!act_set) act = Activation::Identity;
    } else if (dataset == "mnist") {
        if (!hidden_set) hidden = 64;
        if (!act_set) act = Activation::Identity;
    } else {
        if (!hidden_set) hidden = 16;
        if (!act_set) act = Activation::Identity;
    }
}

LabeledDataset load_dataset(const std::string& dataset, const std::string& dir,
                            std::size_t window, std::uint64_t seed,
                            const std::string& driving_label) {
    if (dataset == "synth") return synth_clusters(32, 4, 200, seed);
    if (dataset == "mnist") {
        return load_mnist(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    }
    if (dataset == "har") return load_har(dir + "/X_train.txt", dir + "/y_train.txt");
    if (dataset == "driving") {
        return load_driving(dir + "/" + driving_label + ".txt", driving_label, window);
    }
    throw DataError("unknown dataset '" + dataset + "'");
}

Matrix load_probe_rows(const std::string& path, std::size_t width) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open probe file " + path);
    std::vector<double> values;
    double v = 0.0;
    while (in >> v) values.push_back(v);
    if (values.empty() || values.size() % width != 0) {
        throw DataError("probe file size " + std::to_string(values.size()) +
                        " is not a multiple of feature width " + std::to_string(width));
    }
    const std::size_t rows = values.size() / width;
    return Matrix(rows, width, std::move(values));
}

double mean_row_loss(const AnomalyDetector& d, const Matrix& rows) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) total += loss(d, rows.row(i));
    return total / static_cast<double>(rows.rows());
}

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

int cmd_train(const std::string& dataset, const std::string& dir, const std::string& pattern,
              std::size_t hidden, Activation act, std::uint64_t seed, double ridge,
              std::size_t window, const std::string& device_id, const std::string& out) {
    const LabeledDataset ds = load_dataset(dataset, dir, window, seed, pattern);
    const auto idx = ds.rows_with_label(pattern);
    if (idx.empty()) {
        std::cerr << "unknown pattern '" << pattern << "'; available:";
        for (const auto& c : ds.classes()) std::cerr << " " << c;
        std::cerr << "\n";
        return kExitUsage;
    }
    const Matrix rows = ds.rows(idx);
    const Topology topo{rows.cols(), hidden, rows.cols(), act, seed};
    EdgeState state;
    state.device_id = device_id;
    state.detector = make_detector(train_autoencoder(topo, rows, ridge));
    save_edge_state(state, out);
    std::cout << "trained on " << rows.rows() << " samples of pattern '" << pattern
              << "', mean loss " << mean_row_loss(state.detector, rows) << "\n";
    std::cout << "model written to " << out << "\n";
    return kExitOk;
}

int cmd_serve(std::uint16_t port) {
    TcpServer server(port);
    server.on_message = [](const FederationMessage& msg) {
        static const char* names[] = {"register", "upload", "list", "download", "ack", "error"};
        std::cout << "[" << names[static_cast<int>(msg.kind)] << "] device=" << msg.device_id
                  << std::endl;
    };
    try {
        const std::uint16_t bound = server.start();
        std::cout << "serving on port " << bound << "\n";
    } catch (const TransportError& e) {
        std::cerr << e.what() << "\n";
        return kExitEnvironment;
    }
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop) {
        struct timespec ts{0, 100000000};
        nanosleep(&ts, nullptr);
    }
    server.stop();
    std::cout << "shut down cleanly\n";
    return kExitOk;
}

int cmd_merge(const std::string& model_path, const std::vector<std::string>& peer_files,
              std::string server_addr, const std::string& peers_csv,
              const std::string& probe_path) {
    EdgeState state = load_edge_state(model_path);
    Matrix probe;
    if (!probe_path.empty()) {
        probe = load_probe_rows(probe_path, state.detector.model.topology.n_input);
        std::cout << "probe loss before merge: " << mean_row_loss(state.detector, probe) << "\n";
    }

    if (!peer_files.empty()) {
        Intermediates total = extract(state.detector.model);
        const auto own_bytes = serialize(total);
        for (const auto& path : peer_files) {
            const auto bytes = load_bytes(path);
            if (bytes == own_bytes) {
                std::cout << "warning: " << path
                          << " is identical to this model's own intermediates; merging it "
                             "would double count (upload timestamps equal)\n";
                continue;
            }
            Intermediates peer;
            try {
                peer = deserialize(bytes);
                total = combine(total, peer);
            } catch (const IncompatibilityError& e) {
                std::cerr << path << ": " << e.what() << "\n";
                return kExitIncompatible;
            }
            std::cout << "merged " << path << " (" << peer.sample_count << " samples)\n";
        }
        state.detector.model = rebuild(total);
    } else {
        if (server_addr.empty()) {
            const char* env = std::getenv("OSELM_FED_SERVER");
            if (env) server_addr = env;
        }
        if (server_addr.empty()) {
            std::cerr << "merge needs either --peer-file or --server "
                         "(or OSELM_FED_SERVER); an empty --peers list publishes only\n";
            return kExitUsage;
        }
        const auto colon = server_addr.rfind(':');
        if (colon == std::string::npos) {
            std::cerr << "server address must be host:port\n";
            return kExitUsage;
        }
        TcpTransport transport(server_addr.substr(0, colon),
                               static_cast<std::uint16_t>(
                                   std::stoi(server_addr.substr(colon + 1))));
        std::vector<std::string> peers;
        std::stringstream ss(peers_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) peers.push_back(item);
        }
        const RoundReport report = edge_round(state, peers, transport);
        for (const auto& id : report.merged) std::cout << "merged peer " << id << "\n";
        for (const auto& [id, reason] : report.skipped) {
            std::cerr << "skipped peer " << id << ": " << reason << "\n";
        }
        for (const auto& [id, reason] : report.skipped) {
            if (reason.find("seed") != std::string::npos) return kExitIncompatible;
            if (reason.find("unknown device") != std::string::npos) return kExitRemote;
        }
    }

    save_edge_state(state, model_path);
    std::cout << "model updated: " << model_path << "\n";
    if (!probe_path.empty()) {
        std::cout << "probe loss after merge: " << mean_row_loss(state.detector, probe) << "\n";
    }
    return kExitOk;
}

int cmd_experiment(const std::string& name, const ExperimentConfig& cfg,
                   const std::string& out_dir) {
    nlohmann::json report;
    if (name == "merge-loss") report = experiment_merge_loss(cfg);
    else if (name == "roc-heatmap") report = experiment_roc_heatmap(cfg);
    else if (name == "latency") report = bench_latencies(cfg);
    else if (name == "convergence") report = experiment_convergence(cfg);
    else {
        std::cerr << "unknown experiment '" << name
                  << "'; expected merge-loss, roc-heatmap, latency or convergence\n";
        return kExitUsage;
    }
    const std::string base = out_dir + "/" + name;
    {
        std::ofstream json_out(base + ".json");
        if (!json_out) {
            std::cerr << "cannot write to " << out_dir << "\n";
            return kExitEnvironment;
        }
        json_out << report.dump(2) << "\n";
    }
    std::ofstream text_out(base + ".txt");
    text_out << report_to_text(report);
    std::cout << report_to_text(report);
    std::cout << "reports written to " << base << ".{json,txt}\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OS-ELM autoencoder anomaly detection with one-shot federated merging"};
    app.require_subcommand(1);

    std::string dataset = "synth", dataset_dir = "data", pattern, out = "model.bin";
    std::string activation_name = "identity", device_id = "device-a";
    std::size_t hidden = 16, window = 60;
    std::uint64_t seed = 42;
    double ridge = 1e-6;

    auto* train = app.add_subcommand("train", "train a detector on one pattern");
    train->add_option("--dataset", dataset, "synth|mnist|har|driving");
    train->add_option("--dataset-dir", dataset_dir, "dataset file directory");
    train->add_option("--pattern", pattern, "class treated as normal")->required();
    auto* hidden_opt = train->add_option("--hidden", hidden, "hidden-layer size");
    auto* act_opt = train->add_option("--activation", activation_name, "identity|sigmoid|relu");
    train->add_option("--seed", seed, "init seed (shared across federated devices)");
    train->add_option("--ridge", ridge, "ridge added at P0 initialization");
    train->add_option("--window", window, "driving speed-window length in samples");
    train->add_option("--id", device_id, "device id used in federation");
    train->add_option("--out", out, "model state file to write");

    std::uint16_t port = 9090;
    auto* serve = app.add_subcommand("serve", "run the aggregation server");
    serve->add_option("--port", port, "TCP port to listen on");

    std::string export_model, export_out = "intermediates.osuv";
    auto* export_cmd = app.add_subcommand("export", "write a model's intermediates file");
    export_cmd->add_option("--model", export_model, "model state file")->required();
    export_cmd->add_option("--out", export_out, "intermediates (.osuv) file to write");

    std::string model_path, server_addr, peers_csv, probe_path;
    std::vector<std::string> peer_files;
    auto* merge_cmd = app.add_subcommand("merge", "merge peer intermediates into a model");
    merge_cmd->add_option("--model", model_path, "model state file")->required();
    merge_cmd->add_option("--peer-file", peer_files, "offline .osuv intermediates file");
    merge_cmd->add_option("--server", server_addr, "host:port (or OSELM_FED_SERVER)");
    merge_cmd->add_option("--peers", peers_csv, "comma-separated peer device ids");
    merge_cmd->add_option("--probe", probe_path, "feature rows to report loss before/after");

    std::string experiment_name, out_dir = ".";
    std::size_t trials = 50, classes = 4, updates = 1000;
    auto* exp = app.add_subcommand("experiment", "run an evaluation experiment");
    exp->add_option("name", experiment_name, "merge-loss|roc-heatmap|latency|convergence")
        ->required();
    exp->add_option("--dataset", dataset, "synth|mnist|har");
    exp->add_option("--dataset-dir", dataset_dir, "dataset file directory");
    auto* exp_hidden = exp->add_option("--hidden", hidden, "hidden-layer size");
    auto* exp_act = exp->add_option("--activation", activation_name, "identity|sigmoid|relu");
    exp->add_option("--trials", trials, "trials per measurement");
    exp->add_option("--classes", classes, "synthetic class count");
    exp->add_option("--updates", updates, "convergence update budget");
    exp->add_option("--pattern-a", pattern, "Device-A pattern (default: first class)");
    std::string pattern_b;
    exp->add_option("--pattern-b", pattern_b, "Device-B pattern (default: second class)");
    exp->add_option("--seed", seed, "experiment seed");
    exp->add_option("--out-dir", out_dir, "report output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) {
            Activation act = Activation::Identity;
            apply_dataset_defaults(dataset, hidden_opt->count() > 0, act_opt->count() > 0,
                                   hidden, act);
            if (act_opt->count() > 0) act = parse_activation(activation_name);
            return cmd_train(dataset, dataset_dir, pattern, hidden, act, seed, ridge, window,
                             device_id, out);
        }
        if (serve->parsed()) return cmd_serve(port);
        if (export_cmd->parsed()) {
            const EdgeState state = load_edge_state(export_model);
            save_bytes(serialize(extract(state.detector.model)), export_out);
            std::cout << "intermediates written to " << export_out << "\n";
            return kExitOk;
        }
        if (merge_cmd->parsed()) {
            return cmd_merge(model_path, peer_files, server_addr, peers_csv, probe_path);
        }
        if (exp->parsed()) {
            ExperimentConfig cfg;
            cfg.dataset = dataset;
            cfg.dataset_dir = dataset_dir;
            cfg.pattern_a = pattern;
            cfg.pattern_b = pattern_b;
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.synth_classes = classes;
            cfg.updates = updates;
            Activation act = Activation::Identity;
            apply_dataset_defaults(dataset, exp_hidden->count() > 0, exp_act->count() > 0,
                                   hidden, act);
            if (exp_act->count() > 0) act = parse_activation(activation_name);
            cfg.n_hidden = hidden;
            cfg.activation = act;
            return cmd_experiment(experiment_name, cfg, out_dir);
        }
    } catch (const IncompatibilityError& e) {
        std::cerr << e.what() << "\n";
        return kExitIncompatible;
    } catch (const TransportError& e) {
        std::cerr << e.what() << "\n";
        return kExitRemote;
    } catch (const DataError& e) {
        std::cerr << e.what() << "\n";
        return kExitEnvironment;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitEnvironment;
    }
    return kExitUsage;
}
