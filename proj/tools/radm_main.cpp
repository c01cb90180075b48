#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "radm/data.hpp"
#include "radm/errors.hpp"
#include "radm/experiment.hpp"
#include "radm/metrics.hpp"

using namespace radm;

namespace {

void print_usage() {
    std::cout <<
        "usage: radm <command> [--config FILE] [--key value ...]\n"
        "\n"
        "commands:\n"
        "  synth      generate a synthetic dataset (kind=manifold|digits) and a manifest\n"
        "  detect     transductive anomaly detection, aggregated over seeds\n"
        "  inductive  train on normal rows, score a held-out test set\n"
        "  denoise    salt-and-pepper corruption recovery on normal rows\n"
        "  sweep      detect-mode grid over lambda or k (sweep=lambda|k grid=v1,v2,...)\n"
        "  eval       metrics from an existing scores CSV (scores=..., labels=..., k=10)\n"
        "\n"
        "experiment keys (config file key=value lines or --key value overrides):\n"
        "  method     pca|ae|cae|rcae|rpca-convex|rpca-factored|drmf\n"
        "  manifest   dataset manifest path (or synthetic=manifold|digits)\n"
        "  n_normal, n_anomaly, dims         synthetic generator sizes\n"
        "  lambda, mu, k, lr, epochs, batch, alternations, objective_tol\n"
        "  rpca_lambda (0 = 1/sqrt(max dim)), drmf_e (0 = 1% of entries)\n"
        "  arch       auto|dense|conv|convbn, unscaled_init 0|1\n"
        "  seeds      comma list, or seed_base/seed_count for consecutive draws\n"
        "  out_dir    report directory\n"
        "  test_normal, test_anomaly         inductive split sizes\n"
        "  noise_rate                        denoise corruption rate\n"
        "  top_k, dump_pgm                   ranked index list size, PGM dumps\n"
        "\n"
        "exit codes: 0 success, 2 configuration, 3 data, 4 numeric\n";
}

std::vector<std::pair<std::string, std::string>> collect_entries(int argc, char** argv,
                                                                 int first) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (int i = first; i < argc; ++i) {
        std::string key = argv[i];
        if (key.rfind("--", 0) != 0)
            throw config_error("expected --key, got '" + key + "'");
        key = key.substr(2);
        if (i + 1 >= argc) throw config_error("missing value for --" + key);
        const std::string value = argv[++i];
        if (key == "config") {
            auto file_entries = read_config_file(value);
            entries.insert(entries.end(), file_entries.begin(), file_entries.end());
        } else {
            entries.emplace_back(key, value);
        }
    }
    return entries;
}

std::string pop_value(std::vector<std::pair<std::string, std::string>>& entries,
                      const std::string& key, const std::string& fallback) {
    std::string value = fallback;
    for (auto it = entries.begin(); it != entries.end();) {
        if (it->first == key) {
            value = it->second;
            it = entries.erase(it);
        } else {
            ++it;
        }
    }
    return value;
}

std::size_t to_count(const std::string& key, const std::string& value) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size())
        throw config_error(key + ": malformed count '" + value + "'");
    return v;
}

int run_synth(std::vector<std::pair<std::string, std::string>> entries) {
    const std::string kind = pop_value(entries, "kind", "manifold");
    const std::size_t n_normal = to_count("n_normal", pop_value(entries, "n_normal", "220"));
    const std::size_t n_anomaly = to_count("n_anomaly", pop_value(entries, "n_anomaly", "11"));
    const std::size_t dims = to_count("dims", pop_value(entries, "dims", "20"));
    const std::size_t seed = to_count("seed", pop_value(entries, "seed", "1"));
    const std::string out_dir = pop_value(entries, "out_dir", "");
    const std::string stem = pop_value(entries, "stem", kind);
    const std::string format_text = pop_value(entries, "format", "csv");
    if (!entries.empty()) throw config_error("unknown key '" + entries.front().first + "'");
    if (out_dir.empty()) throw config_error("synth: out_dir must be set");
    MatrixFormat format;
    if (format_text == "csv")
        format = MatrixFormat::csv;
    else if (format_text == "bin")
        format = MatrixFormat::bin;
    else
        throw config_error("synth: format must be csv|bin");

    Rng rng(seed);
    LabeledDataset data;
    if (kind == "manifold")
        data = make_synthetic_manifold(n_normal, n_anomaly, dims, rng);
    else if (kind == "digits")
        data = make_synthetic_digits(n_normal, n_anomaly, rng);
    else
        throw config_error("synth: kind must be manifold|digits");

    save_dataset(data, out_dir, stem, format);
    std::cout << "wrote " << out_dir << "/" << stem << ".manifest (" << data.x.rows() << " rows, "
              << data.anomaly_count() << " anomalies)\n";
    return 0;
}

void print_bundle(const ExperimentConfig& config, const ReportBundle& bundle) {
    std::size_t failed = 0;
    for (const SeedResult& s : bundle.seeds)
        if (s.failed) ++failed;
    std::cout << "method=" << method_name(config.method) << " mode=" << mode_name(config.mode)
              << " seeds=" << config.seeds.size();
    if (failed) std::cout << " (" << failed << " failed)";
    std::cout << "\n";
    for (const SeedResult& s : bundle.seeds)
        if (s.failed)
            std::cout << "  seed " << s.seed << " FAILED: " << s.diagnostic << "\n";
    for (const auto& [name, agg] : bundle.aggregates) {
        std::printf("  %-10s %.4f +/- %.4f\n", name.c_str(), agg.mean, agg.stderr_of_mean);
    }
    std::cout << "wrote " << config.out_dir << "/report.csv\n";
}

int run_mode(const std::string& mode, std::vector<std::pair<std::string, std::string>> entries) {
    entries.emplace_back("mode", mode);
    ExperimentConfig config = parse_config(entries);
    ReportBundle bundle = run_experiment(config);
    print_bundle(config, bundle);
    return 0;
}

int run_sweep_cmd(std::vector<std::pair<std::string, std::string>> entries) {
    const std::string parameter = pop_value(entries, "sweep", "lambda");
    const std::string grid_text = pop_value(entries, "grid", "");
    if (grid_text.empty()) throw config_error("sweep: grid=v1,v2,... must be set");
    std::vector<double> grid;
    std::stringstream ss(grid_text);
    for (std::string item; std::getline(ss, item, ','); ) {
        if (item.empty()) continue;
        try {
            grid.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw config_error("sweep: malformed grid value '" + item + "'");
        }
    }
    ExperimentConfig config = parse_config(entries);
    SweepResult sweep = run_sweep(config, parameter, grid);
    std::cout << "sweep over " << sweep.parameter << ": " << sweep.rows.size() << " points\n";
    for (const SweepRow& row : sweep.rows) {
        std::printf("  %s=%-10g", sweep.parameter.c_str(), row.value);
        for (const auto& [name, agg] : row.aggregates)
            std::printf(" %s=%.4f", name.c_str(), agg.mean);
        std::printf(" noise_nnz=%.0f\n", row.mean_noise_nnz);
    }
    std::cout << "wrote " << sweep.csv_path << "\n";
    return 0;
}

/// Accepts either the emitted "index,score,label" CSV or one score per line.
void load_scores_file(const std::string& path, std::vector<double>& scores,
                      std::vector<int>& labels) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open scores file: " + path);
    std::string first;
    if (!std::getline(in, first)) throw data_error(path + ": empty scores file");
    if (first == "index,score,label") {
        std::size_t line_no = 1;
        for (std::string line; std::getline(in, line); ) {
            ++line_no;
            if (line.empty()) continue;
            std::size_t idx = 0;
            double score = 0.0;
            int label = 0;
            if (std::sscanf(line.c_str(), "%zu,%lf,%d", &idx, &score, &label) != 3)
                throw data_error(path + ":" + std::to_string(line_no) + ": malformed row");
            scores.push_back(score);
            labels.push_back(label);
        }
        return;
    }
    in.clear();
    in.seekg(0);
    double v = 0.0;
    while (in >> v) scores.push_back(v);
    if (scores.empty()) throw data_error(path + ": no scores parsed");
}

int run_eval(std::vector<std::pair<std::string, std::string>> entries) {
    const std::string scores_path = pop_value(entries, "scores", "");
    const std::string labels_path = pop_value(entries, "labels", "");
    const std::size_t k = to_count("k", pop_value(entries, "k", "10"));
    if (!entries.empty()) throw config_error("unknown key '" + entries.front().first + "'");
    if (scores_path.empty()) throw config_error("eval: scores= must be set");

    RankedEval eval;
    load_scores_file(scores_path, eval.scores, eval.labels);
    if (!labels_path.empty()) {
        eval.labels.clear();
        std::ifstream in(labels_path);
        if (!in) throw data_error("cannot open labels file: " + labels_path);
        int v = 0;
        while (in >> v) eval.labels.push_back(v);
    }
    if (eval.labels.size() != eval.scores.size())
        throw data_error("eval: " + std::to_string(eval.scores.size()) + " scores vs " +
                         std::to_string(eval.labels.size()) + " labels");

    std::printf("n=%zu anomalies=%zu\n", eval.scores.size(),
                std::size_t(std::count(eval.labels.begin(), eval.labels.end(), 1)));
    std::printf("auprc  %.6f\n", auprc(eval));
    std::printf("auroc  %.6f\n", auroc(eval));
    std::printf("p_at_%zu %.6f\n", std::min(k, eval.scores.size()),
                precision_at_k(eval, std::min(k, eval.scores.size())));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage();
        return 2;
    }
    const std::string command = argv[1];
    if (command == "--help" || command == "-h" || command == "help") {
        print_usage();
        return 0;
    }
    try {
        auto entries = collect_entries(argc, argv, 2);
        if (command == "synth") return run_synth(std::move(entries));
        if (command == "detect" || command == "inductive" || command == "denoise")
            return run_mode(command, std::move(entries));
        if (command == "sweep") return run_sweep_cmd(std::move(entries));
        if (command == "eval") return run_eval(std::move(entries));
        std::cerr << "unknown command '" << command << "'\n";
        print_usage();
        return 2;
    } catch (const config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
}
