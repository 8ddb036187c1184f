// Command-line front end: synthetic corpus generation, training,
// evaluation, gradient verification, and hyperparameter sweeps.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sea/config.hpp"
#include "sea/data.hpp"
#include "sea/gradcheck_report.hpp"
#include "sea/model_io.hpp"
#include "sea/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonFlags {
    std::string config_path;
    std::string method;
    std::string out_dir;
    long long seed = -1;
    double lambda_sca = -1, lambda_sfa = -1;
    long long heads = -1, patch = -1, epochs = -1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--method", method, "sea|seapp|source-only");
        cmd->add_option("--seed", seed, "RNG seed");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--lambda-sca", lambda_sca, "SCA loss weight");
        cmd->add_option("--lambda-sfa", lambda_sfa, "SFA loss weight");
        cmd->add_option("--heads", heads, "attention branch count");
        cmd->add_option("--patch", patch, "patch size d");
        cmd->add_option("--epochs", epochs, "training epochs");
    }

    // precedence: flags > config file > defaults
    sea::KvMap merged() const {
        sea::KvMap kv;
        try {
            if (!config_path.empty()) kv = sea::load_config_file(config_path);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        if (!method.empty()) kv["method"] = method;
        if (!out_dir.empty()) kv["out"] = out_dir;
        if (seed >= 0) kv["seed"] = std::to_string(seed);
        if (lambda_sca >= 0) kv["lambda_sca"] = std::to_string(lambda_sca);
        if (lambda_sfa >= 0) kv["lambda_sfa"] = std::to_string(lambda_sfa);
        if (heads >= 0) kv["heads"] = std::to_string(heads);
        if (patch >= 0) kv["patch"] = std::to_string(patch);
        if (epochs >= 0) kv["epochs"] = std::to_string(epochs);
        return kv;
    }

    sea::RunConfig run_config() const {
        try {
            return sea::build_run_config(merged());
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
};

struct Corpora {
    std::vector<sea::MtsSample> source, target;
    bool classification = false;
    std::size_t classes = 0;
};

std::size_t count_classes(const std::vector<sea::MtsSample>& corpus) {
    std::size_t classes = 0;
    for (const auto& s : corpus)
        if (s.label) classes = std::max(classes, static_cast<std::size_t>(*s.label) + 1);
    return classes;
}

Corpora load_corpora(const sea::RunConfig& rc) {
    Corpora c;
    try {
        if (rc.data_source == sea::DataSource::Synthetic) {
            auto gen = sea::generate_synthetic(rc.synth);
            c.source = std::move(gen.source);
            c.target = std::move(gen.target);
            c.classification = rc.synth.classes > 0;
        } else {
            sea::CorpusSpec src_spec = rc.corpus;
            src_spec.path = rc.source_csv;
            sea::CorpusSpec tgt_spec = rc.corpus;
            tgt_spec.path = rc.target_csv;
            c.source = sea::load_csv_corpus(src_spec);
            c.target = sea::load_csv_corpus(tgt_spec);
            c.classification = rc.corpus.schema == sea::Schema::ActivityClassification;
        }
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    if (c.source.empty()) throw DataError("source corpus is empty");
    // normalization statistics come from the source split only
    auto stats = sea::compute_norm_stats(c.source);
    sea::apply_norm_stats(c.source, stats);
    if (!c.target.empty()) sea::apply_norm_stats(c.target, stats);
    if (c.classification) c.classes = count_classes(c.source);
    return c;
}

json metrics_json(const sea::MetricsReport& rep, bool classification) {
    json j;
    j["samples"] = rep.samples;
    if (classification)
        j["accuracy"] = rep.accuracy;
    else {
        j["rmse"] = rep.rmse;
        j["score"] = rep.score;
    }
    return j;
}

struct TrainOutcome {
    sea::TrainResult result;
    json summary;
};

TrainOutcome run_training(const sea::RunConfig& rc, const Corpora& corpora) {
    sea::EncoderConfig ec = rc.encoder;
    ec.output_dim = corpora.classification ? corpora.classes : 1;
    sea::TrainConfig tc = rc.train;
    tc.classification = corpora.classification;

    TrainOutcome out;
    out.result = sea::train(corpora.source, corpora.target, ec, rc.align, tc);

    json summary;
    summary["steps"] = out.result.trace.size();
    summary["source"] = metrics_json(
        sea::evaluate(out.result.params, corpora.source, corpora.classification),
        corpora.classification);
    bool target_labeled = !corpora.target.empty();
    for (const auto& s : corpora.target)
        if (!s.label) target_labeled = false;
    if (target_labeled)
        summary["target"] = metrics_json(
            sea::evaluate(out.result.params, corpora.target, corpora.classification),
            corpora.classification);
    out.summary = std::move(summary);
    return out;
}

void write_trace(const std::vector<sea::StepRecord>& trace, const std::string& path) {
    std::ofstream out(path);
    for (const auto& rec : trace) {
        json j{{"step", rec.step}, {"epoch", rec.epoch},     {"task", rec.task},
               {"exo", rec.exo},   {"endo", rec.endo},       {"total", rec.total}};
        out << j.dump() << '\n';
    }
}

int cmd_synth(const CommonFlags& flags) {
    auto rc = flags.run_config();
    fs::create_directories(rc.out_dir);
    auto corpora = [&] {
        try {
            return sea::generate_synthetic(rc.synth);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }();
    const std::string src_path = rc.out_dir + "/source.csv";
    const std::string tgt_path = rc.out_dir + "/target.csv";
    try {
        sea::write_corpus_csv(corpora.source, src_path);
        sea::write_corpus_csv(corpora.target, tgt_path);
        std::ofstream manifest(rc.out_dir + "/manifest.txt");
        manifest << "schema = "
                 << (rc.synth.classes > 0 ? "activity_classification" : "rul_regression") << '\n'
                 << "window_len = " << rc.synth.window_len << '\n'
                 << "overlap = 0" << '\n';
        manifest << "sensors = ";
        for (std::size_t m = 0; m < rc.synth.sensors; ++m) manifest << (m ? "," : "") << 's' << m;
        manifest << '\n'
                 << "label = label" << '\n'
                 << "unit = window" << '\n'
                 << "cap = " << rc.corpus.rul_cap << '\n'
                 << "seed = " << rc.synth.seed << '\n'
                 << "spec_hash = " << sea::spec_hash(rc.synth) << '\n'
                 << "source_csv = " << src_path << '\n'
                 << "target_csv = " << tgt_path << '\n'
                 << "data = csv" << '\n';
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    std::cout << "wrote " << src_path << ", " << tgt_path << " and manifest\n";
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    auto rc = flags.run_config();
    fs::create_directories(rc.out_dir);
    auto corpora = load_corpora(rc);
    auto outcome = run_training(rc, corpora);
    sea::save_model(outcome.result.params, rc.out_dir + "/model.bin");
    write_trace(outcome.result.trace, rc.out_dir + "/trace.jsonl");
    std::ofstream metrics(rc.out_dir + "/metrics.json");
    metrics << outcome.summary.dump(2) << '\n';
    std::cout << outcome.summary.dump(2) << '\n';
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& model_path,
             const std::string& split) {
    auto rc = flags.run_config();
    auto corpora = load_corpora(rc);
    sea::EncoderParams params = [&] {
        try {
            return sea::load_model(model_path);
        } catch (const std::exception& e) {
            throw DataError(e.what());
        }
    }();
    const auto& corpus = split == "source" ? corpora.source : corpora.target;
    if (corpus.empty()) throw DataError("requested split '" + split + "' is empty");
    auto rep = sea::evaluate(params, corpus, corpora.classification);
    std::cout << metrics_json(rep, corpora.classification).dump(2) << '\n';
    return 0;
}

int cmd_gradcheck(const CommonFlags& flags, const std::string& component) {
    flags.run_config();  // surfaces config errors even though only the seed is used
    sea::GradCheckSetup setup;
    if (flags.seed >= 0) setup.seed = static_cast<std::uint64_t>(flags.seed);
    auto rows = sea::gradcheck_report(setup, component);
    if (rows.empty()) throw ConfigError("unknown component '" + component + "'");
    bool ok = true;
    std::printf("%-8s %-6s %12s\n", "component", "variant", "max-rel-err");
    for (const auto& row : rows) {
        ok = ok && row.max_rel_err < 1e-4;
        std::printf("%-8s %-6s %12.3e %s\n", row.component.c_str(), row.variant.c_str(),
                    row.max_rel_err, row.max_rel_err < 1e-4 ? "ok" : "FAIL");
    }
    return ok ? 0 : 1;
}

std::size_t worker_count() {
    if (const char* env = std::getenv("SEAPP_THREADS")) {
        const long n = std::atol(env);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

int cmd_sweep(const CommonFlags& flags, const std::string& lambdas_arg,
              const std::string& heads_arg, const std::string& patches_arg,
              std::size_t seed_count) {
    auto base_kv = flags.merged();
    const auto rc0 = flags.run_config();
    auto lambdas = lambdas_arg.empty() ? std::vector<double>{rc0.align.lambda_sca}
                                       : sea::detail::split_doubles(lambdas_arg);
    auto heads = heads_arg.empty() ? std::vector<std::size_t>{rc0.encoder.branches}
                                   : sea::detail::split_sizes(heads_arg);
    auto patches = patches_arg.empty() ? std::vector<std::size_t>{rc0.encoder.patch_size}
                                       : sea::detail::split_sizes(patches_arg);
    if (lambdas.empty() || heads.empty() || patches.empty() || seed_count == 0)
        throw ConfigError("sweep grid must be nonempty");

    struct Cell {
        double lambda;
        std::size_t heads, patch;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    const std::uint64_t base_seed = rc0.train.seed;
    for (double l : lambdas)
        for (auto h : heads)
            for (auto p : patches)
                for (std::size_t s = 0; s < seed_count; ++s)
                    cells.push_back({l, h, p, base_seed + 1000 * s});

    fs::create_directories(rc0.out_dir);
    std::vector<std::string> rows(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            sea::KvMap kv = base_kv;
            kv["lambda_sca"] = std::to_string(cell.lambda);
            kv["lambda_sfa"] = std::to_string(cell.lambda);
            kv["heads"] = std::to_string(cell.heads);
            kv["patch"] = std::to_string(cell.patch);
            kv["seed"] = std::to_string(cell.seed);
            std::ostringstream row;
            row << cell.lambda << ',' << cell.heads << ',' << cell.patch << ',' << cell.seed;
            try {
                auto rc = sea::build_run_config(kv);
                auto corpora = load_corpora(rc);
                auto outcome = run_training(rc, corpora);
                if (outcome.summary.contains("target")) {
                    const auto& t = outcome.summary["target"];
                    row << ','
                        << (t.contains("accuracy") ? t["accuracy"].get<double>()
                                                   : t["rmse"].get<double>());
                } else {
                    row << ',';
                }
                row << ",ok";
            } catch (const std::exception& e) {
                row << ",,error: " << e.what();
            }
            rows[i] = row.str();
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cerr << "cell " << (i + 1) << "/" << cells.size() << " done\n";
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < std::min(worker_count(), cells.size()); ++i)
        pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    const std::string table_path = rc0.out_dir + "/sweep.csv";
    std::ofstream out(table_path);
    out << "lambda,heads,patch,seed,target_metric,status\n";
    for (const auto& r : rows) out << r << '\n';
    std::cout << "wrote " << table_path << " (" << rows.size() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SEA/SEA++ multivariate time-series domain adaptation"};
    app.require_subcommand(1);

    CommonFlags synth_flags, train_flags, eval_flags, grad_flags, sweep_flags;
    std::string model_path, eval_split = "target", component;
    std::string sweep_lambdas, sweep_heads, sweep_patches;
    std::size_t sweep_seeds = 1;

    auto* synth = app.add_subcommand("synth", "generate synthetic source/target corpora");
    synth_flags.attach(synth);
    auto* train = app.add_subcommand("train", "train a model and write metrics");
    train_flags.attach(train);
    auto* eval = app.add_subcommand("eval", "evaluate a saved model");
    eval_flags.attach(eval);
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--split", eval_split, "source|target");
    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad_flags.attach(grad);
    grad->add_option("--component", component, "restrict to one component");
    auto* sweep = app.add_subcommand("sweep", "grid sweep over lambda/heads/patch");
    sweep_flags.attach(sweep);
    sweep->add_option("--lambdas", sweep_lambdas, "comma list of lambda values");
    sweep->add_option("--heads-list", sweep_heads, "comma list of branch counts");
    sweep->add_option("--patches", sweep_patches, "comma list of patch sizes");
    sweep->add_option("--seeds", sweep_seeds, "seeds per cell");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_flags);
        if (train->parsed()) return cmd_train(train_flags);
        if (eval->parsed()) return cmd_eval(eval_flags, model_path, eval_split);
        if (grad->parsed()) return cmd_gradcheck(grad_flags, component);
        if (sweep->parsed())
            return cmd_sweep(sweep_flags, sweep_lambdas, sweep_heads, sweep_patches, sweep_seeds);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
