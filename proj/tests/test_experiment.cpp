#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include "kgfa/experiment.hpp"
#include "kgfa/text.hpp"
#include "oracles.hpp"

using namespace kgfa;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("kgfa_exp_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

Synthetic small_synthetic() {
    SyntheticSpec spec;
    spec.n_objects = 60;
    spec.m_attributes = 6;
    spec.m_tied = 4;
    spec.d_x = 2;
    spec.d_e = 2;
    spec.n_extra_entities = 3;
    spec.n_relations = 2;
    spec.tuples_per_entity = 3;
    spec.noise_std = 0.6;
    spec.score_margin = -100.0;
    spec.ground_truth_seed = 12;
    return generate_synthetic(spec);
}

TrainConfig small_config(const std::string& out_dir) {
    TrainConfig config;
    config.d_x = 2;
    config.d_e = 2;
    config.patience = 10;
    config.max_epochs = 40;
    config.tuple_proportions = {0.0, 1.0};
    config.train_fractions = {0.6};
    config.n_trials = 2;
    config.base_seed = 21;
    config.output_dir = out_dir;
    return config;
}

}  // namespace

TEST_CASE("config fingerprint tracks the knobs") {
    TrainConfig a;
    TrainConfig b;
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    b.learning_rate = 2e-2;
    CHECK(config_fingerprint(a) != config_fingerprint(b));
    b = a;
    b.tuple_proportions = {0.5};
    CHECK(config_fingerprint(a) != config_fingerprint(b));
}

TEST_CASE("emit_summary formats mean and population std") {
    const auto dir = temp_dir("summary");
    const auto path = (dir / "s.txt").string();
    emit_summary({{50.0, {1.0, 3.0}}}, path);
    CHECK(read_file(path) == "50 2.0 1.0\n");

    emit_summary({{25.0, {2.5}}, {100.0, {0.125, 0.375}}}, path);
    CHECK(read_file(path) == "25 2.5 0.0\n100 0.25 0.125\n");

    std::vector<std::string> warnings;
    emit_summary({{10.0, {}}, {20.0, {1.0}}}, path, &warnings);
    CHECK(read_file(path) == "20 1.0 0.0\n");
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("x=10") != std::string::npos);
}

TEST_CASE("summary rows reparse to the exact aggregates") {
    const auto dir = temp_dir("reparse");
    const auto path = (dir / "s.txt").string();
    std::map<double, std::vector<double>> groups{
        {12.5, {1.0 / 3.0, 0.7231, -2.25}},
        {80.0, {1e-7, 123.456}},
    };
    emit_summary(groups, path);

    std::ifstream in(path);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        const auto fields = split(line, ' ');
        REQUIRE(fields.size() == 3);
        const double x = *parse_double(fields[0]);
        const auto& values = groups.at(x);
        double mean = 0.0;
        for (double v : values)
            mean += v;
        mean /= static_cast<double>(values.size());
        double sq = 0.0;
        for (double v : values)
            sq += (v - mean) * (v - mean);
        const double std_dev = std::sqrt(sq / static_cast<double>(values.size()));
        CHECK(*parse_double(fields[1]) == mean);
        CHECK(*parse_double(fields[2]) == std_dev);
        ++row;
    }
    CHECK(row == 2);
}

TEST_CASE("trials file round-trips") {
    const auto dir = temp_dir("trials");
    std::vector<TrialResult> trials(2);
    trials[0].scenario = Scenario::Shift;
    trials[0].tuple_proportion = 0.25;
    trials[0].train_fraction = 0.8;
    trials[0].trial = 0;
    trials[0].seed = 42;
    trials[0].test_nll = 1.0 / 3.0;
    trials[0].best_val_nll = -0.125;
    trials[0].epochs_run = 17;
    trials[0].fingerprint = "00ffab12cd34ef56";
    trials[1].failed = true;
    trials[1].error = "numerical\terror with\ttabs";

    const auto path = (dir / "trials.tsv").string();
    write_trials(trials, path);
    const auto loaded = read_trials(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].scenario == Scenario::Shift);
    CHECK(loaded[0].tuple_proportion == 0.25);
    CHECK(loaded[0].test_nll == 1.0 / 3.0);
    CHECK(loaded[0].best_val_nll == -0.125);
    CHECK(loaded[0].epochs_run == 17);
    CHECK(loaded[0].seed == 42);
    CHECK_FALSE(loaded[0].failed);
    CHECK(loaded[1].failed);
    CHECK(loaded[1].error.find('\t') == std::string::npos);
}

TEST_CASE("run_experiment is deterministic and leaves inputs untouched") {
    const Synthetic synth = small_synthetic();
    const auto dir_a = temp_dir("run_a");
    const auto dir_b = temp_dir("run_b");

    // Reference KG file to prove the sweep never mutates its input.
    const auto kg_path = dir_a / "input_triples.tsv";
    save_kg(synth.kg, synth.dataset.attribute_names, kg_path.string(), "");
    const std::string kg_before = read_file(kg_path);

    const ExperimentOutcome a =
        run_experiment(small_config(dir_a.string()), synth.dataset, synth.kg);
    const ExperimentOutcome b =
        run_experiment(small_config(dir_b.string()), synth.dataset, synth.kg);
    CHECK(a.all_ok);
    CHECK(a.trials.size() == 4);  // 2 proportions x 1 fraction x 2 trials

    CHECK(read_file(dir_a / "trials.tsv") == read_file(dir_b / "trials.tsv"));
    REQUIRE(a.summary_files.size() == b.summary_files.size());
    for (std::size_t i = 0; i < a.summary_files.size(); ++i) {
        const auto rel = std::filesystem::path(a.summary_files[i]).filename();
        CHECK(read_file(dir_a / rel) == read_file(dir_b / rel));
    }
    CHECK(read_file(kg_path) == kg_before);

    // Trial seeds follow base_seed + trial index and are paired across cells.
    CHECK(a.trials[0].seed == 21);
    CHECK(a.trials[1].seed == 22);
    CHECK(a.trials[2].seed == 21);
    for (const TrialResult& t : a.trials)
        CHECK(std::isfinite(t.test_nll));
}

TEST_CASE("summarize_trials matches an independent aggregation") {
    const Synthetic synth = small_synthetic();
    const auto dir = temp_dir("agg");
    const ExperimentOutcome outcome =
        run_experiment(small_config(dir.string()), synth.dataset, synth.kg);

    // Recompute one summary from the per-trial file with separate code.
    const auto trials = read_trials((dir / "trials.tsv").string());
    std::map<double, std::vector<double>> groups;
    for (const TrialResult& t : trials)
        if (!t.failed && t.train_fraction == 0.6)
            groups[std::round(t.tuple_proportion * 1e6) / 1e4].push_back(t.test_nll);

    const std::string summary = read_file(dir / "summary_random_tupleprops_train0.6.txt");
    std::istringstream lines(summary);
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        const auto fields = split(line, ' ');
        REQUIRE(fields.size() == 3);
        const auto& values = groups.at(*parse_double(fields[0]));
        double mean = 0.0;
        for (double v : values)
            mean += v;
        mean /= static_cast<double>(values.size());
        CHECK(*parse_double(fields[1]) == mean);
        ++rows;
    }
    CHECK(rows == 2);

    // summarize on the reloaded trials writes byte-identical summaries.
    const auto dir2 = temp_dir("agg2");
    summarize_trials(trials, dir2.string());
    CHECK(read_file(dir2 / "summary_random_tupleprops_train0.6.txt") == summary);
}

TEST_CASE("failed trials are reported and do not stop the sweep") {
    const Synthetic synth = small_synthetic();
    const auto dir = temp_dir("fail");
    TrainConfig config = small_config(dir.string());
    config.learning_rate = 1e9;  // drives the covariance into overflow
    const ExperimentOutcome outcome = run_experiment(config, synth.dataset, synth.kg);
    CHECK_FALSE(outcome.all_ok);
    CHECK(outcome.trials.size() == 4);
    int failed = 0;
    for (const TrialResult& t : outcome.trials)
        if (t.failed) {
            ++failed;
            CHECK_FALSE(t.error.empty());
        }
    CHECK(failed > 0);
    // The trials file still reports every cell.
    CHECK(read_trials((dir / "trials.tsv").string()).size() == 4);
}

TEST_CASE("grad_check passes on healthy gradients and flags corrupted ones") {
    GradCheckOptions options;
    options.instances = 5;
    const GradCheckReport report = grad_check(options);
    CHECK(report.passed());
    // Every parameter block is listed by name.
    std::set<std::string> names;
    for (const auto& block : report.blocks)
        names.insert(block.name);
    for (const char* expected :
         {"fa.mu", "fa.loadings", "fa.log_var", "kg.embeddings", "kg.relations",
          "joint.embeddings", "joint.relations", "joint.affine_A", "joint.affine_b",
          "joint.mu", "joint.log_var", "joint.free_loadings"})
        CHECK(names.contains(expected));

    GradCheckOptions corrupt = options;
    corrupt.inject_fault = true;
    CHECK_FALSE(grad_check(corrupt).passed());

    const std::string text = format_report(report);
    CHECK(text.find("fa.mu") != std::string::npos);
    CHECK(text.find("ok") != std::string::npos);
}
