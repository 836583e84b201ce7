#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "kgfa/data.hpp"
#include "kgfa/experiment.hpp"
#include "kgfa/text.hpp"

namespace {

using nlohmann::json;

std::string default_out_dir() {
    const char* env = std::getenv("KGFA_OUT_DIR");
    return env ? env : "";
}

void apply_config_file(const std::string& path, kgfa::TrainConfig& config) {
    std::ifstream in(path);
    if (!in)
        throw kgfa::ConfigError("cannot open config file: " + path);
    json j = json::parse(in);
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key))
            j.at(key).get_to(field);
    };
    get("d_x", config.d_x);
    get("d_e", config.d_e);
    get("learning_rate", config.learning_rate);
    get("beta1", config.beta1);
    get("beta2", config.beta2);
    get("epsilon", config.epsilon);
    get("patience", config.patience);
    get("max_epochs", config.max_epochs);
    get("negatives_per_positive", config.negatives_per_positive);
    get("resample_negatives_each_epoch", config.resample_negatives_each_epoch);
    get("tuple_proportions", config.tuple_proportions);
    get("train_fractions", config.train_fractions);
    get("n_trials", config.n_trials);
    get("base_seed", config.base_seed);
    get("init_scale", config.init_scale);
    get("val_fraction_within", config.val_fraction_within);
    get("dataset", config.dataset_path);
    get("triples", config.triples_path);
    get("map", config.map_path);
    get("output_dir", config.output_dir);
    if (j.contains("scenario"))
        config.scenario = kgfa::scenario_from_string(j.at("scenario").get<std::string>());
}

json matrix_json(const kgfa::Matrix& mat) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < mat.cols(); ++c)
            row.push_back(mat(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const kgfa::Vector& vec) {
    json values = json::array();
    for (Eigen::Index i = 0; i < vec.size(); ++i)
        values.push_back(vec[i]);
    return values;
}

int command_run(kgfa::TrainConfig config) {
    if (config.output_dir.empty())
        throw kgfa::ConfigError("no output directory (use --out-dir or KGFA_OUT_DIR)");
    if (config.dataset_path.empty() || config.triples_path.empty())
        throw kgfa::ConfigError("run needs --data and --triples");

    const kgfa::Dataset data = kgfa::load_dataset(config.dataset_path);
    std::vector<std::string> warnings;
    const kgfa::KnowledgeGraph kg =
        kgfa::load_kg(config.triples_path, config.map_path, data.attribute_names, &warnings);
    for (const auto& warning : warnings)
        std::fprintf(stderr, "warning: %s\n", warning.c_str());
    std::fprintf(stderr, "loaded %d objects x %d attributes, KG: %d entities, %d relations, %d tuples (m'=%d)\n",
                 data.n(), data.m(), kg.entity_count(), kg.relation_count(), kg.tuple_count(),
                 kg.tied_count());

    const kgfa::ExperimentOutcome outcome = kgfa::run_experiment(config, data, kg);
    int failed = 0;
    for (const auto& trial : outcome.trials)
        if (trial.failed) {
            ++failed;
            std::fprintf(stderr, "failed trial: tuple_proportion=%s train_fraction=%s seed=%llu: %s\n",
                         kgfa::format_double(trial.tuple_proportion).c_str(),
                         kgfa::format_double(trial.train_fraction).c_str(),
                         static_cast<unsigned long long>(trial.seed), trial.error.c_str());
        }
    std::fprintf(stderr, "%zu trials done (%d failed); results in %s\n", outcome.trials.size(),
                 failed, config.output_dir.c_str());
    for (const auto& file : outcome.summary_files)
        std::fprintf(stderr, "  %s\n", file.c_str());
    return outcome.all_ok ? 0 : 1;
}

int command_synth(const kgfa::SyntheticSpec& spec, const std::string& out_dir) {
    if (out_dir.empty())
        throw kgfa::ConfigError("no output directory (use --out-dir or KGFA_OUT_DIR)");
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);

    const kgfa::Synthetic synth = kgfa::generate_synthetic(spec);
    kgfa::save_dataset(synth.dataset, (dir / "data.csv").string());
    kgfa::save_kg(synth.kg, synth.dataset.attribute_names, (dir / "triples.tsv").string(),
                  (dir / "attr_map.tsv").string());

    json truth;
    truth["embeddings"] = matrix_json(synth.ground_truth.embeddings.vectors);
    truth["relations"] = matrix_json(synth.ground_truth.relations.vectors);
    truth["affine_A"] = matrix_json(synth.ground_truth.affine.A);
    truth["affine_b"] = vector_json(synth.ground_truth.affine.b);
    truth["mu"] = vector_json(synth.ground_truth.mu);
    truth["log_var"] = vector_json(synth.ground_truth.log_var);
    truth["free_loadings"] = matrix_json(synth.ground_truth.free_loadings);
    std::ofstream truth_out(dir / "ground_truth.json");
    truth_out << truth.dump(2) << '\n';

    std::fprintf(stderr, "wrote %d objects x %d attributes, %d entities, %d tuples to %s\n",
                 synth.dataset.n(), synth.dataset.m(), synth.kg.entity_count(),
                 synth.kg.tuple_count(), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factor analysis with knowledge-graph distant regularization"};
    app.require_subcommand(1);

    // --- run ---
    kgfa::TrainConfig config;
    config.output_dir = default_out_dir();
    std::string config_path;
    std::string scenario_name;

    auto* run = app.add_subcommand("run", "Run the experiment sweep");
    run->add_option("--config", config_path, "JSON config file (flags override it)");
    auto* opt_data = run->add_option("--data", config.dataset_path, "Dataset CSV");
    auto* opt_triples = run->add_option("--triples", config.triples_path, "Triples TSV");
    auto* opt_map = run->add_option("--map", config.map_path, "Attribute-entity map TSV");
    run->add_option("--scenario", scenario_name, "Partition scenario: random | shift")
        ->required();
    auto* opt_seed = run->add_option("--seed", config.base_seed, "Base seed")->required();
    auto* opt_out = run->add_option("--out-dir", config.output_dir, "Output directory");
    auto* opt_props =
        run->add_option("--tuple-props", config.tuple_proportions, "Tuple proportions in [0,1]")
            ->delimiter(',');
    auto* opt_fracs =
        run->add_option("--train-fracs", config.train_fractions, "Train+val fractions in (0,1)")
            ->delimiter(',');
    auto* opt_trials = run->add_option("--trials", config.n_trials, "Trials per cell");
    auto* opt_dx = run->add_option("--dx", config.d_x, "Latent dimensionality");
    auto* opt_de = run->add_option("--de", config.d_e, "Embedding dimensionality");
    auto* opt_lr = run->add_option("--lr", config.learning_rate, "Adam learning rate");
    auto* opt_patience = run->add_option("--patience", config.patience, "Early-stopping patience");
    auto* opt_epochs = run->add_option("--max-epochs", config.max_epochs, "Epoch cap");
    auto* opt_negatives =
        run->add_option("--negatives", config.negatives_per_positive, "Negatives per positive");
    auto* opt_scale = run->add_option("--init-scale", config.init_scale, "Init std deviation");
    auto* opt_resample = run->add_flag("--resample-negatives",
                                       config.resample_negatives_each_epoch,
                                       "Draw fresh negatives every epoch");

    // --- gradcheck ---
    kgfa::GradCheckOptions gc;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    gradcheck->add_option("--instances", gc.instances, "Random instances per block");
    gradcheck->add_option("--seed", gc.seed, "RNG seed");
    gradcheck->add_option("--tolerance", gc.tolerance, "Max relative error");
    gradcheck->add_option("--step", gc.fd_step, "Finite-difference step");

    // --- synth ---
    kgfa::SyntheticSpec spec;
    std::string synth_out = default_out_dir();
    std::string spec_path;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and KG");
    synth->add_option("--spec", spec_path, "JSON spec file (flags override it)");
    auto* s_n = synth->add_option("--n-objects", spec.n_objects, "Objects");
    auto* s_m = synth->add_option("--m-attrs", spec.m_attributes, "Attributes");
    auto* s_tied = synth->add_option("--m-tied", spec.m_tied, "Tied attributes");
    auto* s_dx = synth->add_option("--dx", spec.d_x, "Latent dimensionality");
    auto* s_de = synth->add_option("--de", spec.d_e, "Embedding dimensionality");
    auto* s_extra = synth->add_option("--extra-entities", spec.n_extra_entities,
                                      "Non-attribute entities");
    auto* s_rel = synth->add_option("--relations", spec.n_relations, "Relation count");
    auto* s_tpe = synth->add_option("--tuples-per-entity", spec.tuples_per_entity,
                                    "Positive tuples per head entity");
    auto* s_noise = synth->add_option("--noise-std", spec.noise_std, "Observation noise std");
    auto* s_margin = synth->add_option("--margin", spec.score_margin,
                                       "Ground-truth score margin for positives");
    auto* s_seed = synth->add_option("--seed", spec.ground_truth_seed, "Ground-truth seed");
    synth->add_option("--out-dir", synth_out, "Output directory");

    // --- summarize ---
    std::string trials_path;
    std::string summarize_out = default_out_dir();
    auto* summarize = app.add_subcommand("summarize", "Re-aggregate per-trial results");
    summarize->add_option("--trials", trials_path, "trials.tsv produced by run")->required();
    summarize->add_option("--out-dir", summarize_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (!config_path.empty()) {
                // Re-apply flag values on top of the config file.
                kgfa::TrainConfig flags = config;
                apply_config_file(config_path, config);
                auto keep = [](const CLI::Option* opt, auto& target, const auto& value) {
                    if (opt->count() > 0)
                        target = value;
                };
                keep(opt_data, config.dataset_path, flags.dataset_path);
                keep(opt_triples, config.triples_path, flags.triples_path);
                keep(opt_map, config.map_path, flags.map_path);
                keep(opt_seed, config.base_seed, flags.base_seed);
                keep(opt_out, config.output_dir, flags.output_dir);
                keep(opt_props, config.tuple_proportions, flags.tuple_proportions);
                keep(opt_fracs, config.train_fractions, flags.train_fractions);
                keep(opt_trials, config.n_trials, flags.n_trials);
                keep(opt_dx, config.d_x, flags.d_x);
                keep(opt_de, config.d_e, flags.d_e);
                keep(opt_lr, config.learning_rate, flags.learning_rate);
                keep(opt_patience, config.patience, flags.patience);
                keep(opt_epochs, config.max_epochs, flags.max_epochs);
                keep(opt_negatives, config.negatives_per_positive, flags.negatives_per_positive);
                keep(opt_scale, config.init_scale, flags.init_scale);
                keep(opt_resample, config.resample_negatives_each_epoch,
                     flags.resample_negatives_each_epoch);
            }
            config.scenario = kgfa::scenario_from_string(scenario_name);
            return command_run(std::move(config));
        }
        if (gradcheck->parsed()) {
            const kgfa::GradCheckReport report = kgfa::grad_check(gc);
            std::fputs(kgfa::format_report(report).c_str(), stdout);
            return report.passed() ? 0 : 1;
        }
        if (synth->parsed()) {
            if (!spec_path.empty()) {
                std::ifstream in(spec_path);
                if (!in)
                    throw kgfa::ConfigError("cannot open spec file: " + spec_path);
                json j = json::parse(in);
                kgfa::SyntheticSpec from_flags = spec;
                auto get = [&](const char* key, auto& field) {
                    if (j.contains(key))
                        j.at(key).get_to(field);
                };
                get("n_objects", spec.n_objects);
                get("m_attributes", spec.m_attributes);
                get("m_tied", spec.m_tied);
                get("d_x", spec.d_x);
                get("d_e", spec.d_e);
                get("n_extra_entities", spec.n_extra_entities);
                get("n_relations", spec.n_relations);
                get("tuples_per_entity", spec.tuples_per_entity);
                get("noise_std", spec.noise_std);
                get("score_margin", spec.score_margin);
                get("ground_truth_seed", spec.ground_truth_seed);
                auto keep = [](const CLI::Option* opt, auto& target, const auto& value) {
                    if (opt->count() > 0)
                        target = value;
                };
                keep(s_n, spec.n_objects, from_flags.n_objects);
                keep(s_m, spec.m_attributes, from_flags.m_attributes);
                keep(s_tied, spec.m_tied, from_flags.m_tied);
                keep(s_dx, spec.d_x, from_flags.d_x);
                keep(s_de, spec.d_e, from_flags.d_e);
                keep(s_extra, spec.n_extra_entities, from_flags.n_extra_entities);
                keep(s_rel, spec.n_relations, from_flags.n_relations);
                keep(s_tpe, spec.tuples_per_entity, from_flags.tuples_per_entity);
                keep(s_noise, spec.noise_std, from_flags.noise_std);
                keep(s_margin, spec.score_margin, from_flags.score_margin);
                keep(s_seed, spec.ground_truth_seed, from_flags.ground_truth_seed);
            }
            return command_synth(spec, synth_out);
        }
        if (summarize->parsed()) {
            if (summarize_out.empty())
                throw kgfa::ConfigError("no output directory (use --out-dir or KGFA_OUT_DIR)");
            const auto trials = kgfa::read_trials(trials_path);
            const auto files = kgfa::summarize_trials(trials, summarize_out);
            for (const auto& file : files)
                std::fprintf(stderr, "  %s\n", file.c_str());
            return 0;
        }
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 2;
    }
    return 0;
}
