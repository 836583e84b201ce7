#include "kgfa/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "kgfa/finite_diff.hpp"
#include "kgfa/text.hpp"

namespace kgfa {

namespace {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string sanitize(std::string text) {
    for (char& c : text)
        if (c == '\t' || c == '\n' || c == '\r')
            c = ' ';
    return text;
}

/// x axis values are percentages; keep them to four decimals so 0.25 maps
/// to a clean 25 rather than a rounding artifact.
double as_percent(double fraction) {
    return std::round(fraction * 1e6) / 1e4;
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw DataError("cannot write file: " + tmp);
        out << content;
        if (!out)
            throw DataError("failed writing file: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Rng block_rng(Rng& master) { return Rng(master()); }

std::vector<Tuple> draw_negative_set(const KnowledgeGraph& kg, int per_positive, Rng& rng) {
    std::vector<Tuple> negatives;
    negatives.reserve(kg.positives().size() * static_cast<std::size_t>(per_positive));
    for (const Tuple& positive : kg.positives())
        for (const LabeledTuple& neg : sample_negatives(positive, kg, per_positive, rng))
            negatives.push_back(neg.tuple);
    return negatives;
}

}  // namespace

std::string config_fingerprint(const TrainConfig& config) {
    std::ostringstream canon;
    canon << config.d_x << ';' << config.d_e << ';' << format_double(config.learning_rate) << ';'
          << format_double(config.beta1) << ';' << format_double(config.beta2) << ';'
          << format_double(config.epsilon) << ';' << config.patience << ';' << config.max_epochs
          << ';' << config.negatives_per_positive << ';'
          << (config.resample_negatives_each_epoch ? 1 : 0) << ';';
    for (double p : config.tuple_proportions)
        canon << format_double(p) << ',';
    canon << ';';
    for (double f : config.train_fractions)
        canon << format_double(f) << ',';
    canon << ';' << to_string(config.scenario) << ';' << config.n_trials << ';'
          << config.base_seed << ';' << format_double(config.init_scale) << ';'
          << format_double(config.val_fraction_within) << ';' << config.dataset_path << ';'
          << config.triples_path << ';' << config.map_path;

    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canon.str())));
    return buffer;
}

TrialResult run_trial(const TrainConfig& config, const Dataset& data, const KnowledgeGraph& kg,
                      double tuple_proportion, double train_fraction, int trial_index) {
    TrialResult result;
    result.scenario = config.scenario;
    result.tuple_proportion = tuple_proportion;
    result.train_fraction = train_fraction;
    result.trial = trial_index;
    result.seed = config.base_seed + static_cast<std::uint64_t>(trial_index);
    result.fingerprint = config_fingerprint(config);

    try {
        Rng master(result.seed);
        Rng partition_rng = block_rng(master);
        Rng subsample_rng = block_rng(master);
        Rng negatives_rng = block_rng(master);
        Rng init_rng = block_rng(master);
        Rng train_rng = block_rng(master);

        PartitionSpec part_spec;
        part_spec.scenario = config.scenario;
        part_spec.train_val_fraction = train_fraction;
        part_spec.val_fraction_within = config.val_fraction_within;
        part_spec.seed = partition_rng();
        const Partition part = partition(data, part_spec);

        const KnowledgeGraph used = subsample_tuples(kg, tuple_proportion, subsample_rng);
        std::vector<Tuple> positives = used.positives();
        std::vector<Tuple> negatives;
        if (!positives.empty())
            negatives = draw_negative_set(used, config.negatives_per_positive, negatives_rng);

        JointDims dims;
        dims.entity_count = used.entity_count();
        dims.relation_count = used.relation_count();
        dims.embed_dim = config.d_e;
        dims.latent_dim = config.d_x;
        dims.attribute_count = data.m();
        dims.tied_count = used.tied_count();

        JointParams init = init_params(dims, config.init_scale, part.train, init_rng);

        TrainOptions options;
        options.adam = {config.learning_rate, config.beta1, config.beta2, config.epsilon};
        options.patience = config.patience;
        options.max_epochs = config.max_epochs;
        options.resample_negatives_each_epoch = config.resample_negatives_each_epoch;
        options.negatives_per_positive = config.negatives_per_positive;

        const TrainRun run = train(options, part.train, part.val, used, std::move(positives),
                                   std::move(negatives), std::move(init), train_rng);

        const FaParams best_fa{run.best_params.mu, run.best_params.log_var,
                               assemble_loadings(run.best_params, used)};
        result.test_nll = fa_marginal_nll(part.test, best_fa);
        result.best_val_nll = run.best_val_nll;
        result.epochs_run = run.epochs_run;

        if (config.dump_history && !config.output_dir.empty()) {
            std::filesystem::create_directories(config.output_dir);
            std::ostringstream content;
            content << "epoch,train_objective,val_fa_nll\n";
            for (const EpochRecord& record : run.history)
                content << record.epoch << ',' << format_double(record.train_objective) << ','
                        << format_double(record.val_fa_nll) << '\n';
            const auto path = std::filesystem::path(config.output_dir) /
                              ("history_tuple" + format_double(tuple_proportion) + "_train" +
                               format_double(train_fraction) + "_trial" +
                               std::to_string(trial_index) + ".csv");
            write_atomic(path.string(), content.str());
        }
    } catch (const NumericalError& err) {
        result.failed = true;
        result.error = err.what();
    } catch (const SamplingError& err) {
        result.failed = true;
        result.error = err.what();
    }
    return result;
}

ExperimentOutcome run_experiment(const TrainConfig& config, const Dataset& data,
                                 const KnowledgeGraph& kg) {
    if (config.tuple_proportions.empty() || config.train_fractions.empty())
        throw ConfigError("run_experiment: sweep lists must be non-empty");
    if (config.n_trials < 1)
        throw ConfigError("run_experiment: n_trials must be >= 1");
    std::filesystem::create_directories(config.output_dir);

    ExperimentOutcome outcome;
    for (double tuple_proportion : config.tuple_proportions)
        for (double train_fraction : config.train_fractions)
            for (int trial = 0; trial < config.n_trials; ++trial) {
                TrialResult result =
                    run_trial(config, data, kg, tuple_proportion, train_fraction, trial);
                outcome.all_ok = outcome.all_ok && !result.failed;
                outcome.trials.push_back(std::move(result));
            }

    const auto dir = std::filesystem::path(config.output_dir);
    write_trials(outcome.trials, (dir / "trials.tsv").string());
    outcome.summary_files = summarize_trials(outcome.trials, config.output_dir);
    return outcome;
}

void emit_summary(const std::map<double, std::vector<double>>& groups, const std::string& path,
                  std::vector<std::string>* warnings) {
    std::ostringstream content;
    for (const auto& [x, values] : groups) {
        if (values.empty()) {
            if (warnings)
                warnings->push_back(path + ": empty group at x=" + format_double(x) +
                                    " omitted");
            continue;
        }
        const double n = static_cast<double>(values.size());
        double sum = 0.0;
        for (double v : values)
            sum += v;
        const double mean = sum / n;
        double sq = 0.0;
        for (double v : values)
            sq += (v - mean) * (v - mean);
        const double std_dev = std::sqrt(sq / n);  // population convention
        content << format_double(x) << ' ' << format_double_pointed(mean) << ' '
                << format_double_pointed(std_dev) << '\n';
    }
    write_atomic(path, content.str());
}

void write_trials(const std::vector<TrialResult>& trials, const std::string& path) {
    std::ostringstream content;
    content << "scenario\ttuple_proportion\ttrain_fraction\ttrial\tseed\ttest_nll\t"
               "best_val_nll\tepochs_run\tfingerprint\tstatus\terror\n";
    for (const TrialResult& t : trials) {
        content << to_string(t.scenario) << '\t' << format_double(t.tuple_proportion) << '\t'
                << format_double(t.train_fraction) << '\t' << t.trial << '\t' << t.seed << '\t'
                << format_double(t.test_nll) << '\t' << format_double(t.best_val_nll) << '\t'
                << t.epochs_run << '\t' << t.fingerprint << '\t'
                << (t.failed ? "failed" : "ok") << '\t' << sanitize(t.error) << '\n';
    }
    write_atomic(path, content.str());
}

std::vector<TrialResult> read_trials(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path + ": empty trials file");

    std::vector<TrialResult> trials;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 11)
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": expected 11 tab-separated fields");
        TrialResult t;
        t.scenario = scenario_from_string(fields[0]);
        const auto tp = parse_double(fields[1]);
        const auto tf = parse_double(fields[2]);
        const auto test_nll = parse_double(fields[5]);
        const auto val_nll = parse_double(fields[6]);
        if (!tp || !tf || !test_nll || !val_nll)
            throw DataError(path + ": line " + std::to_string(line_no) + ": bad number");
        t.tuple_proportion = *tp;
        t.train_fraction = *tf;
        t.trial = std::stoi(fields[3]);
        t.seed = std::stoull(fields[4]);
        t.test_nll = *test_nll;
        t.best_val_nll = *val_nll;
        t.epochs_run = std::stoi(fields[7]);
        t.fingerprint = fields[8];
        t.failed = fields[9] != "ok";
        t.error = fields[10];
        trials.push_back(std::move(t));
    }
    return trials;
}

std::vector<std::string> summarize_trials(const std::vector<TrialResult>& trials,
                                          const std::string& output_dir) {
    std::filesystem::create_directories(output_dir);
    const auto dir = std::filesystem::path(output_dir);

    std::set<Scenario> scenarios;
    for (const TrialResult& t : trials)
        scenarios.insert(t.scenario);

    std::vector<std::string> files;
    std::vector<std::string> warnings;
    for (Scenario scenario : scenarios) {
        // x = tuple proportion [%], one file per training fraction.
        std::map<double, std::map<double, std::vector<double>>> by_fraction;
        // x = training fraction [%], one file per tuple proportion.
        std::map<double, std::map<double, std::vector<double>>> by_proportion;
        for (const TrialResult& t : trials) {
            if (t.scenario != scenario || t.failed)
                continue;
            by_fraction[t.train_fraction][as_percent(t.tuple_proportion)].push_back(t.test_nll);
            by_proportion[t.tuple_proportion][as_percent(t.train_fraction)].push_back(t.test_nll);
        }
        for (const auto& [fraction, groups] : by_fraction) {
            const std::string path =
                (dir / ("summary_" + to_string(scenario) + "_tupleprops_train" +
                        format_double(fraction) + ".txt"))
                    .string();
            emit_summary(groups, path, &warnings);
            files.push_back(path);
        }
        for (const auto& [proportion, groups] : by_proportion) {
            const std::string path =
                (dir / ("summary_" + to_string(scenario) + "_trainfracs_tuple" +
                        format_double(proportion) + ".txt"))
                    .string();
            emit_summary(groups, path, &warnings);
            files.push_back(path);
        }
    }
    for (const std::string& warning : warnings)
        std::fprintf(stderr, "warning: %s\n", warning.c_str());
    return files;
}

bool GradCheckReport::passed() const {
    return std::all_of(blocks.begin(), blocks.end(),
                       [&](const GradCheckBlock& b) { return b.max_rel_err < tolerance; });
}

namespace {

struct BlockTracker {
    std::map<std::string, GradCheckBlock> blocks;

    void record(const std::string& name, double err) {
        auto& block = blocks[name];
        block.name = name;
        block.instances += 1;
        block.max_rel_err = std::max(block.max_rel_err, err);
    }
};

Vector random_vector(Rng& rng, int size, double scale) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(size);
    for (int i = 0; i < size; ++i)
        v[i] = normal(rng);
    return v;
}

Matrix random_matrix(Rng& rng, int rows, int cols, double scale) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix block(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            block(r, c) = normal(rng);
    return block;
}

void check_fa_blocks(const GradCheckOptions& options, BlockTracker& tracker, Rng& rng) {
    for (int instance = 0; instance < options.instances; ++instance) {
        const int n = 2 + static_cast<int>(rng() % 29);  // <= 30
        const int m = 1 + static_cast<int>(rng() % 8);   // <= 8
        const int d_x = 1 + static_cast<int>(rng() % 3); // <= 3

        Dataset data;
        data.values = random_matrix(rng, n, m, 1.5);
        for (int i = 0; i < m; ++i)
            data.attribute_names.push_back("a" + std::to_string(i));
        for (int j = 0; j < n; ++j)
            data.object_ids.push_back(std::to_string(j));

        FaParams params{random_vector(rng, m, 1.0), random_vector(rng, m, 0.5),
                        random_matrix(rng, m, d_x, 1.0)};
        FaGradients grad = fa_marginal_nll_grad(data, params);
        if (options.inject_fault)
            grad.mu[0] = grad.mu[0] * 1.001 + 1e-3;

        const Vector fd_mu = finite_difference_gradient(
            [&](const Vector& mu) {
                return fa_marginal_nll(data, {mu, params.log_var, params.loadings});
            },
            params.mu, options.fd_step);
        tracker.record("fa.mu", max_relative_error(grad.mu, fd_mu));

        const Vector fd_log_var = finite_difference_gradient(
            [&](const Vector& lv) {
                return fa_marginal_nll(data, {params.mu, lv, params.loadings});
            },
            params.log_var, options.fd_step);
        tracker.record("fa.log_var", max_relative_error(grad.log_var, fd_log_var));

        Vector flat_loadings(m * d_x);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < d_x; ++c)
                flat_loadings[r * d_x + c] = params.loadings(r, c);
        const Vector fd_loadings = finite_difference_gradient(
            [&](const Vector& flat) {
                Matrix loadings(m, d_x);
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < d_x; ++c)
                        loadings(r, c) = flat[r * d_x + c];
                return fa_marginal_nll(data, {params.mu, params.log_var, loadings});
            },
            flat_loadings, options.fd_step);
        Vector flat_grad(m * d_x);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < d_x; ++c)
                flat_grad[r * d_x + c] = grad.loadings(r, c);
        tracker.record("fa.loadings", max_relative_error(flat_grad, fd_loadings));
    }
}

void check_kg_blocks(const GradCheckOptions& options, BlockTracker& tracker, Rng& rng) {
    for (int instance = 0; instance < options.instances; ++instance) {
        const int n_ent = 2 + static_cast<int>(rng() % 7);  // <= 8
        const int n_rel = 1 + static_cast<int>(rng() % 3);
        const int d_e = 1 + static_cast<int>(rng() % 4);    // <= 4

        EmbeddingTable embeddings{random_matrix(rng, n_ent, d_e, 1.0)};
        RelationTable relations{random_matrix(rng, n_rel, d_e, 1.0)};

        auto random_tuples = [&](int count) {
            std::vector<Tuple> tuples;
            for (int i = 0; i < count; ++i)
                tuples.push_back({static_cast<int>(rng() % n_ent),
                                  static_cast<int>(rng() % n_rel),
                                  static_cast<int>(rng() % n_ent)});
            return tuples;
        };
        const auto positives = random_tuples(1 + static_cast<int>(rng() % 10));
        const auto negatives = random_tuples(1 + static_cast<int>(rng() % 10));

        KgObjective eval = kg_objective(embeddings, relations, positives, negatives);
        if (options.inject_fault)
            eval.grad.embeddings(0, 0) = eval.grad.embeddings(0, 0) * 1.001 + 1e-3;

        auto flatten = [](const Matrix& mat) {
            Vector flat(mat.size());
            Eigen::Index k = 0;
            for (Eigen::Index r = 0; r < mat.rows(); ++r)
                for (Eigen::Index c = 0; c < mat.cols(); ++c)
                    flat[k++] = mat(r, c);
            return flat;
        };
        auto unflatten = [](const Vector& flat, Eigen::Index rows, Eigen::Index cols) {
            Matrix mat(rows, cols);
            Eigen::Index k = 0;
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    mat(r, c) = flat[k++];
            return mat;
        };

        const Vector fd_embeddings = finite_difference_gradient(
            [&](const Vector& flat) {
                EmbeddingTable table{unflatten(flat, n_ent, d_e)};
                return kg_objective(table, relations, positives, negatives).value;
            },
            flatten(embeddings.vectors), options.fd_step);
        tracker.record("kg.embeddings",
                       max_relative_error(flatten(eval.grad.embeddings), fd_embeddings));

        const Vector fd_relations = finite_difference_gradient(
            [&](const Vector& flat) {
                RelationTable table{unflatten(flat, n_rel, d_e)};
                return kg_objective(embeddings, table, positives, negatives).value;
            },
            flatten(relations.vectors), options.fd_step);
        tracker.record("kg.relations",
                       max_relative_error(flatten(eval.grad.relations), fd_relations));
    }
}

void check_joint_blocks(const GradCheckOptions& options, BlockTracker& tracker, Rng& rng) {
    // Fixed shape: E=6, R=2, m=5, m'=3, n=12, d_x=d_e=2.
    JointDims dims;
    dims.entity_count = 6;
    dims.relation_count = 2;
    dims.embed_dim = 2;
    dims.latent_dim = 2;
    dims.attribute_count = 5;
    dims.tied_count = 3;

    std::vector<std::string> entities{"e0", "e1", "e2", "e3", "e4", "e5"};
    std::vector<std::string> relations{"r0", "r1"};

    for (int instance = 0; instance < options.instances; ++instance) {
        std::vector<Tuple> positives;
        std::unordered_set<Tuple, TupleHash> seen;
        const int n_pos = 4 + static_cast<int>(rng() % 5);
        while (static_cast<int>(positives.size()) < n_pos) {
            Tuple t{static_cast<int>(rng() % 6), static_cast<int>(rng() % 2),
                    static_cast<int>(rng() % 6)};
            if (seen.insert(t).second)
                positives.push_back(t);
        }
        KnowledgeGraph kg(entities, relations, positives, {0, 1, 2},
                          /*require_mapped_in_positives=*/false);

        std::vector<Tuple> negatives;
        const int n_neg = 4 + static_cast<int>(rng() % 5);
        while (static_cast<int>(negatives.size()) < n_neg) {
            Tuple t{static_cast<int>(rng() % 6), static_cast<int>(rng() % 2),
                    static_cast<int>(rng() % 6)};
            if (!kg.is_positive(t))
                negatives.push_back(t);
        }

        Dataset data;
        data.values = random_matrix(rng, 12, 5, 1.5);
        data.attribute_names = {"a0", "a1", "a2", "a3", "a4"};
        for (int j = 0; j < 12; ++j)
            data.object_ids.push_back(std::to_string(j));

        JointParams params;
        params.embeddings.vectors = random_matrix(rng, 6, 2, 1.0);
        params.relations.vectors = random_matrix(rng, 2, 2, 1.0);
        params.affine.A = random_matrix(rng, 2, 2, 1.0);
        params.affine.b = random_vector(rng, 2, 0.5);
        params.mu = random_vector(rng, 5, 1.0);
        params.log_var = random_vector(rng, 5, 0.5);
        params.free_loadings = random_matrix(rng, 2, 2, 1.0);

        JointEval eval = joint_objective(params, data, positives, negatives, kg);
        if (options.inject_fault)
            eval.grad.b[0] = eval.grad.b[0] * 1.001 + 1e-3;

        const Vector analytic = pack_gradients(eval.grad);
        const Vector fd = finite_difference_gradient(
            [&](const Vector& packed) {
                return joint_objective(unpack(packed, dims), data, positives, negatives, kg)
                    .value;
            },
            pack(params), options.fd_step);

        // Slice the packed vector back into named blocks for the report.
        struct Slice {
            const char* name;
            int size;
        };
        const Slice slices[] = {{"joint.embeddings", 12}, {"joint.relations", 4},
                                {"joint.affine_A", 4},    {"joint.affine_b", 2},
                                {"joint.mu", 5},          {"joint.log_var", 5},
                                {"joint.free_loadings", 4}};
        int offset = 0;
        for (const Slice& slice : slices) {
            tracker.record(slice.name,
                           max_relative_error(analytic.segment(offset, slice.size),
                                              fd.segment(offset, slice.size)));
            offset += slice.size;
        }
    }
}

}  // namespace

GradCheckReport grad_check(const GradCheckOptions& options) {
    BlockTracker tracker;
    Rng rng(options.seed);
    check_fa_blocks(options, tracker, rng);
    check_kg_blocks(options, tracker, rng);
    check_joint_blocks(options, tracker, rng);

    GradCheckReport report;
    report.tolerance = options.tolerance;
    for (const auto& [name, block] : tracker.blocks)
        report.blocks.push_back(block);
    return report;
}

std::string format_report(const GradCheckReport& report) {
    std::ostringstream out;
    for (const GradCheckBlock& block : report.blocks) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-22s instances=%-4d max_rel_err=%.3e  %s\n",
                      block.name.c_str(), block.instances, block.max_rel_err,
                      block.max_rel_err < report.tolerance ? "ok" : "FAIL");
        out << line;
    }
    out << (report.passed() ? "gradcheck: all blocks within tolerance "
                            : "gradcheck: TOLERANCE BREACH at ")
        << format_double(report.tolerance) << '\n';
    return out.str();
}

}  // namespace kgfa
