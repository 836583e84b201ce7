#ifndef KGFA_EXPERIMENT_HPP
#define KGFA_EXPERIMENT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kgfa/data.hpp"
#include "kgfa/optim.hpp"
#include "kgfa/types.hpp"

namespace kgfa {

/// Every knob of the sweep protocol; defaults follow the reference setup
/// (d_x = d_e = 5, patience 50, two negatives per positive, 10 trials).
struct TrainConfig {
    int d_x = 5;
    int d_e = 5;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int patience = 50;
    int max_epochs = 5000;
    int negatives_per_positive = 2;
    bool resample_negatives_each_epoch = false;
    bool dump_history = false;  // per-trial epoch,train_objective,val_fa_nll CSVs
    std::vector<double> tuple_proportions{1.0};
    std::vector<double> train_fractions{0.8};
    Scenario scenario = Scenario::Random;
    int n_trials = 10;
    std::uint64_t base_seed = 1;
    double init_scale = 0.1;
    double val_fraction_within = 0.2;
    std::string dataset_path;
    std::string triples_path;
    std::string map_path;
    std::string output_dir;
};

/// Short stable hash of the knobs that define a run.
std::string config_fingerprint(const TrainConfig& config);

struct TrialResult {
    Scenario scenario = Scenario::Random;
    double tuple_proportion = 1.0;
    double train_fraction = 0.8;
    int trial = 0;
    std::uint64_t seed = 0;
    double test_nll = 0.0;
    double best_val_nll = 0.0;
    int epochs_run = 0;
    std::string fingerprint;
    bool failed = false;
    std::string error;
};

struct ExperimentOutcome {
    std::vector<TrialResult> trials;
    std::vector<std::string> summary_files;
    bool all_ok = true;
};

/// Runs n_trials trials for every (tuple_proportion, train_fraction) cell
/// under the configured scenario, writes per-trial rows and the per-axis
/// summary tables into config.output_dir. Trial t uses seed base_seed + t,
/// so trials are paired across cells. A numerically failed trial marks the
/// outcome but does not stop the other cells.
ExperimentOutcome run_experiment(const TrainConfig& config, const Dataset& data,
                                 const KnowledgeGraph& kg);

/// One seeded trial: partition, tuple subsampling, negative sampling,
/// init, training, and test NLL of the best snapshot.
TrialResult run_trial(const TrainConfig& config, const Dataset& data, const KnowledgeGraph& kg,
                      double tuple_proportion, double train_fraction, int trial_index);

/// Plot-ready table: one `x mean std` row per group, ascending in x,
/// population standard deviation, round-trip-exact decimals. Empty groups
/// are skipped with a warning.
void emit_summary(const std::map<double, std::vector<double>>& groups, const std::string& path,
                  std::vector<std::string>* warnings = nullptr);

void write_trials(const std::vector<TrialResult>& trials, const std::string& path);
std::vector<TrialResult> read_trials(const std::string& path);

/// Regenerates every summary table from per-trial rows (the `summarize`
/// verb); returns the files written.
std::vector<std::string> summarize_trials(const std::vector<TrialResult>& trials,
                                          const std::string& output_dir);

struct GradCheckOptions {
    int instances = 100;
    std::uint64_t seed = 20240501;
    double tolerance = 1e-5;
    double fd_step = 1e-5;
    /// Test hook: perturbs one analytic gradient so the check must fail.
    bool inject_fault = false;
};

struct GradCheckBlock {
    std::string name;
    int instances = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double tolerance = 1e-5;

    bool passed() const;
};

/// Central finite-difference audit of every analytic gradient block
/// (FA, classification terms, packed joint objective) on random instances.
GradCheckReport grad_check(const GradCheckOptions& options);

std::string format_report(const GradCheckReport& report);

}  // namespace kgfa

#endif  // KGFA_EXPERIMENT_HPP
