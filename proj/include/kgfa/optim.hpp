#ifndef KGFA_OPTIM_HPP
#define KGFA_OPTIM_HPP

#include <limits>
#include <vector>

#include "kgfa/bridge.hpp"
#include "kgfa/types.hpp"

namespace kgfa {

struct AdamHyper {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam, ascent convention: step() moves params along the
/// gradient of the objective being maximized.
class AdamState {
public:
    AdamState(int size, AdamHyper hyper);

    void step(Vector& params, const Vector& grad);

    long step_count() const { return step_count_; }
    const AdamHyper& hyper() const { return hyper_; }

private:
    Vector first_moment_;
    Vector second_moment_;
    long step_count_ = 0;
    AdamHyper hyper_;
};

/// Patience counter over a validation-loss sequence; keeps the argmin.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);

    /// Records one validation value; returns true if it is a new minimum.
    bool observe(double value);
    bool exhausted() const { return epochs_since_best_ >= patience_; }

    double best_value() const { return best_value_; }
    /// 1-based index of the best observation, 0 if none seen.
    int best_epoch() const { return best_epoch_; }
    int epochs_since_best() const { return epochs_since_best_; }

private:
    int patience_;
    double best_value_ = std::numeric_limits<double>::infinity();
    int best_epoch_ = 0;
    int epochs_since_best_ = 0;
    int observed_ = 0;
};

/// Gaussian init for embeddings, relations, A and free loadings; b = 0;
/// mu and log_var from per-attribute training moments (variance floored
/// at 1e-6). Each block draws from its own stream seeded off `rng`, so a
/// block's values depend only on the seed and its own shape.
JointParams init_params(const JointDims& dims, double init_scale, const Dataset& train_data,
                        Rng& rng);

struct EpochRecord {
    int epoch = 0;
    double train_objective = 0.0;
    double val_fa_nll = 0.0;
};

struct TrainOptions {
    AdamHyper adam;
    int patience = 50;
    int max_epochs = 5000;
    bool resample_negatives_each_epoch = false;
    int negatives_per_positive = 2;
};

struct TrainRun {
    JointParams best_params;
    double best_val_nll = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    std::vector<EpochRecord> history;
};

/// Full-batch gradient ascent on the joint objective. One epoch is one
/// Adam step over all training objects and all supplied tuples, followed
/// by a validation FA-NLL evaluation (the KG terms are excluded from the
/// validation metric). Stops when the validation loss has not improved
/// for `patience` epochs or at max_epochs; returns the best snapshot,
/// never the last iterate.
TrainRun train(const TrainOptions& options, const Dataset& train_data, const Dataset& val_data,
               const KnowledgeGraph& kg, std::vector<Tuple> positives,
               std::vector<Tuple> negatives, JointParams init, Rng& rng);

}  // namespace kgfa

#endif  // KGFA_OPTIM_HPP
