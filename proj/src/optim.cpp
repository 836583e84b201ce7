#include "kgfa/optim.hpp"

#include <cmath>
#include <string>

namespace kgfa {

AdamState::AdamState(int size, AdamHyper hyper)
    : first_moment_(Vector::Zero(size)), second_moment_(Vector::Zero(size)), hyper_(hyper) {}

void AdamState::step(Vector& params, const Vector& grad) {
    if (params.size() != first_moment_.size() || grad.size() != first_moment_.size())
        throw std::invalid_argument("adam: parameter/gradient length mismatch");
    if (!grad.allFinite())
        throw NumericalError("adam: non-finite gradient at step " +
                             std::to_string(step_count_ + 1));

    ++step_count_;
    first_moment_ = hyper_.beta1 * first_moment_ + (1.0 - hyper_.beta1) * grad;
    second_moment_ =
        hyper_.beta2 * second_moment_.array() + (1.0 - hyper_.beta2) * grad.array().square();

    const double mom1_corr = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_count_));
    const double mom2_corr = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_count_));
    params.array() += hyper_.learning_rate * (first_moment_.array() / mom1_corr) /
                      ((second_moment_.array() / mom2_corr).sqrt() + hyper_.epsilon);
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1)
        throw std::invalid_argument("early stopping patience must be >= 1");
}

bool EarlyStopping::observe(double value) {
    ++observed_;
    if (value < best_value_) {
        best_value_ = value;
        best_epoch_ = observed_;
        epochs_since_best_ = 0;
        return true;
    }
    ++epochs_since_best_;
    return false;
}

JointParams init_params(const JointDims& dims, double init_scale, const Dataset& train_data,
                        Rng& rng) {
    if (init_scale <= 0.0)
        throw ConfigError("init_scale must be positive");
    if (train_data.n() < 1 || train_data.m() != dims.attribute_count)
        throw ConfigError("init_params: training data empty or column count mismatch");

    // Per-block sub-streams: a block's draw depends only on the incoming rng
    // state and the block's own shape, not on the other blocks' sizes.
    const std::uint64_t seed_embeddings = rng();
    const std::uint64_t seed_relations = rng();
    const std::uint64_t seed_affine = rng();
    const std::uint64_t seed_free = rng();

    auto gaussian_block = [init_scale](std::uint64_t seed, int rows, int cols) {
        Rng stream(seed);
        std::normal_distribution<double> normal(0.0, init_scale);
        Matrix block(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                block(r, c) = normal(stream);
        return block;
    };

    JointParams params;
    params.embeddings.vectors = gaussian_block(seed_embeddings, dims.entity_count, dims.embed_dim);
    params.relations.vectors = gaussian_block(seed_relations, dims.relation_count, dims.embed_dim);
    params.affine.A = gaussian_block(seed_affine, dims.latent_dim, dims.embed_dim);
    params.affine.b = Vector::Zero(dims.latent_dim);
    params.free_loadings = gaussian_block(seed_free, dims.free_count(), dims.latent_dim);

    params.mu = train_data.values.colwise().mean();
    const Matrix centered = train_data.values.rowwise() - params.mu.transpose();
    const Vector variance =
        centered.array().square().colwise().sum() / static_cast<double>(train_data.n());
    params.log_var = variance.array().max(1e-6).log();
    return params;
}

TrainRun train(const TrainOptions& options, const Dataset& train_data, const Dataset& val_data,
               const KnowledgeGraph& kg, std::vector<Tuple> positives,
               std::vector<Tuple> negatives, JointParams init, Rng& rng) {
    if (options.patience < 1 || options.max_epochs < 1)
        throw ConfigError("train: patience and max_epochs must be >= 1");

    const JointDims dims = dims_of(init);
    Vector packed = pack(init);
    AdamState adam(static_cast<int>(packed.size()), options.adam);
    EarlyStopping stopping(options.patience);

    TrainRun run;
    run.best_params = init;
    JointParams params = std::move(init);

    for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
        if (options.resample_negatives_each_epoch && !positives.empty()) {
            negatives.clear();
            for (const Tuple& positive : positives)
                for (const LabeledTuple& neg :
                     sample_negatives(positive, kg, options.negatives_per_positive, rng))
                    negatives.push_back(neg.tuple);
        }

        const JointEval eval = joint_objective(params, train_data, positives, negatives, kg);
        adam.step(packed, pack_gradients(eval.grad));
        params = unpack(packed, dims);

        const FaParams val_fa{params.mu, params.log_var, assemble_loadings(params, kg)};
        const double val_nll = fa_marginal_nll(val_data, val_fa);

        run.history.push_back({epoch, eval.value, val_nll});
        run.epochs_run = epoch;
        if (stopping.observe(val_nll)) {
            run.best_params = params;
            run.best_val_nll = val_nll;
            run.best_epoch = epoch;
        }
        if (stopping.exhausted())
            break;
    }
    return run;
}

}  // namespace kgfa
