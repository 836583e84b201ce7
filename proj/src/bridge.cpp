#include "kgfa/bridge.hpp"

#include <string>

namespace kgfa {

namespace {

void write_row_major(const Matrix& block, Vector& out, Eigen::Index& offset) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c)
            out[offset++] = block(r, c);
}

void write_vector(const Vector& block, Vector& out, Eigen::Index& offset) {
    out.segment(offset, block.size()) = block;
    offset += block.size();
}

Matrix read_row_major(const Vector& in, Eigen::Index& offset, int rows, int cols) {
    Matrix block(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            block(r, c) = in[offset++];
    return block;
}

Vector read_vector(const Vector& in, Eigen::Index& offset, int size) {
    Vector block = in.segment(offset, size);
    offset += size;
    return block;
}

Vector pack_blocks(const Matrix& embeddings, const Matrix& relations, const Matrix& A,
                   const Vector& b, const Vector& mu, const Vector& log_var,
                   const Matrix& free_loadings) {
    Vector out(embeddings.size() + relations.size() + A.size() + b.size() + mu.size() +
               log_var.size() + free_loadings.size());
    Eigen::Index offset = 0;
    write_row_major(embeddings, out, offset);
    write_row_major(relations, out, offset);
    write_row_major(A, out, offset);
    write_vector(b, out, offset);
    write_vector(mu, out, offset);
    write_vector(log_var, out, offset);
    write_row_major(free_loadings, out, offset);
    return out;
}

}  // namespace

int JointDims::packed_size() const {
    return entity_count * embed_dim + relation_count * embed_dim + latent_dim * embed_dim +
           latent_dim + 2 * attribute_count + free_count() * latent_dim;
}

JointDims dims_of(const JointParams& params) {
    JointDims dims;
    dims.entity_count = params.embeddings.count();
    dims.relation_count = params.relations.count();
    dims.embed_dim = static_cast<int>(params.affine.A.cols());
    dims.latent_dim = static_cast<int>(params.affine.A.rows());
    dims.attribute_count = static_cast<int>(params.mu.size());
    dims.tied_count =
        dims.attribute_count - static_cast<int>(params.free_loadings.rows());
    return dims;
}

Vector affine_map(const AffineMap& map, const Vector& e) {
    if (map.A.cols() != e.size())
        throw std::invalid_argument("affine_map: embedding dimension mismatch");
    return map.A * e + map.b;
}

Matrix assemble_loadings(const JointParams& params, const KnowledgeGraph& kg) {
    const JointDims dims = dims_of(params);
    if (kg.tied_count() != dims.tied_count)
        throw ConfigError("assemble_loadings: attribute map covers " +
                          std::to_string(kg.tied_count()) + " attributes but parameters have " +
                          std::to_string(dims.tied_count) + " tied rows");

    Matrix loadings(dims.attribute_count, dims.latent_dim);
    for (int i = 0; i < dims.tied_count; ++i) {
        const int entity = kg.entity_of_attribute(i);
        loadings.row(i) =
            (params.affine.A * params.embeddings.vectors.row(entity).transpose() +
             params.affine.b)
                .transpose();
    }
    loadings.bottomRows(dims.free_count()) = params.free_loadings;
    return loadings;
}

JointGradients zero_gradients(const JointDims& dims) {
    JointGradients g;
    g.embeddings = Matrix::Zero(dims.entity_count, dims.embed_dim);
    g.relations = Matrix::Zero(dims.relation_count, dims.embed_dim);
    g.A = Matrix::Zero(dims.latent_dim, dims.embed_dim);
    g.b = Vector::Zero(dims.latent_dim);
    g.mu = Vector::Zero(dims.attribute_count);
    g.log_var = Vector::Zero(dims.attribute_count);
    g.free_loadings = Matrix::Zero(dims.free_count(), dims.latent_dim);
    return g;
}

JointEval joint_objective(const JointParams& params, const Dataset& train_data,
                          std::span<const Tuple> positives, std::span<const Tuple> negatives,
                          const KnowledgeGraph& kg) {
    const JointDims dims = dims_of(params);

    FaParams fa{params.mu, params.log_var, assemble_loadings(params, kg)};
    const FaEval fa_eval = fa_marginal_nll_eval(train_data, fa);
    const KgObjective kg_eval =
        kg_objective(params.embeddings, params.relations, positives, negatives);

    JointEval eval;
    eval.value = -fa_eval.nll + kg_eval.value;
    eval.grad = zero_gradients(dims);
    eval.grad.embeddings = kg_eval.grad.embeddings;
    eval.grad.relations = kg_eval.grad.relations;
    eval.grad.mu = -fa_eval.grad.mu;
    eval.grad.log_var = -fa_eval.grad.log_var;

    // Ascent direction on the loading rows, routed by the tying constraint:
    // tied rows flow into A, b and the mapped entity embedding, free rows
    // stay their own parameters.
    const Matrix loading_grad = -fa_eval.grad.loadings;
    for (int i = 0; i < dims.tied_count; ++i) {
        const int entity = kg.entity_of_attribute(i);
        const Vector row_grad = loading_grad.row(i).transpose();
        eval.grad.A += row_grad * params.embeddings.vectors.row(entity);
        eval.grad.b += row_grad;
        eval.grad.embeddings.row(entity) +=
            (params.affine.A.transpose() * row_grad).transpose();
    }
    eval.grad.free_loadings = loading_grad.bottomRows(dims.free_count());
    return eval;
}

Vector pack(const JointParams& params) {
    return pack_blocks(params.embeddings.vectors, params.relations.vectors, params.affine.A,
                       params.affine.b, params.mu, params.log_var, params.free_loadings);
}

Vector pack_gradients(const JointGradients& grad) {
    return pack_blocks(grad.embeddings, grad.relations, grad.A, grad.b, grad.mu, grad.log_var,
                       grad.free_loadings);
}

JointParams unpack(const Vector& packed, const JointDims& dims) {
    if (packed.size() != dims.packed_size())
        throw std::invalid_argument("unpack: expected length " +
                                    std::to_string(dims.packed_size()) + ", got " +
                                    std::to_string(packed.size()));
    JointParams params;
    Eigen::Index offset = 0;
    params.embeddings.vectors = read_row_major(packed, offset, dims.entity_count, dims.embed_dim);
    params.relations.vectors =
        read_row_major(packed, offset, dims.relation_count, dims.embed_dim);
    params.affine.A = read_row_major(packed, offset, dims.latent_dim, dims.embed_dim);
    params.affine.b = read_vector(packed, offset, dims.latent_dim);
    params.mu = read_vector(packed, offset, dims.attribute_count);
    params.log_var = read_vector(packed, offset, dims.attribute_count);
    params.free_loadings = read_row_major(packed, offset, dims.free_count(), dims.latent_dim);
    return params;
}

}  // namespace kgfa
