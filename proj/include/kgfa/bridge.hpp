#ifndef KGFA_BRIDGE_HPP
#define KGFA_BRIDGE_HPP

#include <span>

#include "kgfa/fa.hpp"
#include "kgfa/kg.hpp"
#include "kgfa/types.hpp"

namespace kgfa {

/// Embedding-to-loading map w = A e + b.
struct AffineMap {
    Matrix A;  // d_x x d_e
    Vector b;  // d_x
};

Vector affine_map(const AffineMap& map, const Vector& e);

/// Every free parameter of the joint model. Loading rows 0..m'-1 are not
/// stored: they are tied to entity embeddings through the affine map.
struct JointParams {
    EmbeddingTable embeddings;
    RelationTable relations;
    AffineMap affine;
    Vector mu;             // m
    Vector log_var;        // m
    Matrix free_loadings;  // (m - m') x d_x
};

struct JointDims {
    int entity_count = 0;     // E
    int relation_count = 0;   // R
    int embed_dim = 0;        // d_e
    int latent_dim = 0;       // d_x
    int attribute_count = 0;  // m
    int tied_count = 0;       // m'

    int free_count() const { return attribute_count - tied_count; }
    /// Total packed length: E*d_e + R*d_e + d_x*d_e + d_x + 2m + (m-m')*d_x.
    int packed_size() const;
};

JointDims dims_of(const JointParams& params);

/// m x d_x loading matrix: rows 0..m'-1 from the affine map applied to the
/// mapped entity embeddings, remaining rows copied from free_loadings.
Matrix assemble_loadings(const JointParams& params, const KnowledgeGraph& kg);

struct JointGradients {
    Matrix embeddings;
    Matrix relations;
    Matrix A;
    Vector b;
    Vector mu;
    Vector log_var;
    Matrix free_loadings;
};

JointGradients zero_gradients(const JointDims& dims);

struct JointEval {
    double value = 0.0;
    JointGradients grad;
};

/// Joint maximization objective
///   f = -fa_marginal_nll + kg_objective
/// with ascent gradients for every parameter block. Tied loading rows
/// chain into A, b and the corresponding entity embeddings; embeddings
/// also receive the classification-path terms of every tuple they occur in.
JointEval joint_objective(const JointParams& params, const Dataset& train_data,
                          std::span<const Tuple> positives, std::span<const Tuple> negatives,
                          const KnowledgeGraph& kg);

/// Flattens blocks in the fixed order
///   embeddings, relations, A, b, mu, log_var, free_loadings
/// (matrices row-major). unpack() is the exact inverse.
Vector pack(const JointParams& params);
Vector pack_gradients(const JointGradients& grad);
JointParams unpack(const Vector& packed, const JointDims& dims);

}  // namespace kgfa

#endif  // KGFA_BRIDGE_HPP
