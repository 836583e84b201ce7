#ifndef KGFA_KG_HPP
#define KGFA_KG_HPP

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgfa/types.hpp"

namespace kgfa {

/// (head, relation, tail) by vocabulary index.
struct Tuple {
    int head = 0;
    int relation = 0;
    int tail = 0;

    friend bool operator==(const Tuple&, const Tuple&) = default;
    friend auto operator<=>(const Tuple&, const Tuple&) = default;
};

struct TupleHash {
    std::size_t operator()(const Tuple& t) const {
        std::uint64_t x = static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.head));
        x = (x << 21) ^ static_cast<std::uint32_t>(t.relation);
        x = (x << 21) ^ static_cast<std::uint32_t>(t.tail);
        x *= 0x9e3779b97f4a7c15ULL;
        return static_cast<std::size_t>(x ^ (x >> 32));
    }
};

enum class EntityClass { Attribute, Other };
enum class Label { Positive, Negative };

struct LabeledTuple {
    Tuple tuple;
    Label label = Label::Negative;
};

/// Immutable multi-relational graph plus the attribute->entity binding.
///
/// The attribute map covers dataset attributes 0..m'-1 (the tied prefix);
/// each mapped entity is flagged EntityClass::Attribute, everything else
/// EntityClass::Other. Construction validates index bounds, duplicate
/// tuples, and injectivity of the map.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;
    KnowledgeGraph(std::vector<std::string> entities,
                   std::vector<std::string> relations,
                   std::vector<Tuple> positives,
                   std::vector<int> attribute_entity,
                   bool require_mapped_in_positives = true);

    int entity_count() const { return static_cast<int>(entities_.size()); }
    int relation_count() const { return static_cast<int>(relations_.size()); }
    int tuple_count() const { return static_cast<int>(positives_.size()); }
    /// Number of tied (attribute-corresponding) dataset columns, m'.
    int tied_count() const { return static_cast<int>(attribute_entity_.size()); }

    const std::vector<std::string>& entities() const { return entities_; }
    const std::vector<std::string>& relations() const { return relations_; }
    const std::vector<Tuple>& positives() const { return positives_; }
    const std::vector<int>& attribute_entity() const { return attribute_entity_; }

    bool is_positive(const Tuple& t) const { return positive_set_.contains(t); }
    int entity_of_attribute(int attribute_index) const;
    EntityClass entity_class(int entity) const { return entity_class_[entity]; }
    /// Entity ids of one class, ascending.
    const std::vector<int>& entities_of_class(EntityClass c) const {
        return c == EntityClass::Attribute ? attribute_entities_ : other_entities_;
    }

private:
    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::vector<Tuple> positives_;
    std::unordered_set<Tuple, TupleHash> positive_set_;
    std::vector<int> attribute_entity_;  // tied attribute index -> entity id
    std::vector<EntityClass> entity_class_;
    std::vector<int> attribute_entities_;
    std::vector<int> other_entities_;
};

/// Entity embeddings, one row per entity (E x d_e).
struct EmbeddingTable {
    Matrix vectors;

    int count() const { return static_cast<int>(vectors.rows()); }
    int dim() const { return static_cast<int>(vectors.cols()); }
};

/// DistMult relation vectors, one row per relation (R x d_e).
struct RelationTable {
    Matrix vectors;

    int count() const { return static_cast<int>(vectors.rows()); }
    int dim() const { return static_cast<int>(vectors.cols()); }
};

/// DistMult score sum_k e_h[k] * m_r[k] * e_t[k].
double distmult_score(const Vector& e_head, const Vector& e_tail, const Vector& m_rel);

struct DistmultGrad {
    Vector e_head;
    Vector e_tail;
    Vector m_rel;
};

DistmultGrad distmult_score_grad(const Vector& e_head, const Vector& e_tail,
                                 const Vector& m_rel);

/// log(sigmoid(x)), stable for large |x|.
double log_sigmoid(double x);

/// log p(label | score) under the logistic classification likelihood.
double tuple_log_likelihood(double score, Label label);

/// Corrupts head or tail of `positive` k times. Slot is chosen uniformly,
/// the replacement uniformly from the same entity class excluding both
/// tuple endpoints (no corruption into a self-loop); draws colliding with
/// the positive set are rejected and resampled up to 100 times.
std::vector<LabeledTuple> sample_negatives(const Tuple& positive, const KnowledgeGraph& kg,
                                           int k, Rng& rng);

struct KgGradients {
    Matrix embeddings;  // E x d_e
    Matrix relations;   // R x d_e
};

struct KgObjective {
    double value = 0.0;
    KgGradients grad;
};

/// Classification terms of the joint objective:
/// (1/l) sum log sigmoid(psi_pos) + (1/l') sum log(1 - sigmoid(psi_neg)),
/// with gradients accumulated into embedding and relation tables.
/// Both lists empty gives value 0 and zero gradients.
KgObjective kg_objective(const EmbeddingTable& embeddings, const RelationTable& relations,
                         std::span<const Tuple> positives, std::span<const Tuple> negatives);

}  // namespace kgfa

#endif  // KGFA_KG_HPP
