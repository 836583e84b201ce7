#include "kgfa/kg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kgfa {

namespace {

void check_dims(const Vector& e_head, const Vector& e_tail, const Vector& m_rel) {
    if (e_head.size() != e_tail.size() || e_head.size() != m_rel.size())
        throw std::invalid_argument("distmult: embedding/relation dimension mismatch");
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> entities,
                               std::vector<std::string> relations, std::vector<Tuple> positives,
                               std::vector<int> attribute_entity,
                               bool require_mapped_in_positives)
    : entities_(std::move(entities)),
      relations_(std::move(relations)),
      positives_(std::move(positives)),
      attribute_entity_(std::move(attribute_entity)) {
    const int n_ent = entity_count();
    const int n_rel = relation_count();

    for (const Tuple& t : positives_) {
        if (t.head < 0 || t.head >= n_ent || t.tail < 0 || t.tail >= n_ent ||
            t.relation < 0 || t.relation >= n_rel)
            throw ConfigError("knowledge graph tuple index out of vocabulary bounds");
        if (!positive_set_.insert(t).second)
            throw ConfigError("knowledge graph positive set contains duplicates");
    }

    entity_class_.assign(n_ent, EntityClass::Other);
    for (int i = 0; i < tied_count(); ++i) {
        const int ent = attribute_entity_[i];
        if (ent < 0 || ent >= n_ent)
            throw ConfigError("attribute map entity index out of bounds");
        if (entity_class_[ent] == EntityClass::Attribute)
            throw ConfigError("attribute map is not injective: entity " + entities_[ent] +
                              " is mapped twice");
        entity_class_[ent] = EntityClass::Attribute;
    }

    if (require_mapped_in_positives) {
        std::vector<bool> seen(n_ent, false);
        for (const Tuple& t : positives_) {
            seen[t.head] = true;
            seen[t.tail] = true;
        }
        for (int ent : attribute_entity_)
            if (!seen[ent])
                throw ConfigError("attribute-corresponding entity " + entities_[ent] +
                                  " appears in no positive tuple");
    }

    for (int e = 0; e < n_ent; ++e)
        (entity_class_[e] == EntityClass::Attribute ? attribute_entities_ : other_entities_)
            .push_back(e);
}

int KnowledgeGraph::entity_of_attribute(int attribute_index) const {
    if (attribute_index < 0 || attribute_index >= tied_count())
        throw ConfigError("attribute index " + std::to_string(attribute_index) +
                          " has no entity mapping");
    return attribute_entity_[attribute_index];
}

double distmult_score(const Vector& e_head, const Vector& e_tail, const Vector& m_rel) {
    check_dims(e_head, e_tail, m_rel);
    return (e_head.array() * m_rel.array() * e_tail.array()).sum();
}

DistmultGrad distmult_score_grad(const Vector& e_head, const Vector& e_tail,
                                 const Vector& m_rel) {
    check_dims(e_head, e_tail, m_rel);
    DistmultGrad g;
    g.e_head = (m_rel.array() * e_tail.array()).matrix();
    g.e_tail = (m_rel.array() * e_head.array()).matrix();
    g.m_rel = (e_head.array() * e_tail.array()).matrix();
    return g;
}

double log_sigmoid(double x) {
    // log(1/(1+e^-x)) = -log1p(e^-x) for x >= 0, x - log1p(e^x) otherwise.
    if (x >= 0.0)
        return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double tuple_log_likelihood(double score, Label label) {
    return label == Label::Positive ? log_sigmoid(score) : log_sigmoid(-score);
}

std::vector<LabeledTuple> sample_negatives(const Tuple& positive, const KnowledgeGraph& kg,
                                           int k, Rng& rng) {
    if (k < 1)
        throw std::invalid_argument("sample_negatives: k must be >= 1");

    constexpr int kMaxRetries = 100;
    std::uniform_int_distribution<int> slot_dist(0, 1);

    // The replacement is drawn uniformly from the replaced entity's class,
    // excluding both tuple endpoints (a corruption may not create a
    // self-loop), then rejected if it collides with a positive.
    auto pool_excluding = [&](int replaced, int other) {
        const auto& pool = kg.entities_of_class(kg.entity_class(replaced));
        std::vector<int> excluded{replaced};
        if (other != replaced &&
            std::binary_search(pool.begin(), pool.end(), other))
            excluded.push_back(other);
        std::sort(excluded.begin(), excluded.end());  // pool positions ascending
        return std::pair{&pool, excluded};
    };

    std::vector<LabeledTuple> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int drawn = 0; drawn < k; ++drawn) {
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxRetries && !accepted; ++attempt) {
            const bool corrupt_head = slot_dist(rng) == 0;
            const int replaced = corrupt_head ? positive.head : positive.tail;
            const int other = corrupt_head ? positive.tail : positive.head;
            const auto [pool, excluded] = pool_excluding(replaced, other);
            const int candidates = static_cast<int>(pool->size() - excluded.size());
            if (candidates < 1)
                continue;  // this slot has no valid replacement; redraw

            std::uniform_int_distribution<int> pick(0, candidates - 1);
            int idx = pick(rng);
            // Map the draw past the excluded (sorted) pool positions.
            for (int skip : excluded) {
                const auto pos = static_cast<int>(
                    std::lower_bound(pool->begin(), pool->end(), skip) - pool->begin());
                if (idx >= pos)
                    ++idx;
            }
            const int replacement = (*pool)[static_cast<std::size_t>(idx)];

            Tuple corrupted = positive;
            (corrupt_head ? corrupted.head : corrupted.tail) = replacement;
            if (!kg.is_positive(corrupted)) {
                out.push_back({corrupted, Label::Negative});
                accepted = true;
            }
        }
        if (!accepted)
            throw SamplingError(
                "could not corrupt tuple (" + kg.entities()[positive.head] + ", " +
                kg.relations()[positive.relation] + ", " + kg.entities()[positive.tail] +
                ") into a non-positive within " + std::to_string(kMaxRetries) + " tries");
    }
    return out;
}

KgObjective kg_objective(const EmbeddingTable& embeddings, const RelationTable& relations,
                         std::span<const Tuple> positives, std::span<const Tuple> negatives) {
    KgObjective result;
    result.grad.embeddings = Matrix::Zero(embeddings.vectors.rows(), embeddings.vectors.cols());
    result.grad.relations = Matrix::Zero(relations.vectors.rows(), relations.vectors.cols());

    // d/ds log sigmoid(s) = sigmoid(-s); d/ds log(1 - sigmoid(s)) = -sigmoid(s).
    auto accumulate = [&](const Tuple& t, double inv_count, bool is_positive) {
        const auto e_h = embeddings.vectors.row(t.head).array();
        const auto e_t = embeddings.vectors.row(t.tail).array();
        const auto m_r = relations.vectors.row(t.relation).array();
        const double score = (e_h * m_r * e_t).sum();

        double coef;
        if (is_positive) {
            result.value += inv_count * log_sigmoid(score);
            coef = inv_count / (1.0 + std::exp(score));
        } else {
            result.value += inv_count * log_sigmoid(-score);
            coef = -inv_count / (1.0 + std::exp(-score));
        }
        result.grad.embeddings.row(t.head).array() += coef * (m_r * e_t);
        result.grad.embeddings.row(t.tail).array() += coef * (m_r * e_h);
        result.grad.relations.row(t.relation).array() += coef * (e_h * e_t);
    };

    if (!positives.empty()) {
        const double inv = 1.0 / static_cast<double>(positives.size());
        for (const Tuple& t : positives)
            accumulate(t, inv, true);
    }
    if (!negatives.empty()) {
        const double inv = 1.0 / static_cast<double>(negatives.size());
        for (const Tuple& t : negatives)
            accumulate(t, inv, false);
    }
    return result;
}

}  // namespace kgfa
