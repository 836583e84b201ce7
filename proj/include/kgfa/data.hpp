#ifndef KGFA_DATA_HPP
#define KGFA_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kgfa/bridge.hpp"
#include "kgfa/fa.hpp"
#include "kgfa/kg.hpp"
#include "kgfa/types.hpp"

namespace kgfa {

enum class Scenario { Random, Shift };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct PartitionSpec {
    Scenario scenario = Scenario::Random;
    double train_val_fraction = 0.8;   // share of objects in train+val
    double val_fraction_within = 0.2;  // share of train+val used for validation
    std::uint64_t seed = 0;
};

struct Partition {
    Dataset train;
    Dataset val;
    Dataset test;
    std::vector<int> train_indices;
    std::vector<int> val_indices;
    std::vector<int> test_indices;
};

/// Random: objects are permuted by seed, the first ceil(f*n) form
/// train+val, the rest test. Shift: same sizes, original order kept, test
/// is the contiguous suffix. Within train+val a seeded random val subset
/// is drawn; under Shift both splits keep the original object order.
Partition partition(const Dataset& data, const PartitionSpec& spec);

/// CSV: header row of attribute names, optional leading object-id column.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& data, const std::string& path);

/// Triples: one `head<TAB>relation<TAB>tail` per line, vocabularies in
/// first-appearance order, duplicates dropped with a warning. Map file:
/// `attribute_name<TAB>entity_name` per line; mapped attributes must form
/// a prefix of `attribute_names`. Empty map path gives m' = 0.
KnowledgeGraph load_kg(const std::string& triples_path, const std::string& map_path,
                       const std::vector<std::string>& attribute_names,
                       std::vector<std::string>* warnings = nullptr);
void save_kg(const KnowledgeGraph& kg, const std::vector<std::string>& attribute_names,
             const std::string& triples_path, const std::string& map_path);

/// Keeps floor(proportion * l) uniformly random tuples; vocabularies and
/// the attribute map are unchanged. Proportion 1 returns the graph as is.
KnowledgeGraph subsample_tuples(const KnowledgeGraph& kg, double proportion, Rng& rng);

struct SyntheticSpec {
    int n_objects = 200;
    int m_attributes = 20;
    int m_tied = 15;
    int d_x = 5;
    int d_e = 5;
    int n_extra_entities = 10;
    int n_relations = 2;
    int tuples_per_entity = 4;
    double noise_std = 0.5;
    double signal_scale = 1.0;  // multiplies loadings, offsets and means
    double score_margin = 0.5;  // minimum ground-truth DistMult score of a positive
    int n_clusters = 0;         // 0 = unclustered entity embeddings
    double cluster_jitter = 0.15;
    std::uint64_t ground_truth_seed = 1;
};

struct Synthetic {
    Dataset dataset;
    KnowledgeGraph kg;
    JointParams ground_truth;
};

/// Draws ground-truth embeddings and affine map, ties the first m' loading
/// rows exactly, generates positive tuples whose ground-truth DistMult
/// score exceeds the margin, and samples observations from the FA model.
Synthetic generate_synthetic(const SyntheticSpec& spec);

/// First n rows of `data` keeping names/ids (synthetic-split helper).
Dataset slice_dataset(const Dataset& data, int begin, int end);

}  // namespace kgfa

#endif  // KGFA_DATA_HPP
