#include "kgfa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "kgfa/text.hpp"

namespace kgfa {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

bool is_id_header(std::string cell) {
    std::transform(cell.begin(), cell.end(), cell.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return cell.empty() || cell == "id" || cell == "object_id";
}

Dataset take_rows(const Dataset& data, const std::vector<int>& rows) {
    Dataset out;
    out.attribute_names = data.attribute_names;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), data.values.cols());
    out.object_ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<Eigen::Index>(i)) = data.values.row(rows[i]);
        out.object_ids.push_back(data.object_ids[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

}  // namespace

std::string to_string(Scenario s) {
    return s == Scenario::Random ? "random" : "shift";
}

Scenario scenario_from_string(const std::string& name) {
    if (name == "random" || name == "Random")
        return Scenario::Random;
    if (name == "shift" || name == "Shift")
        return Scenario::Shift;
    throw ConfigError("unknown scenario: " + name + " (expected random or shift)");
}

Dataset load_dataset(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty())
        throw DataError(path + ": empty dataset file");

    const auto header = split(lines[0], ',');
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        auto cells = split(lines[i], ',');
        if (cells.size() != header.size())
            throw DataError(path + ": line " + std::to_string(i + 1) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        rows.push_back(std::move(cells));
    }
    if (rows.empty())
        throw DataError(path + ": no data rows");

    bool id_column = is_id_header(header[0]);
    if (!id_column)
        for (const auto& cells : rows)
            if (!parse_double(cells[0])) {
                id_column = true;
                break;
            }

    const std::size_t first_value = id_column ? 1 : 0;
    if (header.size() <= first_value)
        throw DataError(path + ": no attribute columns");

    Dataset data;
    data.attribute_names.assign(header.begin() + static_cast<long>(first_value), header.end());
    data.values.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(header.size() - first_value));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        data.object_ids.push_back(id_column ? rows[r][0] : std::to_string(r));
        for (std::size_t c = first_value; c < header.size(); ++c) {
            const auto value = parse_double(rows[r][c]);
            if (!value || !std::isfinite(*value))
                throw DataError(path + ": line " + std::to_string(r + 2) + ", column " +
                                header[c] + ": not a finite number: " + rows[r][c]);
            data.values(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(c - first_value)) = *value;
        }
    }
    return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write file: " + path);
    out << "id";
    for (const auto& name : data.attribute_names)
        out << ',' << name;
    out << '\n';
    for (int r = 0; r < data.n(); ++r) {
        out << data.object_ids[static_cast<std::size_t>(r)];
        for (int c = 0; c < data.m(); ++c)
            out << ',' << format_double(data.values(r, c));
        out << '\n';
    }
    if (!out)
        throw DataError("failed writing file: " + path);
}

KnowledgeGraph load_kg(const std::string& triples_path, const std::string& map_path,
                       const std::vector<std::string>& attribute_names,
                       std::vector<std::string>* warnings) {
    std::vector<std::string> entities;
    std::vector<std::string> relations;
    std::unordered_map<std::string, int> entity_index;
    std::unordered_map<std::string, int> relation_index;
    std::vector<Tuple> positives;
    std::unordered_set<Tuple, TupleHash> seen;

    auto intern = [](std::unordered_map<std::string, int>& index,
                     std::vector<std::string>& names, const std::string& name) {
        const auto [it, inserted] = index.emplace(name, static_cast<int>(names.size()));
        if (inserted)
            names.push_back(name);
        return it->second;
    };

    const auto lines = read_lines(triples_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        const auto fields = split(lines[i], '\t');
        if (fields.size() != 3)
            throw DataError(triples_path + ": line " + std::to_string(i + 1) +
                            ": expected head<TAB>relation<TAB>tail");
        Tuple t;
        t.head = intern(entity_index, entities, fields[0]);
        t.relation = intern(relation_index, relations, fields[1]);
        t.tail = intern(entity_index, entities, fields[2]);
        if (!seen.insert(t).second) {
            if (warnings)
                warnings->push_back(triples_path + ": line " + std::to_string(i + 1) +
                                    ": duplicate tuple ignored: " + lines[i]);
            continue;
        }
        positives.push_back(t);
    }

    std::vector<int> attribute_entity;
    if (!map_path.empty()) {
        std::unordered_map<std::string, int> attribute_index;
        for (std::size_t i = 0; i < attribute_names.size(); ++i)
            attribute_index.emplace(attribute_names[i], static_cast<int>(i));

        std::unordered_map<int, int> mapped;  // attribute index -> entity index
        const auto map_lines = read_lines(map_path);
        for (std::size_t i = 0; i < map_lines.size(); ++i) {
            if (map_lines[i].empty())
                continue;
            const auto fields = split(map_lines[i], '\t');
            if (fields.size() != 2)
                throw DataError(map_path + ": line " + std::to_string(i + 1) +
                                ": expected attribute_name<TAB>entity_name");
            const auto attr = attribute_index.find(fields[0]);
            if (attr == attribute_index.end())
                throw DataError(map_path + ": line " + std::to_string(i + 1) +
                                ": unknown attribute name: " + fields[0]);
            const auto ent = entity_index.find(fields[1]);
            if (ent == entity_index.end())
                throw DataError(map_path + ": line " + std::to_string(i + 1) + ": entity " +
                                fields[1] + " appears in no positive tuple");
            if (!mapped.emplace(attr->second, ent->second).second)
                throw DataError(map_path + ": line " + std::to_string(i + 1) +
                                ": attribute mapped twice: " + fields[0]);
        }

        // Tied attributes must form a prefix of the dataset columns.
        attribute_entity.reserve(mapped.size());
        for (int i = 0; i < static_cast<int>(mapped.size()); ++i) {
            const auto it = mapped.find(i);
            if (it == mapped.end())
                throw DataError(map_path + ": mapped attributes are not a prefix of the " +
                                "dataset columns (attribute " + attribute_names[static_cast<std::size_t>(i)] +
                                " is unmapped but a later attribute is)");
            attribute_entity.push_back(it->second);
        }
    }

    return KnowledgeGraph(std::move(entities), std::move(relations), std::move(positives),
                          std::move(attribute_entity));
}

void save_kg(const KnowledgeGraph& kg, const std::vector<std::string>& attribute_names,
             const std::string& triples_path, const std::string& map_path) {
    std::ofstream triples(triples_path);
    if (!triples)
        throw DataError("cannot write file: " + triples_path);
    for (const Tuple& t : kg.positives())
        triples << kg.entities()[static_cast<std::size_t>(t.head)] << '\t'
                << kg.relations()[static_cast<std::size_t>(t.relation)] << '\t'
                << kg.entities()[static_cast<std::size_t>(t.tail)] << '\n';
    if (!triples)
        throw DataError("failed writing file: " + triples_path);

    if (map_path.empty())
        return;
    if (static_cast<int>(attribute_names.size()) < kg.tied_count())
        throw ConfigError("save_kg: fewer attribute names than tied attributes");
    std::ofstream map_out(map_path);
    if (!map_out)
        throw DataError("cannot write file: " + map_path);
    for (int i = 0; i < kg.tied_count(); ++i)
        map_out << attribute_names[static_cast<std::size_t>(i)] << '\t'
                << kg.entities()[static_cast<std::size_t>(kg.entity_of_attribute(i))] << '\n';
    if (!map_out)
        throw DataError("failed writing file: " + map_path);
}

Partition partition(const Dataset& data, const PartitionSpec& spec) {
    const int n = data.n();
    if (spec.train_val_fraction <= 0.0 || spec.train_val_fraction > 1.0)
        throw ConfigError("train_val_fraction must be in (0, 1]");
    if (spec.val_fraction_within <= 0.0 || spec.val_fraction_within >= 1.0)
        throw ConfigError("val_fraction_within must be in (0, 1)");

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    if (spec.scenario == Scenario::Random)
        std::shuffle(order.begin(), order.end(), rng);

    const int n_train_val =
        static_cast<int>(std::ceil(spec.train_val_fraction * static_cast<double>(n)));
    std::vector<int> train_val(order.begin(), order.begin() + n_train_val);
    std::vector<int> test(order.begin() + n_train_val, order.end());

    std::vector<int> shuffled = train_val;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const int n_val =
        static_cast<int>(std::floor(spec.val_fraction_within * static_cast<double>(n_train_val)));
    const int n_train = n_train_val - n_val;
    std::vector<int> train(shuffled.begin(), shuffled.begin() + n_train);
    std::vector<int> val(shuffled.begin() + n_train, shuffled.end());

    if (spec.scenario == Scenario::Shift) {
        std::sort(train.begin(), train.end());
        std::sort(val.begin(), val.end());
    }

    if (train.empty() || val.empty() || test.empty())
        throw ConfigError("partition produced an empty split (n=" + std::to_string(n) +
                          ", train=" + std::to_string(train.size()) + ", val=" +
                          std::to_string(val.size()) + ", test=" + std::to_string(test.size()) +
                          ")");

    Partition result;
    result.train = take_rows(data, train);
    result.val = take_rows(data, val);
    result.test = take_rows(data, test);
    result.train_indices = std::move(train);
    result.val_indices = std::move(val);
    result.test_indices = std::move(test);
    return result;
}

KnowledgeGraph subsample_tuples(const KnowledgeGraph& kg, double proportion, Rng& rng) {
    if (proportion < 0.0 || proportion > 1.0)
        throw std::invalid_argument("tuple proportion must be in [0, 1]");

    const int total = kg.tuple_count();
    const int keep = static_cast<int>(std::floor(proportion * static_cast<double>(total)));
    std::vector<int> indices(static_cast<std::size_t>(total));
    std::iota(indices.begin(), indices.end(), 0);
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(static_cast<std::size_t>(keep));
    std::sort(indices.begin(), indices.end());

    std::vector<Tuple> kept;
    kept.reserve(indices.size());
    for (int idx : indices)
        kept.push_back(kg.positives()[static_cast<std::size_t>(idx)]);

    return KnowledgeGraph(kg.entities(), kg.relations(), std::move(kept), kg.attribute_entity(),
                          /*require_mapped_in_positives=*/false);
}

Synthetic generate_synthetic(const SyntheticSpec& spec) {
    if (spec.m_tied > spec.m_attributes || spec.m_tied < 0)
        throw ConfigError("synthetic: m_tied must be in [0, m_attributes]");
    if (spec.n_objects < 1 || spec.m_attributes < 1 || spec.d_x < 1 || spec.d_e < 1)
        throw ConfigError("synthetic: n_objects, m_attributes, d_x, d_e must be >= 1");
    const int n_entities = spec.m_tied + spec.n_extra_entities;
    if (n_entities > 0 && (spec.n_relations < 1 || spec.tuples_per_entity < 0))
        throw ConfigError("synthetic: n_relations must be >= 1, tuples_per_entity >= 0");
    if (n_entities == 1)
        throw ConfigError("synthetic: a single entity admits no tuples");
    if (spec.noise_std < 0.0)
        throw ConfigError("synthetic: noise_std must be >= 0");

    Rng rng(spec.ground_truth_seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    auto normal_matrix = [&](int rows, int cols, double scale) {
        Matrix block(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                block(r, c) = scale * unit_normal(rng);
        return block;
    };

    JointParams truth;
    // Entity embeddings live on directions of norm sqrt(d_e), so the score
    // scale does not hinge on norm outliers. With n_clusters >= 1 entities
    // sit in jittered groups around shared centers (round-robin assignment),
    // giving the graph a blocky relational structure.
    if (spec.n_clusters >= 1) {
        Matrix centers = normal_matrix(spec.n_clusters, spec.d_e, 1.0);
        for (int k = 0; k < spec.n_clusters; ++k) {
            const double norm = centers.row(k).norm();
            if (norm > 0.0)
                centers.row(k) *= std::sqrt(spec.d_e) / norm;
        }
        truth.embeddings.vectors = normal_matrix(n_entities, spec.d_e, spec.cluster_jitter);
        for (int e = 0; e < n_entities; ++e)
            truth.embeddings.vectors.row(e) += centers.row(e % spec.n_clusters);
    } else {
        truth.embeddings.vectors = normal_matrix(n_entities, spec.d_e, 1.0);
        for (int e = 0; e < n_entities; ++e) {
            const double norm = truth.embeddings.vectors.row(e).norm();
            if (norm > 0.0)
                truth.embeddings.vectors.row(e) *= std::sqrt(spec.d_e) / norm;
        }
    }
    truth.relations.vectors = normal_matrix(spec.n_relations, spec.d_e, 1.0);
    truth.affine.A =
        normal_matrix(spec.d_x, spec.d_e, spec.signal_scale / std::sqrt(spec.d_e));
    truth.affine.b = normal_matrix(spec.d_x, 1, 0.2 * spec.signal_scale).col(0);
    truth.free_loadings =
        normal_matrix(spec.m_attributes - spec.m_tied, spec.d_x, spec.signal_scale);
    truth.mu = normal_matrix(spec.m_attributes, 1, spec.signal_scale).col(0);
    truth.log_var =
        Vector::Constant(spec.m_attributes, std::log(std::max(spec.noise_std * spec.noise_std, 1e-12)));

    // Entity/relation vocabularies: tied attribute entities first.
    std::vector<std::string> entities;
    std::vector<std::string> attribute_names;
    for (int i = 0; i < spec.m_attributes; ++i)
        attribute_names.push_back("attr_" + std::to_string(i));
    for (int i = 0; i < spec.m_tied; ++i)
        entities.push_back(attribute_names[static_cast<std::size_t>(i)]);
    for (int i = 0; i < spec.n_extra_entities; ++i)
        entities.push_back("node_" + std::to_string(i));
    std::vector<std::string> relations;
    for (int r = 0; r < spec.n_relations; ++r)
        relations.push_back("rel_" + std::to_string(r));
    std::vector<int> attribute_entity(static_cast<std::size_t>(spec.m_tied));
    std::iota(attribute_entity.begin(), attribute_entity.end(), 0);

    // Positive tuples: per head entity, a random subset of the (relation,
    // tail) pairs whose ground-truth score clears the margin, so the graph
    // carries embedding information. tuples_per_entity = 0 lists every
    // qualifying pair.
    std::vector<Tuple> positives;
    if (n_entities > 1) {
        for (int head = 0; head < n_entities; ++head) {
            std::vector<Tuple> qualifying;
            for (int rel = 0; rel < spec.n_relations; ++rel)
                for (int tail = 0; tail < n_entities; ++tail) {
                    if (tail == head)
                        continue;
                    const double score =
                        distmult_score(truth.embeddings.vectors.row(head).transpose(),
                                       truth.embeddings.vectors.row(tail).transpose(),
                                       truth.relations.vectors.row(rel).transpose());
                    if (score >= spec.score_margin)
                        qualifying.push_back({head, rel, tail});
                }
            if (qualifying.empty() ||
                static_cast<int>(qualifying.size()) < spec.tuples_per_entity)
                throw SamplingError("synthetic: only " + std::to_string(qualifying.size()) +
                                    " tuples above the score margin for entity " +
                                    entities[static_cast<std::size_t>(head)] + ", need " +
                                    std::to_string(std::max(spec.tuples_per_entity, 1)));
            if (spec.tuples_per_entity == 0) {
                positives.insert(positives.end(), qualifying.begin(), qualifying.end());
            } else {
                std::shuffle(qualifying.begin(), qualifying.end(), rng);
                positives.insert(positives.end(), qualifying.begin(),
                                 qualifying.begin() + spec.tuples_per_entity);
            }
        }
    }

    Synthetic out;
    out.kg = KnowledgeGraph(std::move(entities), std::move(relations), std::move(positives),
                            std::move(attribute_entity));

    const Matrix loadings = assemble_loadings(truth, out.kg);
    out.dataset.attribute_names = attribute_names;
    out.dataset.values.resize(spec.n_objects, spec.m_attributes);
    for (int j = 0; j < spec.n_objects; ++j) {
        Vector latent(spec.d_x);
        for (int k = 0; k < spec.d_x; ++k)
            latent[k] = unit_normal(rng);
        Vector y = loadings * latent + truth.mu;
        for (int i = 0; i < spec.m_attributes; ++i)
            y[i] += spec.noise_std * unit_normal(rng);
        out.dataset.values.row(j) = y.transpose();
        out.dataset.object_ids.push_back(std::to_string(j));
    }
    out.ground_truth = std::move(truth);
    return out;
}

Dataset slice_dataset(const Dataset& data, int begin, int end) {
    if (begin < 0 || end > data.n() || begin >= end)
        throw std::invalid_argument("slice_dataset: invalid row range");
    std::vector<int> rows(static_cast<std::size_t>(end - begin));
    std::iota(rows.begin(), rows.end(), begin);
    return take_rows(data, rows);
}

}  // namespace kgfa
