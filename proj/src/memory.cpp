#include "mrn/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mrn {

MemoryMode parse_memory_mode(const std::string& name) {
    if (name == "support_only") return MemoryMode::support_only;
    if (name == "transductive") return MemoryMode::transductive;
    if (name == "semi_supervised") return MemoryMode::semi_supervised;
    throw ConfigError("unknown memory mode '" + name + "'");
}

std::string memory_mode_name(MemoryMode mode) {
    switch (mode) {
        case MemoryMode::support_only: return "support_only";
        case MemoryMode::transductive: return "transductive";
        case MemoryMode::semi_supervised: return "semi_supervised";
    }
    return "?";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "weighted") return Strategy::weighted;
    if (name == "mean") return Strategy::mean;
    if (name == "max") return Strategy::max;
    throw ConfigError("unknown aggregation strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::weighted: return "weighted";
        case Strategy::mean: return "mean";
        case Strategy::max: return "max";
    }
    return "?";
}

Tensor EpisodicMemory::support_features() const {
    return ops::gather_rows(slots, support_rows);
}

Tensor EpisodicMemory::query_features() const {
    if (queries_transient) return transient;
    return ops::gather_rows(slots, query_rows);
}

void PropagationConfig::validate() const {
    if (lambda < 0.0 || lambda > 1.0) {
        throw ConfigError("propagation: lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
    if (k < 0) throw ConfigError("propagation: k must be non-negative");
    if (depth < 0) throw ConfigError("propagation: depth must be non-negative");
}

EpisodicMemory memory_init(const Tensor& features, const std::vector<Provenance>& provenance,
                           MemoryMode mode, std::uint64_t episode_id) {
    if (features.rank() != 2) {
        throw UsageError("memory_init: features must be n x d, got " + shape_str(features.shape()));
    }
    if (static_cast<Dim>(provenance.size()) != features.dim(0)) {
        throw UsageError("memory_init: provenance size does not match feature rows");
    }

    const bool admit_query = mode != MemoryMode::support_only;
    const bool admit_unlabeled = mode == MemoryMode::semi_supervised;

    std::vector<int> admitted;
    std::vector<int> transient_rows;
    std::vector<Provenance> tags;
    for (std::size_t i = 0; i < provenance.size(); ++i) {
        const Provenance p = provenance[i];
        const bool admit = p == Provenance::support || (p == Provenance::query && admit_query) ||
                           (p == Provenance::unlabeled && admit_unlabeled);
        if (admit) {
            admitted.push_back(static_cast<int>(i));
            tags.push_back(p);
        } else if (p == Provenance::query) {
            transient_rows.push_back(static_cast<int>(i));
        }
    }
    if (admitted.empty()) throw UsageError("memory_init: no instances admitted by mode");

    EpisodicMemory memory;
    memory.episode_id = episode_id;
    memory.slots = ops::gather_rows(features, admitted);
    memory.provenance = std::move(tags);
    for (std::size_t i = 0; i < memory.provenance.size(); ++i) {
        if (memory.provenance[i] == Provenance::support) memory.support_rows.push_back(static_cast<int>(i));
        else if (memory.provenance[i] == Provenance::query) memory.query_rows.push_back(static_cast<int>(i));
    }
    if (mode == MemoryMode::support_only && !transient_rows.empty()) {
        memory.queries_transient = true;
        memory.transient = ops::gather_rows(features, transient_rows);
        memory.query_rows.clear();
        for (std::size_t i = 0; i < transient_rows.size(); ++i) memory.query_rows.push_back(static_cast<int>(i));
    }
    return memory;
}

std::vector<std::vector<int>> select_neighbors(const std::vector<double>& dist, Dim rows, Dim cols,
                                               int k, bool exclude_self) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(rows));
    if (k <= 0) return out;
    std::vector<int> candidates;
    for (Dim i = 0; i < rows; ++i) {
        candidates.clear();
        for (Dim j = 0; j < cols; ++j) {
            if (exclude_self && j == i) continue;
            candidates.push_back(static_cast<int>(j));
        }
        const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
        const auto base = static_cast<std::size_t>(i * cols);
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(kk),
                          candidates.end(), [&](int a, int b) {
                              const double da = dist[base + static_cast<std::size_t>(a)];
                              const double db = dist[base + static_cast<std::size_t>(b)];
                              if (da != db) return da < db;
                              return a < b;
                          });
        candidates.resize(kk);
        out[static_cast<std::size_t>(i)] = candidates;
    }
    return out;
}

RelationGraph build_graph(const EpisodicMemory& memory, int k, MetricKind metric,
                          RelationParams* params, bool symmetrize, bool training) {
    if (!memory.slots.defined()) throw UsageError("build_graph: memory has no slots");
    RelationGraph graph;
    graph.edges = pairwise_matrix(memory.slots, metric, params, training);
    if (symmetrize) {
        graph.edges = ops::scale(ops::add(graph.edges, ops::transpose(graph.edges)), 0.5);
    }
    const Dim m = memory.slot_count();
    graph.neighbors = select_neighbors(graph.edges.data(), m, m, k, true);
    return graph;
}

std::vector<double> aggregation_weights(const std::vector<double>& distances) {
    if (distances.empty()) throw UsageError("aggregation_weights: empty neighbor set");
    const double dmin = *std::min_element(distances.begin(), distances.end());
    std::vector<double> w(distances.size());
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(-(distances[i] - dmin));
        s += w[i];
    }
    for (double& v : w) v /= s;
    return w;
}

Tensor aggregation_weights(const Tensor& distances) {
    if (distances.rank() != 1) {
        throw UsageError("aggregation_weights: expected a 1-D distance vector, got " +
                         shape_str(distances.shape()));
    }
    const Dim n = distances.dim(0);
    std::vector<int> all(static_cast<std::size_t>(n));
    for (Dim i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = static_cast<int>(i);
    Tensor w = ops::neighbor_softmax(ops::reshape(distances, Shape{1, n}), {all});
    return ops::reshape(w, Shape{n});
}

namespace {

// lambda * base + (1 - lambda) * agg
Tensor convex_update(const Tensor& base, const Tensor& agg, double lambda, bool stop_gradient) {
    const Tensor contribution = stop_gradient ? ops::detach(agg) : agg;
    return ops::add(ops::scale(base, lambda), ops::scale(contribution, 1.0 - lambda));
}

Tensor aggregate(const Tensor& dist, const Tensor& source_slots,
                 const std::vector<std::vector<int>>& sel, Strategy strategy) {
    switch (strategy) {
        case Strategy::weighted: {
            Tensor w = ops::neighbor_softmax(dist, sel);
            return ops::matmul(w, source_slots);
        }
        case Strategy::mean: {
            const Dim r = dist.dim(0), c = dist.dim(1);
            std::vector<double> w(static_cast<std::size_t>(r * c), 0.0);
            for (Dim i = 0; i < r; ++i) {
                const auto& s = sel[static_cast<std::size_t>(i)];
                for (int j : s) w[static_cast<std::size_t>(i * c + j)] = 1.0 / static_cast<double>(s.size());
            }
            return ops::matmul(Tensor(Shape{r, c}, std::move(w)), source_slots);
        }
        case Strategy::max:
            return ops::rowwise_max_over(source_slots, sel);
    }
    throw UsageError("aggregate: unknown strategy");
}

}  // namespace

void propagate(EpisodicMemory& memory, const PropagationConfig& config, RelationParams* relation,
               bool training) {
    config.validate();
    if (config.metric == MetricKind::learned_relation && relation == nullptr) {
        throw UsageError("propagate: learned metric needs relation params");
    }
    // exact identity short-circuits (bit-preserving by construction)
    if (config.depth == 0 || config.k == 0 || config.lambda == 1.0) return;

    const Dim m = memory.slot_count();
    if (m == 0) throw UsageError("propagate: empty memory");

    for (int step = 0; step < config.depth; ++step) {
        Tensor dist = pairwise_matrix(memory.slots, config.metric, relation, training);
        if (config.symmetrize) {
            dist = ops::scale(ops::add(dist, ops::transpose(dist)), 0.5);
        }
        const auto sel = select_neighbors(dist.data(), m, m, config.k, true);

        Tensor slots_next = memory.slots;
        if (m > 1) {
            Tensor agg = aggregate(dist, memory.slots, sel, config.strategy);
            slots_next = convex_update(memory.slots, agg, config.lambda, config.stop_gradient);
        }

        if (memory.transient.defined()) {
            // transient queries read from pre-step memory and never feed back
            Tensor qdist = distance_matrix(memory.transient, memory.slots, config.metric, relation, training);
            const Dim q = memory.transient.dim(0);
            const auto qsel = select_neighbors(qdist.data(), q, m, config.k, false);
            Tensor qagg = aggregate(qdist, memory.slots, qsel, config.strategy);
            memory.transient = convex_update(memory.transient, qagg, config.lambda, config.stop_gradient);
        }
        memory.slots = slots_next;
    }
}

void export_similarity(const EpisodicMemory& memory, MetricKind metric, RelationParams* params,
                       const std::string& path) {
    NoGradGuard no_grad;
    Tensor dist = pairwise_matrix(memory.slots, metric, params, false);
    const Dim m = memory.slot_count();
    const auto& dd = dist.data();

    std::ofstream out(path);
    if (!out) throw IoError("export_similarity: cannot open '" + path + "' for writing");
    out << "# provenance: ";
    for (Dim i = 0; i < m; ++i) {
        if (i) out << ',';
        switch (memory.provenance[static_cast<std::size_t>(i)]) {
            case Provenance::support: out << 's'; break;
            case Provenance::query: out << 'q'; break;
            case Provenance::unlabeled: out << 'u'; break;
        }
    }
    out << '\n';
    char buf[64];
    for (Dim i = 0; i < m; ++i) {
        for (Dim j = 0; j < m; ++j) {
            std::snprintf(buf, sizeof buf, "%.9g", std::exp(-dd[static_cast<std::size_t>(i * m + j)]));
            if (j) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("export_similarity: write to '" + path + "' failed");
}

std::vector<std::vector<double>> read_similarity_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_similarity_csv: cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace mrn
