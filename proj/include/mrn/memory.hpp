#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mrn/relation.hpp"

namespace mrn {

enum class Provenance { support, query, unlabeled };
enum class MemoryMode { support_only, transductive, semi_supervised };
enum class Strategy { weighted, mean, max };

MemoryMode parse_memory_mode(const std::string& name);
std::string memory_mode_name(MemoryMode mode);
Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

// Per-episode working context: one slot per admitted instance. Created at
// episode start, destroyed with the episode; slots always hold the latest
// propagation depth's embeddings. In support_only mode queries ride along
// as transient nodes that aggregate FROM memory but are never admitted.
struct EpisodicMemory {
    Tensor slots;  // m x d
    std::vector<Provenance> provenance;
    std::uint64_t episode_id = 0;
    Tensor transient;                  // q x d, defined only in support_only mode
    std::vector<int> support_rows;     // into slots
    std::vector<int> query_rows;       // into slots, or into transient when support_only
    bool queries_transient = false;

    Dim slot_count() const { return slots.defined() ? slots.dim(0) : 0; }
    Tensor support_features() const;
    Tensor query_features() const;
};

struct PropagationConfig {
    int k = 20;
    int depth = 1;
    double lambda = 0.2;
    Strategy strategy = Strategy::weighted;
    MetricKind metric = MetricKind::learned_relation;
    MemoryMode memory_mode = MemoryMode::transductive;
    bool symmetrize = false;      // average d_ij and d_ji before selection
    bool stop_gradient = false;   // detach the aggregated neighbor term

    void validate() const;
    int effective_k(Dim m) const { return static_cast<int>(std::min<Dim>(k, m - 1)); }
};

// Weighted k-NN graph over the current slot contents.
struct RelationGraph {
    Tensor edges;                             // m x m distances D_G(f_i, f_j)
    std::vector<std::vector<int>> neighbors;  // A_i, ascending distance, ties by index
};

// `features` holds one row per episode instance with matching provenance
// tags. The mode decides which rows become memory slots.
EpisodicMemory memory_init(const Tensor& features, const std::vector<Provenance>& provenance,
                           MemoryMode mode, std::uint64_t episode_id);

RelationGraph build_graph(const EpisodicMemory& memory, int k, MetricKind metric,
                          RelationParams* params, bool symmetrize = false, bool training = false);

// Ascending-distance neighbor selection with ties broken by lower index;
// self excluded when `exclude_self`. Row count `rows`, candidate count `cols`.
std::vector<std::vector<int>> select_neighbors(const std::vector<double>& dist, Dim rows, Dim cols,
                                               int k, bool exclude_self);

// exp(-d) attention over one neighbor set, stabilized by min subtraction.
Tensor aggregation_weights(const Tensor& distances);
std::vector<double> aggregation_weights(const std::vector<double>& distances);

// Synchronous depth-d embedding enhancement: per depth, rebuild the graph
// from the current slots and replace every slot by
// lambda * f_i + (1-lambda) * aggregate(A_i), all from pre-step values.
// k = 0, depth = 0 and lambda = 1 are exact identities.
void propagate(EpisodicMemory& memory, const PropagationConfig& config, RelationParams* relation,
               bool training = false);

// m x m matrix of exp(-D_G) over current slots, CSV with a provenance header
// row; entries carry 9 significant digits.
void export_similarity(const EpisodicMemory& memory, MetricKind metric, RelationParams* params,
                       const std::string& path);

// Parses a file written by export_similarity back into a dense matrix.
std::vector<std::vector<double>> read_similarity_csv(const std::string& path);

}  // namespace mrn
