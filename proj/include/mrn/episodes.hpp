#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrn/rng.hpp"
#include "mrn/tensor.hpp"

namespace mrn {

enum class Split { train, val, test };

Split parse_split(const std::string& name);
std::string split_name(Split split);

struct Item {
    int class_id = 0;
    Shape shape;
    std::vector<double> payload;
};

// Immutable after construction. Splits partition the label space; episode
// samplers draw from one split's classes only.
struct Dataset {
    std::vector<Item> items;
    std::map<int, Split> class_split;
    std::map<int, std::vector<int>> class_index;  // class id -> item indices
    bool hflip_augment = false;  // applied at sampling time, train split only

    void rebuild_index();
    void validate() const;
    std::vector<int> classes_in(Split split) const;
};

struct Instance {
    Shape shape;
    std::vector<double> payload;
    int global_class = -1;   // -1 for unlabeled
    int local_label = -1;
};

// One K-shot C-way task. Supports and queries are class-major in sampled
// class order; local labels run 0..C-1 in that order.
struct Episode {
    std::vector<Instance> support;
    std::vector<Instance> query;
    std::vector<Instance> unlabeled;
    std::map<int, int> class_map;  // global -> episode-local
    std::uint64_t rng_seed = 0;
};

// Uniform sampling without replacement; S and Q never share an item.
// Horizontal flips (p = 0.5 per instance) apply only when the dataset has
// augmentation enabled and the split is train.
Episode sample_episode(const Dataset& dataset, Split split, int ways, int shots, int queries_per_class,
                       int unlabeled_per_class, std::uint64_t seed);

struct SynthSpec {
    int classes = 20;
    Dim dim = 16;
    double cluster_std = 0.2;
    double center_std = 1.0;
    int items_per_class = 50;
    std::uint64_t seed = 0;
    // class counts per split; -1 -> default floor(60%)/floor(20%)/rest
    std::array<int, 3> split_counts = {-1, -1, -1};

    void validate() const;
};

// Gaussian clusters: class centers from N(0, center_std^2 I), items from
// N(center, cluster_std^2 I). Deterministic per seed.
Dataset synth_dataset(const SynthSpec& spec);

// Binary dataset file plus a `<path>.manifest` sidecar listing split
// membership by class id.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Reverses the last axis of a rank >= 2 payload (image column order).
void hflip_in_place(Instance& instance);

}  // namespace mrn
