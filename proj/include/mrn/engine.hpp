#pragma once

#include <functional>
#include <iosfwd>
#include <optional>

#include "mrn/checkpoint.hpp"
#include "mrn/classifier.hpp"
#include "mrn/gradcheck.hpp"

namespace mrn {

struct EvalReport {
    double mean_accuracy = 0.0;
    double ci95 = 0.0;  // 1.96 * stddev(per_episode) / sqrt(episodes)
    std::vector<double> per_episode;
    long episodes = 0;
};

EvalReport summarize_accuracies(const std::vector<double>& per_episode);

struct EpisodeResult {
    Tensor loss;
    std::vector<int> predictions;
    double accuracy = 0.0;
};

// Full pipeline on one episode: encode S u Q (u pool) -> memory_init ->
// propagate -> centroids -> loss/predictions. Expects a variant-resolved
// config.
EpisodeResult run_episode(Model& model, const Episode& episode, const RunConfig& config, bool training);

struct TrainResult {
    Model model;
    std::vector<double> losses;  // one per episode
};

// Episodic meta-training: one Adam step per episode, learning rate halved
// every `halve_every` episodes, checkpoint written atomically at the end.
// A non-finite loss aborts with the offending episode's seed in the message.
TrainResult train(const RunConfig& config, const Dataset& dataset, std::ostream* log = nullptr);

// Evaluation over explicitly seeded episodes (order-independent by
// construction) and the (n, seed)-derived convenience wrapper.
EvalReport evaluate_episodes(Model& model, const RunConfig& config, const Dataset& dataset,
                             const std::vector<std::uint64_t>& episode_seeds);
EvalReport evaluate(Model& model, const RunConfig& config, const Dataset& dataset, long n_episodes,
                    std::uint64_t seed);

std::uint64_t train_episode_seed(std::uint64_t run_seed, long episode_index);
std::uint64_t eval_episode_seed(std::uint64_t eval_seed, long episode_index);

// Grid sweep over propagation knobs and variants. Unless `retrain` is set,
// one checkpoint per seed is trained from the base config and reused across
// cells, which then differ only in inference-time propagation.
struct SweepSpec {
    std::vector<std::string> variants;
    std::vector<int> k;
    std::vector<int> depth;
    std::vector<double> lambda;
    std::vector<std::string> strategies;
    std::vector<std::string> metrics;  // D_G
    std::vector<int> shots;
    std::vector<std::uint64_t> seeds = {1};
    bool retrain = false;

    static SweepSpec from_keys(const KeyValues& kv);
    std::size_t cell_count() const;
};

inline const char* kResultsCsvHeader =
    "variant,C,K,k,d,lambda,strategy,metric_DG,seed,episodes,mean_acc,ci95";

std::string results_csv_row(const RunConfig& resolved, std::uint64_t seed, const EvalReport& report);

void ablate(const RunConfig& base, const SweepSpec& sweep, const Dataset& dataset,
            const std::string& out_csv, std::ostream* log = nullptr);

// Finite-difference gate over the complete episode loss (MLP encoder,
// learned D_G, k = 2, 6-sample transductive episode).
GradCheckResult episode_gradcheck(int depth = 2, double h = 1e-5);

}  // namespace mrn
