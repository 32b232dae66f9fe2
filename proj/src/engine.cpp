#include "mrn/engine.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace mrn {

namespace {

constexpr std::uint64_t kTrainStream = 0x7121;
constexpr std::uint64_t kEvalStream = 0xE7A1;

Tensor assemble_batch(const std::vector<const Instance*>& instances, const Shape& input_shape) {
    if (instances.empty()) throw UsageError("assemble_batch: no instances");
    const Dim per = shape_size(input_shape);
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(per) * instances.size());
    for (const Instance* inst : instances) {
        if (shape_size(inst->shape) != per) {
            throw UsageError("episode instance shape " + shape_str(inst->shape) +
                             " does not match encoder input " + shape_str(input_shape));
        }
        data.insert(data.end(), inst->payload.begin(), inst->payload.end());
    }
    Shape batch_shape = input_shape;
    batch_shape.insert(batch_shape.begin(), static_cast<Dim>(instances.size()));
    return Tensor(std::move(batch_shape), std::move(data));
}

}  // namespace

std::uint64_t train_episode_seed(std::uint64_t run_seed, long episode_index) {
    return derive_seed(run_seed, kTrainStream + static_cast<std::uint64_t>(episode_index));
}

std::uint64_t eval_episode_seed(std::uint64_t eval_seed, long episode_index) {
    return derive_seed(eval_seed, kEvalStream + static_cast<std::uint64_t>(episode_index));
}

EvalReport summarize_accuracies(const std::vector<double>& per_episode) {
    if (per_episode.empty()) throw UsageError("summarize_accuracies: no episodes");
    EvalReport report;
    report.per_episode = per_episode;
    report.episodes = static_cast<long>(per_episode.size());
    double acc = 0.0;
    for (double a : per_episode) acc += a;
    report.mean_accuracy = acc / static_cast<double>(report.episodes);
    if (report.episodes > 1) {
        double ss = 0.0;
        for (double a : per_episode) {
            const double d = a - report.mean_accuracy;
            ss += d * d;
        }
        const double stddev = std::sqrt(ss / static_cast<double>(report.episodes - 1));
        report.ci95 = 1.96 * stddev / std::sqrt(static_cast<double>(report.episodes));
    }
    return report;
}

EpisodeResult run_episode(Model& model, const Episode& episode, const RunConfig& config, bool training) {
    std::vector<const Instance*> instances;
    std::vector<Provenance> provenance;
    std::vector<int> support_labels, query_labels;
    for (const Instance& inst : episode.support) {
        instances.push_back(&inst);
        provenance.push_back(Provenance::support);
        support_labels.push_back(inst.local_label);
    }
    for (const Instance& inst : episode.query) {
        instances.push_back(&inst);
        provenance.push_back(Provenance::query);
        query_labels.push_back(inst.local_label);
    }
    for (const Instance& inst : episode.unlabeled) {
        instances.push_back(&inst);
        provenance.push_back(Provenance::unlabeled);
    }

    Tensor batch = assemble_batch(instances, config.encoder.input_shape);
    Tensor embeddings = model.encoder.encode(batch, training);

    EpisodicMemory memory = memory_init(embeddings, provenance, config.prop.memory_mode, episode.rng_seed);
    propagate(memory, config.prop, &model.relation, training);

    Tensor support_features = memory.support_features();
    Tensor query_features = memory.query_features();
    CentroidSet centroids = class_centroids(support_features, support_labels, config.ways);

    Tensor distances =
        distance_matrix(query_features, centroids.centroids, config.metric_dc, &model.relation, training);

    EpisodeResult result;
    result.loss = episode_loss_from_distances(distances, query_labels);
    result.predictions = predict_from_distances(distances);
    result.accuracy = accuracy(result.predictions, query_labels);
    return result;
}

TrainResult train(const RunConfig& raw_config, const Dataset& dataset, std::ostream* log) {
    raw_config.validate();
    const RunConfig config = raw_config.resolved();

    TrainResult result{Model::create(config), {}};
    ParamList params = result.model.parameters();

    AdamState adam;
    adam.lr = config.lr;
    adam.weight_decay = config.weight_decay;

    result.losses.reserve(static_cast<std::size_t>(config.total_episodes));
    for (long ep = 0; ep < config.total_episodes; ++ep) {
        adam.lr = config.lr * std::pow(0.5, static_cast<double>(ep / config.halve_every));
        const std::uint64_t seed = train_episode_seed(config.seed, ep);
        Episode episode = sample_episode(dataset, Split::train, config.ways, config.shots, config.queries,
                                         config.prop.memory_mode == MemoryMode::semi_supervised
                                             ? config.unlabeled
                                             : 0,
                                         seed);
        try {
            result.model.zero_grads();
            EpisodeResult out = run_episode(result.model, episode, config, true);
            out.loss.backward();
            adam_step(params, adam);
            result.losses.push_back(out.loss.item());
        } catch (const NumericError& err) {
            throw NumericError("train: aborted at episode " + std::to_string(ep) + " (seed " +
                               std::to_string(seed) + "): " + err.what());
        }
        if (log && ((ep + 1) % 500 == 0 || ep + 1 == config.total_episodes)) {
            double window = 0.0;
            const std::size_t n = std::min<std::size_t>(100, result.losses.size());
            for (std::size_t i = result.losses.size() - n; i < result.losses.size(); ++i)
                window += result.losses[i];
            (*log) << "episode " << (ep + 1) << "/" << config.total_episodes << "  lr " << adam.lr
                   << "  loss(last " << n << ") " << window / static_cast<double>(n) << '\n';
        }
    }

    save_checkpoint(config.checkpoint_path, result.model, raw_config);
    return result;
}

EvalReport evaluate_episodes(Model& model, const RunConfig& raw_config, const Dataset& dataset,
                             const std::vector<std::uint64_t>& episode_seeds) {
    const RunConfig config = raw_config.resolved();
    NoGradGuard no_grad;
    std::vector<double> accuracies;
    accuracies.reserve(episode_seeds.size());
    for (std::uint64_t seed : episode_seeds) {
        Episode episode = sample_episode(dataset, config.eval_split, config.ways, config.shots,
                                         config.queries,
                                         config.prop.memory_mode == MemoryMode::semi_supervised
                                             ? config.unlabeled
                                             : 0,
                                         seed);
        EpisodeResult out = run_episode(model, episode, config, false);
        accuracies.push_back(out.accuracy);
    }
    return summarize_accuracies(accuracies);
}

EvalReport evaluate(Model& model, const RunConfig& config, const Dataset& dataset, long n_episodes,
                    std::uint64_t seed) {
    if (n_episodes < 1) throw UsageError("evaluate: need at least one episode");
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(n_episodes));
    for (long i = 0; i < n_episodes; ++i) seeds.push_back(eval_episode_seed(seed, i));
    return evaluate_episodes(model, config, dataset, seeds);
}

SweepSpec SweepSpec::from_keys(const KeyValues& kv) {
    SweepSpec spec;
    auto split_list = [](const std::string& value) {
        std::vector<std::string> out;
        std::stringstream ss(value);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            if (b != std::string::npos) out.push_back(cell.substr(b, e - b + 1));
        }
        return out;
    };
    for (const auto& [key, value] : kv) {
        if (key == "sweep.variant") spec.variants = split_list(value);
        else if (key == "sweep.k") {
            for (const auto& s : split_list(value)) spec.k.push_back(std::stoi(s));
        } else if (key == "sweep.depth") {
            for (const auto& s : split_list(value)) spec.depth.push_back(std::stoi(s));
        } else if (key == "sweep.lambda") {
            for (const auto& s : split_list(value)) spec.lambda.push_back(std::stod(s));
        } else if (key == "sweep.strategy") spec.strategies = split_list(value);
        else if (key == "sweep.metric") spec.metrics = split_list(value);
        else if (key == "sweep.shots") {
            for (const auto& s : split_list(value)) spec.shots.push_back(std::stoi(s));
        } else if (key == "sweep.seeds") {
            spec.seeds.clear();
            for (const auto& s : split_list(value)) spec.seeds.push_back(std::stoull(s));
        } else if (key == "sweep.retrain") {
            spec.retrain = value == "true" || value == "1";
        } else {
            throw ConfigError("sweep: unknown key '" + key + "'");
        }
    }
    if (spec.seeds.empty()) throw ConfigError("sweep: needs at least one seed");
    return spec;
}

std::size_t SweepSpec::cell_count() const {
    auto dim = [](std::size_t n) { return n == 0 ? std::size_t{1} : n; };
    return dim(variants.size()) * dim(k.size()) * dim(depth.size()) * dim(lambda.size()) *
           dim(strategies.size()) * dim(metrics.size()) * dim(shots.size());
}

std::string results_csv_row(const RunConfig& resolved, std::uint64_t seed, const EvalReport& report) {
    std::ostringstream os;
    os.precision(10);
    os << resolved.variant << ',' << resolved.ways << ',' << resolved.shots << ',' << resolved.prop.k
       << ',' << resolved.prop.depth << ',' << resolved.prop.lambda << ','
       << strategy_name(resolved.prop.strategy) << ',' << metric_name(resolved.prop.metric) << ','
       << seed << ',' << report.episodes << ',' << report.mean_accuracy << ',' << report.ci95;
    return os.str();
}

void ablate(const RunConfig& base, const SweepSpec& sweep, const Dataset& dataset,
            const std::string& out_csv, std::ostream* log) {
    std::ofstream out(out_csv);
    if (!out) throw IoError("ablate: cannot open '" + out_csv + "'");
    out << kResultsCsvHeader << '\n';

    // cell enumeration: cartesian product over the provided lists
    struct Cell {
        std::optional<std::string> variant;
        std::optional<int> k, depth, shots;
        std::optional<double> lambda;
        std::optional<std::string> strategy, metric;
    };
    std::vector<Cell> cells{Cell{}};
    auto expand = [&cells](auto&& values, auto&& assign) {
        if (values.empty()) return;
        std::vector<Cell> next;
        next.reserve(cells.size() * values.size());
        for (const Cell& cell : cells)
            for (const auto& v : values) {
                Cell c = cell;
                assign(c, v);
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    };
    expand(sweep.variants, [](Cell& c, const std::string& v) { c.variant = v; });
    expand(sweep.k, [](Cell& c, int v) { c.k = v; });
    expand(sweep.depth, [](Cell& c, int v) { c.depth = v; });
    expand(sweep.lambda, [](Cell& c, double v) { c.lambda = v; });
    expand(sweep.strategies, [](Cell& c, const std::string& v) { c.strategy = v; });
    expand(sweep.metrics, [](Cell& c, const std::string& v) { c.metric = v; });
    expand(sweep.shots, [](Cell& c, int v) { c.shots = v; });

    for (std::uint64_t seed : sweep.seeds) {
        RunConfig seed_base = base;
        seed_base.seed = seed;

        std::optional<Model> shared_model;
        if (!sweep.retrain) {
            if (log) (*log) << "training base checkpoint for seed " << seed << '\n';
            shared_model = train(seed_base, dataset, log).model;
        }

        for (const Cell& cell : cells) {
            RunConfig cfg = seed_base;
            if (cell.variant) cfg.variant = *cell.variant;
            if (cell.k) cfg.prop.k = *cell.k;
            if (cell.depth) cfg.prop.depth = *cell.depth;
            if (cell.lambda) cfg.prop.lambda = *cell.lambda;
            if (cell.strategy) cfg.prop.strategy = parse_strategy(*cell.strategy);
            if (cell.metric) cfg.prop.metric = parse_metric(*cell.metric);
            if (cell.shots) cfg.shots = *cell.shots;
            cfg.validate();

            EvalReport report;
            if (sweep.retrain) {
                Model model = train(cfg, dataset, log).model;
                report = evaluate(model, cfg, dataset, cfg.eval_episodes, cfg.eval_seed);
            } else {
                report = evaluate(*shared_model, cfg, dataset, cfg.eval_episodes, cfg.eval_seed);
            }
            out << results_csv_row(cfg.resolved(), seed, report) << '\n';
            if (log) (*log) << results_csv_row(cfg.resolved(), seed, report) << '\n';
        }
    }
    if (!out) throw IoError("ablate: write to '" + out_csv + "' failed");
}

GradCheckResult episode_gradcheck(int depth, double h) {
    RunConfig cfg;
    cfg.ways = 2;
    cfg.shots = 1;
    cfg.queries = 2;  // 2 + 4 = 6 instances
    cfg.prop.k = 2;
    cfg.prop.depth = depth;
    cfg.prop.lambda = 0.2;
    cfg.prop.metric = MetricKind::learned_relation;
    cfg.prop.memory_mode = MemoryMode::transductive;
    cfg.encoder.kind = EncoderKind::mlp;
    cfg.encoder.input_shape = {4};
    cfg.encoder.mlp_dims = {8, 4};
    cfg.seed = 11;

    Model model = Model::create(cfg);
    ParamList params = model.parameters();

    // hand-built synthetic episode, fixed seed
    Rng rng(derive_seed(21, 0xE9));
    Episode episode;
    episode.rng_seed = 21;
    auto make = [&](int label, double shift) {
        Instance inst;
        inst.shape = Shape{4};
        inst.payload.resize(4);
        for (double& v : inst.payload) v = shift + rng.normal(0.0, 0.5);
        inst.global_class = label;
        inst.local_label = label;
        return inst;
    };
    episode.support.push_back(make(0, -1.0));
    episode.support.push_back(make(1, 1.0));
    for (int i = 0; i < 2; ++i) {
        episode.query.push_back(make(0, -1.0));
        episode.query.push_back(make(1, 1.0));
    }

    auto loss_fn = [&]() { return run_episode(model, episode, cfg, true).loss; };
    return finite_diff_check(loss_fn, params, h);
}

}  // namespace mrn
