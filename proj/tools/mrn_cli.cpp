#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mrn/engine.hpp"

namespace {

mrn::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    mrn::RunConfig cfg;
    if (!path.empty()) cfg = mrn::RunConfig::from_keys(mrn::parse_config_file(path));
    cfg.apply_overrides(overrides);
    return cfg;
}

void print_report(const mrn::EvalReport& report) {
    std::printf("episodes:  %ld\n", report.episodes);
    std::printf("mean_acc:  %.4f\n", report.mean_accuracy);
    std::printf("ci95:      %.4f\n", report.ci95);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"episodic few-shot classifier with a learnable relation metric and "
                 "memory-based feature propagation"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, sweep_path, out_path, spec_path;
    std::vector<std::string> overrides;
    long episodes = -1;
    long long seed = -1;
    long long episode_seed = 0;
    int depth = 2;
    double h = 1e-5;

    auto* train_cmd = app.add_subcommand("train", "train a model episodically and write a checkpoint");
    train_cmd->add_option("--config", config_path, "flat key = value config file");
    train_cmd->add_option("--override", overrides, "key=value settings that win over the config file");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with mean accuracy and 95% CI");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--episodes", episodes, "number of evaluation episodes");
    eval_cmd->add_option("--seed", seed, "evaluation seed");
    eval_cmd->add_option("--override", overrides, "inference-time overrides (e.g. prop.k=5)");
    eval_cmd->add_option("--out", out_path, "append a results CSV row to this file");

    auto* ablate_cmd = app.add_subcommand("ablate", "grid sweep over variants and propagation knobs");
    ablate_cmd->add_option("--config", config_path, "base config file");
    ablate_cmd->add_option("--sweep", sweep_path, "sweep spec file (sweep.* keys)")->required();
    ablate_cmd->add_option("--out", out_path, "output CSV")->required();
    ablate_cmd->add_option("--override", overrides, "overrides applied to the base config");

    auto* export_cmd = app.add_subcommand("export-similarity", "write the exp(-D_G) matrix of one episode");
    export_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    export_cmd->add_option("--episode-seed", episode_seed, "episode sampling seed")->required();
    export_cmd->add_option("--out", out_path, "output CSV")->required();

    auto* synth_cmd = app.add_subcommand("gen-synth", "generate a synthetic Gaussian-cluster dataset");
    synth_cmd->add_option("--spec", spec_path, "spec file (synth.* keys)")->required();
    synth_cmd->add_option("--out", out_path, "output directory")->required();

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of the episode loss");
    gradcheck_cmd->add_option("--depth", depth, "propagation depth (default 2)");
    gradcheck_cmd->add_option("--step", h, "finite-difference step (default 1e-5)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            mrn::RunConfig cfg = load_config(config_path, overrides);
            mrn::Dataset data = cfg.load_data();
            mrn::TrainResult result = mrn::train(cfg, data, &std::cout);
            std::printf("checkpoint written to %s\n", cfg.checkpoint_path.c_str());
        } else if (*eval_cmd) {
            mrn::Checkpoint ckpt = mrn::load_checkpoint(checkpoint_path);
            ckpt.config.apply_overrides(overrides);
            mrn::Dataset data = ckpt.config.load_data();
            const long n = episodes > 0 ? episodes : ckpt.config.eval_episodes;
            const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : ckpt.config.eval_seed;
            mrn::EvalReport report = mrn::evaluate(ckpt.model, ckpt.config, data, n, s);
            print_report(report);
            if (!out_path.empty()) {
                std::ofstream out(out_path, std::ios::app);
                if (out.tellp() == 0) out << mrn::kResultsCsvHeader << '\n';
                out << mrn::results_csv_row(ckpt.config.resolved(), s, report) << '\n';
            }
        } else if (*ablate_cmd) {
            mrn::RunConfig base = load_config(config_path, overrides);
            mrn::SweepSpec sweep = mrn::SweepSpec::from_keys(mrn::parse_config_file(sweep_path));
            mrn::Dataset data = base.load_data();
            mrn::ablate(base, sweep, data, out_path, &std::cout);
            std::printf("results written to %s\n", out_path.c_str());
        } else if (*export_cmd) {
            mrn::Checkpoint ckpt = mrn::load_checkpoint(checkpoint_path);
            const mrn::RunConfig cfg = ckpt.config.resolved();
            mrn::Dataset data = cfg.load_data();
            mrn::Episode episode = mrn::sample_episode(
                data, cfg.eval_split, cfg.ways, cfg.shots, cfg.queries,
                cfg.prop.memory_mode == mrn::MemoryMode::semi_supervised ? cfg.unlabeled : 0,
                static_cast<std::uint64_t>(episode_seed));
            mrn::NoGradGuard no_grad;
            std::vector<const mrn::Instance*> instances;
            std::vector<mrn::Provenance> provenance;
            std::vector<double> batch_data;
            mrn::Shape batch_shape = cfg.encoder.input_shape;
            auto push = [&](const std::vector<mrn::Instance>& list, mrn::Provenance tag) {
                for (const mrn::Instance& inst : list) {
                    instances.push_back(&inst);
                    provenance.push_back(tag);
                    batch_data.insert(batch_data.end(), inst.payload.begin(), inst.payload.end());
                }
            };
            push(episode.support, mrn::Provenance::support);
            push(episode.query, mrn::Provenance::query);
            push(episode.unlabeled, mrn::Provenance::unlabeled);
            batch_shape.insert(batch_shape.begin(), static_cast<mrn::Dim>(instances.size()));
            mrn::Tensor batch(batch_shape, batch_data);
            mrn::Tensor embeddings = ckpt.model.encoder.encode(batch, false);
            mrn::EpisodicMemory memory =
                mrn::memory_init(embeddings, provenance, cfg.prop.memory_mode, episode.rng_seed);
            mrn::propagate(memory, cfg.prop, &ckpt.model.relation, false);
            mrn::export_similarity(memory, cfg.prop.metric,
                                   cfg.prop.metric == mrn::MetricKind::learned_relation
                                       ? &ckpt.model.relation
                                       : nullptr,
                                   out_path);
            std::printf("similarity matrix written to %s\n", out_path.c_str());
        } else if (*synth_cmd) {
            const mrn::KeyValues kv = mrn::parse_config_file(spec_path);
            mrn::RunConfig carrier;
            // reuse the config parser for the synth.* keys
            mrn::KeyValues merged = carrier.to_keys();
            for (const auto& [k, v] : kv) merged[k] = v;
            carrier = mrn::RunConfig::from_keys(merged);
            mrn::Dataset data = mrn::synth_dataset(carrier.synth);
            std::filesystem::create_directories(out_path);
            const std::string file = out_path + "/synth.mrnd";
            mrn::save_dataset(data, file);
            std::printf("dataset written to %s (%zu items, %zu classes)\n", file.c_str(),
                        data.items.size(), data.class_index.size());
        } else if (*gradcheck_cmd) {
            mrn::GradCheckResult result = mrn::episode_gradcheck(depth, h);
            std::printf("max relative error: %.3e (worst: %s[%ld])\n", result.max_rel_err,
                        result.worst_param.c_str(), result.worst_index);
            if (result.max_rel_err >= 1e-4) {
                std::printf("FAIL: threshold 1e-4 exceeded\n");
                return 1;
            }
            std::printf("PASS\n");
        }
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
    return 0;
}
