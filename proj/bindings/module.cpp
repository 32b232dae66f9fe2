#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "mrn/engine.hpp"

namespace py = pybind11;
using namespace mrn;

namespace {

Tensor matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr,
                         const char* name) {
    if (arr.ndim() != 2) throw UsageError(std::string(name) + ": expected a 2-D array");
    Shape shape{static_cast<Dim>(arr.shape(0)), static_cast<Dim>(arr.shape(1))};
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (Dim d : t.shape()) shape.push_back(static_cast<py::ssize_t>(d));
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

std::vector<std::string> overrides_from_dict(const py::dict& overrides) {
    std::vector<std::string> out;
    for (const auto& item : overrides) {
        out.push_back(py::str(item.first).cast<std::string>() + "=" +
                      py::str(item.second).cast<std::string>());
    }
    return out;
}

RunConfig config_from(const std::string& config_path, const py::dict& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_keys(parse_config_file(config_path));
    cfg.apply_overrides(overrides_from_dict(overrides));
    return cfg;
}

}  // namespace

PYBIND11_MODULE(mrn, m) {
    m.doc() = "Few-shot classification with a learnable relation metric and episodic-memory "
              "feature propagation";
    m.attr("__version__") = "0.1.0";

    m.def(
        "squared_euclidean",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
           py::array_t<double, py::array::c_style | py::array::forcecast> b) {
            if (a.size() != b.size()) throw UsageError("squared_euclidean: length mismatch");
            double acc = 0.0;
            for (py::ssize_t i = 0; i < a.size(); ++i) {
                const double d = a.data()[i] - b.data()[i];
                acc += d * d;
            }
            return acc;
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "pairwise_squared_euclidean",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> features) {
            Tensor f = matrix_from_array(features, "pairwise_squared_euclidean");
            return array_from_tensor(pairwise_matrix(f, MetricKind::squared_euclidean, nullptr));
        },
        py::arg("features"));

    m.def(
        "aggregation_weights",
        [](const std::vector<double>& distances) {
            const auto w = aggregation_weights(distances);
            py::array_t<double> out(static_cast<py::ssize_t>(w.size()));
            std::copy(w.begin(), w.end(), out.mutable_data());
            return out;
        },
        py::arg("distances"), "exp(-d) attention weights over one neighbor set");

    m.def(
        "propagate",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> slots, int k, int depth,
           double lam, const std::string& strategy) {
            Tensor f = matrix_from_array(slots, "propagate");
            std::vector<Provenance> prov(static_cast<std::size_t>(f.dim(0)), Provenance::support);
            EpisodicMemory memory = memory_init(f, prov, MemoryMode::support_only, 0);
            PropagationConfig cfg;
            cfg.k = k;
            cfg.depth = depth;
            cfg.lambda = lam;
            cfg.strategy = parse_strategy(strategy);
            cfg.metric = MetricKind::squared_euclidean;
            propagate(memory, cfg, nullptr);
            return array_from_tensor(memory.slots);
        },
        py::arg("slots"), py::arg("k"), py::arg("depth"), py::arg("lam"),
        py::arg("strategy") = "weighted",
        "synchronous k-NN feature propagation under the squared-euclidean metric");

    m.def(
        "generate_synthetic",
        [](int classes, long dim, double cluster_std, double center_std, int items_per_class,
           std::uint64_t seed, const std::string& out_dir) {
            SynthSpec spec;
            spec.classes = classes;
            spec.dim = dim;
            spec.cluster_std = cluster_std;
            spec.center_std = center_std;
            spec.items_per_class = items_per_class;
            spec.seed = seed;
            Dataset data = synth_dataset(spec);
            std::filesystem::create_directories(out_dir);
            const std::string path = out_dir + "/synth.mrnd";
            save_dataset(data, path);
            return path;
        },
        py::arg("classes"), py::arg("dim"), py::arg("cluster_std"), py::arg("center_std"),
        py::arg("items_per_class"), py::arg("seed"), py::arg("out_dir"));

    m.def(
        "train",
        [](const py::dict& overrides, const std::string& config) {
            RunConfig cfg = config_from(config, overrides);
            Dataset data = cfg.load_data();
            mrn::train(cfg, data);
            return cfg.checkpoint_path;
        },
        py::arg("overrides") = py::dict(), py::arg("config") = "",
        "episodic meta-training; returns the checkpoint path");

    m.def(
        "evaluate",
        [](const std::string& checkpoint, long episodes, std::uint64_t seed, const py::dict& overrides) {
            Checkpoint ckpt = load_checkpoint(checkpoint);
            ckpt.config.apply_overrides(overrides_from_dict(overrides));
            Dataset data = ckpt.config.load_data();
            EvalReport report = mrn::evaluate(ckpt.model, ckpt.config, data, episodes, seed);
            py::dict out;
            out["mean_acc"] = report.mean_accuracy;
            out["ci95"] = report.ci95;
            out["episodes"] = report.episodes;
            out["per_episode"] = report.per_episode;
            return out;
        },
        py::arg("checkpoint"), py::arg("episodes") = 1000, py::arg("seed") = 7,
        py::arg("overrides") = py::dict());

    m.def(
        "export_similarity",
        [](const std::string& checkpoint, std::uint64_t episode_seed, const std::string& out) {
            Checkpoint ckpt = load_checkpoint(checkpoint);
            const RunConfig cfg = ckpt.config.resolved();
            Dataset data = cfg.load_data();
            Episode episode = sample_episode(
                data, cfg.eval_split, cfg.ways, cfg.shots, cfg.queries,
                cfg.prop.memory_mode == MemoryMode::semi_supervised ? cfg.unlabeled : 0, episode_seed);
            NoGradGuard no_grad;
            std::vector<double> batch_data;
            std::vector<Provenance> provenance;
            std::size_t count = 0;
            auto push = [&](const std::vector<Instance>& list, Provenance tag) {
                for (const Instance& inst : list) {
                    provenance.push_back(tag);
                    batch_data.insert(batch_data.end(), inst.payload.begin(), inst.payload.end());
                    ++count;
                }
            };
            push(episode.support, Provenance::support);
            push(episode.query, Provenance::query);
            push(episode.unlabeled, Provenance::unlabeled);
            Shape batch_shape = cfg.encoder.input_shape;
            batch_shape.insert(batch_shape.begin(), static_cast<Dim>(count));
            Tensor embeddings = ckpt.model.encoder.encode(Tensor(batch_shape, batch_data), false);
            EpisodicMemory memory = memory_init(embeddings, provenance, cfg.prop.memory_mode, episode_seed);
            propagate(memory, cfg.prop, &ckpt.model.relation, false);
            mrn::export_similarity(memory, cfg.prop.metric,
                                   cfg.prop.metric == MetricKind::learned_relation ? &ckpt.model.relation
                                                                                   : nullptr,
                                   out);
        },
        py::arg("checkpoint"), py::arg("episode_seed"), py::arg("out"));

    m.def(
        "gradcheck",
        [](int depth, double step) { return episode_gradcheck(depth, step).max_rel_err; },
        py::arg("depth") = 2, py::arg("step") = 1e-5,
        "max relative error of analytic vs finite-difference gradients on a full episode loss");

    py::register_exception<Error>(m, "MrnError", PyExc_RuntimeError);
}
