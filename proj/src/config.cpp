#include "mrn/config.hpp"

#include <fstream>
#include <sstream>

namespace mrn {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::vector<long> parse_long_list(const std::string& key, const std::string& value) {
    std::vector<long> out;
    std::stringstream ss(value);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(parse_long(key, cell));
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' expects a comma list, got '" + value + "'");
    return out;
}

}  // namespace

KeyValues parse_config_text(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value': " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
        kv[key] = value;
    }
    return kv;
}

KeyValues parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string dump_config(const KeyValues& kv) {
    std::ostringstream out;
    for (const auto& [key, value] : kv) out << key << " = " << value << '\n';
    return out.str();
}

RunConfig RunConfig::from_keys(const KeyValues& kv) {
    RunConfig cfg;
    for (const auto& [key, value] : kv) {
        if (key == "variant") cfg.variant = value;
        else if (key == "episode.ways") cfg.ways = static_cast<int>(parse_long(key, value));
        else if (key == "episode.shots") cfg.shots = static_cast<int>(parse_long(key, value));
        else if (key == "episode.queries") cfg.queries = static_cast<int>(parse_long(key, value));
        else if (key == "episode.unlabeled") cfg.unlabeled = static_cast<int>(parse_long(key, value));
        else if (key == "prop.k") cfg.prop.k = static_cast<int>(parse_long(key, value));
        else if (key == "prop.depth") cfg.prop.depth = static_cast<int>(parse_long(key, value));
        else if (key == "prop.lambda") cfg.prop.lambda = parse_double(key, value);
        else if (key == "prop.strategy") cfg.prop.strategy = parse_strategy(value);
        else if (key == "prop.metric") cfg.prop.metric = parse_metric(value);
        else if (key == "prop.memory") cfg.prop.memory_mode = parse_memory_mode(value);
        else if (key == "prop.symmetrize") cfg.prop.symmetrize = parse_bool(key, value);
        else if (key == "prop.stop_gradient") cfg.prop.stop_gradient = parse_bool(key, value);
        else if (key == "classifier.metric") cfg.metric_dc = parse_metric(value);
        else if (key == "relation.raw_linear") cfg.relation_raw_linear = parse_bool(key, value);
        else if (key == "encoder.kind") cfg.encoder.kind = parse_encoder_kind(value);
        else if (key == "encoder.input_shape") {
            cfg.encoder.input_shape.clear();
            for (long d : parse_long_list(key, value)) cfg.encoder.input_shape.push_back(d);
        } else if (key == "encoder.channels") cfg.encoder.channels = parse_long(key, value);
        else if (key == "encoder.mlp_dims") {
            cfg.encoder.mlp_dims.clear();
            for (long d : parse_long_list(key, value)) cfg.encoder.mlp_dims.push_back(d);
        } else if (key == "opt.lr") cfg.lr = parse_double(key, value);
        else if (key == "opt.weight_decay") cfg.weight_decay = parse_double(key, value);
        else if (key == "opt.total_episodes") cfg.total_episodes = parse_long(key, value);
        else if (key == "opt.halve_every") cfg.halve_every = parse_long(key, value);
        else if (key == "eval.episodes") cfg.eval_episodes = parse_long(key, value);
        else if (key == "eval.seed") cfg.eval_seed = static_cast<std::uint64_t>(parse_long(key, value));
        else if (key == "eval.split") cfg.eval_split = parse_split(value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(key, value));
        else if (key == "aug.hflip") cfg.hflip = parse_bool(key, value);
        else if (key == "data.synth") cfg.use_synth = parse_bool(key, value);
        else if (key == "data.path") cfg.data_path = value;
        else if (key == "synth.classes") cfg.synth.classes = static_cast<int>(parse_long(key, value));
        else if (key == "synth.dim") cfg.synth.dim = parse_long(key, value);
        else if (key == "synth.cluster_std") cfg.synth.cluster_std = parse_double(key, value);
        else if (key == "synth.center_std") cfg.synth.center_std = parse_double(key, value);
        else if (key == "synth.items_per_class") cfg.synth.items_per_class = static_cast<int>(parse_long(key, value));
        else if (key == "synth.seed") cfg.synth.seed = static_cast<std::uint64_t>(parse_long(key, value));
        else if (key == "synth.split") {
            const auto counts = parse_long_list(key, value);
            if (counts.size() != 3) throw ConfigError("config: synth.split expects three counts");
            cfg.synth.split_counts = {static_cast<int>(counts[0]), static_cast<int>(counts[1]),
                                      static_cast<int>(counts[2])};
        } else if (key == "out.checkpoint") cfg.checkpoint_path = value;
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

KeyValues RunConfig::to_keys() const {
    KeyValues kv;
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    kv["variant"] = variant;
    kv["episode.ways"] = std::to_string(ways);
    kv["episode.shots"] = std::to_string(shots);
    kv["episode.queries"] = std::to_string(queries);
    kv["episode.unlabeled"] = std::to_string(unlabeled);
    kv["prop.k"] = std::to_string(prop.k);
    kv["prop.depth"] = std::to_string(prop.depth);
    kv["prop.lambda"] = num(prop.lambda);
    kv["prop.strategy"] = strategy_name(prop.strategy);
    kv["prop.metric"] = metric_name(prop.metric);
    kv["prop.memory"] = memory_mode_name(prop.memory_mode);
    kv["prop.symmetrize"] = prop.symmetrize ? "true" : "false";
    kv["prop.stop_gradient"] = prop.stop_gradient ? "true" : "false";
    kv["classifier.metric"] = metric_name(metric_dc);
    kv["relation.raw_linear"] = relation_raw_linear ? "true" : "false";
    kv["encoder.kind"] = encoder_kind_name(encoder.kind);
    {
        std::ostringstream os;
        for (std::size_t i = 0; i < encoder.input_shape.size(); ++i) {
            if (i) os << ',';
            os << encoder.input_shape[i];
        }
        kv["encoder.input_shape"] = os.str();
    }
    kv["encoder.channels"] = std::to_string(encoder.channels);
    {
        std::ostringstream os;
        for (std::size_t i = 0; i < encoder.mlp_dims.size(); ++i) {
            if (i) os << ',';
            os << encoder.mlp_dims[i];
        }
        kv["encoder.mlp_dims"] = os.str();
    }
    kv["opt.lr"] = num(lr);
    kv["opt.weight_decay"] = num(weight_decay);
    kv["opt.total_episodes"] = std::to_string(total_episodes);
    kv["opt.halve_every"] = std::to_string(halve_every);
    kv["eval.episodes"] = std::to_string(eval_episodes);
    kv["eval.seed"] = std::to_string(eval_seed);
    kv["eval.split"] = split_name(eval_split);
    kv["seed"] = std::to_string(seed);
    kv["aug.hflip"] = hflip ? "true" : "false";
    kv["data.synth"] = use_synth ? "true" : "false";
    if (!data_path.empty()) kv["data.path"] = data_path;
    kv["synth.classes"] = std::to_string(synth.classes);
    kv["synth.dim"] = std::to_string(synth.dim);
    kv["synth.cluster_std"] = num(synth.cluster_std);
    kv["synth.center_std"] = num(synth.center_std);
    kv["synth.items_per_class"] = std::to_string(synth.items_per_class);
    kv["synth.seed"] = std::to_string(synth.seed);
    if (synth.split_counts[0] >= 0) {
        kv["synth.split"] = std::to_string(synth.split_counts[0]) + "," +
                            std::to_string(synth.split_counts[1]) + "," +
                            std::to_string(synth.split_counts[2]);
    }
    kv["out.checkpoint"] = checkpoint_path;
    return kv;
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
    KeyValues kv = to_keys();
    for (const std::string& item : overrides) {
        const KeyValues one = parse_config_text(item);
        if (one.size() != 1) throw ConfigError("override '" + item + "' is not a single key=value");
        kv[one.begin()->first] = one.begin()->second;
    }
    *this = from_keys(kv);
}

RunConfig RunConfig::resolved() const {
    RunConfig out = *this;
    if (variant == "mrn") {
        // as configured
    } else if (variant == "mrn_zero") {
        out.prop.k = 0;
        out.prop.depth = 0;
    } else if (variant == "mrn_euclid") {
        out.prop.metric = MetricKind::squared_euclidean;
    } else if (variant == "mrn_mean") {
        out.prop.strategy = Strategy::mean;
    } else if (variant == "mrn_max") {
        out.prop.strategy = Strategy::max;
    } else {
        throw ConfigError("unknown variant '" + variant + "'");
    }
    return out;
}

void RunConfig::validate() const {
    resolved();  // variant name check
    if (ways < 2) throw ConfigError("config: episode.ways must be >= 2");
    if (shots < 1) throw ConfigError("config: episode.shots must be >= 1");
    if (queries < 1) throw ConfigError("config: episode.queries must be >= 1");
    if (unlabeled < 0) throw ConfigError("config: episode.unlabeled must be >= 0");
    prop.validate();
    encoder.validate();
    if (lr <= 0.0) throw ConfigError("config: opt.lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("config: opt.weight_decay must be >= 0");
    if (total_episodes < 0) throw ConfigError("config: opt.total_episodes must be >= 0");
    if (halve_every <= 0) throw ConfigError("config: opt.halve_every must be positive");
    if (eval_episodes < 1) throw ConfigError("config: eval.episodes must be >= 1");
    if (use_synth) synth.validate();
    else if (data_path.empty()) throw ConfigError("config: data.path required when data.synth = false");
}

Dataset RunConfig::load_data() const {
    Dataset dataset = use_synth ? synth_dataset(synth) : load_dataset(data_path);
    dataset.hflip_augment = hflip;
    return dataset;
}

}  // namespace mrn
