#pragma once

#include <map>
#include <string>
#include <vector>

#include "mrn/encoder.hpp"
#include "mrn/episodes.hpp"
#include "mrn/memory.hpp"

namespace mrn {

// Flat `key = value` text; '#' starts a comment, blank lines ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_text(const std::string& text);
KeyValues parse_config_file(const std::string& path);
std::string dump_config(const KeyValues& kv);

// Every training / evaluation / ablation knob. Defaults are the desk-scale
// synthetic setup; the full-scale episode schedule stays expressible.
struct RunConfig {
    std::string variant = "mrn";  // mrn | mrn_zero | mrn_euclid | mrn_mean | mrn_max

    int ways = 5;
    int shots = 1;
    int queries = 15;
    int unlabeled = 0;  // per class, admitted only in semi_supervised mode

    PropagationConfig prop;
    MetricKind metric_dc = MetricKind::learned_relation;
    bool relation_raw_linear = false;

    EncoderConfig encoder;

    double lr = 0.001;
    double weight_decay = 1e-6;
    long total_episodes = 5000;
    long halve_every = 1250;

    long eval_episodes = 1000;
    std::uint64_t eval_seed = 7;
    Split eval_split = Split::test;

    std::uint64_t seed = 1;
    bool hflip = false;

    bool use_synth = true;
    SynthSpec synth;
    std::string data_path;

    std::string checkpoint_path = "mrn_checkpoint.mrnc";

    static RunConfig from_keys(const KeyValues& kv);
    KeyValues to_keys() const;
    void apply_overrides(const std::vector<std::string>& overrides);  // "key=value" items

    // Copy with the variant's forcings applied (mrn_zero -> k=d=0,
    // mrn_euclid -> euclid D_G, mrn_mean/mrn_max -> strategy).
    RunConfig resolved() const;
    void validate() const;

    Dataset load_data() const;
};

}  // namespace mrn
