#include "mrn/episodes.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace mrn {

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "'");
}

std::string split_name(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

void Dataset::rebuild_index() {
    class_index.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
        class_index[items[i].class_id].push_back(static_cast<int>(i));
    }
}

void Dataset::validate() const {
    for (const auto& [cls, indices] : class_index) {
        (void)indices;
        if (!class_split.count(cls)) {
            throw DatasetError("dataset: class " + std::to_string(cls) + " has no split assignment");
        }
    }
    if (!items.empty()) {
        const Shape& shape = items.front().shape;
        for (const Item& item : items) {
            if (item.shape != shape) {
                throw DatasetError("dataset: mixed item shapes " + shape_str(shape) + " vs " +
                                   shape_str(item.shape));
            }
        }
    }
}

std::vector<int> Dataset::classes_in(Split split) const {
    std::vector<int> out;
    for (const auto& [cls, s] : class_split) {
        if (s == split && class_index.count(cls)) out.push_back(cls);
    }
    return out;
}

void hflip_in_place(Instance& instance) {
    if (instance.shape.size() < 2) return;  // flat vectors have no column order
    const Dim width = instance.shape.back();
    const Dim rows = static_cast<Dim>(instance.payload.size()) / width;
    for (Dim r = 0; r < rows; ++r) {
        auto begin = instance.payload.begin() + static_cast<std::ptrdiff_t>(r * width);
        std::reverse(begin, begin + static_cast<std::ptrdiff_t>(width));
    }
}

Episode sample_episode(const Dataset& dataset, Split split, int ways, int shots, int queries_per_class,
                       int unlabeled_per_class, std::uint64_t seed) {
    if (ways < 1 || shots < 1 || queries_per_class < 0 || unlabeled_per_class < 0) {
        throw UsageError("sample_episode: invalid episode shape");
    }
    const std::vector<int> classes = dataset.classes_in(split);
    if (static_cast<int>(classes.size()) < ways) {
        throw DatasetError("sample_episode: split '" + split_name(split) + "' has " +
                           std::to_string(classes.size()) + " classes, need " + std::to_string(ways));
    }

    Rng rng(seed);
    const auto picked = rng.sample_without_replacement(classes.size(), static_cast<std::size_t>(ways));
    const bool flip = dataset.hflip_augment && split == Split::train;
    const int per_class = shots + queries_per_class + unlabeled_per_class;

    Episode episode;
    episode.rng_seed = seed;

    auto make_instance = [&](int item_index, int local, bool labeled) {
        const Item& item = dataset.items[static_cast<std::size_t>(item_index)];
        Instance inst;
        inst.shape = item.shape;
        inst.payload = item.payload;
        inst.global_class = labeled ? item.class_id : -1;
        inst.local_label = labeled ? local : -1;
        if (flip && rng.bernoulli(0.5)) hflip_in_place(inst);
        return inst;
    };

    std::vector<std::vector<int>> chosen(static_cast<std::size_t>(ways));
    for (int t = 0; t < ways; ++t) {
        const int cls = classes[picked[static_cast<std::size_t>(t)]];
        episode.class_map[cls] = t;
        const auto& pool = dataset.class_index.at(cls);
        if (static_cast<int>(pool.size()) < per_class) {
            throw DatasetError("sample_episode: class " + std::to_string(cls) + " has " +
                               std::to_string(pool.size()) + " items, episode needs " +
                               std::to_string(per_class));
        }
        const auto sel = rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(per_class));
        auto& rows = chosen[static_cast<std::size_t>(t)];
        rows.reserve(sel.size());
        for (std::size_t s : sel) rows.push_back(pool[s]);
    }

    // class-major assembly: supports for all classes, then queries, then pool
    for (int t = 0; t < ways; ++t)
        for (int i = 0; i < shots; ++i)
            episode.support.push_back(make_instance(chosen[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)], t, true));
    for (int t = 0; t < ways; ++t)
        for (int i = 0; i < queries_per_class; ++i)
            episode.query.push_back(
                make_instance(chosen[static_cast<std::size_t>(t)][static_cast<std::size_t>(shots + i)], t, true));
    for (int t = 0; t < ways; ++t)
        for (int i = 0; i < unlabeled_per_class; ++i)
            episode.unlabeled.push_back(make_instance(
                chosen[static_cast<std::size_t>(t)][static_cast<std::size_t>(shots + queries_per_class + i)], t, false));

    // S and Q must never share an item; cheap enough to verify every episode
    std::set<int> used;
    std::size_t total = 0;
    for (const auto& rows : chosen) {
        used.insert(rows.begin(), rows.end());
        total += rows.size();
    }
    if (used.size() != total) throw DatasetError("sample_episode: support/query overlap detected");

    return episode;
}

void SynthSpec::validate() const {
    if (classes < 1) throw ConfigError("synth: classes must be positive");
    if (dim < 1) throw ConfigError("synth: dim must be positive");
    if (cluster_std <= 0.0) throw ConfigError("synth: cluster_std must be positive");
    if (center_std <= 0.0) throw ConfigError("synth: center_std must be positive");
    if (items_per_class < 1) throw ConfigError("synth: items_per_class must be positive");
    if (split_counts[0] >= 0) {
        if (split_counts[0] + split_counts[1] + split_counts[2] != classes ||
            split_counts[0] < 1 || split_counts[1] < 0 || split_counts[2] < 0) {
            throw ConfigError("synth: split counts must be non-negative and sum to classes");
        }
    }
}

Dataset synth_dataset(const SynthSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0xDA7A));

    Dataset dataset;
    for (int cls = 0; cls < spec.classes; ++cls) {
        std::vector<double> center(static_cast<std::size_t>(spec.dim));
        for (double& v : center) v = rng.normal(0.0, spec.center_std);
        for (int i = 0; i < spec.items_per_class; ++i) {
            Item item;
            item.class_id = cls;
            item.shape = Shape{spec.dim};
            item.payload.resize(static_cast<std::size_t>(spec.dim));
            for (Dim d = 0; d < spec.dim; ++d)
                item.payload[static_cast<std::size_t>(d)] =
                    center[static_cast<std::size_t>(d)] + rng.normal(0.0, spec.cluster_std);
            dataset.items.push_back(std::move(item));
        }
    }

    int n_train = spec.split_counts[0];
    int n_val = spec.split_counts[1];
    if (n_train < 0) {
        n_train = static_cast<int>(0.6 * spec.classes);
        n_val = static_cast<int>(0.2 * spec.classes);
    }
    for (int cls = 0; cls < spec.classes; ++cls) {
        dataset.class_split[cls] =
            cls < n_train ? Split::train : (cls < n_train + n_val ? Split::val : Split::test);
    }
    dataset.rebuild_index();
    dataset.validate();
    return dataset;
}

namespace {

constexpr char kMagic[4] = {'M', 'R', 'N', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

struct Reader {
    std::ifstream in;
    std::size_t offset = 0;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw IoError("load_dataset: cannot open '" + p + "'");
    }

    void read(void* dst, std::size_t n, const char* what) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw FormatError("load_dataset: truncated " + std::string(what) + " at byte offset " +
                              std::to_string(offset) + " in '" + path + "'");
        }
        offset += n;
    }

    bool at_eof() {
        return in.peek() == std::ifstream::traits_type::eof();
    }

    std::uint32_t read_u32(const char* what) {
        unsigned char buf[4];
        read(buf, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
        return v;
    }

    std::uint8_t read_u8(const char* what) {
        unsigned char b;
        read(&b, 1, what);
        return b;
    }

    float read_f32(const char* what) {
        const std::uint32_t bits = read_u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    dataset.validate();
    if (dataset.class_index.empty()) throw UsageError("save_dataset: dataset has no classes");
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("save_dataset: cannot open '" + path + "'");
        out.write(kMagic, 4);
        write_u32(out, kVersion);
        write_u32(out, static_cast<std::uint32_t>(dataset.class_index.size()));
        for (const Item& item : dataset.items) {
            write_u32(out, static_cast<std::uint32_t>(item.class_id));
            const std::uint8_t rank = static_cast<std::uint8_t>(item.shape.size());
            out.write(reinterpret_cast<const char*>(&rank), 1);
            for (Dim d : item.shape) write_u32(out, static_cast<std::uint32_t>(d));
            for (double v : item.payload) write_f32(out, static_cast<float>(v));
        }
        if (!out) throw IoError("save_dataset: write to '" + path + "' failed");
    }
    std::ofstream manifest(path + ".manifest");
    if (!manifest) throw IoError("save_dataset: cannot open '" + path + ".manifest'");
    for (Split split : {Split::train, Split::val, Split::test}) {
        manifest << split_name(split);
        for (const auto& [cls, s] : dataset.class_split) {
            if (s == split) manifest << ' ' << cls;
        }
        manifest << '\n';
    }
}

Dataset load_dataset(const std::string& path) {
    Reader reader(path);
    char magic[4];
    reader.read(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("load_dataset: bad magic at byte offset 0 in '" + path + "'");
    }
    const std::uint32_t version = reader.read_u32("version");
    if (version != kVersion) {
        throw FormatError("load_dataset: unsupported version " + std::to_string(version) + " in '" + path + "'");
    }
    const std::uint32_t class_count = reader.read_u32("class count");
    if (class_count == 0) {
        throw FormatError("load_dataset: empty class list at byte offset 8 in '" + path + "'");
    }

    Dataset dataset;
    while (!reader.at_eof()) {
        Item item;
        item.class_id = static_cast<int>(reader.read_u32("item class id"));
        const std::uint8_t rank = reader.read_u8("item rank");
        if (rank == 0) {
            throw FormatError("load_dataset: rank-0 item at byte offset " + std::to_string(reader.offset) +
                              " in '" + path + "'");
        }
        Dim total = 1;
        for (int r = 0; r < rank; ++r) {
            const Dim extent = static_cast<Dim>(reader.read_u32("item extent"));
            item.shape.push_back(extent);
            total *= extent;
        }
        item.payload.resize(static_cast<std::size_t>(total));
        for (Dim i = 0; i < total; ++i)
            item.payload[static_cast<std::size_t>(i)] = static_cast<double>(reader.read_f32("item payload"));
        dataset.items.push_back(std::move(item));
    }
    dataset.rebuild_index();
    if (dataset.class_index.size() != class_count) {
        throw FormatError("load_dataset: header declares " + std::to_string(class_count) +
                          " classes but items cover " + std::to_string(dataset.class_index.size()) +
                          " in '" + path + "'");
    }

    std::ifstream manifest(path + ".manifest");
    if (!manifest) throw IoError("load_dataset: missing manifest '" + path + ".manifest'");
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string name;
        ss >> name;
        const Split split = parse_split(name);
        int cls;
        while (ss >> cls) {
            if (dataset.class_split.count(cls)) {
                throw FormatError("load_dataset: class " + std::to_string(cls) +
                                  " assigned to more than one split in manifest");
            }
            dataset.class_split[cls] = split;
        }
    }
    dataset.validate();
    return dataset;
}

}  // namespace mrn
