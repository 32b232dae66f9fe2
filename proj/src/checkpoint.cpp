#include "mrn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

namespace mrn {

namespace {

constexpr char kMagic[4] = {'M', 'R', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

void write_entry(std::ostream& out, const std::string& name, const Shape& shape,
                 const std::vector<double>& data) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (Dim d : shape) write_u32(out, static_cast<std::uint32_t>(d));
    for (double v : data) write_f64(out, v);
}

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw IoError("load_checkpoint: cannot open '" + p + "'");
    }

    void read(void* dst, std::size_t n, const char* what) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw FormatError("load_checkpoint: truncated " + std::string(what) + " in '" + path + "'");
        }
    }

    std::uint32_t read_u32(const char* what) {
        unsigned char buf[4];
        read(buf, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
        return v;
    }

    double read_f64(const char* what) {
        unsigned char buf[8];
        read(buf, 8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const RunConfig& config) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("save_checkpoint: cannot open '" + tmp + "'");
        out.write(kMagic, 4);
        write_u32(out, kVersion);
        const std::string config_text = dump_config(config.to_keys());
        write_u32(out, static_cast<std::uint32_t>(config_text.size()));
        out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));

        ParamList params = model.parameters();
        auto buffers = model.buffers();
        write_u32(out, static_cast<std::uint32_t>(params.size() + buffers.size()));
        for (auto& [name, tensor] : params) write_entry(out, name, tensor.shape(), tensor.data());
        for (auto& [name, buffer] : buffers) {
            write_entry(out, name, Shape{static_cast<Dim>(buffer->size())}, *buffer);
        }
        if (!out) throw IoError("save_checkpoint: write to '" + tmp + "' failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("save_checkpoint: cannot move '" + tmp + "' into place");
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader reader(path);
    char magic[4];
    reader.read(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("load_checkpoint: bad magic in '" + path + "'");
    }
    const std::uint32_t version = reader.read_u32("version");
    if (version != kVersion) {
        throw FormatError("load_checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t config_len = reader.read_u32("config length");
    std::string config_text(config_len, '\0');
    reader.read(config_text.data(), config_len, "config text");

    Checkpoint ckpt{RunConfig::from_keys(parse_config_text(config_text)), Model{}};
    ckpt.model = Model::create(ckpt.config);

    std::map<std::string, std::pair<Shape, std::vector<double>>> entries;
    const std::uint32_t count = reader.read_u32("entry count");
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint32_t name_len = reader.read_u32("name length");
        std::string name(name_len, '\0');
        reader.read(name.data(), name_len, "name");
        const std::uint32_t rank = reader.read_u32("rank");
        Shape shape;
        Dim total = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape.push_back(static_cast<Dim>(reader.read_u32("extent")));
            total *= shape.back();
        }
        std::vector<double> data(static_cast<std::size_t>(total));
        for (Dim i = 0; i < total; ++i) data[static_cast<std::size_t>(i)] = reader.read_f64("payload");
        entries[name] = {std::move(shape), std::move(data)};
    }

    for (auto& [name, tensor] : ckpt.model.parameters()) {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw FormatError("load_checkpoint: parameter '" + name + "' missing from '" + path + "'");
        }
        if (it->second.first != tensor.shape()) {
            throw FormatError("load_checkpoint: parameter '" + name + "' has shape " +
                              shape_str(it->second.first) + ", expected " + shape_str(tensor.shape()));
        }
        tensor.mutable_data() = it->second.second;
    }
    for (auto& [name, buffer] : ckpt.model.buffers()) {
        auto it = entries.find(name);
        if (it != entries.end()) *buffer = it->second.second;
    }
    return ckpt;
}

}  // namespace mrn
