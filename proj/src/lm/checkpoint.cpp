#include "ulwb/lm/checkpoint.hpp"

#include "ulwb/util/io.hpp"

#include <nlohmann/json.hpp>

#include <cstring>

namespace ulwb::lm {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'U', 'L', 'W', 'B'};

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw CheckpointCorruptError(std::string("corrupt checkpoint: truncated ") + what);
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::string bytes(size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string config_doc(const ModelConfig& cfg) {
    json j{{"n_layers", cfg.n_layers},   {"d_model", cfg.d_model},
           {"n_heads", cfg.n_heads},     {"d_ff", cfg.d_ff},
           {"vocab_size", cfg.vocab_size}, {"max_seq_len", cfg.max_seq_len},
           {"seed", cfg.seed}};
    return j.dump();
}

ModelConfig config_from_doc(const std::string& doc) {
    json j;
    try {
        j = json::parse(doc);
    } catch (const json::exception& e) {
        throw CheckpointCorruptError(std::string("corrupt checkpoint: bad config document: ") +
                                     e.what());
    }
    ModelConfig cfg;
    cfg.n_layers = j.at("n_layers").get<int>();
    cfg.d_model = j.at("d_model").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.d_ff = j.at("d_ff").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.max_seq_len = j.at("max_seq_len").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    return cfg;
}

} // namespace

void checkpoint_save(const Parameters<float>& params, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    std::string doc = config_doc(params.config);
    put_u64(out, doc.size());
    out += doc;
    put_u32(out, static_cast<uint32_t>(params.tensors.size()));
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        const auto& name = params.names[i];
        const auto& t = params.tensors[i];
        put_u32(out, static_cast<uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<uint32_t>(t.rank()));
        for (int64_t dim : t.dims) put_u64(out, static_cast<uint64_t>(dim));
    }
    for (const auto& t : params.tensors) {
        size_t bytes = t.data.size() * sizeof(float);
        size_t off = out.size();
        out.resize(off + bytes);
        std::memcpy(out.data() + off, t.data.data(), bytes);
    }
    atomic_write_file(path, out);
}

Parameters<float> checkpoint_load(const std::string& path) {
    std::string buf = read_file(path);
    Reader r{buf};
    std::string magic = r.bytes(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        throw CheckpointCorruptError("corrupt checkpoint: bad magic");
    uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("checkpoint version mismatch: got " +
                                     std::to_string(version) + ", expected " +
                                     std::to_string(kCheckpointVersion));
    uint64_t doc_len = r.u64("config length");
    ModelConfig cfg = config_from_doc(r.bytes(doc_len, "config document"));

    Parameters<float> params = make_parameters<float>(cfg);
    uint32_t count = r.u32("tensor count");
    if (count != params.tensors.size())
        throw CheckpointShapeError("shape table mismatch: " + std::to_string(count) +
                                   " tensors in file, layout expects " +
                                   std::to_string(params.tensors.size()));
    for (size_t i = 0; i < count; ++i) {
        uint32_t name_len = r.u32("tensor name length");
        std::string name = r.bytes(name_len, "tensor name");
        if (name != params.names[i])
            throw CheckpointShapeError("shape table mismatch: tensor '" + name +
                                       "' where '" + params.names[i] + "' expected");
        uint32_t rank = r.u32("tensor rank");
        std::vector<int64_t> dims(rank);
        for (auto& dim : dims) dim = static_cast<int64_t>(r.u64("tensor dim"));
        if (dims != params.tensors[i].dims)
            throw CheckpointShapeError("shape table mismatch: dims of '" + name +
                                       "' do not match the config layout");
    }
    for (auto& t : params.tensors) {
        size_t bytes = t.data.size() * sizeof(float);
        r.need(bytes, "tensor data");
        std::memcpy(t.data.data(), buf.data() + r.pos, bytes);
        r.pos += bytes;
    }
    if (r.pos != buf.size())
        throw CheckpointCorruptError("corrupt checkpoint: trailing bytes after tensor data");
    return params;
}

} // namespace ulwb::lm
