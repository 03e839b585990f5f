#include "freqpriv/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace freqpriv {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'R', 'V'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& s, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(s, bits);
}

struct Cursor {
    const std::string& data;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > data.size()) throw IoError("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data[pos++]);
    }
    std::string bytes(size_t n) {
        need(n);
        std::string out = data.substr(pos, n);
        pos += n;
        return out;
    }
};

std::vector<std::uint64_t> group_dims(const DetectorModel& m, const std::string& name) {
    const auto c = static_cast<std::uint64_t>(m.cfg.channels);
    const auto in = static_cast<std::uint64_t>(m.cfg.in_channels);
    const auto hc = static_cast<std::uint64_t>(m.head_channels());
    if (name == "stem1.weight") return {c, in, 3, 3};
    if (name == "stem2.weight") return {c, c, 3, 3};
    if (name == "stem1.bias" || name == "stem2.bias") return {c};
    if (name == "fdaf.gate.logits")
        return {c, static_cast<std::uint64_t>(m.grid_h), static_cast<std::uint64_t>(m.grid_w)};
    if (name == "fdaf.fusion.weight") return {c, 2 * c};
    if (name == "fdaf.fusion.bias") return {c};
    if (name == "head.weight") return {hc, c};
    if (name == "head.bias") return {hc};
    throw IoError("checkpoint: unknown parameter group " + name);
}

}  // namespace

std::string checkpoint_bytes(const DetectorModel& m) {
    DetectorModel& mm = const_cast<DetectorModel&>(m);
    const auto groups = param_groups(mm);

    std::string out(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(m.cfg.in_channels));
    put_u32(out, static_cast<std::uint32_t>(m.cfg.channels));
    put_u32(out, static_cast<std::uint32_t>(m.cfg.num_classes));
    put_u32(out, static_cast<std::uint32_t>(m.cfg.image_h));
    put_u32(out, static_cast<std::uint32_t>(m.cfg.image_w));
    put_u32(out, static_cast<std::uint32_t>(m.cfg.roi_size));
    out.push_back(m.cfg.has_fdaf ? 1 : 0);
    out.push_back(m.cfg.gate_trainable ? 1 : 0);
    put_f64(out, m.cfg.gate_init_logit);
    put_f64(out, m.cfg.beta);
    put_f64(out, m.cfg.lambda);
    put_u64(out, m.cfg.init_seed);

    put_u32(out, static_cast<std::uint32_t>(groups.size()));
    std::uint64_t offset = 0;
    for (const auto& g : groups) {
        put_u32(out, static_cast<std::uint32_t>(g.name.size()));
        out += g.name;
        const auto dims = group_dims(m, g.name);
        put_u32(out, static_cast<std::uint32_t>(dims.size()));
        for (auto d : dims) put_u64(out, d);
        put_u64(out, offset);
        offset += g.values->size() * 8;
    }
    put_u64(out, offset);
    for (const auto& g : groups) {
        for (double v : *g.values) put_f64(out, v);
    }
    return out;
}

DetectorModel checkpoint_from_bytes(const std::string& bytes) {
    Cursor cur{bytes};
    if (cur.bytes(4) != std::string(kMagic, 4)) {
        throw IoError("checkpoint: bad magic");
    }
    const std::uint32_t version = cur.u32();
    if (version != kVersion) {
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    }
    ModelConfig cfg;
    cfg.in_channels = static_cast<int>(cur.u32());
    cfg.channels = static_cast<int>(cur.u32());
    cfg.num_classes = static_cast<int>(cur.u32());
    cfg.image_h = static_cast<int>(cur.u32());
    cfg.image_w = static_cast<int>(cur.u32());
    cfg.roi_size = static_cast<int>(cur.u32());
    cfg.has_fdaf = cur.u8() != 0;
    cfg.gate_trainable = cur.u8() != 0;
    cfg.gate_init_logit = cur.f64();
    cfg.beta = cur.f64();
    cfg.lambda = cur.f64();
    cfg.init_seed = cur.u64();

    DetectorModel model = make_model(cfg);
    auto groups = param_groups(model);

    const std::uint32_t n_groups = cur.u32();
    if (n_groups != groups.size()) {
        throw IoError("checkpoint: parameter group count mismatch");
    }
    struct Entry { std::string name; std::uint64_t offset; };
    std::vector<Entry> entries;
    for (std::uint32_t i = 0; i < n_groups; ++i) {
        Entry e;
        const std::uint32_t name_len = cur.u32();
        e.name = cur.bytes(name_len);
        const std::uint32_t ndims = cur.u32();
        std::uint64_t count = 1;
        for (std::uint32_t d = 0; d < ndims; ++d) count *= cur.u64();
        e.offset = cur.u64();
        const auto expected = group_dims(model, e.name);
        std::uint64_t expected_count = 1;
        for (auto d : expected) expected_count *= d;
        if (count != expected_count) {
            throw IoError("checkpoint: dims mismatch for group " + e.name);
        }
        entries.push_back(std::move(e));
    }
    const std::uint64_t data_size = cur.u64();
    const size_t data_start = cur.pos;
    cur.need(data_size);
    if (data_start + data_size != bytes.size()) {
        throw IoError("checkpoint: trailing bytes");
    }

    for (size_t gi = 0; gi < groups.size(); ++gi) {
        if (entries[gi].name != groups[gi].name) {
            throw IoError("checkpoint: unexpected group order, found " + entries[gi].name);
        }
        Cursor dc{bytes};
        dc.pos = data_start + entries[gi].offset;
        for (double& v : *groups[gi].values) v = dc.f64();
    }
    return model;
}

void save_checkpoint(const DetectorModel& m, const std::string& path) {
    const std::string bytes = checkpoint_bytes(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

DetectorModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

}  // namespace freqpriv
