#include "emf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace emf {

namespace {

constexpr char kMagic[7] = {'E', 'M', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// ---- little-endian primitives --------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        contract(pos + n <= buf.size(), "truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

// ---- tensor / parameter payloads ------------------------------------------------

void put_tensor(std::string& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.raw()) put_f64(out, v);
}

Tensor get_tensor(Reader& r) {
    std::uint32_t nd = r.u32();
    contract(nd <= 2, "checkpoint: unsupported tensor rank");
    std::vector<std::size_t> shape(nd);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < nd; ++i) {
        shape[i] = static_cast<std::size_t>(r.u64());
        contract(shape[i] > 0 && shape[i] < (1u << 24), "checkpoint: implausible tensor dimension");
        n *= shape[i];
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < n; ++i) t[i] = r.f64();
    return t;
}

std::string encode_param_set(const ParamSet& ps) {
    contract(ps.names.size() == ps.tensors.size(), "checkpoint: param set name/tensor mismatch");
    std::string out;
    put_u32(out, static_cast<std::uint32_t>(ps.count()));
    for (std::size_t i = 0; i < ps.count(); ++i) {
        put_str(out, ps.names[i]);
        put_tensor(out, ps.tensors[i]);
    }
    return out;
}

ParamSet decode_param_set(const std::string& payload) {
    Reader r{payload};
    ParamSet ps;
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        ps.names.push_back(r.str());
        ps.tensors.push_back(get_tensor(r));
    }
    contract(r.pos == payload.size(), "checkpoint: trailing bytes in parameter section");
    return ps;
}

void put_section(std::string& out, const std::string& name, const std::string& payload) {
    put_str(out, name);
    put_u64(out, payload.size());
    out.append(payload);
}

} // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
    std::string out;
    out.append(kMagic, sizeof kMagic);
    put_u32(out, kVersion);

    put_section(out, "config", ck.config_text);

    std::string meta;
    put_u64(meta, ck.step);
    put_section(out, "meta", meta);

    put_section(out, "params", encode_param_set(ck.params));
    put_section(out, "ema", encode_param_set(ck.ema));

    std::string adam;
    put_u64(adam, ck.adam_step);
    contract(ck.adam_m.size() == ck.adam_v.size(), "checkpoint: adam moment count mismatch");
    put_u32(adam, static_cast<std::uint32_t>(ck.adam_m.size()));
    for (const Tensor& t : ck.adam_m) put_tensor(adam, t);
    for (const Tensor& t : ck.adam_v) put_tensor(adam, t);
    put_section(out, "adam", adam);

    put_section(out, "rng", ck.rng_state);
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    Reader r{bytes};
    std::string magic = r.bytes(sizeof kMagic);
    contract(std::memcmp(magic.data(), kMagic, sizeof kMagic) == 0, "not a checkpoint file (bad magic)");
    std::uint32_t version = r.u32();
    contract(version == kVersion, "unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    const char* expected[] = {"config", "meta", "params", "ema", "adam", "rng"};
    for (const char* name : expected) {
        std::string got = r.str();
        contract(got == name, "checkpoint: expected section '" + std::string(name) + "', found '" + got + "'");
        std::uint64_t len = r.u64();
        std::string payload = r.bytes(static_cast<std::size_t>(len));
        if (got == std::string("config")) {
            ck.config_text = payload;
        } else if (got == std::string("meta")) {
            Reader mr{payload};
            ck.step = mr.u64();
            contract(mr.pos == payload.size(), "checkpoint: trailing bytes in meta");
        } else if (got == std::string("params")) {
            ck.params = decode_param_set(payload);
        } else if (got == std::string("ema")) {
            ck.ema = decode_param_set(payload);
        } else if (got == std::string("adam")) {
            Reader ar{payload};
            ck.adam_step = ar.u64();
            std::uint32_t n = ar.u32();
            for (std::uint32_t i = 0; i < n; ++i) ck.adam_m.push_back(get_tensor(ar));
            for (std::uint32_t i = 0; i < n; ++i) ck.adam_v.push_back(get_tensor(ar));
            contract(ar.pos == payload.size(), "checkpoint: trailing bytes in adam section");
        } else {
            ck.rng_state = payload;
        }
    }
    contract(r.pos == bytes.size(), "checkpoint: trailing bytes after final section");
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::string bytes = encode_checkpoint(ck);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    contract(f.good(), "cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    contract(f.good(), "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    contract(f.good(), "cannot open checkpoint '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

} // namespace emf
