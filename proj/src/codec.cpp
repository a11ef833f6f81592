#include "inrcodec/codec.hpp"

#include "inrcodec/digest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace inrcodec {

namespace {

struct ByteWriter {
    std::vector<uint8_t> out;
    void u8(uint8_t v) { out.push_back(v); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; i++) out.push_back((uint8_t)(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; i++) out.push_back((uint8_t)(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; i++) out.push_back((uint8_t)(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
    void bytes(const uint8_t* p, size_t n) { out.insert(out.end(), p, p + n); }
};

struct ByteReader {
    const uint8_t* p;
    const uint8_t* end;
    explicit ByteReader(const std::vector<uint8_t>& b) : p(b.data()), end(b.data() + b.size()) {}
    void need(size_t n) const {
        if ((size_t)(end - p) < n) throw CodecError("truncated data");
    }
    uint8_t u8() {
        need(1);
        return *p++;
    }
    uint16_t u16() {
        need(2);
        uint16_t v = (uint16_t)(p[0] | (p[1] << 8));
        p += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++) v |= (uint32_t)p[i] << (8 * i);
        p += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; i++) v |= (uint64_t)p[i] << (8 * i);
        p += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void bytes(uint8_t* dst, size_t n) {
        need(n);
        std::memcpy(dst, p, n);
        p += n;
    }
};

void write_array(ByteWriter& w, const Array& a) {
    for (long i = 0; i < a.size(); i++) w.f64(a[i]);
}

Array read_vector(ByteReader& r, int n) {
    Array a = Array::zeros({n});
    for (int i = 0; i < n; i++) a[i] = r.f64();
    return a;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path + "'");
    f.write((const char*)bytes.data(), (long)bytes.size());
    if (!f) throw IoError("short write to '" + path + "'");
}

}  // namespace

std::vector<uint8_t> serialize_object(const CompressedObject& obj) {
    ByteWriter w;
    w.bytes((const uint8_t*)"CPP+", 4);
    w.u8(obj.version);
    w.u8((uint8_t)obj.modality);
    w.u8((uint8_t)obj.feature_shape.size());
    w.u8((uint8_t)obj.channels);
    for (int d : obj.feature_shape) w.u32((uint32_t)d);
    for (int d : obj.patch_shape) w.u32((uint32_t)d);
    w.u32(obj.patch_count);
    w.u32(obj.latent_dim);
    w.u8(obj.bits);
    w.f64(obj.raw_min);
    w.f64(obj.raw_max);
    w.u32(obj.sample_rate);
    write_array(w, obj.mu);
    write_array(w, obj.sigma);
    w.bytes(obj.model_hash.data(), 32);
    w.u32((uint32_t)obj.payload.size());
    w.u32(crc32(obj.payload));
    w.bytes(obj.payload.data(), obj.payload.size());
    return std::move(w.out);
}

CompressedObject parse_object(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    uint8_t magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "CPP+", 4)) throw CodecError("not a compressed object (bad magic)");
    CompressedObject obj;
    obj.version = r.u8();
    if (obj.version != kContainerVersion)
        throw CodecError("unsupported container version " + std::to_string(obj.version));
    obj.modality = (Modality)r.u8();
    int rank = r.u8();
    obj.channels = r.u8();
    for (int i = 0; i < rank; i++) obj.feature_shape.push_back((int)r.u32());
    for (int i = 0; i < rank; i++) obj.patch_shape.push_back((int)r.u32());
    obj.patch_count = r.u32();
    obj.latent_dim = r.u32();
    obj.bits = r.u8();
    obj.raw_min = r.f64();
    obj.raw_max = r.f64();
    obj.sample_rate = r.u32();
    obj.mu = read_vector(r, (int)obj.latent_dim);
    obj.sigma = read_vector(r, (int)obj.latent_dim);
    r.bytes(obj.model_hash.data(), 32);
    uint32_t payload_len = r.u32();
    uint32_t payload_crc = r.u32();
    obj.payload.resize(payload_len);
    r.bytes(obj.payload.data(), payload_len);
    if (crc32(obj.payload) != payload_crc) throw CodecError("payload checksum mismatch");
    return obj;
}

void save_object(const CompressedObject& obj, const std::string& path) { write_file_bytes(path, serialize_object(obj)); }

CompressedObject load_object(const std::string& path) { return parse_object(read_file_bytes(path)); }

namespace {

std::vector<uint8_t> checkpoint_body(const ModelCheckpoint& cp) {
    ByteWriter w;
    w.bytes((const uint8_t*)"CPPM", 4);
    w.u8(kCheckpointVersion);
    w.u8((uint8_t)cp.modality);
    w.u32((uint32_t)cp.cfg.in_dim);
    w.u32((uint32_t)cp.cfg.out_dim);
    w.u32((uint32_t)cp.cfg.depth);
    w.u32((uint32_t)cp.cfg.width);
    w.u32((uint32_t)cp.cfg.latent_dim);
    w.f64(cp.cfg.omega0);
    w.u8((uint8_t)cp.cfg.modulation);
    w.u8((uint8_t)cp.patch_shape.size());
    for (int d : cp.patch_shape) w.u32((uint32_t)d);
    w.u32(cp.sample_rate);
    for (const Array& a : theta_to_arrays(cp.theta)) write_array(w, a);
    w.u8((uint8_t)cp.qp.bits);
    w.f64(cp.qp.clip_k);
    write_array(w, cp.qp.mu);
    write_array(w, cp.qp.sigma);
    w.u8((uint8_t)cp.fm.bits);
    for (uint32_t c : cp.fm.counts) w.u32(c);
    return std::move(w.out);
}

}  // namespace

void seal_checkpoint(ModelCheckpoint& cp) { cp.hash = sha256(checkpoint_body(cp)); }

void save_checkpoint(ModelCheckpoint& cp, const std::string& path) {
    auto body = checkpoint_body(cp);
    cp.hash = sha256(body);
    body.insert(body.end(), cp.hash.begin(), cp.hash.end());
    write_file_bytes(path, body);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() < 36) throw CodecError("checkpoint too short");
    ByteReader r(bytes);
    uint8_t magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "CPPM", 4)) throw CodecError("not a checkpoint (bad magic)");
    ModelCheckpoint cp;
    uint8_t version = r.u8();
    if (version != kCheckpointVersion) throw CodecError("unsupported checkpoint version " + std::to_string(version));
    cp.modality = (Modality)r.u8();
    cp.cfg.in_dim = (int)r.u32();
    cp.cfg.out_dim = (int)r.u32();
    cp.cfg.depth = (int)r.u32();
    cp.cfg.width = (int)r.u32();
    cp.cfg.latent_dim = (int)r.u32();
    cp.cfg.omega0 = r.f64();
    cp.cfg.modulation = (ModulationKind)r.u8();
    cp.cfg.validate();
    int rank = r.u8();
    for (int i = 0; i < rank; i++) cp.patch_shape.push_back((int)r.u32());
    cp.sample_rate = r.u32();

    ThetaLeaves leaves = make_theta_leaves(cp.cfg);
    std::vector<Array> arrays;
    for (const Expr& l : leaves.all) {
        Array a = Array::zeros(l->shape);
        for (long i = 0; i < a.size(); i++) a[i] = r.f64();
        arrays.push_back(std::move(a));
    }
    cp.theta = theta_from_arrays(cp.cfg, arrays);

    cp.qp.bits = r.u8();
    cp.qp.clip_k = r.f64();
    cp.qp.mu = read_vector(r, cp.cfg.latent_dim);
    cp.qp.sigma = read_vector(r, cp.cfg.latent_dim);
    cp.fm.bits = r.u8();
    cp.fm.counts.resize((size_t)1 << cp.fm.bits);
    for (auto& c : cp.fm.counts) c = r.u32();
    cp.fm.cum.assign(cp.fm.counts.size() + 1, 0);
    uint64_t total = 0;
    for (size_t i = 0; i < cp.fm.counts.size(); i++) {
        total += cp.fm.counts[i];
        cp.fm.cum[i + 1] = (uint32_t)total;
    }
    cp.fm.total = (uint32_t)total;

    size_t body_len = (size_t)(r.p - bytes.data());
    std::array<uint8_t, 32> stored;
    r.bytes(stored.data(), 32);
    if (r.p != r.end) throw CodecError("trailing bytes in checkpoint");
    cp.hash = sha256(bytes.data(), body_len);
    if (cp.hash != stored) throw CodecError("corrupt checkpoint (hash mismatch)");
    return cp;
}

Rate rate(const CompressedObject& obj, const Signal& signal) {
    Rate r;
    const double bits = 8.0 * (double)obj.payload.size();
    const double pixels = (double)Array::count(signal.feature_shape);
    r.bpp = bits / pixels;
    r.bpp_per_value = bits / (pixels * signal.channels);
    if (signal.modality == Modality::kAudio && signal.sample_rate > 0) {
        double seconds = (double)signal.coord_count() / signal.sample_rate;
        r.kbps = bits / seconds / 1000.0;
    } else {
        r.kbps = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

namespace {

bool hash_is_zero(const std::array<uint8_t, 32>& h) {
    for (uint8_t b : h)
        if (b) return false;
    return true;
}

// Shared by encode (for the reported PSNR) and decode, so both produce the
// same bytes for the same symbols.
Signal reconstruct_from_symbols(const ModelCheckpoint& cp, const SymbolStream& symbols, const QuantizerParams& qp,
                                const std::vector<int>& feature_shape, const std::vector<int>& patch_shape,
                                int channels, Modality modality) {
    PatchLayout layout = plan_partition(feature_shape, patch_shape, channels);
    const long n_patches = layout.patch_count();
    if ((long)symbols.size() != n_patches * cp.cfg.latent_dim) throw CodecError("symbol count does not match layout");

    Signal proto;
    proto.modality = modality;
    proto.feature_shape = patch_shape;
    proto.channels = channels;
    Array coords = signal_coords(proto);

    std::vector<Signal> patches;
    patches.reserve((size_t)n_patches);
    for (long p = 0; p < n_patches; p++) {
        SymbolStream ps(symbols.begin() + p * cp.cfg.latent_dim, symbols.begin() + (p + 1) * cp.cfg.latent_dim);
        Modulations phi = dequantize(ps, qp);
        Array pred = forward(cp.cfg, cp.theta, phi, coords);
        Signal patch = proto;
        patch.features.resize((size_t)patch.value_count());
        for (long i = 0; i < pred.size(); i++) patch.features[i] = std::clamp(pred[i], 0.0, 1.0);
        patches.push_back(std::move(patch));
    }
    return reassemble(patches, layout);
}

}  // namespace

EncodeResult encode(const Signal& signal, const ModelCheckpoint& cp, const InnerConfig& inner) {
    if (hash_is_zero(cp.hash)) throw CodecError("encode: checkpoint not sealed");
    if (signal.modality != cp.modality)
        throw CodecError(std::string("encode: checkpoint is for ") + modality_name(cp.modality) + ", signal is " +
                         modality_name(signal.modality));
    if (signal.channels != cp.cfg.out_dim) throw CodecError("encode: channel count does not match checkpoint");
    if (signal.feature_shape.size() != cp.patch_shape.size()) throw CodecError("encode: rank does not match checkpoint");

    // Signals smaller than the patch shape become a single edge-padded patch.
    auto [patches, layout] = partition(signal, cp.patch_shape);

    SymbolStream symbols;
    symbols.reserve(patches.size() * (size_t)cp.cfg.latent_dim);
    for (const Signal& p : patches) {
        Modulations phi = inner_adapt(cp.cfg, cp.theta, p, inner);
        SymbolStream ps = quantize(phi, cp.qp);
        symbols.insert(symbols.end(), ps.begin(), ps.end());
    }

    CompressedObject obj;
    obj.version = kContainerVersion;
    obj.modality = signal.modality;
    obj.feature_shape = signal.feature_shape;
    obj.channels = signal.channels;
    obj.patch_shape = cp.patch_shape;
    obj.patch_count = (uint32_t)layout.patch_count();
    obj.latent_dim = (uint32_t)cp.cfg.latent_dim;
    obj.bits = (uint8_t)cp.qp.bits;
    obj.mu = cp.qp.mu;
    obj.sigma = cp.qp.sigma;
    obj.model_hash = cp.hash;
    obj.raw_min = signal.raw_min;
    obj.raw_max = signal.raw_max;
    obj.sample_rate = (uint32_t)signal.sample_rate;
    obj.payload = ac_encode(symbols, cp.fm);

    Signal recon = reconstruct_from_symbols(cp, symbols, cp.qp, signal.feature_shape, cp.patch_shape, signal.channels,
                                            signal.modality);
    EncodeResult res;
    res.psnr_db = psnr_db(mean_squared_error(recon.features, signal.features));
    res.rate = rate(obj, signal);
    res.obj = std::move(obj);
    return res;
}

Signal decode(const CompressedObject& obj, const ModelCheckpoint& cp) {
    if (obj.model_hash != cp.hash) throw CodecError("decode: wrong base network (model hash mismatch)");
    if ((int)obj.latent_dim != cp.cfg.latent_dim) throw CodecError("decode: latent dimension mismatch");
    if (obj.bits != cp.fm.bits) throw CodecError("decode: bit width does not match checkpoint frequency model");

    QuantizerParams qp;
    qp.bits = obj.bits;
    qp.clip_k = cp.qp.clip_k;
    qp.mu = obj.mu;
    qp.sigma = obj.sigma;

    SymbolStream symbols = ac_decode(obj.payload, (size_t)obj.patch_count * obj.latent_dim, cp.fm);
    Signal out = reconstruct_from_symbols(cp, symbols, qp, obj.feature_shape, obj.patch_shape, obj.channels,
                                          obj.modality);
    out.raw_min = obj.raw_min;
    out.raw_max = obj.raw_max;
    out.sample_rate = (int)obj.sample_rate;
    return out;
}

}  // namespace inrcodec
