#include "inrcodec/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace inrcodec {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::kImage: return "image";
        case Modality::kAudio: return "audio";
        case Modality::kSphereGrid: return "sphere";
        case Modality::kVolume: return "volume";
    }
    return "?";
}

Modality modality_from_name(const std::string& name) {
    if (name == "image") return Modality::kImage;
    if (name == "audio") return Modality::kAudio;
    if (name == "sphere") return Modality::kSphereGrid;
    if (name == "volume") return Modality::kVolume;
    throw ValueError("unknown modality '" + name + "'");
}

double coord_range_for(Modality m) { return m == Modality::kAudio ? 5.0 : 1.0; }

int coord_dim_for(Modality m, int rank) { return m == Modality::kSphereGrid ? 3 : rank; }

Array make_coords(const CoordinateSpec& spec) {
    if (spec.kind == CoordinateSpec::kSpherical) {
        if (spec.counts.size() != 2) throw ValueError("spherical coordinates need lat and lon counts");
        return spherical_coords(spec.counts[0], spec.counts[1]);
    }
    for (int c : spec.counts)
        if (c <= 0) throw ValueError("coordinate axis counts must be positive");
    const int rank = (int)spec.counts.size();
    const long n = Array::count(spec.counts);
    Array coords = Array::zeros({(int)n, rank});
    std::vector<int> idx(rank, 0);
    const double r = spec.range;
    for (long row = 0; row < n; row++) {
        for (int a = 0; a < rank; a++) {
            int c = spec.counts[a];
            coords.at((int)row, a) = c == 1 ? 0.0 : -r + 2.0 * r * idx[a] / (c - 1);
        }
        for (int a = rank - 1; a >= 0; a--) {
            if (++idx[a] < spec.counts[a]) break;
            idx[a] = 0;
        }
    }
    return coords;
}

Array spherical_coords(int lat_count, int lon_count) {
    if (lat_count <= 0 || lon_count <= 0) throw ValueError("spherical_coords: counts must be positive");
    Array coords = Array::zeros({lat_count * lon_count, 3});
    for (int i = 0; i < lat_count; i++) {
        double lat = lat_count == 1 ? 0.0 : -M_PI / 2.0 + M_PI * i / (lat_count - 1);
        for (int j = 0; j < lon_count; j++) {
            double lon = 2.0 * M_PI * j / lon_count;
            int row = i * lon_count + j;
            coords.at(row, 0) = std::cos(lat) * std::cos(lon);
            coords.at(row, 1) = std::cos(lat) * std::sin(lon);
            coords.at(row, 2) = std::sin(lat);
        }
    }
    return coords;
}

Array signal_coords(const Signal& s) {
    CoordinateSpec spec;
    spec.counts = s.feature_shape;
    if (s.modality == Modality::kSphereGrid) {
        spec.kind = CoordinateSpec::kSpherical;
    } else {
        spec.kind = CoordinateSpec::kEuclideanGrid;
        spec.range = coord_range_for(s.modality);
    }
    return make_coords(spec);
}

Array feature_matrix(const Signal& s) {
    return Array({(int)s.coord_count(), s.channels}, s.features);
}

void set_features(Signal& s, const Array& values) {
    if (values.size() != (long)s.features.size())
        throw ShapeError("set_features: value count " + std::to_string(values.size()) + " vs " +
                         std::to_string(s.features.size()));
    std::copy(values.data(), values.data() + values.size(), s.features.begin());
}

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path + "'");
    f.write((const char*)bytes.data(), (long)bytes.size());
    if (!f) throw IoError("short write to '" + path + "'");
}

// netpbm header token reader: skips whitespace and # comments.
struct PnmCursor {
    const std::vector<uint8_t>& b;
    size_t i = 0;
    int next_int(const std::string& path) {
        while (i < b.size()) {
            if (std::isspace(b[i])) {
                i++;
            } else if (b[i] == '#') {
                while (i < b.size() && b[i] != '\n') i++;
            } else {
                break;
            }
        }
        if (i >= b.size() || !std::isdigit(b[i])) throw IoError("corrupt netpbm header in '" + path + "'");
        long v = 0;
        while (i < b.size() && std::isdigit(b[i])) v = v * 10 + (b[i++] - '0');
        return (int)v;
    }
};

Signal load_pnm(const std::string& path) {
    auto bytes = read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw IoError("unsupported image format in '" + path + "' (want binary PGM P5 or PPM P6)");
    int channels = bytes[1] == '5' ? 1 : 3;
    PnmCursor cur{bytes, 2};
    int w = cur.next_int(path);
    int h = cur.next_int(path);
    int maxval = cur.next_int(path);
    if (maxval != 255) throw IoError("unsupported maxval " + std::to_string(maxval) + " in '" + path + "'");
    if (cur.i >= bytes.size() || !std::isspace(bytes[cur.i])) throw IoError("corrupt netpbm header in '" + path + "'");
    cur.i++;  // single whitespace after maxval
    size_t need = (size_t)w * h * channels;
    if (bytes.size() - cur.i < need) throw IoError("truncated pixel data in '" + path + "'");
    Signal s;
    s.modality = Modality::kImage;
    s.feature_shape = {h, w};
    s.channels = channels;
    s.raw_min = 0;
    s.raw_max = 255;
    s.features.resize(need);
    for (size_t k = 0; k < need; k++) s.features[k] = bytes[cur.i + k] / 255.0;
    return s;
}

void save_pnm(const Signal& s, const std::string& path) {
    if (s.feature_shape.size() != 2) throw ValueError("image save needs a 2-d signal");
    if (s.channels != 1 && s.channels != 3) throw ValueError("image save supports 1 or 3 channels");
    std::string header = std::string(s.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(s.feature_shape[1]) + " " +
                         std::to_string(s.feature_shape[0]) + "\n255\n";
    std::vector<uint8_t> bytes(header.begin(), header.end());
    for (double f : s.features) {
        double v = std::lround(std::clamp(f, 0.0, 1.0) * 255.0);
        bytes.push_back((uint8_t)v);
    }
    write_file(path, bytes);
}

uint32_t rd_u32le(const uint8_t* p) {
    return (uint32_t)p[0] | ((uint32_t)p[1] << 8) | ((uint32_t)p[2] << 16) | ((uint32_t)p[3] << 24);
}
uint16_t rd_u16le(const uint8_t* p) { return (uint16_t)((uint32_t)p[0] | ((uint32_t)p[1] << 8)); }

Signal load_wav(const std::string& path) {
    auto bytes = read_file(path);
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) || std::memcmp(bytes.data() + 8, "WAVE", 4))
        throw IoError("unsupported audio format in '" + path + "' (want RIFF WAVE)");
    size_t i = 12;
    int sample_rate = 0;
    bool have_fmt = false;
    const uint8_t* data = nullptr;
    size_t data_len = 0;
    while (i + 8 <= bytes.size()) {
        uint32_t chunk_len = rd_u32le(bytes.data() + i + 4);
        const uint8_t* body = bytes.data() + i + 8;
        if (i + 8 + chunk_len > bytes.size()) throw IoError("truncated chunk in '" + path + "'");
        if (!std::memcmp(bytes.data() + i, "fmt ", 4)) {
            if (chunk_len < 16) throw IoError("corrupt fmt chunk in '" + path + "'");
            if (rd_u16le(body) != 1) throw IoError("'" + path + "': only PCM WAV is supported");
            if (rd_u16le(body + 2) != 1) throw IoError("'" + path + "': only mono WAV is supported");
            if (rd_u16le(body + 14) != 16) throw IoError("'" + path + "': only 16-bit WAV is supported");
            sample_rate = (int)rd_u32le(body + 4);
            have_fmt = true;
        } else if (!std::memcmp(bytes.data() + i, "data", 4)) {
            data = body;
            data_len = chunk_len;
        }
        i += 8 + chunk_len + (chunk_len & 1);
    }
    if (!have_fmt || !data) throw IoError("missing fmt or data chunk in '" + path + "'");
    Signal s;
    s.modality = Modality::kAudio;
    s.feature_shape = {(int)(data_len / 2)};
    s.channels = 1;
    s.raw_min = -32768;
    s.raw_max = 32767;
    s.sample_rate = sample_rate;
    s.features.resize(data_len / 2);
    for (size_t k = 0; k < s.features.size(); k++) {
        int16_t v = (int16_t)rd_u16le(data + 2 * k);
        s.features[k] = ((double)v + 32768.0) / 65535.0;
    }
    return s;
}

void push_u32le(std::vector<uint8_t>& b, uint32_t v) {
    b.push_back(v & 0xFF);
    b.push_back((v >> 8) & 0xFF);
    b.push_back((v >> 16) & 0xFF);
    b.push_back((v >> 24) & 0xFF);
}
void push_u16le(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back((v >> 8) & 0xFF);
}

void save_wav(const Signal& s, const std::string& path) {
    if (s.feature_shape.size() != 1 || s.channels != 1) throw ValueError("audio save needs a mono 1-d signal");
    const uint32_t n = (uint32_t)s.coord_count();
    const uint32_t rate = s.sample_rate > 0 ? (uint32_t)s.sample_rate : 16000;
    std::vector<uint8_t> b;
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    push_u32le(b, 36 + n * 2);
    b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    push_u32le(b, 16);
    push_u16le(b, 1);  // PCM
    push_u16le(b, 1);  // mono
    push_u32le(b, rate);
    push_u32le(b, rate * 2);
    push_u16le(b, 2);
    push_u16le(b, 16);
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    push_u32le(b, n * 2);
    for (double f : s.features) {
        long v = std::lround(std::clamp(f, 0.0, 1.0) * 65535.0 - 32768.0);
        v = std::clamp(v, -32768l, 32767l);
        push_u16le(b, (uint16_t)(int16_t)v);
    }
    write_file(path, b);
}

constexpr size_t kGridHeaderBytes = 24;  // magic, rank, channels, reserved, 4 axis sizes
constexpr int kGridMaxRank = 4;

Signal load_grid(const std::string& path, Modality modality) {
    auto bytes = read_file(path);
    if (bytes.size() < kGridHeaderBytes || std::memcmp(bytes.data(), "CGRD", 4))
        throw IoError("unsupported grid format in '" + path + "' (want CGRD)");
    int rank = bytes[4];
    int channels = bytes[5];
    if (rank < 1 || rank > kGridMaxRank || channels < 1) throw IoError("corrupt CGRD header in '" + path + "'");
    Signal s;
    s.modality = modality;
    s.channels = channels;
    for (int a = 0; a < rank; a++) {
        uint32_t d = rd_u32le(bytes.data() + 8 + 4 * a);
        if (d == 0) throw IoError("corrupt CGRD header in '" + path + "'");
        s.feature_shape.push_back((int)d);
    }
    size_t n = (size_t)s.value_count();
    if (bytes.size() != kGridHeaderBytes + n * 8) throw IoError("CGRD payload size mismatch in '" + path + "'");
    std::vector<double> raw(n);
    std::memcpy(raw.data(), bytes.data() + kGridHeaderBytes, n * 8);
    double lo = raw.empty() ? 0 : raw[0], hi = lo;
    for (double v : raw) {
        if (std::isnan(v)) throw IoError("NaN grid value in '" + path + "'");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    s.raw_min = lo;
    s.raw_max = hi;
    s.features.resize(n);
    for (size_t k = 0; k < n; k++) s.features[k] = hi > lo ? (raw[k] - lo) / (hi - lo) : 0.5;
    return s;
}

void save_grid(const Signal& s, const std::string& path) {
    if (s.feature_shape.empty() || (int)s.feature_shape.size() > kGridMaxRank)
        throw ValueError("grid save supports rank 1..4");
    std::vector<uint8_t> b;
    b.insert(b.end(), {'C', 'G', 'R', 'D'});
    b.push_back((uint8_t)s.feature_shape.size());
    b.push_back((uint8_t)s.channels);
    push_u16le(b, 0);
    for (int a = 0; a < kGridMaxRank; a++)
        push_u32le(b, a < (int)s.feature_shape.size() ? (uint32_t)s.feature_shape[a] : 0u);
    for (double f : s.features) {
        double v = s.raw_max > s.raw_min ? f * (s.raw_max - s.raw_min) + s.raw_min : s.raw_min;
        uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int k = 0; k < 8; k++) b.push_back((uint8_t)(u >> (8 * k)));
    }
    write_file(path, b);
}

}  // namespace

Signal load_signal(const std::string& path, Modality modality) {
    switch (modality) {
        case Modality::kImage: return load_pnm(path);
        case Modality::kAudio: return load_wav(path);
        case Modality::kSphereGrid:
        case Modality::kVolume: return load_grid(path, modality);
    }
    throw ValueError("bad modality");
}

void save_signal(const Signal& s, const std::string& path) {
    switch (s.modality) {
        case Modality::kImage: return save_pnm(s, path);
        case Modality::kAudio: return save_wav(s, path);
        case Modality::kSphereGrid:
        case Modality::kVolume: return save_grid(s, path);
    }
    throw ValueError("bad modality");
}

namespace {

// Copies an axis-aligned box (clamped to the source extent, which implements
// edge replication for out-of-range rows) into a destination patch buffer.
void copy_box(const Signal& src, const std::vector<int>& offset, const std::vector<int>& box, Signal& dst) {
    const int rank = (int)box.size();
    const int ch = src.channels;
    std::vector<int> idx(rank, 0);
    long cells = Array::count(box);
    for (long cell = 0; cell < cells; cell++) {
        long src_off = 0;
        for (int a = 0; a < rank; a++) {
            int p = std::min(offset[a] + idx[a], src.feature_shape[a] - 1);
            src_off = src_off * src.feature_shape[a] + p;
        }
        for (int c = 0; c < ch; c++) dst.features[cell * ch + c] = src.features[src_off * ch + c];
        for (int a = rank - 1; a >= 0; a--) {
            if (++idx[a] < box[a]) break;
            idx[a] = 0;
        }
    }
}

void check_patch_shape(const Signal& s, const std::vector<int>& patch_shape) {
    if (patch_shape.size() != s.feature_shape.size())
        throw ShapeError("patch rank " + Array::shape_str(patch_shape) + " vs signal " +
                         Array::shape_str(s.feature_shape));
    for (size_t a = 0; a < patch_shape.size(); a++)
        if (patch_shape[a] <= 0) throw ValueError("patch axes must be positive");
}

}  // namespace

Signal random_patch(const Signal& s, const std::vector<int>& patch_shape, Rng& rng) {
    check_patch_shape(s, patch_shape);
    for (size_t a = 0; a < patch_shape.size(); a++)
        if (patch_shape[a] > s.feature_shape[a])
            throw ShapeError("patch " + Array::shape_str(patch_shape) + " larger than signal " +
                             Array::shape_str(s.feature_shape));
    std::vector<int> offset(patch_shape.size());
    for (size_t a = 0; a < patch_shape.size(); a++)
        offset[a] = (int)rng.uniform_int((uint64_t)(s.feature_shape[a] - patch_shape[a] + 1));
    Signal p = s;
    p.feature_shape = patch_shape;
    p.features.assign((size_t)p.value_count(), 0.0);
    copy_box(s, offset, patch_shape, p);
    return p;
}

PatchLayout plan_partition(const std::vector<int>& feature_shape, const std::vector<int>& patch_shape, int channels) {
    if (feature_shape.size() != patch_shape.size()) throw ShapeError("plan_partition: rank mismatch");
    PatchLayout layout;
    layout.patch_shape = patch_shape;
    layout.feature_shape = feature_shape;
    layout.channels = channels;
    for (size_t a = 0; a < patch_shape.size(); a++) {
        if (patch_shape[a] <= 0 || feature_shape[a] <= 0) throw ValueError("plan_partition: axes must be positive");
        int count = (feature_shape[a] + patch_shape[a] - 1) / patch_shape[a];
        layout.patch_counts.push_back(count);
        layout.padding.push_back(count * patch_shape[a] - feature_shape[a]);
    }
    return layout;
}

std::pair<std::vector<Signal>, PatchLayout> partition(const Signal& s, const std::vector<int>& patch_shape) {
    check_patch_shape(s, patch_shape);
    PatchLayout layout = plan_partition(s.feature_shape, patch_shape, s.channels);
    const int rank = (int)patch_shape.size();
    std::vector<Signal> patches;
    patches.reserve((size_t)layout.patch_count());
    std::vector<int> pidx(rank, 0);
    for (long p = 0; p < layout.patch_count(); p++) {
        std::vector<int> offset(rank);
        for (int a = 0; a < rank; a++) offset[a] = pidx[a] * patch_shape[a];
        Signal patch = s;
        patch.feature_shape = patch_shape;
        patch.features.assign((size_t)patch.value_count(), 0.0);
        copy_box(s, offset, patch_shape, patch);
        patches.push_back(std::move(patch));
        for (int a = rank - 1; a >= 0; a--) {
            if (++pidx[a] < layout.patch_counts[a]) break;
            pidx[a] = 0;
        }
    }
    return {std::move(patches), std::move(layout)};
}

Signal reassemble(const std::vector<Signal>& patches, const PatchLayout& layout) {
    if ((long)patches.size() != layout.patch_count())
        throw ShapeError("reassemble: got " + std::to_string(patches.size()) + " patches, layout needs " +
                         std::to_string(layout.patch_count()));
    const int rank = (int)layout.patch_shape.size();
    for (const auto& p : patches)
        if (p.feature_shape != layout.patch_shape || p.channels != layout.channels)
            throw ShapeError("reassemble: patch shape mismatch");

    Signal out = patches[0];
    out.feature_shape = layout.feature_shape;
    out.features.assign((size_t)out.value_count(), 0.0);
    const int ch = layout.channels;

    std::vector<int> pidx(rank, 0);
    for (long p = 0; p < layout.patch_count(); p++) {
        const Signal& patch = patches[p];
        std::vector<int> offset(rank);
        for (int a = 0; a < rank; a++) offset[a] = pidx[a] * layout.patch_shape[a];
        std::vector<int> idx(rank, 0);
        long cells = Array::count(layout.patch_shape);
        for (long cell = 0; cell < cells; cell++) {
            bool inside = true;
            long dst_off = 0;
            for (int a = 0; a < rank; a++) {
                int q = offset[a] + idx[a];
                if (q >= layout.feature_shape[a]) inside = false;
                dst_off = dst_off * layout.feature_shape[a] + std::min(q, layout.feature_shape[a] - 1);
            }
            if (inside)
                for (int c = 0; c < ch; c++) out.features[dst_off * ch + c] = patch.features[cell * ch + c];
            for (int a = rank - 1; a >= 0; a--) {
                if (++idx[a] < layout.patch_shape[a]) break;
                idx[a] = 0;
            }
        }
        for (int a = rank - 1; a >= 0; a--) {
            if (++pidx[a] < layout.patch_counts[a]) break;
            pidx[a] = 0;
        }
    }
    return out;
}

}  // namespace inrcodec
