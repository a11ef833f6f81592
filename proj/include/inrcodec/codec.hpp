#pragma once

#include "inrcodec/meta.hpp"
#include "inrcodec/metrics.hpp"
#include "inrcodec/quantize.hpp"

#include <array>
#include <string>

namespace inrcodec {

constexpr uint8_t kContainerVersion = 1;
constexpr uint8_t kCheckpointVersion = 1;

// Versioned container holding quantization metadata and the arithmetic-coded
// modulation symbols for all patches, concatenated in patch order with
// implicit per-patch boundaries (latent_dim symbols each).
struct CompressedObject {
    uint8_t version = kContainerVersion;
    Modality modality = Modality::kImage;
    std::vector<int> feature_shape;
    int channels = 1;
    std::vector<int> patch_shape;
    uint32_t patch_count = 0;
    uint32_t latent_dim = 0;
    uint8_t bits = 5;
    Array mu, sigma;  // per-dimension quantizer statistics
    std::array<uint8_t, 32> model_hash{};
    double raw_min = 0.0, raw_max = 1.0;
    uint32_t sample_rate = 0;
    std::vector<uint8_t> payload;
};

std::vector<uint8_t> serialize_object(const CompressedObject& obj);
CompressedObject parse_object(const std::vector<uint8_t>& bytes);
void save_object(const CompressedObject& obj, const std::string& path);
CompressedObject load_object(const std::string& path);

// Receiver-side shared state: the base network plus the calibration needed to
// reconstruct and entropy-decode modulations. The hash binds objects to the
// exact checkpoint bytes.
struct ModelCheckpoint {
    SirenConfig cfg;
    BaseParams theta;
    QuantizerParams qp;
    FrequencyModel fm;
    Modality modality = Modality::kImage;
    std::vector<int> patch_shape;
    uint32_t sample_rate = 0;
    std::array<uint8_t, 32> hash{};
};

// Computes and stores the content hash; required before encode/decode.
void seal_checkpoint(ModelCheckpoint& cp);
void save_checkpoint(ModelCheckpoint& cp, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

struct Rate {
    double bpp;            // payload bits / coordinate count (channels excluded)
    double bpp_per_value;  // payload bits / (coordinate count * channels)
    double kbps;           // audio only, NaN otherwise
};
Rate rate(const CompressedObject& obj, const Signal& signal);

struct EncodeResult {
    CompressedObject obj;
    double psnr_db;  // quantized reconstruction PSNR, identical to decode
    Rate rate;
};

EncodeResult encode(const Signal& signal, const ModelCheckpoint& cp, const InnerConfig& inner);
Signal decode(const CompressedObject& obj, const ModelCheckpoint& cp);

}  // namespace inrcodec
