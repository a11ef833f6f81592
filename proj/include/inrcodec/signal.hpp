#pragma once

#include "inrcodec/array.hpp"
#include "inrcodec/rng.hpp"

#include <string>
#include <utility>
#include <vector>

namespace inrcodec {

enum class Modality : uint8_t { kImage = 0, kAudio = 1, kSphereGrid = 2, kVolume = 3 };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

// One datapoint as normalized features over an implicit coordinate grid.
// features are row-major over the spatial axes with channels innermost and
// every value in [0,1]; raw_range allows denormalization on save.
struct Signal {
    Modality modality = Modality::kImage;
    std::vector<int> feature_shape;  // spatial axes only
    int channels = 1;
    std::vector<double> features;
    double raw_min = 0.0;
    double raw_max = 1.0;
    int sample_rate = 0;  // audio only

    long coord_count() const { return Array::count(feature_shape); }
    long value_count() const { return coord_count() * channels; }
};

struct CoordinateSpec {
    enum Kind { kEuclideanGrid, kSpherical } kind = kEuclideanGrid;
    std::vector<int> counts;  // samples per axis (spherical: lat, lon)
    double range = 1.0;       // grid spans [-range, range] per axis
};

// Coordinate normalization range by modality: audio uses [-5,5], the rest [-1,1].
double coord_range_for(Modality m);
int coord_dim_for(Modality m, int rank);

// Row-major coordinate enumeration matching feature storage order. Axis i
// sample j maps to -r + 2r*j/(count_i - 1); single-sample axes map to 0.
Array make_coords(const CoordinateSpec& spec);

// Unit vectors (cos(lat)cos(lon), cos(lat)sin(lon), sin(lat)); latitudes
// equally spaced in [-pi/2, pi/2], longitudes in [0, 2pi) without the seam.
Array spherical_coords(int lat_count, int lon_count);

// Full-range coordinate grid for this signal's own shape (patch-local frame).
Array signal_coords(const Signal& s);
// Features as an (n x channels) matrix in coordinate order.
Array feature_matrix(const Signal& s);
// Inverse of feature_matrix: replace a signal's features from a matrix.
void set_features(Signal& s, const Array& values);

Signal load_signal(const std::string& path, Modality modality);
void save_signal(const Signal& s, const std::string& path);

struct PatchLayout {
    std::vector<int> patch_shape;
    std::vector<int> patch_counts;
    std::vector<int> padding;  // per-axis rows added by edge replication
    std::vector<int> feature_shape;
    int channels = 1;
    long patch_count() const { return Array::count(patch_counts); }
};

Signal random_patch(const Signal& s, const std::vector<int>& patch_shape, Rng& rng);
PatchLayout plan_partition(const std::vector<int>& feature_shape, const std::vector<int>& patch_shape, int channels);
std::pair<std::vector<Signal>, PatchLayout> partition(const Signal& s, const std::vector<int>& patch_shape);
Signal reassemble(const std::vector<Signal>& patches, const PatchLayout& layout);

}  // namespace inrcodec
