#pragma once

#include "inrcodec/autodiff.hpp"
#include "inrcodec/rng.hpp"

#include <vector>

namespace inrcodec {

enum class ModulationKind : uint8_t { kNone = 0, kShift = 1, kScale = 2, kScaleAndShift = 3 };

const char* modulation_kind_name(ModulationKind k);
ModulationKind modulation_kind_from_name(const std::string& name);

struct SirenConfig {
    int in_dim = 2;
    int out_dim = 1;
    int depth = 5;        // number of sine layers
    int width = 64;       // hidden units per layer
    int latent_dim = 0;   // transmitted modulation size, 0 iff kNone
    double omega0 = 50.0; // fixed frequency scale, not trained
    ModulationKind modulation = ModulationKind::kShift;

    void validate() const;
    bool has_shift() const {
        return modulation == ModulationKind::kShift || modulation == ModulationKind::kScaleAndShift;
    }
    bool has_scale() const {
        return modulation == ModulationKind::kScale || modulation == ModulationKind::kScaleAndShift;
    }
    // Rows of the latent-to-modulation map: depth*width per modulated quantity.
    int modulation_rows() const;
};

// Shared meta-learned parameters: sine layers, final linear layer, and the
// latent-to-modulation map stored as one width x latent block per layer per
// quantity (concatenated blocks are exactly the full-map matrix row-major).
struct BaseParams {
    std::vector<Array> weights;   // [0]: width x in_dim, then width x width
    std::vector<Array> biases;    // width each
    Array w_out;                  // out_dim x width
    Array b_out;                  // out_dim
    std::vector<Array> map_shift; // width x latent per layer (shift modes)
    std::vector<Array> map_scale; // width x latent per layer (scale modes)
};

struct Modulations {
    Array latent;  // rank-1, length latent_dim
};

Modulations zero_modulations(const SirenConfig& cfg);

BaseParams init_base_params(const SirenConfig& cfg, Rng& rng);

// Layer-level operations on plain vectors.
Array siren_layer(const Array& h, const Array& w, const Array& b, double omega0);
Array film(const Array& h, const Array& gamma, const Array& beta);
Array modulated_layer(const Array& h, const Array& w, const Array& b, const Array& beta_shift, double omega0);

// Per-layer modulation vectors from the latent code. Scale entries are raw;
// they are applied as (1 + raw) so the zero latent is neutral in every mode.
struct LayerModulations {
    std::vector<Array> shifts;
    std::vector<Array> scales_raw;
};
LayerModulations latent_to_mods(const SirenConfig& cfg, const BaseParams& params, const Modulations& phi);

// Named leaves for every base parameter, plus binding helpers. Leaf names
// follow the serialization order: w0..w{d-1}, b0.., w_out, b_out, ms0.., mc0..
struct ThetaLeaves {
    std::vector<Expr> weights, biases;
    Expr w_out, b_out;
    std::vector<Expr> map_shift, map_scale;
    std::vector<Expr> all;  // flat, fixed order
};
ThetaLeaves make_theta_leaves(const SirenConfig& cfg);
Bindings bind_theta(const SirenConfig& cfg, const BaseParams& params);
// Assemble a BaseParams from arrays in ThetaLeaves::all order.
BaseParams theta_from_arrays(const SirenConfig& cfg, const std::vector<Array>& arrays);
std::vector<Array> theta_to_arrays(const BaseParams& params);

// Differentiable forward graph: depth modulated sine layers followed by an
// unmodulated linear output layer. coords is (n x in_dim), phi a latent
// vector expression (ignored for kNone).
Expr forward_expr(const SirenConfig& cfg, const ThetaLeaves& theta, Expr coords, Expr phi);

// Decode rule: evaluate the modulated network at every coordinate.
Array forward(const SirenConfig& cfg, const BaseParams& params, const Modulations& phi, const Array& coords);

}  // namespace inrcodec
