#include "inrcodec/siren.hpp"

#include <cmath>

namespace inrcodec {

const char* modulation_kind_name(ModulationKind k) {
    switch (k) {
        case ModulationKind::kNone: return "none";
        case ModulationKind::kShift: return "shift";
        case ModulationKind::kScale: return "scale";
        case ModulationKind::kScaleAndShift: return "scale_and_shift";
    }
    return "?";
}

ModulationKind modulation_kind_from_name(const std::string& name) {
    if (name == "none") return ModulationKind::kNone;
    if (name == "shift") return ModulationKind::kShift;
    if (name == "scale") return ModulationKind::kScale;
    if (name == "scale_and_shift") return ModulationKind::kScaleAndShift;
    throw ValueError("unknown modulation kind '" + name + "'");
}

void SirenConfig::validate() const {
    if (in_dim < 1 || out_dim < 1 || depth < 1 || width < 1) throw ValueError("SirenConfig: dimensions must be >= 1");
    if (omega0 <= 0) throw ValueError("SirenConfig: omega0 must be positive");
    if ((latent_dim == 0) != (modulation == ModulationKind::kNone))
        throw ValueError("SirenConfig: latent_dim must be 0 exactly when modulation is none");
    if (latent_dim < 0) throw ValueError("SirenConfig: latent_dim must be >= 0");
}

int SirenConfig::modulation_rows() const {
    int per_quantity = depth * width;
    return per_quantity * ((has_shift() ? 1 : 0) + (has_scale() ? 1 : 0));
}

Modulations zero_modulations(const SirenConfig& cfg) { return Modulations{Array::zeros({cfg.latent_dim})}; }

BaseParams init_base_params(const SirenConfig& cfg, Rng& rng) {
    cfg.validate();
    BaseParams p;
    for (int l = 0; l < cfg.depth; l++) {
        int in = l == 0 ? cfg.in_dim : cfg.width;
        double bound = l == 0 ? 1.0 / cfg.in_dim : std::sqrt(6.0 / cfg.width) / cfg.omega0;
        Array w = Array::zeros({cfg.width, in});
        for (long i = 0; i < w.size(); i++) w[i] = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Array::zeros({cfg.width}));
    }
    double bound = std::sqrt(6.0 / cfg.width) / cfg.omega0;
    p.w_out = Array::zeros({cfg.out_dim, cfg.width});
    for (long i = 0; i < p.w_out.size(); i++) p.w_out[i] = rng.uniform(-bound, bound);
    p.b_out = Array::zeros({cfg.out_dim});
    if (cfg.latent_dim > 0) {
        // A latent map of exact zeros is a stationary point of the meta
        // objective (gradients with respect to it vanish identically), so it
        // is initialized like an ordinary linear layer instead.
        double mbound = 1.0 / std::sqrt((double)cfg.latent_dim);
        for (int l = 0; l < cfg.depth; l++) {
            if (cfg.has_shift()) {
                Array m = Array::zeros({cfg.width, cfg.latent_dim});
                for (long i = 0; i < m.size(); i++) m[i] = rng.uniform(-mbound, mbound);
                p.map_shift.push_back(std::move(m));
            }
            if (cfg.has_scale()) {
                Array m = Array::zeros({cfg.width, cfg.latent_dim});
                for (long i = 0; i < m.size(); i++) m[i] = rng.uniform(-mbound, mbound);
                p.map_scale.push_back(std::move(m));
            }
        }
    }
    return p;
}

Array siren_layer(const Array& h, const Array& w, const Array& b, double omega0) {
    if (h.rank() != 1 || w.rank() != 2 || w.shape()[1] != h.shape()[0] || b.shape() != std::vector<int>{w.shape()[0]})
        throw ShapeError("siren_layer: W " + Array::shape_str(w.shape()) + ", h " + Array::shape_str(h.shape()) +
                         ", b " + Array::shape_str(b.shape()));
    Array out = Array::zeros({w.shape()[0]});
    for (int i = 0; i < w.shape()[0]; i++) {
        double z = b[i];
        for (int j = 0; j < w.shape()[1]; j++) z += w.at(i, j) * h[j];
        out[i] = std::sin(omega0 * z);
    }
    return out;
}

Array film(const Array& h, const Array& gamma, const Array& beta) {
    if (!h.same_shape(gamma) || !h.same_shape(beta))
        throw ShapeError("film: h " + Array::shape_str(h.shape()) + ", gamma " + Array::shape_str(gamma.shape()) +
                         ", beta " + Array::shape_str(beta.shape()));
    Array out = h;
    for (long i = 0; i < out.size(); i++) out[i] = gamma[i] * h[i] + beta[i];
    return out;
}

Array modulated_layer(const Array& h, const Array& w, const Array& b, const Array& beta_shift, double omega0) {
    if (beta_shift.shape() != std::vector<int>{w.shape()[0]})
        throw ShapeError("modulated_layer: beta " + Array::shape_str(beta_shift.shape()) + ", W " +
                         Array::shape_str(w.shape()));
    Array out = Array::zeros({w.shape()[0]});
    for (int i = 0; i < w.shape()[0]; i++) {
        double z = b[i] + beta_shift[i];
        for (int j = 0; j < w.shape()[1]; j++) z += w.at(i, j) * h[j];
        out[i] = std::sin(omega0 * z);
    }
    return out;
}

LayerModulations latent_to_mods(const SirenConfig& cfg, const BaseParams& params, const Modulations& phi) {
    if (phi.latent.shape() != std::vector<int>{cfg.latent_dim})
        throw ShapeError("latent_to_mods: phi " + Array::shape_str(phi.latent.shape()) + ", latent_dim " +
                         std::to_string(cfg.latent_dim));
    LayerModulations mods;
    auto apply = [&](const Array& m) {
        Array v = Array::zeros({cfg.width});
        for (int i = 0; i < cfg.width; i++) {
            double s = 0;
            for (int j = 0; j < cfg.latent_dim; j++) s += m.at(i, j) * phi.latent[j];
            v[i] = s;
        }
        return v;
    };
    for (int l = 0; l < cfg.depth; l++) {
        if (cfg.has_shift()) mods.shifts.push_back(apply(params.map_shift[l]));
        if (cfg.has_scale()) mods.scales_raw.push_back(apply(params.map_scale[l]));
    }
    return mods;
}

ThetaLeaves make_theta_leaves(const SirenConfig& cfg) {
    ThetaLeaves t;
    for (int l = 0; l < cfg.depth; l++) {
        int in = l == 0 ? cfg.in_dim : cfg.width;
        t.weights.push_back(leaf("w" + std::to_string(l), {cfg.width, in}));
        t.biases.push_back(leaf("b" + std::to_string(l), {cfg.width}));
    }
    t.w_out = leaf("w_out", {cfg.out_dim, cfg.width});
    t.b_out = leaf("b_out", {cfg.out_dim});
    for (int l = 0; l < cfg.depth && cfg.has_shift(); l++)
        t.map_shift.push_back(leaf("ms" + std::to_string(l), {cfg.width, cfg.latent_dim}));
    for (int l = 0; l < cfg.depth && cfg.has_scale(); l++)
        t.map_scale.push_back(leaf("mc" + std::to_string(l), {cfg.width, cfg.latent_dim}));

    for (int l = 0; l < cfg.depth; l++) {
        t.all.push_back(t.weights[l]);
        t.all.push_back(t.biases[l]);
    }
    t.all.push_back(t.w_out);
    t.all.push_back(t.b_out);
    for (const auto& m : t.map_shift) t.all.push_back(m);
    for (const auto& m : t.map_scale) t.all.push_back(m);
    return t;
}

Bindings bind_theta(const SirenConfig& cfg, const BaseParams& params) {
    Bindings b;
    for (int l = 0; l < cfg.depth; l++) {
        b["w" + std::to_string(l)] = params.weights[l];
        b["b" + std::to_string(l)] = params.biases[l];
    }
    b["w_out"] = params.w_out;
    b["b_out"] = params.b_out;
    for (size_t l = 0; l < params.map_shift.size(); l++) b["ms" + std::to_string(l)] = params.map_shift[l];
    for (size_t l = 0; l < params.map_scale.size(); l++) b["mc" + std::to_string(l)] = params.map_scale[l];
    return b;
}

std::vector<Array> theta_to_arrays(const BaseParams& params) {
    std::vector<Array> out;
    for (size_t l = 0; l < params.weights.size(); l++) {
        out.push_back(params.weights[l]);
        out.push_back(params.biases[l]);
    }
    out.push_back(params.w_out);
    out.push_back(params.b_out);
    for (const auto& m : params.map_shift) out.push_back(m);
    for (const auto& m : params.map_scale) out.push_back(m);
    return out;
}

BaseParams theta_from_arrays(const SirenConfig& cfg, const std::vector<Array>& arrays) {
    BaseParams p;
    size_t i = 0;
    for (int l = 0; l < cfg.depth; l++) {
        p.weights.push_back(arrays.at(i++));
        p.biases.push_back(arrays.at(i++));
    }
    p.w_out = arrays.at(i++);
    p.b_out = arrays.at(i++);
    for (int l = 0; l < cfg.depth && cfg.has_shift(); l++) p.map_shift.push_back(arrays.at(i++));
    for (int l = 0; l < cfg.depth && cfg.has_scale(); l++) p.map_scale.push_back(arrays.at(i++));
    if (i != arrays.size()) throw ValueError("theta_from_arrays: count mismatch");
    return p;
}

Expr forward_expr(const SirenConfig& cfg, const ThetaLeaves& theta, Expr coords, Expr phi) {
    cfg.validate();
    const int n = coords->shape[0];
    Expr h = std::move(coords);
    for (int l = 0; l < cfg.depth; l++) {
        Expr z = add_rowvec(matmul(h, transpose(theta.weights[l])), theta.biases[l]);
        if (cfg.has_scale()) {
            Expr gamma1 = add(matmul(theta.map_scale[l], phi), constant(Array::full({cfg.width}, 1.0)));
            z = mul(z, broadcast_rows(gamma1, n));
        }
        if (cfg.has_shift()) z = add_rowvec(z, matmul(theta.map_shift[l], phi));
        h = sine(scale(z, cfg.omega0));
    }
    return add_rowvec(matmul(h, transpose(theta.w_out)), theta.b_out);
}

Array forward(const SirenConfig& cfg, const BaseParams& params, const Modulations& phi, const Array& coords) {
    if (coords.rank() != 2 || coords.shape()[1] != cfg.in_dim)
        throw ShapeError("forward: coords " + Array::shape_str(coords.shape()) + ", in_dim " +
                         std::to_string(cfg.in_dim));
    ThetaLeaves theta = make_theta_leaves(cfg);
    Expr phi_e = cfg.latent_dim > 0 ? leaf("phi", {cfg.latent_dim}) : constant(Array::zeros({0}));
    Expr out = forward_expr(cfg, theta, leaf("coords", coords.shape()), phi_e);
    Bindings binds = bind_theta(cfg, params);
    binds["coords"] = coords;
    if (cfg.latent_dim > 0) binds["phi"] = phi.latent;
    return evaluate(out, binds);
}

}  // namespace inrcodec
