#include "inrcodec/siren.hpp"
#include "testutil.hpp"

#include <doctest.h>

#include <cmath>

using namespace inrcodec;
using namespace testutil;

namespace {

SirenConfig tiny_cfg(ModulationKind kind = ModulationKind::kShift) {
    SirenConfig cfg;
    cfg.in_dim = 2;
    cfg.out_dim = 1;
    cfg.depth = 2;
    cfg.width = 3;
    cfg.latent_dim = kind == ModulationKind::kNone ? 0 : 4;
    cfg.omega0 = 1.5;
    cfg.modulation = kind;
    return cfg;
}

// Independent scalar-loop reference for the shift-modulated network.
std::vector<double> forward_oracle(const SirenConfig& cfg, const BaseParams& p, const std::vector<double>& shifts_flat,
                                   const Array& coords) {
    std::vector<double> out;
    for (int r = 0; r < coords.shape()[0]; r++) {
        std::vector<double> h(coords.data() + (long)r * cfg.in_dim, coords.data() + (long)(r + 1) * cfg.in_dim);
        for (int l = 0; l < cfg.depth; l++) {
            std::vector<double> next(cfg.width);
            for (int i = 0; i < cfg.width; i++) {
                double z = p.biases[l][i] + shifts_flat[(size_t)l * cfg.width + i];
                for (size_t j = 0; j < h.size(); j++) z += p.weights[l].at(i, (int)j) * h[j];
                next[i] = std::sin(cfg.omega0 * z);
            }
            h = next;
        }
        for (int o = 0; o < cfg.out_dim; o++) {
            double z = p.b_out[o];
            for (int j = 0; j < cfg.width; j++) z += p.w_out.at(o, j) * h[j];
            out.push_back(z);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("siren_layer: pinned values and oracle") {
    Array zero_w = Array::zeros({2, 2});
    Array zero_b = Array::zeros({2});
    Array h({2}, {0.3, -0.8});
    Array out = siren_layer(h, zero_w, zero_b, 50.0);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);

    Array eye({1, 1}, {1.0});
    Array r = siren_layer(Array({1}, {M_PI / 2}), eye, Array::zeros({1}), 1.0);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(11);
    Array w = random_array({4, 3}, rng), b = random_array({4}, rng), hh = random_array({3}, rng);
    Array got = siren_layer(hh, w, b, 7.0);
    for (int i = 0; i < 4; i++) {
        double z = b[i];
        for (int j = 0; j < 3; j++) z += w.at(i, j) * hh[j];
        CHECK(got[i] == doctest::Approx(std::sin(7.0 * z)).epsilon(1e-14));
        CHECK(std::fabs(got[i]) <= 1.0);  // sine layer output stays in [-1,1]
    }

    CHECK_THROWS_AS(siren_layer(hh, w, Array::zeros({3}), 1.0), ShapeError);
}

TEST_CASE("film: pinned values") {
    Array h({2}, {1, 2});
    Array ones = Array::full({2}, 1.0), zeros = Array::zeros({2});
    CHECK(arrays_equal(film(h, ones, zeros), h));

    Array beta({2}, {0.4, -0.2});
    CHECK(arrays_equal(film(h, zeros, beta), beta));

    Array out = film(h, Array({2}, {2, 3}), Array({2}, {1, 1}));
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 7.0);

    CHECK_THROWS_AS(film(h, ones, Array::zeros({3})), ShapeError);
}

TEST_CASE("modulated_layer: zero shift equals siren_layer") {
    Rng rng(22);
    Array w = random_array({4, 4}, rng), b = random_array({4}, rng), h = random_array({4}, rng);
    Array plain = siren_layer(h, w, b, 30.0);
    Array modded = modulated_layer(h, w, b, Array::zeros({4}), 30.0);
    CHECK(arrays_equal(plain, modded));

    Array one =
        modulated_layer(Array({1}, {0.0}), Array::zeros({1, 1}), Array::zeros({1}), Array({1}, {M_PI / 2}), 1.0);
    CHECK(one[0] == doctest::Approx(1.0).epsilon(1e-15));

    Array beta = random_array({4}, rng);
    Array got = modulated_layer(h, w, b, beta, 30.0);
    for (int i = 0; i < 4; i++) {
        double z = b[i] + beta[i];
        for (int j = 0; j < 4; j++) z += w.at(i, j) * h[j];
        CHECK(got[i] == doctest::Approx(std::sin(30.0 * z)).epsilon(1e-12));
    }
}

TEST_CASE("latent_to_mods: zero latent, basis vectors, random oracle") {
    SirenConfig cfg = tiny_cfg();
    Rng rng(33);
    BaseParams p = init_base_params(cfg, rng);

    LayerModulations zero = latent_to_mods(cfg, p, zero_modulations(cfg));
    for (const Array& s : zero.shifts)
        for (long i = 0; i < s.size(); i++) CHECK(s[i] == 0.0);

    // identity map: latent_dim = depth*width, each basis vector hits one slot
    SirenConfig icfg = cfg;
    icfg.latent_dim = cfg.depth * cfg.width;
    BaseParams ip = init_base_params(icfg, rng);
    for (int l = 0; l < icfg.depth; l++) {
        ip.map_shift[l] = Array::zeros({icfg.width, icfg.latent_dim});
        for (int i = 0; i < icfg.width; i++) ip.map_shift[l].at(i, l * icfg.width + i) = 1.0;
    }
    int k = 4;  // position (layer 1, unit 1) for width 3
    Modulations ek = zero_modulations(icfg);
    ek.latent[k] = 1.0;
    LayerModulations basis = latent_to_mods(icfg, ip, ek);
    for (int l = 0; l < icfg.depth; l++)
        for (int i = 0; i < icfg.width; i++)
            CHECK(basis.shifts[l][i] == (l * icfg.width + i == k ? 1.0 : 0.0));

    // random map against a scalar loop
    Modulations phi{random_array({cfg.latent_dim}, rng)};
    LayerModulations got = latent_to_mods(cfg, p, phi);
    for (int l = 0; l < cfg.depth; l++)
        for (int i = 0; i < cfg.width; i++) {
            double want = 0;
            for (int j = 0; j < cfg.latent_dim; j++) want += p.map_shift[l].at(i, j) * phi.latent[j];
            CHECK(got.shifts[l][i] == doctest::Approx(want).epsilon(1e-14));
        }
}

TEST_CASE("forward: constant network, zero-modulation identity, scalar-loop oracle") {
    SirenConfig cfg = tiny_cfg();
    Rng rng(44);
    BaseParams p = init_base_params(cfg, rng);

    // all-zero parameters except the output bias give a constant function
    BaseParams zero = p;
    for (auto& w : zero.weights) w = Array::zeros(w.shape());
    for (auto& b : zero.biases) b = Array::zeros(b.shape());
    zero.w_out = Array::zeros(zero.w_out.shape());
    zero.b_out = Array({1}, {0.73});
    Array coords = random_array({5, 2}, rng, -1, 1);
    Array out = forward(cfg, zero, zero_modulations(cfg), coords);
    for (long i = 0; i < out.size(); i++) CHECK(out[i] == 0.73);

    // shift modulation with zero latent is exactly the base network
    SirenConfig base_cfg = tiny_cfg(ModulationKind::kNone);
    BaseParams base = p;
    base.map_shift.clear();
    Array a = forward(cfg, p, zero_modulations(cfg), coords);
    Array b = forward(base_cfg, base, zero_modulations(base_cfg), coords);
    CHECK(arrays_equal(a, b));

    // random modulated network against the scalar-loop reference
    Modulations phi{random_array({cfg.latent_dim}, rng)};
    LayerModulations mods = latent_to_mods(cfg, p, phi);
    std::vector<double> shifts_flat;
    for (const Array& s : mods.shifts)
        for (long i = 0; i < s.size(); i++) shifts_flat.push_back(s[i]);
    Array got = forward(cfg, p, phi, coords);
    std::vector<double> want = forward_oracle(cfg, p, shifts_flat, coords);
    for (long i = 0; i < got.size(); i++) CHECK(got[i] == doctest::Approx(want[(size_t)i]).epsilon(1e-12));
}

TEST_CASE("forward: scale modes are neutral at zero latent") {
    Rng rng(55);
    Array coords = random_array({4, 2}, rng, -1, 1);
    for (ModulationKind kind : {ModulationKind::kScale, ModulationKind::kScaleAndShift}) {
        SirenConfig cfg = tiny_cfg(kind);
        BaseParams p = init_base_params(cfg, rng);
        SirenConfig base_cfg = tiny_cfg(ModulationKind::kNone);
        BaseParams base = p;
        base.map_shift.clear();
        base.map_scale.clear();
        Array a = forward(cfg, p, zero_modulations(cfg), coords);
        Array b = forward(base_cfg, base, zero_modulations(base_cfg), coords);
        for (long i = 0; i < a.size(); i++) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
    }
}

TEST_CASE("forward: differentiable end to end") {
    SirenConfig cfg = tiny_cfg();
    Rng rng(66);
    BaseParams p = init_base_params(cfg, rng);
    Array coords = random_array({4, 2}, rng, -1, 1);

    ThetaLeaves theta = make_theta_leaves(cfg);
    Expr phi = leaf("phi", {cfg.latent_dim});
    Expr root = mean_squares(forward_expr(cfg, theta, constant(coords), phi));
    Bindings binds = bind_theta(cfg, p);
    binds["phi"] = random_array({cfg.latent_dim}, rng, -0.5, 0.5);

    for (const char* wrt : {"phi", "w0", "b1", "ms0", "w_out", "b_out"}) {
        Array got = gradient(root, binds, wrt);
        Array want = fd_gradient(root, binds, wrt, 1e-6);
        INFO("wrt ", wrt);
        CHECK(max_rel_err(got, want) < 1e-6);
    }
}

TEST_CASE("config validation") {
    SirenConfig cfg = tiny_cfg();
    cfg.latent_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    cfg = tiny_cfg(ModulationKind::kNone);
    CHECK_NOTHROW(cfg.validate());
    cfg.omega0 = 0;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    CHECK(tiny_cfg().modulation_rows() == 6);
    CHECK(tiny_cfg(ModulationKind::kScaleAndShift).modulation_rows() == 12);
}
