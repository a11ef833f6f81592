#include "inrcodec/meta.hpp"
#include "inrcodec/metrics.hpp"
#include "testutil.hpp"

#include <doctest.h>

#include <cmath>

using namespace inrcodec;
using namespace testutil;

namespace {

SirenConfig small_cfg(int latent = 3, double omega0 = 1.0) {
    SirenConfig cfg;
    cfg.in_dim = 2;
    cfg.out_dim = 1;
    cfg.depth = 2;
    cfg.width = 4;
    cfg.latent_dim = latent;
    cfg.omega0 = omega0;
    cfg.modulation = latent == 0 ? ModulationKind::kNone : ModulationKind::kShift;
    return cfg;
}

Signal constant_patch(int h, int w, double value) {
    Signal s;
    s.modality = Modality::kImage;
    s.feature_shape = {h, w};
    s.channels = 1;
    s.features.assign((size_t)h * w, value);
    return s;
}

bool theta_equal(const BaseParams& a, const BaseParams& b) {
    auto va = theta_to_arrays(a), vb = theta_to_arrays(b);
    if (va.size() != vb.size()) return false;
    for (size_t i = 0; i < va.size(); i++)
        if (!arrays_equal(va[i], vb[i])) return false;
    return true;
}

// The composite objective theta -> sum_j L(theta, phi_j(theta), d_j),
// computed entirely through the numeric path (no graph reuse).
double composite_loss(const SirenConfig& cfg, const BaseParams& theta, const std::vector<Signal>& batch,
                      const InnerConfig& inner) {
    double total = 0;
    for (const Signal& d : batch) total += loss(cfg, theta, inner_adapt(cfg, theta, d, inner), d);
    return total;
}

}  // namespace

TEST_CASE("loss: pinned values and scalar-loop oracle") {
    SirenConfig cfg = small_cfg();
    Rng rng(1);
    BaseParams theta = init_base_params(cfg, rng);

    // constant-zero network against constant 0.5 targets: loss = 0.25
    BaseParams zero = theta;
    for (auto& w : zero.weights) w = Array::zeros(w.shape());
    for (auto& b : zero.biases) b = Array::zeros(b.shape());
    zero.w_out = Array::zeros(zero.w_out.shape());
    zero.b_out = Array::zeros(zero.b_out.shape());
    Signal half = constant_patch(3, 3, 0.5);
    CHECK(loss(cfg, zero, zero_modulations(cfg), half) == doctest::Approx(0.25).epsilon(1e-15));

    // predictions equal to targets: loss = 0 (constant network via output bias)
    BaseParams fit = zero;
    fit.b_out = Array({1}, {0.5});
    CHECK(loss(cfg, fit, zero_modulations(cfg), half) == 0.0);

    // random case against a scalar loop
    Rng trng(7);
    Signal patch = make_texture(4, 4, trng);
    Modulations phi{random_array({cfg.latent_dim}, rng, -0.5, 0.5)};
    Array pred = forward(cfg, theta, phi, signal_coords(patch));
    double want = 0;
    for (long i = 0; i < pred.size(); i++) {
        double d = pred[i] - patch.features[(size_t)i];
        want += d * d;
    }
    want /= (double)pred.size();
    CHECK(loss(cfg, theta, phi, patch) == doctest::Approx(want).epsilon(1e-13));

    Signal empty;
    empty.feature_shape = {1, 0};
    empty.features.clear();
    CHECK_THROWS_AS(loss(cfg, theta, zero_modulations(cfg), empty), ValueError);
}

TEST_CASE("inner_adapt: zero step size, stationary start, loss decrease") {
    SirenConfig cfg = small_cfg();
    Rng rng(2);
    BaseParams theta = init_base_params(cfg, rng);
    Rng trng(8);
    Signal patch = make_texture(4, 4, trng);

    Modulations frozen = inner_adapt(cfg, theta, patch, InnerConfig{5, 0.0});
    for (long i = 0; i < frozen.latent.size(); i++) CHECK(frozen.latent[i] == 0.0);

    // targets equal to the base network's own output: gradient is zero at 0
    Signal fixpoint = patch;
    Array base_out = forward(cfg, theta, zero_modulations(cfg), signal_coords(patch));
    for (long i = 0; i < base_out.size(); i++) fixpoint.features[(size_t)i] = base_out[i];
    Modulations stay = inner_adapt(cfg, theta, fixpoint, InnerConfig{3, 1e-2});
    for (long i = 0; i < stay.latent.size(); i++) CHECK(stay.latent[i] == 0.0);

    // small steps reduce the loss
    InnerConfig inner{3, 1e-2};
    Modulations adapted = inner_adapt(cfg, theta, patch, inner);
    CHECK(loss(cfg, theta, adapted, patch) <= loss(cfg, theta, zero_modulations(cfg), patch));

    // theta is untouched
    BaseParams before = theta;
    (void)inner_adapt(cfg, theta, patch, inner);
    CHECK(theta_equal(before, theta));
}

TEST_CASE("inner_adapt: non-finite loss reports the step index") {
    SirenConfig cfg = small_cfg();
    Rng rng(3);
    BaseParams theta = init_base_params(cfg, rng);
    theta.w_out[0] = std::numeric_limits<double>::infinity();
    Signal patch = constant_patch(2, 2, 0.5);
    try {
        inner_adapt(cfg, theta, patch, InnerConfig{3, 1e-2});
        FAIL("expected AdaptationError");
    } catch (const AdaptationError& e) {
        CHECK(e.step == 0);
    }
}

TEST_CASE("outer_gradient: finite differences of the composite loss, S in {1,2,3}") {
    Rng rng(4);
    for (int steps = 1; steps <= 3; steps++) {
        Rng sub = rng.split(steps);
        SirenConfig cfg = small_cfg(3, sub.uniform(0.5, 2.0));
        BaseParams theta = init_base_params(cfg, sub);
        Rng trng(80 + steps);
        std::vector<Signal> batch{make_texture(3, 3, trng)};
        InnerConfig inner{steps, 1e-2};

        auto grads = outer_gradient(cfg, theta, batch, inner);
        ThetaLeaves leaves = make_theta_leaves(cfg);
        auto arrays = theta_to_arrays(theta);
        for (size_t k = 0; k < arrays.size(); k++) {
            Array fd = Array::zeros(arrays[k].shape());
            const double h = 1e-5;
            for (long i = 0; i < fd.size(); i++) {
                auto hi = arrays, lo = arrays;
                hi[k][i] += h;
                lo[k][i] -= h;
                fd[i] = (composite_loss(cfg, theta_from_arrays(cfg, hi), batch, inner) -
                         composite_loss(cfg, theta_from_arrays(cfg, lo), batch, inner)) /
                        (2 * h);
            }
            INFO("steps ", steps, " leaf ", leaves.all[k]->name);
            CHECK(max_rel_err(grads[k], fd) < 1e-5);
        }
    }
}

TEST_CASE("outer_gradient: duplicated batch element doubles the gradient exactly") {
    SirenConfig cfg = small_cfg();
    Rng rng(5);
    BaseParams theta = init_base_params(cfg, rng);
    Rng trng(9);
    Signal patch = make_texture(4, 4, trng);
    auto g1 = outer_gradient(cfg, theta, {patch}, InnerConfig{2, 1e-2});
    auto g2 = outer_gradient(cfg, theta, {patch, patch}, InnerConfig{2, 1e-2});
    for (size_t k = 0; k < g1.size(); k++)
        for (long i = 0; i < g1[k].size(); i++) CHECK(g2[k][i] == 2.0 * g1[k][i]);
}

TEST_CASE("outer_step: zero learning rate leaves theta, updates moments") {
    SirenConfig cfg = small_cfg();
    TrainState state = TrainState::init(cfg, 42);
    BaseParams before = state.theta;
    Rng trng(10);
    std::vector<Signal> batch{make_texture(4, 4, trng)};
    OuterConfig outer;
    outer.lr = 0.0;
    double l = outer_step(state, batch, InnerConfig{2, 1e-2}, outer);
    CHECK(l > 0);
    CHECK(theta_equal(before, state.theta));
    double moment_mag = 0;
    for (const Array& m : state.adam.m)
        for (long i = 0; i < m.size(); i++) moment_mag += std::fabs(m[i]);
    CHECK(moment_mag > 0);
    CHECK(state.adam.step == 1);
}

TEST_CASE("outer_step: non-finite gradient leaves the state unchanged") {
    SirenConfig cfg = small_cfg();
    TrainState state = TrainState::init(cfg, 42);
    state.theta.w_out[0] = std::numeric_limits<double>::infinity();
    TrainState before = state;
    Rng trng(11);
    std::vector<Signal> batch{make_texture(4, 4, trng)};
    CHECK_THROWS_AS(outer_step(state, batch, InnerConfig{1, 1e-2}, OuterConfig{}), OuterStepError);
    CHECK(theta_equal(before.theta, state.theta));
    CHECK(state.outer_steps == 0);
    CHECK(state.adam.step == 0);
}

TEST_CASE("train: determinism, zero epochs, skipping poisoned batches") {
    SirenConfig cfg = small_cfg();
    std::vector<Signal> data = make_textures(6, 6, 6, 1234);
    std::vector<Signal> val = make_textures(2, 6, 6, 99);
    InnerConfig inner{2, 1e-2};
    OuterConfig outer;
    outer.lr = 1e-4;
    outer.batch_size = 3;
    outer.epochs = 2;
    outer.seed = 7;
    TrainOptions options;
    options.patch_shape = {4, 4};

    TrainState a = train(data, val, cfg, inner, outer, options);
    TrainState b = train(data, val, cfg, inner, outer, options);
    CHECK(theta_equal(a.theta, b.theta));
    CHECK(a.outer_steps == 4);

    OuterConfig zero_epochs = outer;
    zero_epochs.epochs = 0;
    TrainState untouched = train(data, val, cfg, inner, zero_epochs, options);
    CHECK(theta_equal(untouched.theta, TrainState::init(cfg, outer.seed).theta));

    // a NaN signal poisons its batch; training skips it and continues
    std::vector<Signal> poisoned = data;
    for (double& f : poisoned[0].features) f = std::numeric_limits<double>::quiet_NaN();
    TrainState c = train(poisoned, val, cfg, inner, outer, options);
    CHECK(c.skipped_steps > 0);
    CHECK(c.outer_steps + c.skipped_steps == 4);

    // step cap
    OuterConfig capped = outer;
    capped.max_outer_steps = 3;
    TrainState d = train(data, val, cfg, inner, capped, options);
    CHECK(d.outer_steps == 3);
}

TEST_CASE("train: epoch logs carry validation psnr") {
    SirenConfig cfg = small_cfg();
    std::vector<Signal> data = make_textures(4, 6, 6, 55);
    std::vector<Signal> val = make_textures(2, 6, 6, 56);
    OuterConfig outer;
    outer.lr = 1e-4;
    outer.batch_size = 2;
    outer.epochs = 2;
    outer.seed = 3;
    TrainOptions options;
    options.patch_shape = {6, 6};
    std::vector<EpochLog> logs;
    options.on_epoch = [&](const EpochLog& log) { logs.push_back(log); };
    (void)train(data, val, cfg, InnerConfig{2, 1e-2}, outer, options);
    REQUIRE(logs.size() == 2);
    CHECK(logs[0].epoch == 0);
    CHECK(logs[1].outer_step == 4);
    CHECK(logs[0].val_psnr_db > 0);
    CHECK(std::isfinite(logs[1].train_loss));
}

TEST_CASE("fit_coin: zero steps, convergence on a constant image") {
    SirenConfig cfg = small_cfg(0);
    Rng rng(12);
    Signal target = constant_patch(4, 4, 0.3);

    BaseParams init = fit_coin(target, cfg, 0, 1e-3, 77);
    Rng ref_rng(77);
    CHECK(theta_equal(init, init_base_params(cfg, ref_rng)));

    BaseParams fitted = fit_coin(target, cfg, 500, 1e-3, 77);
    CHECK(loss(cfg, fitted, zero_modulations(cfg), target) <
          loss(cfg, init, zero_modulations(cfg), target));

    // early stop hits the requested loss level
    BaseParams stopped = fit_coin(target, cfg, 5000, 1e-3, 77, 1e-4);
    CHECK(loss(cfg, stopped, zero_modulations(cfg), target) <= 1e-4);

    SirenConfig bad = small_cfg(3);
    CHECK_THROWS_AS(fit_coin(target, bad, 1, 1e-3, 0), ValueError);
}
