#include "inrcodec/meta.hpp"

#include "inrcodec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace inrcodec {

AdamState make_adam_state(const std::vector<Array>& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.push_back(Array::zeros(p.shape()));
        s.v.push_back(Array::zeros(p.shape()));
    }
    return s;
}

void adam_update(std::vector<Array>& params, AdamState& state, const std::vector<Array>& grads, double lr,
                 double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ValueError("adam_update: parameter/gradient count mismatch");
    state.step++;
    const double c1 = 1.0 - std::pow(beta1, (double)state.step);
    const double c2 = 1.0 - std::pow(beta2, (double)state.step);
    for (size_t k = 0; k < params.size(); k++) {
        Array& p = params[k];
        Array& m = state.m[k];
        Array& v = state.v[k];
        const Array& g = grads[k];
        for (long i = 0; i < p.size(); i++) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
}

TrainState TrainState::init(const SirenConfig& cfg, uint64_t seed) {
    TrainState s;
    s.cfg = cfg;
    Rng rng(seed);
    s.theta = init_base_params(cfg, rng);
    s.adam = make_adam_state(theta_to_arrays(s.theta));
    return s;
}

namespace {

struct PatchConsts {
    Expr coords;
    Expr target;
};

PatchConsts make_patch_consts(const SirenConfig& cfg, const Signal& patch) {
    if (patch.coord_count() == 0) throw ValueError("loss: empty patch");
    if (patch.channels != cfg.out_dim)
        throw ShapeError("loss: patch channels " + std::to_string(patch.channels) + " vs out_dim " +
                         std::to_string(cfg.out_dim));
    Array coords = signal_coords(patch);
    if (coords.shape()[1] != cfg.in_dim)
        throw ShapeError("loss: coordinate dim " + std::to_string(coords.shape()[1]) + " vs in_dim " +
                         std::to_string(cfg.in_dim));
    return {constant(std::move(coords)), constant(feature_matrix(patch))};
}

Expr patch_loss_expr(const SirenConfig& cfg, const ThetaLeaves& theta, const PatchConsts& pc, const Expr& phi) {
    Expr pred = forward_expr(cfg, theta, pc.coords, phi);
    return mean_squares(sub(pred, pc.target));
}

Expr null_phi() { return constant(Array::zeros({0})); }

// Pairwise reduction in batch order: deterministic, and summing identical
// terms stays exact for power-of-two batches.
Expr tree_sum(std::vector<Expr> terms) {
    while (terms.size() > 1) {
        std::vector<Expr> next;
        for (size_t i = 0; i + 1 < terms.size(); i += 2) next.push_back(add(terms[i], terms[i + 1]));
        if (terms.size() % 2) next.push_back(terms.back());
        terms = std::move(next);
    }
    return terms.at(0);
}

}  // namespace

double loss(const SirenConfig& cfg, const BaseParams& theta, const Modulations& phi, const Signal& patch) {
    ThetaLeaves leaves = make_theta_leaves(cfg);
    PatchConsts pc = make_patch_consts(cfg, patch);
    Expr phi_e = cfg.latent_dim > 0 ? constant(phi.latent) : null_phi();
    return evaluate(patch_loss_expr(cfg, leaves, pc, phi_e), bind_theta(cfg, theta))[0];
}

Modulations inner_adapt(const SirenConfig& cfg, const BaseParams& theta, const Signal& patch,
                        const InnerConfig& inner) {
    inner.validate();
    Modulations phi = zero_modulations(cfg);
    if (cfg.latent_dim == 0 || inner.steps == 0) return phi;

    ThetaLeaves leaves = make_theta_leaves(cfg);
    PatchConsts pc = make_patch_consts(cfg, patch);
    Expr phi_leaf = leaf("phi", {cfg.latent_dim});
    Expr loss_e = patch_loss_expr(cfg, leaves, pc, phi_leaf);
    Expr grad_e = build_gradient(loss_e, phi_leaf);
    Bindings binds = bind_theta(cfg, theta);

    const Expr roots[2] = {loss_e, grad_e};
    for (int s = 0; s < inner.steps; s++) {
        binds["phi"] = phi.latent;
        auto vals = evaluate_many(roots, binds);
        if (!std::isfinite(vals[0][0]) || !vals[1].all_finite())
            throw AdaptationError(s, "non-finite loss at inner step " + std::to_string(s));
        for (long i = 0; i < phi.latent.size(); i++) phi.latent[i] -= inner.lr * vals[1][i];
    }
    return phi;
}

std::vector<Array> outer_gradient(const SirenConfig& cfg, const BaseParams& theta_values,
                                  const std::vector<Signal>& batch, const InnerConfig& inner, double* loss_out) {
    inner.validate();
    if (batch.empty()) throw ValueError("outer_step: empty batch");

    ThetaLeaves theta = make_theta_leaves(cfg);
    Expr total;
    for (const Signal& patch : batch) {
        PatchConsts pc = make_patch_consts(cfg, patch);
        Expr phi = cfg.latent_dim > 0 ? constant(Array::zeros({cfg.latent_dim})) : null_phi();
        if (cfg.latent_dim > 0) {
            // Unrolled inner loop: each adapted phi is an expression in theta,
            // so the outer gradient differentiates through the inner steps.
            for (int s = 0; s < inner.steps; s++) {
                Expr step_loss = patch_loss_expr(cfg, theta, pc, phi);
                Expr g = build_gradient(step_loss, phi);
                phi = sub(phi, scale(g, inner.lr));
            }
        }
        Expr element_loss = patch_loss_expr(cfg, theta, pc, phi);
        total = total ? add(total, element_loss) : element_loss;
    }

    auto grad_exprs = build_gradients(total, theta.all);
    std::vector<Expr> roots;
    roots.push_back(total);
    roots.insert(roots.end(), grad_exprs.begin(), grad_exprs.end());
    auto vals = evaluate_many(roots, bind_theta(cfg, theta_values));
    if (loss_out) *loss_out = vals[0][0];
    return std::vector<Array>(vals.begin() + 1, vals.end());
}

double outer_step(TrainState& state, const std::vector<Signal>& batch, const InnerConfig& inner,
                  const OuterConfig& outer) {
    outer.validate();
    double batch_loss = 0;
    auto grads = outer_gradient(state.cfg, state.theta, batch, inner, &batch_loss);

    if (!std::isfinite(batch_loss)) throw OuterStepError("non-finite batch loss");
    for (const auto& g : grads)
        if (!g.all_finite()) throw OuterStepError("non-finite outer gradient");

    auto params = theta_to_arrays(state.theta);
    adam_update(params, state.adam, grads, outer.lr, outer.adam_beta1, outer.adam_beta2, outer.adam_eps);
    state.theta = theta_from_arrays(state.cfg, params);
    state.outer_steps++;
    return batch_loss;
}

double eval_signal_psnr(const SirenConfig& cfg, const BaseParams& theta, const Signal& signal,
                        const std::vector<int>& patch_shape, const InnerConfig& inner) {
    auto [patches, layout] = partition(signal, patch_shape);
    std::vector<Signal> recon;
    recon.reserve(patches.size());
    for (const Signal& p : patches) {
        Modulations phi = inner_adapt(cfg, theta, p, inner);
        Array pred = forward(cfg, theta, phi, signal_coords(p));
        Signal r = p;
        for (long i = 0; i < pred.size(); i++) r.features[i] = std::clamp(pred[i], 0.0, 1.0);
        recon.push_back(std::move(r));
    }
    Signal rebuilt = reassemble(recon, layout);
    return psnr_db(mean_squared_error(rebuilt.features, signal.features));
}

TrainState train(const std::vector<Signal>& train_set, const std::vector<Signal>& val_set, const SirenConfig& cfg,
                 const InnerConfig& inner, const OuterConfig& outer, const TrainOptions& options) {
    inner.validate();
    outer.validate();
    if (train_set.empty()) throw ValueError("train: empty dataset");
    if (options.patch_shape.empty()) throw ValueError("train: patch shape required");

    TrainState state = TrainState::init(cfg, outer.seed);
    Rng rng(outer.seed);
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto step_cap_hit = [&] { return outer.max_outer_steps > 0 && state.outer_steps >= outer.max_outer_steps; };

    for (int epoch = 0; epoch < outer.epochs && !step_cap_hit(); epoch++) {
        // Fisher-Yates with the run's own generator so shuffles are portable.
        for (size_t i = order.size(); i > 1; i--) std::swap(order[i - 1], order[rng.uniform_int(i)]);

        double loss_sum = 0;
        long loss_count = 0;
        for (size_t start = 0; start < order.size() && !step_cap_hit(); start += outer.batch_size) {
            std::vector<Signal> batch;
            for (size_t k = start; k < std::min(order.size(), start + outer.batch_size); k++)
                batch.push_back(random_patch(train_set[order[k]], options.patch_shape, rng));
            try {
                loss_sum += outer_step(state, batch, inner, outer);
                loss_count++;
            } catch (const OuterStepError&) {
                // Training typically recovers from loss spikes; skip the update.
                state.skipped_steps++;
            }
        }

        if (options.on_epoch) {
            EpochLog log;
            log.epoch = epoch;
            log.outer_step = state.outer_steps;
            log.train_loss = loss_count > 0 ? loss_sum / (double)loss_count : 0.0;
            InnerConfig val_inner = inner;
            val_inner.steps = kValidationInnerSteps;
            double psnr_sum = 0;
            for (const Signal& v : val_set)
                psnr_sum += eval_signal_psnr(cfg, state.theta, v, options.patch_shape, val_inner);
            log.val_psnr_db = val_set.empty() ? 0.0 : psnr_sum / (double)val_set.size();
            options.on_epoch(log);
        }
    }
    return state;
}

BaseParams fit_coin(const Signal& signal, const SirenConfig& cfg, int steps, double lr, uint64_t seed,
                    std::optional<double> stop_mse) {
    cfg.validate();
    if (cfg.latent_dim != 0 || cfg.modulation != ModulationKind::kNone)
        throw ValueError("fit_coin: config must have no modulations");
    Rng rng(seed);
    BaseParams theta = init_base_params(cfg, rng);
    if (steps == 0) return theta;

    ThetaLeaves leaves = make_theta_leaves(cfg);
    PatchConsts pc = make_patch_consts(cfg, signal);
    Expr loss_e = patch_loss_expr(cfg, leaves, pc, null_phi());
    auto grad_exprs = build_gradients(loss_e, leaves.all);
    std::vector<Expr> roots;
    roots.push_back(loss_e);
    roots.insert(roots.end(), grad_exprs.begin(), grad_exprs.end());

    auto params = theta_to_arrays(theta);
    AdamState adam = make_adam_state(params);
    for (int s = 0; s < steps; s++) {
        auto vals = evaluate_many(roots, bind_theta(cfg, theta_from_arrays(cfg, params)));
        if (!std::isfinite(vals[0][0])) throw ValueError("fit_coin: non-finite loss at step " + std::to_string(s));
        if (stop_mse && vals[0][0] <= *stop_mse) break;
        std::vector<Array> grads(vals.begin() + 1, vals.end());
        adam_update(params, adam, grads, lr, 0.9, 0.999, 1e-8);
    }
    return theta_from_arrays(cfg, params);
}

}  // namespace inrcodec
