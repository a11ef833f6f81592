#pragma once

#include "inrcodec/signal.hpp"
#include "inrcodec/siren.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace inrcodec {

struct InnerConfig {
    int steps = 3;     // gradient-descent steps on the modulations
    double lr = 1e-2;  // plain gradient descent, no momentum

    void validate() const {
        if (steps < 0) throw ValueError("InnerConfig: steps must be >= 0");
        if (lr < 0) throw ValueError("InnerConfig: lr must be >= 0");
    }
};

struct OuterConfig {
    double lr = 3e-6;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 16;
    int epochs = 1;
    uint64_t seed = 0;
    long max_outer_steps = 0;  // 0: no cap

    void validate() const {
        if (lr < 0 || batch_size < 1 || epochs < 0) throw ValueError("OuterConfig: bad values");
    }
};

// Raised when adaptation hits a non-finite loss; carries the inner step index.
struct AdaptationError : Error {
    AdaptationError(int step_index, const std::string& what) : Error(what), step(step_index) {}
    int step;
};

struct OuterStepError : Error {
    using Error::Error;
};

struct AdamState {
    std::vector<Array> m, v;  // mirror the parameter arrays
    long step = 0;
};
AdamState make_adam_state(const std::vector<Array>& params);
void adam_update(std::vector<Array>& params, AdamState& state, const std::vector<Array>& grads, double lr,
                 double beta1, double beta2, double eps);

struct TrainState {
    SirenConfig cfg;
    BaseParams theta;
    AdamState adam;
    long outer_steps = 0;
    long skipped_steps = 0;  // non-finite updates skipped by train()

    static TrainState init(const SirenConfig& cfg, uint64_t seed);
};

// Mean over coordinates and channels of the squared reconstruction error.
double loss(const SirenConfig& cfg, const BaseParams& theta, const Modulations& phi, const Signal& patch);

// Fits modulations from zero with exactly `steps` gradient-descent steps,
// holding theta fixed.
Modulations inner_adapt(const SirenConfig& cfg, const BaseParams& theta, const Signal& patch,
                        const InnerConfig& inner);

// Gradient of the summed post-adaptation loss with respect to theta (in
// theta_to_arrays order), differentiating through the unrolled inner steps.
// Also returns the summed loss through *loss_out when given.
std::vector<Array> outer_gradient(const SirenConfig& cfg, const BaseParams& theta, const std::vector<Signal>& batch,
                                  const InnerConfig& inner, double* loss_out = nullptr);

// One meta-update: adapts each batch element in the inner loop, then applies
// one Adam step on the exact gradient of the summed post-adaptation loss,
// including the dependence of the adapted modulations on theta.
// Returns the summed post-adaptation loss.
double outer_step(TrainState& state, const std::vector<Signal>& batch, const InnerConfig& inner,
                  const OuterConfig& outer);

struct EpochLog {
    int epoch;
    long outer_step;
    double train_loss;   // mean over the epoch's outer steps
    double val_psnr_db;  // validation PSNR at 3 inner steps, full precision
};

// Full-precision reconstruction PSNR for one signal: partition, adapt each
// patch, evaluate, reassemble, clamp to [0,1].
double eval_signal_psnr(const SirenConfig& cfg, const BaseParams& theta, const Signal& signal,
                        const std::vector<int>& patch_shape, const InnerConfig& inner);

struct TrainOptions {
    std::vector<int> patch_shape;
    std::function<void(const EpochLog&)> on_epoch;  // optional
};

// Meta-learns theta over shuffled mini-batches of random patches. Skips
// non-finite updates instead of aborting. Deterministic for a fixed seed.
TrainState train(const std::vector<Signal>& train_set, const std::vector<Signal>& val_set, const SirenConfig& cfg,
                 const InnerConfig& inner, const OuterConfig& outer, const TrainOptions& options);

// Per-datum baseline: fits a whole unmodulated network to one signal with
// Adam on MSE. Optionally stops early once the loss drops below stop_mse.
BaseParams fit_coin(const Signal& signal, const SirenConfig& cfg, int steps, double lr, uint64_t seed,
                    std::optional<double> stop_mse = std::nullopt);

constexpr int kValidationInnerSteps = 3;

}  // namespace inrcodec
