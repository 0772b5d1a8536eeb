#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "basinlab/denoiser.hpp"
#include "basinlab/schedule.hpp"
#include "basinlab/world.hpp"

namespace basinlab {

/// Architecture of the trainable backend: input is x concatenated with
/// sinusoidal time features and a learned per-condition embedding (one extra
/// row for the null condition), followed by tanh hidden layers and a linear
/// head. Small enough that all gradients are hand-derived.
struct MlpSpec {
    int d = 2;
    int hidden = 64;
    int hidden_layers = 3;
    int time_features = 8;  // even: sin/cos pairs
    int embed_dim = 2;
    int n_conditions = 0;   // real conditions; the embedding table has one extra null row
    int T = 0;              // timestep count the model is meant for

    int input_dim() const { return d + time_features + embed_dim; }
    std::size_t param_count() const;
};

class MlpDenoiser final : public Denoiser {
public:
    MlpDenoiser(MlpSpec spec, std::vector<double> params);

    /// Fresh network with scaled-uniform init, deterministic in the seed.
    static MlpDenoiser init(const MlpSpec& spec, std::uint64_t seed);

    int dim() const override { return spec_.d; }
    int num_timesteps() const override { return spec_.T; }

    Vec eval(const Vec& x, int t, int y) const override;

    /// Reverse-mode: one vector-Jacobian product through each of the
    /// conditional and unconditional passes.
    Vec residual_norm_grad(const Vec& x, int t, int y) const override;

    const MlpSpec& spec() const { return spec_; }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& parameters() { return params_; }

    void save_json(const std::string& path) const;
    static MlpDenoiser load_json(const std::string& path);

private:
    friend struct MlpGradOps;
    MlpSpec spec_;
    std::vector<double> params_;
};

struct TrainConfig {
    int steps = 8000;
    int batch = 64;
    double lr = 1e-3;
    double weight_decay = 0.01;  // decoupled; tames the network off the data manifold
    double cond_dropout = 0.1;  // fraction of pairs trained against the null condition
    int holdout = 256;          // held-out batch size for the before/after loss check
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainResult {
    MlpDenoiser model;
    double initial_holdout_loss = 0.0;
    double final_holdout_loss = 0.0;
    std::vector<double> loss_history;  // per-step training batch loss
};

/// Epsilon-matching training: x_t = forward_noise(x0, t, eps), the network
/// regresses eps. A cond_dropout fraction of pairs is trained with the null
/// embedding so the model supports classifier-free guidance. Deterministic
/// given the config seed.
TrainResult train_mlp(const GmmWorld& world, const Dataset& dataset,
                      const NoiseSchedule& schedule, const TrainConfig& config,
                      const MlpSpec& arch = {});

}  // namespace basinlab
