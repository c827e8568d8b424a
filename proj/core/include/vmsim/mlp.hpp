#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vmsim/errors.hpp"
#include "vmsim/rng.hpp"

namespace vmsim {

enum class Activation { Tanh, ReLU };

// Feed-forward network: activated hidden layers, affine output layer.
// Y = W_n . f(W_{n-1} . ... f(W_1 . x + b_1) ... + b_{n-1}) + b_n
struct MlpModel {
    std::vector<Eigen::MatrixXd> layer_weights;  // W_1 .. W_n
    std::vector<Eigen::VectorXd> layer_biases;   // b_1 .. b_n
    Activation activation = Activation::Tanh;

    int layer_count() const { return static_cast<int>(layer_weights.size()); }
    int input_dim() const;
    int output_dim() const;
    // Layer sizes [d_0, d_1, ..., d_n].
    std::vector<int> dims() const;

    void validate() const;
};

// Uniform(-init_scale, +init_scale) initialization of every parameter.
MlpModel init_mlp(const std::vector<int>& dims, Activation activation,
                  std::uint64_t seed, double init_scale = 0.1);

Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::VectorXd& x);

// Gradient of 0.5 * ||y - target||^2 (scaled by `loss_scale`) w.r.t. every
// parameter, accumulated into `grad` (same shapes as `model`). Returns y.
// The scale hook lets callers build mean-squared-error batches.
struct MlpGradients {
    std::vector<Eigen::MatrixXd> layer_weights;
    std::vector<Eigen::VectorXd> layer_biases;

    static MlpGradients zeros_like(const MlpModel& model);
    void add_scaled(const MlpGradients& other, double scale);
    double squared_norm() const;
};

// Forward pass keeping per-layer pre-activations, for backprop.
struct MlpForwardCache {
    std::vector<Eigen::VectorXd> pre;   // z_l = W_l a_{l-1} + b_l
    std::vector<Eigen::VectorXd> post;  // a_l = f(z_l) (a_0 = x)
};

Eigen::VectorXd mlp_forward_cached(const MlpModel& model, const Eigen::VectorXd& x,
                                   MlpForwardCache& cache);

// Backprop dL/dy through the cached forward pass; accumulates into grads.
void mlp_backward(const MlpModel& model, const MlpForwardCache& cache,
                  const Eigen::VectorXd& dLdy, MlpGradients& grads);

// One in-place gradient-descent update: p -= lr * g. If clip_norm > 0 the
// whole gradient is rescaled so its global L2 norm is at most clip_norm.
void mlp_apply_gradients(MlpModel& model, const MlpGradients& grads, double lr,
                         double clip_norm = 0.0);

struct MlpTrainResult {
    MlpModel model;
    std::vector<double> loss_curve;  // per-epoch mean squared error
};

struct TrainConfig;  // shared with the forecaster; defined in lstm.hpp

// Full-batch gradient-descent fit of mean squared error.
MlpTrainResult train_mlp(const MlpModel& model,
                         const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& dataset,
                         const TrainConfig& cfg);

// Max relative error between analytic gradients and central finite
// differences (h = 1e-5) of the MSE loss over the given batch.
double mlp_gradient_check(const MlpModel& model,
                          const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& batch);

} // namespace vmsim
