#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "vmsim/errors.hpp"

namespace vmsim {

// Single-layer LSTM with an affine output head.
//
//   f_t = sigmoid(W_f . [h_{t-1}, x_t] + b_f)
//   i_t = sigmoid(W_i . [h_{t-1}, x_t] + b_i)
//   o_t = sigmoid(W_o . [h_{t-1}, x_t] + b_o)
//   c~  = tanh   (W_c . [h_{t-1}, x_t] + b_c)
//   c_t = f_t (*) c_{t-1} + i_t (*) c~
//   h_t = o_t (*) tanh(c_t)
//   y_t = W_out . h_t + b_out
//
// (*) is the elementwise product. Gate matrices have shape
// hidden_dim x (hidden_dim + input_dim), acting on the concatenation
// [h_{t-1}; x_t].
struct LstmModel {
    int input_dim = 1;
    int hidden_dim = 1;
    int output_dim = 1;
    Eigen::MatrixXd W_f, W_i, W_o, W_c;
    Eigen::VectorXd b_f, b_i, b_o, b_c;
    Eigen::MatrixXd W_out;
    Eigen::VectorXd b_out;

    void validate() const;
};

struct LstmState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

LstmState zero_state(const LstmModel& model);

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 100;
    int bptt_window = 32;
    std::uint64_t seed = 0;
    double init_scale = 0.1;

    void validate() const;
};

// Uniform(-init_scale, +init_scale) on all parameters, then the forget-gate
// bias is shifted by +1.0 so early training does not wash out the memory cell.
LstmModel init_lstm(int input_dim, int hidden_dim, int output_dim,
                    std::uint64_t seed, double init_scale = 0.1);

LstmState lstm_step(const LstmModel& model, const LstmState& state,
                    const Eigen::VectorXd& x);

Eigen::VectorXd lstm_output(const LstmModel& model, const LstmState& state);

// Consumes `history`, then feeds its own predictions back for `horizon`
// steps. Requires input_dim == output_dim.
std::vector<Eigen::VectorXd> forecast(const LstmModel& model,
                                      const std::vector<Eigen::VectorXd>& history,
                                      int horizon);

using SeriesSample = std::pair<Eigen::VectorXd, Eigen::VectorXd>;  // (input, target)

struct LstmTrainResult {
    LstmModel model;
    std::vector<double> loss_curve;  // per-epoch mean squared error
};

// Gradient descent on the mean squared one-step prediction error, with
// backpropagation through time truncated at cfg.bptt_window. The recurrent
// state carries across windows within an epoch; gradients do not.
LstmTrainResult train_lstm(const LstmModel& model, const std::vector<SeriesSample>& series,
                           const TrainConfig& cfg);

// Flat view of all parameters, used by the gradient checker and the update
// step. Order: W_f, W_i, W_o, W_c, b_f, b_i, b_o, b_c, W_out, b_out
// (matrices row-major).
struct LstmGradients {
    Eigen::MatrixXd W_f, W_i, W_o, W_c;
    Eigen::VectorXd b_f, b_i, b_o, b_c;
    Eigen::MatrixXd W_out;
    Eigen::VectorXd b_out;

    static LstmGradients zeros_like(const LstmModel& model);
    double squared_norm() const;
};

// MSE over the sample sequence and its analytic gradient via BPTT.
double lstm_loss_and_gradients(const LstmModel& model, const std::vector<SeriesSample>& sequence,
                               LstmGradients& grads);

double lstm_loss(const LstmModel& model, const std::vector<SeriesSample>& sequence);

// Max over parameters of |g_analytic - g_fd| / max(1e-8, |g_analytic| + |g_fd|),
// central differences with h = 1e-5.
double lstm_gradient_check(const LstmModel& model, const std::vector<SeriesSample>& sequence);

// (values[t], values[t+1]) pairs as 1-d samples.
std::vector<SeriesSample> make_one_step_series(const std::vector<double>& values);

// MSE of predicting next = current over consecutive pairs; the naive skill
// baseline for forecasters.
double persistence_mse(const std::vector<double>& values);

// One-step prediction MSE of the model rolled over the series from zero
// state (no autoregression).
double lstm_one_step_mse(const LstmModel& model, const std::vector<SeriesSample>& series);

} // namespace vmsim
