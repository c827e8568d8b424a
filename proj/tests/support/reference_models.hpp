#pragma once

// Straight-line reimplementations of the network math on plain vectors.
// These share no code with the library and serve as independent oracles:
// every loop is written out, nothing is vectorized.

#include <utility>
#include <vector>

#include "vmsim/lstm.hpp"
#include "vmsim/mlp.hpp"

namespace refmodels {

struct RefLstm {
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    // Gate matrices are hidden_dim x (hidden_dim + input_dim), row-major,
    // applied to the concatenation [h; x]. W_out is output_dim x hidden_dim.
    std::vector<double> W_f, W_i, W_o, W_c;
    std::vector<double> b_f, b_i, b_o, b_c;
    std::vector<double> W_out, b_out;
};

RefLstm copy_lstm(const vmsim::LstmModel& m);

struct RefLstmState {
    std::vector<double> h, c;
};

RefLstmState ref_zero_state(const RefLstm& m);
RefLstmState ref_lstm_step(const RefLstm& m, const RefLstmState& s,
                           const std::vector<double>& x);
std::vector<double> ref_lstm_output(const RefLstm& m, const RefLstmState& s);
std::vector<std::vector<double>> ref_forecast(const RefLstm& m,
                                              const std::vector<std::vector<double>>& history,
                                              int horizon);

using RefSample = std::pair<std::vector<double>, std::vector<double>>;

// Mean over time of the squared error norm, from zero state.
double ref_lstm_loss(const RefLstm& m, const std::vector<RefSample>& sequence);

struct RefMlp {
    std::vector<int> dims;
    bool relu = false;
    std::vector<std::vector<double>> weights;  // row-major per layer
    std::vector<std::vector<double>> biases;
};

RefMlp copy_mlp(const vmsim::MlpModel& m);
std::vector<double> ref_mlp_forward(const RefMlp& m, const std::vector<double>& x);

std::vector<double> to_std(const Eigen::VectorXd& v);
Eigen::VectorXd to_eigen(const std::vector<double>& v);

} // namespace refmodels
