#include "vmsim/lstm.hpp"

#include <cmath>

#include "vmsim/rng.hpp"

namespace vmsim {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd concat(const Eigen::VectorXd& h, const Eigen::VectorXd& x) {
    Eigen::VectorXd z(h.size() + x.size());
    z << h, x;
    return z;
}

// Everything the backward pass needs about one forward step.
struct StepCache {
    Eigen::VectorXd z;  // [h_{t-1}; x_t]
    Eigen::VectorXd f, i, o, g;
    Eigen::VectorXd c_prev, c, tanh_c, h;
    Eigen::VectorXd y;
};

StepCache forward_step(const LstmModel& m, const LstmState& s, const Eigen::VectorXd& x) {
    StepCache cc;
    cc.z = concat(s.h, x);
    cc.c_prev = s.c;
    cc.f = (m.W_f * cc.z + m.b_f).unaryExpr([](double v) { return sigmoid(v); });
    cc.i = (m.W_i * cc.z + m.b_i).unaryExpr([](double v) { return sigmoid(v); });
    cc.o = (m.W_o * cc.z + m.b_o).unaryExpr([](double v) { return sigmoid(v); });
    cc.g = (m.W_c * cc.z + m.b_c).unaryExpr([](double v) { return std::tanh(v); });
    cc.c = cc.f.cwiseProduct(s.c) + cc.i.cwiseProduct(cc.g);
    cc.tanh_c = cc.c.unaryExpr([](double v) { return std::tanh(v); });
    cc.h = cc.o.cwiseProduct(cc.tanh_c);
    cc.y = m.W_out * cc.h + m.b_out;
    return cc;
}

// MSE over the window and its gradient; the recurrent state carried in/out is
// treated as a constant (truncation boundary).
double window_loss_and_gradients(const LstmModel& m, const std::vector<SeriesSample>& window,
                                 LstmState& state, LstmGradients* grads) {
    const auto T = window.size();
    std::vector<StepCache> caches;
    caches.reserve(T);

    double loss = 0.0;
    LstmState s = state;
    for (const auto& [x, target] : window) {
        if (x.size() != m.input_dim) throw InputError("LSTM input dimension mismatch");
        if (target.size() != m.output_dim) throw InputError("LSTM target dimension mismatch");
        StepCache cc = forward_step(m, s, x);
        s.h = cc.h;
        s.c = cc.c;
        loss += (cc.y - target).squaredNorm();
        caches.push_back(std::move(cc));
    }
    loss /= static_cast<double>(T);
    state = s;

    if (!grads) return loss;

    const int H = m.hidden_dim;
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
    for (std::size_t t = T; t-- > 0;) {
        const StepCache& cc = caches[t];
        const Eigen::VectorXd dy = 2.0 / static_cast<double>(T) * (cc.y - window[t].second);
        grads->W_out += dy * cc.h.transpose();
        grads->b_out += dy;

        const Eigen::VectorXd dh = m.W_out.transpose() * dy + dh_next;
        const Eigen::VectorXd da_o = dh.cwiseProduct(cc.tanh_c)
                                         .cwiseProduct(cc.o)
                                         .cwiseProduct(Eigen::VectorXd::Ones(H) - cc.o);
        const Eigen::VectorXd dc =
            dh.cwiseProduct(cc.o).cwiseProduct(
                Eigen::VectorXd::Ones(H) - cc.tanh_c.cwiseProduct(cc.tanh_c)) +
            dc_next;
        const Eigen::VectorXd da_f = dc.cwiseProduct(cc.c_prev)
                                         .cwiseProduct(cc.f)
                                         .cwiseProduct(Eigen::VectorXd::Ones(H) - cc.f);
        const Eigen::VectorXd da_i = dc.cwiseProduct(cc.g).cwiseProduct(cc.i).cwiseProduct(
            Eigen::VectorXd::Ones(H) - cc.i);
        const Eigen::VectorXd da_c = dc.cwiseProduct(cc.i).cwiseProduct(
            Eigen::VectorXd::Ones(H) - cc.g.cwiseProduct(cc.g));

        grads->W_f += da_f * cc.z.transpose();
        grads->W_i += da_i * cc.z.transpose();
        grads->W_o += da_o * cc.z.transpose();
        grads->W_c += da_c * cc.z.transpose();
        grads->b_f += da_f;
        grads->b_i += da_i;
        grads->b_o += da_o;
        grads->b_c += da_c;

        const Eigen::VectorXd dz = m.W_f.transpose() * da_f + m.W_i.transpose() * da_i +
                                   m.W_o.transpose() * da_o + m.W_c.transpose() * da_c;
        dh_next = dz.head(H);
        dc_next = dc.cwiseProduct(cc.f);
    }
    return loss;
}

void apply_gradients(LstmModel& m, const LstmGradients& g, double lr, double clip_norm) {
    double scale = 1.0;
    if (clip_norm > 0.0) {
        const double norm = std::sqrt(g.squared_norm());
        if (norm > clip_norm) scale = clip_norm / norm;
    }
    m.W_f -= lr * scale * g.W_f;
    m.W_i -= lr * scale * g.W_i;
    m.W_o -= lr * scale * g.W_o;
    m.W_c -= lr * scale * g.W_c;
    m.b_f -= lr * scale * g.b_f;
    m.b_i -= lr * scale * g.b_i;
    m.b_o -= lr * scale * g.b_o;
    m.b_c -= lr * scale * g.b_c;
    m.W_out -= lr * scale * g.W_out;
    m.b_out -= lr * scale * g.b_out;
}

} // namespace

void LstmModel::validate() const {
    if (input_dim <= 0 || hidden_dim <= 0 || output_dim <= 0)
        throw InputError("LSTM dims must be positive");
    const auto gate_ok = [&](const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
        return W.rows() == hidden_dim && W.cols() == hidden_dim + input_dim &&
               b.size() == hidden_dim && W.allFinite() && b.allFinite();
    };
    if (!gate_ok(W_f, b_f) || !gate_ok(W_i, b_i) || !gate_ok(W_o, b_o) || !gate_ok(W_c, b_c))
        throw InputError("LSTM gate parameter shapes inconsistent");
    if (W_out.rows() != output_dim || W_out.cols() != hidden_dim || b_out.size() != output_dim ||
        !W_out.allFinite() || !b_out.allFinite())
        throw InputError("LSTM output layer shapes inconsistent");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (bptt_window < 1) throw ConfigError("bptt_window must be >= 1");
    if (!(init_scale > 0.0)) throw ConfigError("init_scale must be > 0");
}

LstmState zero_state(const LstmModel& model) {
    return {Eigen::VectorXd::Zero(model.hidden_dim), Eigen::VectorXd::Zero(model.hidden_dim)};
}

LstmModel init_lstm(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed,
                    double init_scale) {
    if (input_dim <= 0 || hidden_dim <= 0 || output_dim <= 0)
        throw InputError("LSTM dims must be positive");
    if (!(init_scale > 0.0)) throw InputError("init_scale must be > 0");

    Rng rng(seed);
    const auto fill_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd W(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) W(r, c) = rng.uniform(-init_scale, init_scale);
        return W;
    };
    const auto fill_vector = [&](Eigen::Index n) {
        Eigen::VectorXd b(n);
        for (Eigen::Index r = 0; r < n; ++r) b(r) = rng.uniform(-init_scale, init_scale);
        return b;
    };

    LstmModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.output_dim = output_dim;
    const Eigen::Index cols = hidden_dim + input_dim;
    m.W_f = fill_matrix(hidden_dim, cols);
    m.W_i = fill_matrix(hidden_dim, cols);
    m.W_o = fill_matrix(hidden_dim, cols);
    m.W_c = fill_matrix(hidden_dim, cols);
    m.b_f = fill_vector(hidden_dim);
    m.b_i = fill_vector(hidden_dim);
    m.b_o = fill_vector(hidden_dim);
    m.b_c = fill_vector(hidden_dim);
    m.W_out = fill_matrix(output_dim, hidden_dim);
    m.b_out = fill_vector(output_dim);
    // Open forget gates at the start so the memory cell survives early
    // training.
    m.b_f.array() += 1.0;
    return m;
}

LstmState lstm_step(const LstmModel& model, const LstmState& state, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim) throw InputError("LSTM input dimension mismatch");
    if (!x.allFinite()) throw InputError("LSTM input must be finite");
    if (state.h.size() != model.hidden_dim || state.c.size() != model.hidden_dim)
        throw InputError("LSTM state dimension mismatch");
    const StepCache cc = forward_step(model, state, x);
    return {cc.h, cc.c};
}

Eigen::VectorXd lstm_output(const LstmModel& model, const LstmState& state) {
    if (state.h.size() != model.hidden_dim) throw InputError("LSTM state dimension mismatch");
    return model.W_out * state.h + model.b_out;
}

std::vector<Eigen::VectorXd> forecast(const LstmModel& model,
                                      const std::vector<Eigen::VectorXd>& history, int horizon) {
    if (history.empty()) throw InputError("forecast needs a non-empty history");
    if (horizon < 1) throw InputError("forecast horizon must be >= 1");
    if (model.input_dim != model.output_dim)
        throw InputError("autoregressive forecast needs input_dim == output_dim");

    LstmState s = zero_state(model);
    for (const auto& x : history) s = lstm_step(model, s, x);

    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(horizon));
    Eigen::VectorXd y = lstm_output(model, s);
    out.push_back(y);
    for (int t = 1; t < horizon; ++t) {
        s = lstm_step(model, s, y);
        y = lstm_output(model, s);
        out.push_back(y);
    }
    return out;
}

LstmGradients LstmGradients::zeros_like(const LstmModel& m) {
    LstmGradients g;
    const Eigen::Index cols = m.hidden_dim + m.input_dim;
    g.W_f = Eigen::MatrixXd::Zero(m.hidden_dim, cols);
    g.W_i = Eigen::MatrixXd::Zero(m.hidden_dim, cols);
    g.W_o = Eigen::MatrixXd::Zero(m.hidden_dim, cols);
    g.W_c = Eigen::MatrixXd::Zero(m.hidden_dim, cols);
    g.b_f = Eigen::VectorXd::Zero(m.hidden_dim);
    g.b_i = Eigen::VectorXd::Zero(m.hidden_dim);
    g.b_o = Eigen::VectorXd::Zero(m.hidden_dim);
    g.b_c = Eigen::VectorXd::Zero(m.hidden_dim);
    g.W_out = Eigen::MatrixXd::Zero(m.output_dim, m.hidden_dim);
    g.b_out = Eigen::VectorXd::Zero(m.output_dim);
    return g;
}

double LstmGradients::squared_norm() const {
    return W_f.squaredNorm() + W_i.squaredNorm() + W_o.squaredNorm() + W_c.squaredNorm() +
           b_f.squaredNorm() + b_i.squaredNorm() + b_o.squaredNorm() + b_c.squaredNorm() +
           W_out.squaredNorm() + b_out.squaredNorm();
}

double lstm_loss_and_gradients(const LstmModel& model, const std::vector<SeriesSample>& sequence,
                               LstmGradients& grads) {
    if (sequence.empty()) throw InputError("LSTM loss needs a non-empty sequence");
    model.validate();
    LstmState s = zero_state(model);
    return window_loss_and_gradients(model, sequence, s, &grads);
}

double lstm_loss(const LstmModel& model, const std::vector<SeriesSample>& sequence) {
    if (sequence.empty()) throw InputError("LSTM loss needs a non-empty sequence");
    LstmState s = zero_state(model);
    return window_loss_and_gradients(model, sequence, s, nullptr);
}

LstmTrainResult train_lstm(const LstmModel& model, const std::vector<SeriesSample>& series,
                           const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (series.size() < static_cast<std::size_t>(cfg.bptt_window))
        throw InputError("series shorter than bptt_window");

    LstmTrainResult out{model, {}};
    const auto total = static_cast<double>(series.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        LstmState s = zero_state(out.model);
        double weighted_loss = 0.0;
        for (std::size_t begin = 0; begin < series.size();
             begin += static_cast<std::size_t>(cfg.bptt_window)) {
            const std::size_t len =
                std::min<std::size_t>(cfg.bptt_window, series.size() - begin);
            const std::vector<SeriesSample> window(series.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   series.begin() + static_cast<std::ptrdiff_t>(begin + len));
            LstmGradients grads = LstmGradients::zeros_like(out.model);
            weighted_loss +=
                window_loss_and_gradients(out.model, window, s, &grads) * static_cast<double>(len);
            apply_gradients(out.model, grads, cfg.learning_rate, 1.0);
        }
        out.loss_curve.push_back(weighted_loss / total);
    }
    return out;
}

double lstm_gradient_check(const LstmModel& model, const std::vector<SeriesSample>& sequence) {
    if (sequence.empty()) throw InputError("gradient check needs a non-empty sequence");

    LstmGradients analytic = LstmGradients::zeros_like(model);
    lstm_loss_and_gradients(model, sequence, analytic);

    const double h = 1e-5;
    double worst = 0.0;
    LstmModel probe = model;
    auto compare = [&](double& param, double ga) {
        const double saved = param;
        param = saved + h;
        const double up = lstm_loss(probe, sequence);
        param = saved - h;
        const double down = lstm_loss(probe, sequence);
        param = saved;
        const double gf = (up - down) / (2.0 * h);
        const double rel = std::abs(ga - gf) / std::max(1e-8, std::abs(ga) + std::abs(gf));
        worst = std::max(worst, rel);
    };
    auto sweep_matrix = [&](Eigen::MatrixXd& W, const Eigen::MatrixXd& G) {
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) compare(W(r, c), G(r, c));
    };
    auto sweep_vector = [&](Eigen::VectorXd& b, const Eigen::VectorXd& G) {
        for (Eigen::Index r = 0; r < b.size(); ++r) compare(b(r), G(r));
    };

    sweep_matrix(probe.W_f, analytic.W_f);
    sweep_matrix(probe.W_i, analytic.W_i);
    sweep_matrix(probe.W_o, analytic.W_o);
    sweep_matrix(probe.W_c, analytic.W_c);
    sweep_vector(probe.b_f, analytic.b_f);
    sweep_vector(probe.b_i, analytic.b_i);
    sweep_vector(probe.b_o, analytic.b_o);
    sweep_vector(probe.b_c, analytic.b_c);
    sweep_matrix(probe.W_out, analytic.W_out);
    sweep_vector(probe.b_out, analytic.b_out);
    return worst;
}

std::vector<SeriesSample> make_one_step_series(const std::vector<double>& values) {
    if (values.size() < 2) throw InputError("one-step series needs at least two values");
    std::vector<SeriesSample> out;
    out.reserve(values.size() - 1);
    for (std::size_t t = 0; t + 1 < values.size(); ++t) {
        Eigen::VectorXd x(1), y(1);
        x << values[t];
        y << values[t + 1];
        out.emplace_back(std::move(x), std::move(y));
    }
    return out;
}

double persistence_mse(const std::vector<double>& values) {
    if (values.size() < 2) throw InputError("persistence baseline needs at least two values");
    double total = 0.0;
    for (std::size_t t = 0; t + 1 < values.size(); ++t) {
        const double e = values[t + 1] - values[t];
        total += e * e;
    }
    return total / static_cast<double>(values.size() - 1);
}

double lstm_one_step_mse(const LstmModel& model, const std::vector<SeriesSample>& series) {
    if (series.empty()) throw InputError("one-step MSE needs a non-empty series");
    LstmState s = zero_state(model);
    double total = 0.0;
    for (const auto& [x, target] : series) {
        s = lstm_step(model, s, x);
        total += (lstm_output(model, s) - target).squaredNorm();
    }
    return total / static_cast<double>(series.size());
}

} // namespace vmsim
