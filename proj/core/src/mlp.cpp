#include "vmsim/mlp.hpp"

#include <cmath>

#include "vmsim/lstm.hpp"

namespace vmsim {

namespace {

double activate(Activation a, double z) {
    return a == Activation::Tanh ? std::tanh(z) : std::max(0.0, z);
}

double activate_grad(Activation a, double z) {
    if (a == Activation::Tanh) {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return z > 0.0 ? 1.0 : 0.0;
}

using Batch = std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>;

// Mean over the batch of the squared error summed over output components.
double batch_loss(const MlpModel& model, const Batch& batch) {
    double total = 0.0;
    for (const auto& [x, t] : batch) total += (mlp_forward(model, x) - t).squaredNorm();
    return total / static_cast<double>(batch.size());
}

void batch_gradients(const MlpModel& model, const Batch& batch, MlpGradients& grads) {
    MlpForwardCache cache;
    const double scale = 2.0 / static_cast<double>(batch.size());
    for (const auto& [x, t] : batch) {
        const Eigen::VectorXd y = mlp_forward_cached(model, x, cache);
        mlp_backward(model, cache, scale * (y - t), grads);
    }
}

} // namespace

int MlpModel::input_dim() const {
    if (layer_weights.empty()) throw InputError("MLP has no layers");
    return static_cast<int>(layer_weights.front().cols());
}

int MlpModel::output_dim() const {
    if (layer_weights.empty()) throw InputError("MLP has no layers");
    return static_cast<int>(layer_weights.back().rows());
}

std::vector<int> MlpModel::dims() const {
    std::vector<int> d;
    d.push_back(input_dim());
    for (const auto& W : layer_weights) d.push_back(static_cast<int>(W.rows()));
    return d;
}

void MlpModel::validate() const {
    if (layer_weights.empty()) throw InputError("MLP needs at least one layer");
    if (layer_weights.size() != layer_biases.size())
        throw InputError("MLP weight/bias layer counts differ");
    for (std::size_t l = 0; l < layer_weights.size(); ++l) {
        const auto& W = layer_weights[l];
        const auto& b = layer_biases[l];
        if (W.rows() == 0 || W.cols() == 0) throw InputError("MLP layer with empty shape");
        if (b.size() != W.rows()) throw InputError("MLP bias length mismatches layer rows");
        if (l > 0 && W.cols() != layer_weights[l - 1].rows())
            throw InputError("MLP consecutive layer shapes do not compose");
        if (!W.allFinite() || !b.allFinite()) throw InputError("MLP parameters must be finite");
    }
}

MlpModel init_mlp(const std::vector<int>& dims, Activation activation, std::uint64_t seed,
                  double init_scale) {
    if (dims.size() < 2) throw InputError("init_mlp needs at least [input, output] dims");
    for (int d : dims)
        if (d <= 0) throw InputError("init_mlp dims must be positive");
    if (!(init_scale > 0.0)) throw InputError("init_scale must be positive");

    Rng rng(seed);
    MlpModel m;
    m.activation = activation;
    for (std::size_t l = 1; l < dims.size(); ++l) {
        Eigen::MatrixXd W(dims[l], dims[l - 1]);
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c)
                W(r, c) = rng.uniform(-init_scale, init_scale);
        Eigen::VectorXd b(dims[l]);
        for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = rng.uniform(-init_scale, init_scale);
        m.layer_weights.push_back(std::move(W));
        m.layer_biases.push_back(std::move(b));
    }
    return m;
}

Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::VectorXd& x) {
    MlpForwardCache cache;
    return mlp_forward_cached(model, x, cache);
}

Eigen::VectorXd mlp_forward_cached(const MlpModel& model, const Eigen::VectorXd& x,
                                   MlpForwardCache& cache) {
    if (model.layer_weights.empty()) throw InputError("MLP has no layers");
    if (x.size() != model.layer_weights.front().cols())
        throw InputError("MLP input dimension mismatch");
    if (!x.allFinite()) throw InputError("MLP input must be finite");

    const int n = model.layer_count();
    cache.pre.assign(static_cast<std::size_t>(n), {});
    cache.post.assign(static_cast<std::size_t>(n) + 1, {});
    cache.post[0] = x;

    Eigen::VectorXd a = x;
    for (int l = 0; l < n; ++l) {
        Eigen::VectorXd z = model.layer_weights[l] * a + model.layer_biases[l];
        cache.pre[l] = z;
        if (l + 1 < n) {
            a = z.unaryExpr([&](double v) { return activate(model.activation, v); });
        } else {
            a = z;  // affine output layer
        }
        cache.post[l + 1] = a;
    }
    return a;
}

MlpGradients MlpGradients::zeros_like(const MlpModel& model) {
    MlpGradients g;
    for (const auto& W : model.layer_weights) g.layer_weights.push_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
    for (const auto& b : model.layer_biases) g.layer_biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return g;
}

void MlpGradients::add_scaled(const MlpGradients& other, double scale) {
    for (std::size_t l = 0; l < layer_weights.size(); ++l) {
        layer_weights[l] += scale * other.layer_weights[l];
        layer_biases[l] += scale * other.layer_biases[l];
    }
}

double MlpGradients::squared_norm() const {
    double total = 0.0;
    for (const auto& W : layer_weights) total += W.squaredNorm();
    for (const auto& b : layer_biases) total += b.squaredNorm();
    return total;
}

void mlp_backward(const MlpModel& model, const MlpForwardCache& cache, const Eigen::VectorXd& dLdy,
                  MlpGradients& grads) {
    const int n = model.layer_count();
    Eigen::VectorXd delta = dLdy;  // d loss / d z_n (output layer is affine)
    for (int l = n - 1; l >= 0; --l) {
        grads.layer_weights[l] += delta * cache.post[l].transpose();
        grads.layer_biases[l] += delta;
        if (l > 0) {
            Eigen::VectorXd upstream = model.layer_weights[l].transpose() * delta;
            delta = upstream.cwiseProduct(cache.pre[l - 1].unaryExpr(
                [&](double z) { return activate_grad(model.activation, z); }));
        }
    }
}

void mlp_apply_gradients(MlpModel& model, const MlpGradients& grads, double lr, double clip_norm) {
    double scale = 1.0;
    if (clip_norm > 0.0) {
        const double norm = std::sqrt(grads.squared_norm());
        if (norm > clip_norm) scale = clip_norm / norm;
    }
    for (std::size_t l = 0; l < model.layer_weights.size(); ++l) {
        model.layer_weights[l] -= lr * scale * grads.layer_weights[l];
        model.layer_biases[l] -= lr * scale * grads.layer_biases[l];
    }
}

MlpTrainResult train_mlp(const MlpModel& model, const Batch& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw InputError("train_mlp needs a non-empty dataset");
    model.validate();

    MlpTrainResult out{model, {}};
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        MlpGradients grads = MlpGradients::zeros_like(out.model);
        batch_gradients(out.model, dataset, grads);
        out.loss_curve.push_back(batch_loss(out.model, dataset));
        mlp_apply_gradients(out.model, grads, cfg.learning_rate, 1.0);
    }
    return out;
}

double mlp_gradient_check(const MlpModel& model, const Batch& batch) {
    if (batch.empty()) throw InputError("gradient check needs a non-empty batch");
    model.validate();

    MlpGradients analytic = MlpGradients::zeros_like(model);
    batch_gradients(model, batch, analytic);

    const double h = 1e-5;
    double worst = 0.0;
    MlpModel probe = model;
    auto compare = [&](double& param, double ga) {
        const double saved = param;
        param = saved + h;
        const double up = batch_loss(probe, batch);
        param = saved - h;
        const double down = batch_loss(probe, batch);
        param = saved;
        const double gf = (up - down) / (2.0 * h);
        const double rel = std::abs(ga - gf) / std::max(1e-8, std::abs(ga) + std::abs(gf));
        worst = std::max(worst, rel);
    };

    for (std::size_t l = 0; l < probe.layer_weights.size(); ++l) {
        auto& W = probe.layer_weights[l];
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) compare(W(r, c), analytic.layer_weights[l](r, c));
        auto& b = probe.layer_biases[l];
        for (Eigen::Index r = 0; r < b.size(); ++r) compare(b(r), analytic.layer_biases[l](r));
    }
    return worst;
}

} // namespace vmsim
