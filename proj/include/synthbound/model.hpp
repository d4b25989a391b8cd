#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <span>

#include "synthbound/common.hpp"

namespace synthbound {

/// Softmax classifier, linear (hidden_units == 0) or with one tanh hidden
/// layer. Parameters live in one flat vector so optimizers and the
/// finite-difference checker can treat the model as a point in R^P.
///
/// Layout (row-major): linear -> W (C x d), b (C);
/// hidden -> W1 (H x d), b1 (H), W2 (C x H), b2 (C).
class SoftmaxModel {
public:
    SoftmaxModel() = default;

    SoftmaxModel(int input_dim, int num_classes, int hidden_units)
        : d_(input_dim), c_(num_classes), h_(hidden_units) {
        if (d_ < 1) throw ParameterError("SoftmaxModel: input_dim must be >= 1");
        if (c_ < 2) throw ParameterError("SoftmaxModel: need at least 2 classes");
        if (h_ < 0) throw ParameterError("SoftmaxModel: hidden_units must be >= 0");
        params_.assign(parameter_count(), 0.0);
    }

    int input_dim() const { return d_; }
    int num_classes() const { return c_; }
    int hidden_units() const { return h_; }

    std::size_t parameter_count() const {
        if (h_ == 0) return static_cast<std::size_t>(c_) * d_ + c_;
        return static_cast<std::size_t>(h_) * d_ + h_ + static_cast<std::size_t>(c_) * h_ + c_;
    }

    Vector& params() { return params_; }
    const Vector& params() const { return params_; }

    struct ForwardCache {
        Vector hidden;  // tanh activations (empty for linear models)
        Vector probs;
    };

    ForwardCache forward(const Vector& x) const {
        if (x.size() != static_cast<std::size_t>(d_))
            throw ShapeError("SoftmaxModel: input dimension mismatch");
        ForwardCache cache;
        Vector logits(static_cast<std::size_t>(c_), 0.0);
        if (h_ == 0) {
            for (int k = 0; k < c_; ++k) {
                double v = params_[bias_offset() + static_cast<std::size_t>(k)];
                const std::size_t row = static_cast<std::size_t>(k) * d_;
                for (int j = 0; j < d_; ++j) v += params_[row + static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
                logits[static_cast<std::size_t>(k)] = v;
            }
        } else {
            cache.hidden.resize(static_cast<std::size_t>(h_));
            for (int k = 0; k < h_; ++k) {
                double v = params_[b1_offset() + static_cast<std::size_t>(k)];
                const std::size_t row = static_cast<std::size_t>(k) * d_;
                for (int j = 0; j < d_; ++j) v += params_[row + static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
                cache.hidden[static_cast<std::size_t>(k)] = std::tanh(v);
            }
            for (int k = 0; k < c_; ++k) {
                double v = params_[b2_offset() + static_cast<std::size_t>(k)];
                const std::size_t row = w2_offset() + static_cast<std::size_t>(k) * h_;
                for (int j = 0; j < h_; ++j) v += params_[row + static_cast<std::size_t>(j)] * cache.hidden[static_cast<std::size_t>(j)];
                logits[static_cast<std::size_t>(k)] = v;
            }
        }
        // Max-subtracted softmax.
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : logits) z += std::exp(v - mx);
        cache.probs.resize(static_cast<std::size_t>(c_));
        for (int k = 0; k < c_; ++k)
            cache.probs[static_cast<std::size_t>(k)] = std::exp(logits[static_cast<std::size_t>(k)] - mx) / z;
        return cache;
    }

    Vector predict(const Vector& x) const { return forward(x).probs; }

    /// Accumulates d(loss)/d(params) into `grad`, given d(loss)/d(probs).
    void backprop(const Vector& x, const ForwardCache& cache, const Vector& dprobs,
                  Vector& grad) const {
        // probs -> logits through the softmax Jacobian.
        double dot = 0.0;
        for (int k = 0; k < c_; ++k) dot += dprobs[static_cast<std::size_t>(k)] * cache.probs[static_cast<std::size_t>(k)];
        Vector dlogits(static_cast<std::size_t>(c_));
        for (int k = 0; k < c_; ++k)
            dlogits[static_cast<std::size_t>(k)] =
                cache.probs[static_cast<std::size_t>(k)] * (dprobs[static_cast<std::size_t>(k)] - dot);

        if (h_ == 0) {
            for (int k = 0; k < c_; ++k) {
                const double dk = dlogits[static_cast<std::size_t>(k)];
                const std::size_t row = static_cast<std::size_t>(k) * d_;
                for (int j = 0; j < d_; ++j) grad[row + static_cast<std::size_t>(j)] += dk * x[static_cast<std::size_t>(j)];
                grad[bias_offset() + static_cast<std::size_t>(k)] += dk;
            }
        } else {
            Vector dhidden(static_cast<std::size_t>(h_), 0.0);
            for (int k = 0; k < c_; ++k) {
                const double dk = dlogits[static_cast<std::size_t>(k)];
                const std::size_t row = w2_offset() + static_cast<std::size_t>(k) * h_;
                for (int j = 0; j < h_; ++j) {
                    grad[row + static_cast<std::size_t>(j)] += dk * cache.hidden[static_cast<std::size_t>(j)];
                    dhidden[static_cast<std::size_t>(j)] += dk * params_[row + static_cast<std::size_t>(j)];
                }
                grad[b2_offset() + static_cast<std::size_t>(k)] += dk;
            }
            for (int k = 0; k < h_; ++k) {
                const double hk = cache.hidden[static_cast<std::size_t>(k)];
                const double dpre = dhidden[static_cast<std::size_t>(k)] * (1.0 - hk * hk);
                const std::size_t row = static_cast<std::size_t>(k) * d_;
                for (int j = 0; j < d_; ++j) grad[row + static_cast<std::size_t>(j)] += dpre * x[static_cast<std::size_t>(j)];
                grad[b1_offset() + static_cast<std::size_t>(k)] += dpre;
            }
        }
    }

    void save(std::ostream& out) const {
        out.write("SBM1", 4);
        const std::int32_t dims[3] = {d_, c_, h_};
        out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
        out.write(reinterpret_cast<const char*>(params_.data()),
                  static_cast<std::streamsize>(params_.size() * sizeof(double)));
    }

    static SoftmaxModel load(std::istream& in) {
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, "SBM1", 4) != 0)
            throw IntegrityError("SoftmaxModel::load: bad magic, expected SBM1");
        std::int32_t dims[3];
        in.read(reinterpret_cast<char*>(dims), sizeof(dims));
        SoftmaxModel m(dims[0], dims[1], dims[2]);
        in.read(reinterpret_cast<char*>(m.params_.data()),
                static_cast<std::streamsize>(m.params_.size() * sizeof(double)));
        if (!in) throw IntegrityError("SoftmaxModel::load: truncated parameter block");
        return m;
    }

private:
    std::size_t bias_offset() const { return static_cast<std::size_t>(c_) * d_; }
    std::size_t b1_offset() const { return static_cast<std::size_t>(h_) * d_; }
    std::size_t w2_offset() const { return b1_offset() + static_cast<std::size_t>(h_); }
    std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(c_) * h_; }

    int d_ = 0, c_ = 0, h_ = 0;
    Vector params_;
};

inline SoftmaxModel model_init(int d, int C, int H, std::uint64_t seed) {
    SoftmaxModel m(d, C, H);
    std::mt19937_64 rng = make_rng(seed, 0);
    std::normal_distribution<double> gauss(0.0, 0.01);
    // Weights Gaussian(0, 0.01), biases zero.
    auto& p = m.params();
    std::fill(p.begin(), p.end(), 0.0);
    if (H == 0) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(C) * d; ++i) p[i] = gauss(rng);
    } else {
        for (std::size_t i = 0; i < static_cast<std::size_t>(H) * d; ++i) p[i] = gauss(rng);
        const std::size_t w2 = static_cast<std::size_t>(H) * d + H;
        for (std::size_t i = 0; i < static_cast<std::size_t>(C) * H; ++i) p[w2 + i] = gauss(rng);
    }
    return m;
}

/// Compares an analytic gradient against central differences and returns
/// the worst per-parameter relative error. `loss_fn` evaluates the loss at
/// the model's current parameters; `grad_fn` returns its analytic gradient.
inline double finite_diff_check(SoftmaxModel m,
                                const std::function<double(const SoftmaxModel&)>& loss_fn,
                                const std::function<Vector(const SoftmaxModel&)>& grad_fn,
                                double eps) {
    if (eps <= 0.0) throw ParameterError("finite_diff_check: eps must be positive");
    const Vector analytic = grad_fn(m);
    double worst = 0.0;
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        const double saved = m.params()[i];
        m.params()[i] = saved + eps;
        const double up = loss_fn(m);
        m.params()[i] = saved - eps;
        const double down = loss_fn(m);
        m.params()[i] = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-4});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

}  // namespace synthbound
