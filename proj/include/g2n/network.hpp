#pragma once

/// Dense feed-forward networks with an optional gated hidden layer.
///
/// Parameters live in one flat vector (weights then bias, layer by layer) so that
/// optimizers, gradient checks and checkpoints can treat them uniformly. All
/// arithmetic is written as plain loops with a fixed summation order: a batch row is
/// computed by exactly the same operations whether it is evaluated alone or inside a
/// larger batch, which makes population-matrix evaluation bit-identical to evaluating
/// each individual separately.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "g2n/error.hpp"
#include "g2n/matrix.hpp"
#include "g2n/random.hpp"

namespace g2n {

enum class Activation { relu, identity };

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    Activation activation = Activation::relu;
};

struct MlpSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden{64, 64};
    std::size_t output_dim = 1;
    /// Gate the last hidden layer's post-activation output.
    bool gated = false;
    double hidden_gain = std::numbers::sqrt2;
    double output_gain = 1.0;
};

/// Activations recorded by a forward pass, consumed by backward.
struct ForwardCache {
    /// layer_inputs[l] is the input to layer l; layer_inputs.back() is the network output.
    std::vector<Matrix> layer_inputs;
    std::vector<Matrix> pre_activations;
    /// Gate rows used at the gated layer (empty when the pass was ungated).
    Matrix gates;

    const Matrix& output() const { return layer_inputs.back(); }
};

struct BackwardOptions {
    /// Fault injection for the gradient checker: flips the sign of the gate mask in
    /// the backward pass only.
    bool negate_gate_mask = false;
};

/// Fills `out` (rows x cols, row-major) with gain * a random semi-orthogonal matrix.
inline void orthogonal_init(std::span<double> out, std::size_t rows, std::size_t cols, double gain,
                            Rng& rng) {
    require(out.size() == rows * cols, "orthogonal_init size mismatch");
    const std::size_t tall = std::max(rows, cols);
    const std::size_t wide = std::min(rows, cols);
    // q holds `wide` orthonormal vectors of length `tall`, produced by modified Gram-Schmidt.
    std::vector<std::vector<double>> q(wide, std::vector<double>(tall));
    for (std::size_t k = 0; k < wide; ++k) {
        for (;;) {
            for (auto& v : q[k]) v = rng.normal();
            for (std::size_t j = 0; j < k; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < tall; ++i) dot += q[k][i] * q[j][i];
                for (std::size_t i = 0; i < tall; ++i) q[k][i] -= dot * q[j][i];
            }
            double norm = 0.0;
            for (double v : q[k]) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (auto& v : q[k]) v /= norm;
                break;
            }
        }
    }
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out[r * cols + c] = gain * (rows <= cols ? q[r][c] : q[c][r]);
}

class Mlp {
public:
    Mlp() = default;

    /// Zero-initialised network with the given architecture.
    explicit Mlp(const MlpSpec& spec) : spec_(spec) {
        require(spec.input_dim >= 1 && spec.output_dim >= 1, "network dims must be >= 1");
        require(!spec.gated || !spec.hidden.empty(), "a gated network needs a hidden layer");
        std::size_t in = spec.input_dim;
        std::size_t offset = 0;
        auto add = [&](std::size_t out, Activation act) {
            require(out >= 1, "layer width must be >= 1");
            LayerShape s{in, out, offset, offset + in * out, act};
            offset += in * out + out;
            layers_.push_back(s);
            in = out;
        };
        for (auto h : spec.hidden) add(h, Activation::relu);
        add(spec.output_dim, Activation::identity);
        params_.assign(offset, 0.0);
    }

    /// Orthogonal weights (hidden_gain on hidden layers, output_gain on the output), zero biases.
    Mlp(const MlpSpec& spec, Rng& rng) : Mlp(spec) {
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& s = layers_[l];
            const double gain = l + 1 == layers_.size() ? spec_.output_gain : spec_.hidden_gain;
            orthogonal_init(weights(l), s.out, s.in, gain, rng);
        }
    }

    const MlpSpec& spec() const noexcept { return spec_; }
    const std::vector<LayerShape>& layers() const noexcept { return layers_; }
    std::size_t input_dim() const noexcept { return spec_.input_dim; }
    std::size_t output_dim() const noexcept { return spec_.output_dim; }

    /// Index of the layer whose output is gated (the last hidden layer), if any.
    std::optional<std::size_t> gated_layer() const {
        if (!spec_.gated) return std::nullopt;
        return layers_.size() - 2;
    }
    std::size_t gate_width() const { return spec_.gated ? spec_.hidden.back() : 0; }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<double> weights(std::size_t l) {
        const auto& s = layers_.at(l);
        return {params_.data() + s.weight_offset, s.in * s.out};
    }
    std::span<const double> weights(std::size_t l) const {
        const auto& s = layers_.at(l);
        return {params_.data() + s.weight_offset, s.in * s.out};
    }
    std::span<double> bias(std::size_t l) {
        const auto& s = layers_.at(l);
        return {params_.data() + s.bias_offset, s.out};
    }
    std::span<const double> bias(std::size_t l) const {
        const auto& s = layers_.at(l);
        return {params_.data() + s.bias_offset, s.out};
    }

    /// Forward pass. `gates`, when given, must have one row per batch element and
    /// gate_width() columns; row r multiplies the gated layer's activations of element r.
    ForwardCache forward(const Matrix& x, const Matrix* gates = nullptr) const {
        require(x.cols() == spec_.input_dim, "forward: input width mismatch");
        if (gates) {
            require(spec_.gated, "forward: gates given to an ungated network");
            require(gates->rows() == x.rows() && gates->cols() == gate_width(),
                    "forward: gate matrix shape mismatch");
        }
        ForwardCache cache;
        cache.layer_inputs.reserve(layers_.size() + 1);
        cache.pre_activations.reserve(layers_.size());
        cache.layer_inputs.push_back(x);
        const auto gated = gated_layer();
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& s = layers_[l];
            const Matrix& in = cache.layer_inputs.back();
            Matrix z(in.rows(), s.out);
            Matrix a(in.rows(), s.out);
            const double* w = params_.data() + s.weight_offset;
            const double* b = params_.data() + s.bias_offset;
            for (std::size_t r = 0; r < in.rows(); ++r) {
                const auto xr = in.row(r);
                for (std::size_t o = 0; o < s.out; ++o) {
                    double acc = 0.0;
                    const double* wo = w + o * s.in;
                    for (std::size_t i = 0; i < s.in; ++i) acc += wo[i] * xr[i];
                    const double zv = acc + b[o];
                    z(r, o) = zv;
                    a(r, o) = s.activation == Activation::relu ? (zv > 0.0 ? zv : 0.0) : zv;
                }
            }
            if (gates && gated && *gated == l)
                for (std::size_t r = 0; r < a.rows(); ++r)
                    for (std::size_t o = 0; o < s.out; ++o) a(r, o) *= (*gates)(r, o);
            cache.pre_activations.push_back(std::move(z));
            cache.layer_inputs.push_back(std::move(a));
        }
        if (gates) cache.gates = *gates;
        return cache;
    }

    Matrix predict(const Matrix& x, const Matrix* gates = nullptr) const {
        return forward(x, gates).layer_inputs.back();
    }

    /// Gradient of sum over the batch of <d_output, output> with respect to every
    /// parameter, laid out like parameters(). Closed gate units pass no gradient.
    std::vector<double> backward(const ForwardCache& cache, const Matrix& d_output,
                                 BackwardOptions options = {}) const {
        require(cache.layer_inputs.size() == layers_.size() + 1, "backward: cache does not match network");
        require(d_output.rows() == cache.output().rows() && d_output.cols() == spec_.output_dim,
                "backward: upstream gradient shape mismatch");
        std::vector<double> grads(params_.size(), 0.0);
        const auto gated = gated_layer();
        Matrix upstream = d_output;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            const auto& s = layers_[l];
            const Matrix& in = cache.layer_inputs[l];
            const Matrix& z = cache.pre_activations[l];
            if (!cache.gates.empty() && gated && *gated == l) {
                const double sign = options.negate_gate_mask ? -1.0 : 1.0;
                for (std::size_t r = 0; r < upstream.rows(); ++r)
                    for (std::size_t o = 0; o < s.out; ++o) upstream(r, o) *= sign * cache.gates(r, o);
            }
            if (s.activation == Activation::relu)
                for (std::size_t r = 0; r < upstream.rows(); ++r)
                    for (std::size_t o = 0; o < s.out; ++o)
                        if (!(z(r, o) > 0.0)) upstream(r, o) = 0.0;
            double* gw = grads.data() + s.weight_offset;
            double* gb = grads.data() + s.bias_offset;
            for (std::size_t r = 0; r < upstream.rows(); ++r) {
                const auto xr = in.row(r);
                for (std::size_t o = 0; o < s.out; ++o) {
                    const double d = upstream(r, o);
                    if (d == 0.0) continue;
                    gb[o] += d;
                    double* gwo = gw + o * s.in;
                    for (std::size_t i = 0; i < s.in; ++i) gwo[i] += d * xr[i];
                }
            }
            if (l == 0) break;
            Matrix down(upstream.rows(), s.in);
            const double* w = params_.data() + s.weight_offset;
            for (std::size_t r = 0; r < upstream.rows(); ++r)
                for (std::size_t o = 0; o < s.out; ++o) {
                    const double d = upstream(r, o);
                    if (d == 0.0) continue;
                    const double* wo = w + o * s.in;
                    for (std::size_t i = 0; i < s.in; ++i) down(r, i) += d * wo[i];
                }
            upstream = std::move(down);
        }
        return grads;
    }

    friend bool operator==(const Mlp& a, const Mlp& b) {
        return a.params_ == b.params_ && a.layers_.size() == b.layers_.size() &&
               a.spec_.gated == b.spec_.gated && a.spec_.hidden == b.spec_.hidden &&
               a.spec_.input_dim == b.spec_.input_dim && a.spec_.output_dim == b.spec_.output_dim;
    }

private:
    MlpSpec spec_;
    std::vector<LayerShape> layers_;
    std::vector<double> params_;
};

/// Rows of a gate matrix built from per-element gate vectors.
inline Matrix gate_matrix(std::span<const std::vector<double>> rows) {
    require(!rows.empty(), "gate_matrix: no rows");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) m.set_row(r, rows[r]);
    return m;
}

/// Same gate repeated for every one of `batch` rows.
inline Matrix repeat_gate(std::span<const double> gate, std::size_t batch) {
    Matrix m(batch, gate.size());
    for (std::size_t r = 0; r < batch; ++r) m.set_row(r, gate);
    return m;
}

// Checkpoint format (JSON):
//   {"format": "g2n-mlp-v1", "input_dim": I, "gated": bool,
//    "layers": [{"in": I, "out": O, "activation": "relu"|"identity",
//                "weight": [O*I values, row-major], "bias": [O values]}, ...]}
// Doubles are written in shortest round-trip form, so save/load is exact.

inline nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& s = net.layers()[l];
        const auto w = net.weights(l);
        const auto b = net.bias(l);
        layers.push_back({{"in", s.in},
                          {"out", s.out},
                          {"activation", s.activation == Activation::relu ? "relu" : "identity"},
                          {"weight", std::vector<double>(w.begin(), w.end())},
                          {"bias", std::vector<double>(b.begin(), b.end())}});
    }
    return {{"format", "g2n-mlp-v1"},
            {"input_dim", net.input_dim()},
            {"gated", net.spec().gated},
            {"layers", std::move(layers)}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "g2n-mlp-v1") throw ConfigError("not a g2n-mlp-v1 checkpoint");
    const auto& layers = j.at("layers");
    if (layers.empty()) throw ConfigError("checkpoint has no layers");
    MlpSpec spec;
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    spec.gated = j.at("gated").get<bool>();
    spec.hidden.clear();
    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.at("in").get<std::size_t>() != in) throw ConfigError("checkpoint layer dims do not chain");
        const auto out = L.at("out").get<std::size_t>();
        const bool last = l + 1 == layers.size();
        if (L.at("activation").get<std::string>() != (last ? "identity" : "relu"))
            throw ConfigError("checkpoint activation layout unsupported");
        if (last)
            spec.output_dim = out;
        else
            spec.hidden.push_back(out);
        in = out;
    }
    Mlp net(spec);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto w = layers[l].at("weight").get<std::vector<double>>();
        const auto b = layers[l].at("bias").get<std::vector<double>>();
        auto dw = net.weights(l);
        auto db = net.bias(l);
        if (w.size() != dw.size() || b.size() != db.size()) throw ConfigError("checkpoint tensor size mismatch");
        std::copy(w.begin(), w.end(), dw.begin());
        std::copy(b.begin(), b.end(), db.begin());
    }
    return net;
}

inline void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path);
    out << mlp_to_json(net).dump() << '\n';
}

inline Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read checkpoint " + path);
    return mlp_from_json(nlohmann::json::parse(in));
}

}  // namespace g2n
