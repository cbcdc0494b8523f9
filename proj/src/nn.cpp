#include "coin/nn.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "coin/errors.hpp"
#include "coin/rng.hpp"

namespace coin {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::ReLU: return "relu";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::ReLU;
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

void NetworkSpec::validate() const {
    if (layer_dims.size() < 2) throw ValidationError("network needs at least one layer");
    for (int d : layer_dims)
        if (d < 1) throw ValidationError("layer dimensions must be >= 1");
}

std::string describe(const NetworkSpec& spec) {
    std::ostringstream os;
    for (std::size_t i = 0; i < spec.layer_dims.size(); ++i) os << (i ? "-" : "") << spec.layer_dims[i];
    os << ':' << to_string(spec.hidden_activation);
    return os.str();
}

Eigen::Index param_count(const NetworkSpec& spec) {
    spec.validate();
    Eigen::Index d = 0;
    for (int l = 0; l < spec.num_layers(); ++l) {
        const Eigen::Index in = spec.layer_dims[l], out = spec.layer_dims[l + 1];
        d += in * out + out;
    }
    return d;
}

std::vector<LayerSlot> layer_slots(const NetworkSpec& spec) {
    spec.validate();
    std::vector<LayerSlot> slots;
    Eigen::Index offset = 0;
    for (int l = 0; l < spec.num_layers(); ++l) {
        LayerSlot s;
        s.in = spec.layer_dims[l];
        s.out = spec.layer_dims[l + 1];
        s.weight_offset = offset;
        s.bias_offset = offset + static_cast<Eigen::Index>(s.in) * s.out;
        offset = s.bias_offset + s.out;
        slots.push_back(s);
    }
    return slots;
}

ParamVec::ParamVec(NetworkSpec spec, Vector values) : spec_(std::move(spec)), values_(std::move(values)) {
    if (values_.size() != param_count(spec_))
        throw DimensionMismatch("parameter vector has length " + std::to_string(values_.size()) +
                                " but spec " + describe(spec_) + " needs " +
                                std::to_string(param_count(spec_)));
    if (!values_.allFinite()) throw ValidationError("parameter vector has non-finite entries");
}

std::vector<LayerParams> unflatten(const NetworkSpec& spec, const Vector& values) {
    if (values.size() != param_count(spec)) throw DimensionMismatch("unflatten: length mismatch");
    std::vector<LayerParams> layers;
    for (const auto& s : layer_slots(spec)) {
        LayerParams lp;
        lp.weights = Eigen::Map<const RowMatrix>(values.data() + s.weight_offset, s.out, s.in);
        lp.bias = values.segment(s.bias_offset, s.out);
        layers.push_back(std::move(lp));
    }
    return layers;
}

Vector flatten(const NetworkSpec& spec, const std::vector<LayerParams>& layers) {
    const auto slots = layer_slots(spec);
    if (layers.size() != slots.size()) throw DimensionMismatch("flatten: layer count mismatch");
    Vector out(param_count(spec));
    for (std::size_t l = 0; l < slots.size(); ++l) {
        const auto& s = slots[l];
        if (layers[l].weights.rows() != s.out || layers[l].weights.cols() != s.in ||
            layers[l].bias.size() != s.out)
            throw DimensionMismatch("flatten: layer shape mismatch");
        Eigen::Map<RowMatrix>(out.data() + s.weight_offset, s.out, s.in) = layers[l].weights;
        out.segment(s.bias_offset, s.out) = layers[l].bias;
    }
    return out;
}

ParamVec init_params(const NetworkSpec& spec, std::uint64_t seed) {
    Vector values = Vector::Zero(param_count(spec));
    Rng rng(seed);
    for (const auto& s : layer_slots(spec)) {
        const double scale = std::sqrt(2.0 / s.in);
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(s.in) * s.out; ++j)
            values[s.weight_offset + j] = scale * rng.normal();
    }
    return ParamVec(spec, std::move(values));
}

namespace {

double activate(Activation a, double z) {
    return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the pre-activation.
double activate_grad(Activation a, double z) {
    if (a == Activation::Tanh) {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return z > 0.0 ? 1.0 : 0.0;
}

// Layer inputs a_0..a_{L-1} and pre-activations z_0..z_{L-1}; z_{L-1} is the output.
struct Trace {
    std::vector<Vector> inputs;
    std::vector<Vector> pre;
};

Trace run_forward(const ParamVec& params, const Eigen::Ref<const Vector>& x) {
    const auto& spec = params.spec();
    if (x.size() != spec.input_dim())
        throw DimensionMismatch("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(spec.input_dim()));
    const auto slots = layer_slots(spec);
    const Vector& theta = params.values();
    Trace t;
    Vector a = x;
    for (std::size_t l = 0; l < slots.size(); ++l) {
        const auto& s = slots[l];
        Eigen::Map<const RowMatrix> w(theta.data() + s.weight_offset, s.out, s.in);
        Vector z = w * a + theta.segment(s.bias_offset, s.out);
        t.inputs.push_back(std::move(a));
        if (l + 1 < slots.size()) a = z.unaryExpr([&](double v) { return activate(spec.hidden_activation, v); });
        t.pre.push_back(std::move(z));
    }
    return t;
}

}  // namespace

Vector forward(const ParamVec& params, const Eigen::Ref<const Vector>& x) {
    return run_forward(params, x).pre.back();
}

Matrix forward_batch(const ParamVec& params, const Matrix& inputs) {
    Matrix out(inputs.rows(), params.spec().output_dim());
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) out.row(r) = forward(params, inputs.row(r).transpose()).transpose();
    return out;
}

Matrix jacobian(const ParamVec& params, const Eigen::Ref<const Vector>& x) {
    const auto& spec = params.spec();
    const auto slots = layer_slots(spec);
    const Trace t = run_forward(params, x);
    const Vector& theta = params.values();
    const int k_out = spec.output_dim();

    Matrix jac = Matrix::Zero(k_out, params.size());
    // delta(k, o) = d f_k / d z_l[o]
    Matrix delta = Matrix::Identity(k_out, k_out);
    for (int l = static_cast<int>(slots.size()) - 1; l >= 0; --l) {
        const auto& s = slots[l];
        const Vector& a = t.inputs[l];
        for (int k = 0; k < k_out; ++k) {
            for (int o = 0; o < s.out; ++o) {
                const double dk = delta(k, o);
                jac.block(k, s.weight_offset + static_cast<Eigen::Index>(o) * s.in, 1, s.in) = dk * a.transpose();
                jac(k, s.bias_offset + o) = dk;
            }
        }
        if (l > 0) {
            Eigen::Map<const RowMatrix> w(theta.data() + s.weight_offset, s.out, s.in);
            const Vector g = t.pre[l - 1].unaryExpr([&](double v) { return activate_grad(spec.hidden_activation, v); });
            delta = (delta * w) * g.asDiagonal();
        }
    }
    return jac;
}

Vector vjp(const ParamVec& params, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& upstream) {
    const auto& spec = params.spec();
    if (upstream.size() != spec.output_dim()) throw DimensionMismatch("vjp: upstream has wrong dimension");
    const auto slots = layer_slots(spec);
    const Trace t = run_forward(params, x);
    const Vector& theta = params.values();

    Vector grad = Vector::Zero(params.size());
    Vector delta = upstream;
    for (int l = static_cast<int>(slots.size()) - 1; l >= 0; --l) {
        const auto& s = slots[l];
        Eigen::Map<RowMatrix>(grad.data() + s.weight_offset, s.out, s.in) = delta * t.inputs[l].transpose();
        grad.segment(s.bias_offset, s.out) = delta;
        if (l > 0) {
            Eigen::Map<const RowMatrix> w(theta.data() + s.weight_offset, s.out, s.in);
            const Vector g = t.pre[l - 1].unaryExpr([&](double v) { return activate_grad(spec.hidden_activation, v); });
            delta = (w.transpose() * delta).cwiseProduct(g);
        }
    }
    return grad;
}

int argmax(const Eigen::Ref<const Vector>& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

void LabeledDataset::validate() const {
    if (static_cast<std::size_t>(inputs.rows()) != labels.size())
        throw DimensionMismatch("dataset has " + std::to_string(inputs.rows()) + " rows but " +
                                std::to_string(labels.size()) + " labels");
    if (num_classes < 1) throw ValidationError("dataset needs num_classes >= 1");
    for (int y : labels)
        if (y < 0 || y >= num_classes) throw ValidationError("label " + std::to_string(y) + " out of range");
    if (!inputs.allFinite()) throw ValidationError("dataset has non-finite inputs");
}

void ProbeSet::validate() const {
    if (inputs.rows() < 1) throw ValidationError("probe set is empty");
    if (!inputs.allFinite()) throw ValidationError("probe set has non-finite inputs");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (epochs < 0) throw ValidationError("epochs must be nonnegative");
    if (batch_size < 1) throw ValidationError("batch_size must be positive");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be nonnegative");
}

namespace {

// dLoss/dOutput for sample `row`, given the current output.
using OutputGrad = std::function<Vector(Eigen::Index row, const Vector& output)>;

ParamVec adamw(const ParamVec& init, const Matrix& inputs, const TrainConfig& cfg, const OutputGrad& output_grad,
               const EpochCallback& on_epoch) {
    cfg.validate();
    if (cfg.epochs == 0) return init;
    if (inputs.rows() == 0) throw ValidationError("cannot train on an empty dataset");

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Vector theta = init.values();
    Vector m = Vector::Zero(theta.size());
    Vector v = Vector::Zero(theta.size());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(cfg.rng_seed);
    long step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const ParamVec current(init.spec(), theta);
            Vector grad = Vector::Zero(theta.size());
            for (std::size_t b = start; b < stop; ++b) {
                const Eigen::Index r = order[b];
                const Vector x = inputs.row(r).transpose();
                grad += vjp(current, x, output_grad(r, forward(current, x)));
            }
            grad /= static_cast<double>(stop - start);

            ++step;
            m = beta1 * m + (1.0 - beta1) * grad;
            v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            theta *= 1.0 - cfg.learning_rate * cfg.weight_decay;
            theta.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        }
        if (on_epoch) on_epoch(epoch, ParamVec(init.spec(), theta));
    }
    return ParamVec(init.spec(), std::move(theta));
}

}  // namespace

ParamVec train(const ParamVec& init, const LabeledDataset& data, const TrainConfig& cfg,
               const EpochCallback& on_epoch) {
    data.validate();
    const int k_out = init.spec().output_dim();
    if (data.num_classes > k_out) throw DimensionMismatch("dataset has more classes than network outputs");
    if (data.inputs.rows() > 0 && data.inputs.cols() != init.spec().input_dim())
        throw DimensionMismatch("dataset input dimension does not match network");

    OutputGrad grad;
    if (cfg.loss == Loss::CrossEntropy) {
        grad = [&](Eigen::Index r, const Vector& f) {
            Vector p = (f.array() - f.maxCoeff()).exp();
            p /= p.sum();
            p[data.labels[static_cast<std::size_t>(r)]] -= 1.0;
            return p;
        };
    } else {
        grad = [&](Eigen::Index r, const Vector& f) {
            Vector g = f;
            g[data.labels[static_cast<std::size_t>(r)]] -= 1.0;
            return g;
        };
    }
    return adamw(init, data.inputs, cfg, grad, on_epoch);
}

ParamVec fit_regression(const ParamVec& init, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg,
                        const EpochCallback& on_epoch) {
    if (targets.rows() != inputs.rows() || targets.cols() != init.spec().output_dim())
        throw DimensionMismatch("regression targets have the wrong shape");
    if (inputs.rows() > 0 && inputs.cols() != init.spec().input_dim())
        throw DimensionMismatch("regression inputs do not match network");
    const OutputGrad grad = [&](Eigen::Index r, const Vector& f) -> Vector { return f - targets.row(r).transpose(); };
    return adamw(init, inputs, cfg, grad, on_epoch);
}

double accuracy(const ParamVec& params, const LabeledDataset& data) {
    data.validate();
    if (data.size() == 0) throw ValidationError("accuracy of an empty dataset is undefined");
    Eigen::Index correct = 0;
    for (Eigen::Index r = 0; r < data.size(); ++r)
        if (argmax(forward(params, data.inputs.row(r).transpose())) == data.labels[static_cast<std::size_t>(r)])
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace coin
