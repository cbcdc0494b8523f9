#pragma once

// Dense feed-forward networks with a flat parameter layout.
//
// Parameters are stored as a single vector in canonical order
// W_1 (row-major, out x in), b_1, W_2, b_2, ..., so that merging methods can
// treat a network as a point in R^d. The output layer is linear (logits).

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace coin {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { Tanh, ReLU };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct NetworkSpec {
    // [input, hidden..., output]
    std::vector<int> layer_dims;
    Activation hidden_activation = Activation::Tanh;

    void validate() const;
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int num_layers() const { return static_cast<int>(layer_dims.size()) - 1; }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::string describe(const NetworkSpec& spec);

// d = sum_l (dims_l * dims_{l+1} + dims_{l+1})
Eigen::Index param_count(const NetworkSpec& spec);

// Offsets of each layer's weight and bias blocks inside the flat vector.
struct LayerSlot {
    int in = 0;
    int out = 0;
    Eigen::Index weight_offset = 0;
    Eigen::Index bias_offset = 0;
};
std::vector<LayerSlot> layer_slots(const NetworkSpec& spec);

// Network parameters bound to the spec they were laid out for.
class ParamVec {
public:
    ParamVec(NetworkSpec spec, Vector values);

    const NetworkSpec& spec() const { return spec_; }
    const Vector& values() const { return values_; }
    Eigen::Index size() const { return values_.size(); }

    friend bool operator==(const ParamVec& a, const ParamVec& b) {
        return a.spec_ == b.spec_ && a.values_ == b.values_;
    }

private:
    NetworkSpec spec_;
    Vector values_;
};

// Structured view of one layer. Rebuilding the flat vector from these blocks
// reproduces it exactly.
struct LayerParams {
    RowMatrix weights;
    Vector bias;
};
std::vector<LayerParams> unflatten(const NetworkSpec& spec, const Vector& values);
Vector flatten(const NetworkSpec& spec, const std::vector<LayerParams>& layers);

// He-style init: weights ~ N(0, 2 / fan_in), biases zero.
ParamVec init_params(const NetworkSpec& spec, std::uint64_t seed);

Vector forward(const ParamVec& params, const Eigen::Ref<const Vector>& x);

// Row l of the result is forward(inputs.row(l)).
Matrix forward_batch(const ParamVec& params, const Matrix& inputs);

// K x d; row k is the gradient of output k with respect to every parameter.
Matrix jacobian(const ParamVec& params, const Eigen::Ref<const Vector>& x);

// upstream^T J(x), computed by a single backward pass.
Vector vjp(const ParamVec& params, const Eigen::Ref<const Vector>& x,
           const Eigen::Ref<const Vector>& upstream);

// First index of the maximum.
int argmax(const Eigen::Ref<const Vector>& v);

enum class Split { Train, Test };
std::string_view to_string(Split s);

struct LabeledDataset {
    Matrix inputs;  // rows are samples
    std::vector<int> labels;
    int num_classes = 0;
    Split split = Split::Train;

    Eigen::Index size() const { return inputs.rows(); }
    void validate() const;
};

struct ProbeSet {
    Matrix inputs;

    Eigen::Index size() const { return inputs.rows(); }
    void validate() const;
};

enum class Loss { CrossEntropy, SquaredError };

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 1;
    int batch_size = 32;
    double weight_decay = 0.0;
    std::uint64_t rng_seed = 0;
    Loss loss = Loss::CrossEntropy;

    void validate() const;
};

// Called after each epoch with the 1-based epoch number and current params.
using EpochCallback = std::function<void(int epoch, const ParamVec&)>;

// Mini-batch AdamW on labeled data. SquaredError regresses one-hot targets.
ParamVec train(const ParamVec& init, const LabeledDataset& data, const TrainConfig& cfg,
               const EpochCallback& on_epoch = {});

// Mini-batch AdamW on 0.5 * ||f(x) - y||^2 against real-valued targets.
ParamVec fit_regression(const ParamVec& init, const Matrix& inputs, const Matrix& targets,
                        const TrainConfig& cfg, const EpochCallback& on_epoch = {});

double accuracy(const ParamVec& params, const LabeledDataset& data);

}  // namespace coin
