#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rtmocap {

// Gate layout in the stacked 4h rows: input, forget, cell candidate, output.
struct LstmCellParams {
    Eigen::MatrixXd w_in;   // 4h x d
    Eigen::MatrixXd w_rec;  // 4h x h
    Eigen::VectorXd bias;   // 4h

    int hidden() const { return static_cast<int>(w_rec.cols()); }
    int input() const { return static_cast<int>(w_in.cols()); }
    static LstmCellParams zeros(int input_width, int hidden_width);
};

struct BiRecurrentParams {
    LstmCellParams fwd;
    LstmCellParams bwd;
    static BiRecurrentParams zeros(int input_width, int hidden_width);
};

enum class Readout { final_state, mean_pool };

struct LstmState {
    Eigen::VectorXd hidden;
    Eigen::VectorXd cell;
    static LstmState zeros(int hidden_width);
};

// One LSTM recurrence step: logistic input/forget/output gates, tanh cell
// candidate and cell output. Throws NumericError on non-finite state.
LstmState recurrent_step(const LstmCellParams& params, const Eigen::VectorXd& x,
                         const LstmState& state);

// Readout over a T x d sequence: concatenation of the final forward and
// final backward hidden states (2h), or the mean over per-step outputs.
Eigen::VectorXd bidirectional_encode(const BiRecurrentParams& params,
                                     const Eigen::MatrixXd& sequence,
                                     Readout readout = Readout::final_state);

struct DdNetworkConfig {
    int input_width = 29;
    int hidden_width = 5;
    int integration_width = 16;
    Readout readout = Readout::final_state;
};

struct VNetworkConfig {
    int input_width = 29;
    int hidden1 = 40;
    int hidden2 = 40;
    Readout readout = Readout::final_state;
};

// Flat view of one parameter tensor; the order returned by tensor_views is
// the canonical serialization/update order.
struct TensorView {
    const char* name;
    double* data;
    std::ptrdiff_t size;
};

struct DdModel {
    DdNetworkConfig cfg;
    BiRecurrentParams cell;       // shared across input channels, d = 1
    Eigen::MatrixXd w_integrate;  // I x (d * 2h)
    Eigen::VectorXd b_integrate;  // I
    Eigen::MatrixXd w_out;        // 2 x I
    Eigen::VectorXd b_out;        // 2

    static DdModel zeros(const DdNetworkConfig& cfg);
    static DdModel init(const DdNetworkConfig& cfg, std::uint64_t seed);
    std::vector<TensorView> tensor_views();
    Eigen::Vector2d forward(const Eigen::MatrixXd& input) const;  // T x d -> probabilities
};

struct VModel {
    VNetworkConfig cfg;
    BiRecurrentParams layer1;
    BiRecurrentParams layer2;  // input width = 2 * hidden1
    Eigen::MatrixXd w_out;     // 2 x 2*hidden2
    Eigen::VectorXd b_out;     // 2

    static VModel zeros(const VNetworkConfig& cfg);
    static VModel init(const VNetworkConfig& cfg, std::uint64_t seed);
    std::vector<TensorView> tensor_views();
    Eigen::Vector2d forward(const Eigen::MatrixXd& input) const;
};

long count_params(const DdNetworkConfig& cfg);
long count_params(const VNetworkConfig& cfg);

// Mean cross-entropy over the batch; gradients for every tensor are written
// into `grads` (zeroed first). Labels are 0 = NRT, 1 = RT.
double loss_and_gradients(const DdModel& model, std::span<const Eigen::MatrixXd> batch,
                          std::span<const int> labels, DdModel& grads);
double loss_and_gradients(const VModel& model, std::span<const Eigen::MatrixXd> batch,
                          std::span<const int> labels, VModel& grads);

// velocity <- momentum * velocity - lr * grad; params <- params + velocity.
template <class Model>
void sgd_momentum_step(Model& params, Model& grads, Model& velocity, double learning_rate,
                       double momentum) {
    auto p = params.tensor_views();
    auto g = grads.tensor_views();
    auto v = velocity.tensor_views();
    for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::ptrdiff_t i = 0; i < p[t].size; ++i) {
            v[t].data[i] = momentum * v[t].data[i] - learning_rate * g[t].data[i];
            p[t].data[i] += v[t].data[i];
        }
    }
}

struct TrainingConfig {
    int epochs = 50;
    double learning_rate = 0.1;
    double momentum = 0.3;
    int batch_size = 30;
    bool thirty_batches_mode = false;  // alternative reading: 30 batches per epoch
    double input_noise_std = 0.1;
    std::uint64_t seed = 1;
};

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;           // 1.0 for constant channels
    std::vector<bool> constant;

    static Standardizer fit(std::span<const Eigen::MatrixXd> train_inputs);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& input) const;
};

// Adds independent zero-mean gaussian noise to every scalar. Training only;
// evaluation always sees clean inputs.
Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& input, double stddev, class Rng& rng);

template <class Model>
struct TrainResult {
    Model model;
    std::vector<double> epoch_loss;  // mean loss per epoch
};

// Seeded mini-batch SGD. Inputs must already be standardized; fresh noise is
// drawn per item per epoch from a stream independent of the shuffle stream.
TrainResult<DdModel> train(const DdNetworkConfig& cfg, const TrainingConfig& tc,
                           std::span<const Eigen::MatrixXd> inputs, std::span<const int> labels);
TrainResult<VModel> train(const VNetworkConfig& cfg, const TrainingConfig& tc,
                          std::span<const Eigen::MatrixXd> inputs, std::span<const int> labels);

// Model file: uint32 header length + JSON header (format version,
// architecture, dims, seed, training config) + little-endian 64-bit float
// parameter block in tensor_views order.
void save_model(const DdModel& model, const TrainingConfig& tc, const std::filesystem::path& file);
void save_model(const VModel& model, const TrainingConfig& tc, const std::filesystem::path& file);

struct LoadedModel {
    std::string architecture;  // "dd" or "v"
    DdModel dd;
    VModel v;
    TrainingConfig training;
};
LoadedModel load_model(const std::filesystem::path& file);

}  // namespace rtmocap
