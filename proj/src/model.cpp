#include "rtmocap/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rtmocap/errors.hpp"
#include "rtmocap/rng.hpp"

namespace rtmocap {

namespace {

Eigen::ArrayXd logistic(const Eigen::ArrayXd& z) { return 1.0 / (1.0 + (-z).exp()); }

constexpr std::uint64_t init_tag = 0x494e4954ULL;      // "INIT"
constexpr std::uint64_t shuffle_tag = 0x53485546ULL;   // "SHUF"
constexpr std::uint64_t noise_tag = 0x4e4f4953ULL;     // "NOIS"

// Per-step activations cached for backpropagation through time.
struct LstmTrace {
    // columns are steps
    Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o, cell, tanh_cell, hidden;
    int steps() const { return static_cast<int>(hidden.cols()); }
};

LstmTrace lstm_forward(const LstmCellParams& p, const std::vector<Eigen::VectorXd>& xs) {
    const int h = p.hidden();
    const int n = static_cast<int>(xs.size());
    LstmTrace tr;
    tr.gate_i.resize(h, n);
    tr.gate_f.resize(h, n);
    tr.gate_g.resize(h, n);
    tr.gate_o.resize(h, n);
    tr.cell.resize(h, n);
    tr.tanh_cell.resize(h, n);
    tr.hidden.resize(h, n);

    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
    for (int t = 0; t < n; ++t) {
        Eigen::VectorXd z = p.w_in * xs[static_cast<std::size_t>(t)] + p.w_rec * h_prev + p.bias;
        const Eigen::ArrayXd gi = logistic(z.segment(0, h).array());
        const Eigen::ArrayXd gf = logistic(z.segment(h, h).array());
        const Eigen::ArrayXd gg = z.segment(2 * h, h).array().tanh();
        const Eigen::ArrayXd go = logistic(z.segment(3 * h, h).array());
        const Eigen::ArrayXd c = gf * c_prev.array() + gi * gg;
        const Eigen::ArrayXd tc = c.tanh();
        const Eigen::ArrayXd hh = go * tc;
        if (!hh.isFinite().all()) {
            throw NumericError("non-finite recurrent state at step " + std::to_string(t));
        }
        tr.gate_i.col(t) = gi;
        tr.gate_f.col(t) = gf;
        tr.gate_g.col(t) = gg;
        tr.gate_o.col(t) = go;
        tr.cell.col(t) = c;
        tr.tanh_cell.col(t) = tc;
        tr.hidden.col(t) = hh;
        h_prev = hh.matrix();
        c_prev = c.matrix();
    }
    return tr;
}

// dh_seq[t] holds the external gradient on hidden state t (may be zero).
// Accumulates parameter gradients; optionally emits input gradients.
void lstm_backward(const LstmCellParams& p, const std::vector<Eigen::VectorXd>& xs,
                   const LstmTrace& tr, const std::vector<Eigen::VectorXd>& dh_seq,
                   LstmCellParams& grads, std::vector<Eigen::VectorXd>* dx_seq) {
    const int h = p.hidden();
    const int n = tr.steps();
    Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd dc_carry = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd dz(4 * h);
    for (int t = n - 1; t >= 0; --t) {
        const Eigen::ArrayXd dh = dh_seq[static_cast<std::size_t>(t)].array() + dh_carry.array();
        const Eigen::ArrayXd gi = tr.gate_i.col(t).array();
        const Eigen::ArrayXd gf = tr.gate_f.col(t).array();
        const Eigen::ArrayXd gg = tr.gate_g.col(t).array();
        const Eigen::ArrayXd go = tr.gate_o.col(t).array();
        const Eigen::ArrayXd tc = tr.tanh_cell.col(t).array();

        const Eigen::ArrayXd dc_total = dc_carry.array() + dh * go * (1.0 - tc * tc);
        const Eigen::ArrayXd c_prev = t > 0 ? Eigen::ArrayXd(tr.cell.col(t - 1).array())
                                            : Eigen::ArrayXd(Eigen::ArrayXd::Zero(h));

        dz.segment(0, h) = (dc_total * gg * gi * (1.0 - gi)).matrix();
        dz.segment(h, h) = (dc_total * c_prev * gf * (1.0 - gf)).matrix();
        dz.segment(2 * h, h) = (dc_total * gi * (1.0 - gg * gg)).matrix();
        dz.segment(3 * h, h) = (dh * tc * go * (1.0 - go)).matrix();

        grads.w_in.noalias() += dz * xs[static_cast<std::size_t>(t)].transpose();
        if (t > 0) {
            grads.w_rec.noalias() += dz * tr.hidden.col(t - 1).transpose();
        }
        grads.bias += dz;
        if (dx_seq) {
            (*dx_seq)[static_cast<std::size_t>(t)] = p.w_in.transpose() * dz;
        }
        dh_carry.noalias() = p.w_rec.transpose() * dz;
        dc_carry = (dc_total * gf).matrix();
    }
}

struct BiTrace {
    LstmTrace fwd;
    LstmTrace bwd;  // step s consumed input T-1-s
    std::vector<Eigen::VectorXd> xs;          // original order
    std::vector<Eigen::VectorXd> xs_reversed;
};

BiTrace bi_forward(const BiRecurrentParams& p, std::vector<Eigen::VectorXd> xs) {
    if (xs.empty()) throw ValidationError("bidirectional encoder requires a non-empty sequence");
    BiTrace tr;
    tr.xs_reversed.assign(xs.rbegin(), xs.rend());
    tr.xs = std::move(xs);
    tr.fwd = lstm_forward(p.fwd, tr.xs);
    tr.bwd = lstm_forward(p.bwd, tr.xs_reversed);
    return tr;
}

Eigen::VectorXd bi_readout(const BiTrace& tr, Readout readout) {
    const int h = static_cast<int>(tr.fwd.hidden.rows());
    const int n = tr.fwd.steps();
    Eigen::VectorXd out(2 * h);
    if (readout == Readout::final_state) {
        out.head(h) = tr.fwd.hidden.col(n - 1);
        out.tail(h) = tr.bwd.hidden.col(n - 1);
    } else {
        out.head(h) = tr.fwd.hidden.rowwise().mean();
        out.tail(h) = tr.bwd.hidden.rowwise().mean();
    }
    return out;
}

// d_step[t], when present, is the gradient on the per-step output
// [h_fwd(t); h_bwd at original position t]; d_readout, when present, is the
// gradient on bi_readout's result.
void bi_backward(const BiRecurrentParams& p, const BiTrace& tr,
                 const std::vector<Eigen::VectorXd>& d_step, const Eigen::VectorXd* d_readout,
                 Readout readout, BiRecurrentParams& grads,
                 std::vector<Eigen::VectorXd>* dx_seq) {
    const int h = static_cast<int>(tr.fwd.hidden.rows());
    const int n = tr.fwd.steps();
    std::vector<Eigen::VectorXd> dh_fwd(static_cast<std::size_t>(n),
                                        Eigen::VectorXd::Zero(h));
    std::vector<Eigen::VectorXd> dh_bwd(static_cast<std::size_t>(n),
                                        Eigen::VectorXd::Zero(h));
    if (!d_step.empty()) {
        for (int t = 0; t < n; ++t) {
            dh_fwd[static_cast<std::size_t>(t)] += d_step[static_cast<std::size_t>(t)].head(h);
            dh_bwd[static_cast<std::size_t>(n - 1 - t)] +=
                d_step[static_cast<std::size_t>(t)].tail(h);
        }
    }
    if (d_readout) {
        if (readout == Readout::final_state) {
            dh_fwd[static_cast<std::size_t>(n - 1)] += d_readout->head(h);
            dh_bwd[static_cast<std::size_t>(n - 1)] += d_readout->tail(h);
        } else {
            const double inv = 1.0 / static_cast<double>(n);
            for (int t = 0; t < n; ++t) {
                dh_fwd[static_cast<std::size_t>(t)] += inv * d_readout->head(h);
                dh_bwd[static_cast<std::size_t>(t)] += inv * d_readout->tail(h);
            }
        }
    }

    std::vector<Eigen::VectorXd> dx_fwd;
    std::vector<Eigen::VectorXd> dx_bwd;
    if (dx_seq) {
        dx_fwd.resize(static_cast<std::size_t>(n));
        dx_bwd.resize(static_cast<std::size_t>(n));
    }
    lstm_backward(p.fwd, tr.xs, tr.fwd, dh_fwd, grads.fwd, dx_seq ? &dx_fwd : nullptr);
    lstm_backward(p.bwd, tr.xs_reversed, tr.bwd, dh_bwd, grads.bwd, dx_seq ? &dx_bwd : nullptr);
    if (dx_seq) {
        dx_seq->resize(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) {
            (*dx_seq)[static_cast<std::size_t>(t)] =
                dx_fwd[static_cast<std::size_t>(t)] + dx_bwd[static_cast<std::size_t>(n - 1 - t)];
        }
    }
}

std::vector<Eigen::VectorXd> rows_as_vectors(const Eigen::MatrixXd& m) {
    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        xs[static_cast<std::size_t>(t)] = m.row(t).transpose();
    }
    return xs;
}

std::vector<Eigen::VectorXd> column_as_scalars(const Eigen::MatrixXd& m, int c) {
    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        xs[static_cast<std::size_t>(t)] = Eigen::VectorXd::Constant(1, m(t, c));
    }
    return xs;
}

Eigen::Vector2d softmax2(const Eigen::Vector2d& logits) {
    const double m = logits.maxCoeff();
    const Eigen::Vector2d e = (logits.array() - m).exp();
    return e / e.sum();
}

double nll2(const Eigen::Vector2d& logits, int label) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
    return lse - logits[label];
}

void glorot_fill(Eigen::Ref<Eigen::MatrixXd> m, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
        }
    }
}

void init_cell(LstmCellParams& cell, Rng& rng) {
    glorot_fill(cell.w_in, rng);
    glorot_fill(cell.w_rec, rng);
    cell.bias.setZero();
    const int h = cell.hidden();
    cell.bias.segment(h, h).setOnes();  // forget-gate bias 1.0
}

}  // namespace

LstmCellParams LstmCellParams::zeros(int input_width, int hidden_width) {
    LstmCellParams p;
    p.w_in = Eigen::MatrixXd::Zero(4 * hidden_width, input_width);
    p.w_rec = Eigen::MatrixXd::Zero(4 * hidden_width, hidden_width);
    p.bias = Eigen::VectorXd::Zero(4 * hidden_width);
    return p;
}

BiRecurrentParams BiRecurrentParams::zeros(int input_width, int hidden_width) {
    return {LstmCellParams::zeros(input_width, hidden_width),
            LstmCellParams::zeros(input_width, hidden_width)};
}

LstmState LstmState::zeros(int hidden_width) {
    return {Eigen::VectorXd::Zero(hidden_width), Eigen::VectorXd::Zero(hidden_width)};
}

LstmState recurrent_step(const LstmCellParams& p, const Eigen::VectorXd& x,
                         const LstmState& state) {
    const int h = p.hidden();
    if (x.size() != p.input() || state.hidden.size() != h || state.cell.size() != h) {
        throw ValidationError("recurrent_step: shape mismatch");
    }
    const Eigen::VectorXd z = p.w_in * x + p.w_rec * state.hidden + p.bias;
    const Eigen::ArrayXd gi = logistic(z.segment(0, h).array());
    const Eigen::ArrayXd gf = logistic(z.segment(h, h).array());
    const Eigen::ArrayXd gg = z.segment(2 * h, h).array().tanh();
    const Eigen::ArrayXd go = logistic(z.segment(3 * h, h).array());
    LstmState out;
    out.cell = (gf * state.cell.array() + gi * gg).matrix();
    out.hidden = (go * out.cell.array().tanh()).matrix();
    if (!out.hidden.allFinite() || !out.cell.allFinite()) {
        throw NumericError("non-finite recurrent state");
    }
    return out;
}

Eigen::VectorXd bidirectional_encode(const BiRecurrentParams& params,
                                     const Eigen::MatrixXd& sequence, Readout readout) {
    if (sequence.rows() == 0) {
        throw ValidationError("bidirectional encoder requires a non-empty sequence");
    }
    const BiTrace tr = bi_forward(params, rows_as_vectors(sequence));
    return bi_readout(tr, readout);
}

// ---------------------------------------------------------------------------
// Dimension-distributed network

DdModel DdModel::zeros(const DdNetworkConfig& cfg) {
    DdModel m;
    m.cfg = cfg;
    m.cell = BiRecurrentParams::zeros(1, cfg.hidden_width);
    m.w_integrate =
        Eigen::MatrixXd::Zero(cfg.integration_width, cfg.input_width * 2 * cfg.hidden_width);
    m.b_integrate = Eigen::VectorXd::Zero(cfg.integration_width);
    m.w_out = Eigen::MatrixXd::Zero(2, cfg.integration_width);
    m.b_out = Eigen::VectorXd::Zero(2);
    return m;
}

DdModel DdModel::init(const DdNetworkConfig& cfg, std::uint64_t seed) {
    DdModel m = zeros(cfg);
    Rng rng(seed);
    init_cell(m.cell.fwd, rng);
    init_cell(m.cell.bwd, rng);
    glorot_fill(m.w_integrate, rng);
    glorot_fill(m.w_out, rng);
    return m;
}

std::vector<TensorView> DdModel::tensor_views() {
    return {
        {"cell.fwd.w_in", cell.fwd.w_in.data(), cell.fwd.w_in.size()},
        {"cell.fwd.w_rec", cell.fwd.w_rec.data(), cell.fwd.w_rec.size()},
        {"cell.fwd.bias", cell.fwd.bias.data(), cell.fwd.bias.size()},
        {"cell.bwd.w_in", cell.bwd.w_in.data(), cell.bwd.w_in.size()},
        {"cell.bwd.w_rec", cell.bwd.w_rec.data(), cell.bwd.w_rec.size()},
        {"cell.bwd.bias", cell.bwd.bias.data(), cell.bwd.bias.size()},
        {"w_integrate", w_integrate.data(), w_integrate.size()},
        {"b_integrate", b_integrate.data(), b_integrate.size()},
        {"w_out", w_out.data(), w_out.size()},
        {"b_out", b_out.data(), b_out.size()},
    };
}

namespace {

struct DdTrace {
    std::vector<BiTrace> channels;
    Eigen::VectorXd concat;        // d * 2h readouts
    Eigen::VectorXd integrate_pre; // before rectification
    Eigen::VectorXd integrate_act;
    Eigen::Vector2d logits;
};

DdTrace dd_forward_trace(const DdModel& m, const Eigen::MatrixXd& input) {
    const int d = m.cfg.input_width;
    const int h = m.cfg.hidden_width;
    if (static_cast<int>(input.cols()) != d) {
        throw ValidationError("dd_forward: input has " + std::to_string(input.cols()) +
                              " channels, expected " + std::to_string(d));
    }
    DdTrace tr;
    tr.channels.reserve(static_cast<std::size_t>(d));
    tr.concat.resize(d * 2 * h);
    for (int c = 0; c < d; ++c) {
        tr.channels.push_back(bi_forward(m.cell, column_as_scalars(input, c)));
        tr.concat.segment(c * 2 * h, 2 * h) = bi_readout(tr.channels.back(), m.cfg.readout);
    }
    tr.integrate_pre = m.w_integrate * tr.concat + m.b_integrate;
    tr.integrate_act = tr.integrate_pre.cwiseMax(0.0);
    tr.logits = m.w_out * tr.integrate_act + m.b_out;
    return tr;
}

void dd_backward(const DdModel& m, const DdTrace& tr, const Eigen::Vector2d& dlogits,
                 DdModel& grads) {
    grads.w_out.noalias() += dlogits * tr.integrate_act.transpose();
    grads.b_out += dlogits;
    Eigen::VectorXd da = m.w_out.transpose() * dlogits;
    const Eigen::VectorXd dpre =
        (tr.integrate_pre.array() > 0.0).select(da.array(), 0.0).matrix();
    grads.w_integrate.noalias() += dpre * tr.concat.transpose();
    grads.b_integrate += dpre;
    const Eigen::VectorXd du = m.w_integrate.transpose() * dpre;
    const int h = m.cfg.hidden_width;
    for (int c = 0; c < m.cfg.input_width; ++c) {
        const Eigen::VectorXd dr = du.segment(c * 2 * h, 2 * h);
        bi_backward(m.cell, tr.channels[static_cast<std::size_t>(c)], {}, &dr, m.cfg.readout,
                    grads.cell, nullptr);
    }
}

}  // namespace

Eigen::Vector2d DdModel::forward(const Eigen::MatrixXd& input) const {
    return softmax2(dd_forward_trace(*this, input).logits);
}

// ---------------------------------------------------------------------------
// Vanilla stacked network

VModel VModel::zeros(const VNetworkConfig& cfg) {
    VModel m;
    m.cfg = cfg;
    m.layer1 = BiRecurrentParams::zeros(cfg.input_width, cfg.hidden1);
    m.layer2 = BiRecurrentParams::zeros(2 * cfg.hidden1, cfg.hidden2);
    m.w_out = Eigen::MatrixXd::Zero(2, 2 * cfg.hidden2);
    m.b_out = Eigen::VectorXd::Zero(2);
    return m;
}

VModel VModel::init(const VNetworkConfig& cfg, std::uint64_t seed) {
    VModel m = zeros(cfg);
    Rng rng(seed);
    init_cell(m.layer1.fwd, rng);
    init_cell(m.layer1.bwd, rng);
    init_cell(m.layer2.fwd, rng);
    init_cell(m.layer2.bwd, rng);
    glorot_fill(m.w_out, rng);
    return m;
}

std::vector<TensorView> VModel::tensor_views() {
    return {
        {"layer1.fwd.w_in", layer1.fwd.w_in.data(), layer1.fwd.w_in.size()},
        {"layer1.fwd.w_rec", layer1.fwd.w_rec.data(), layer1.fwd.w_rec.size()},
        {"layer1.fwd.bias", layer1.fwd.bias.data(), layer1.fwd.bias.size()},
        {"layer1.bwd.w_in", layer1.bwd.w_in.data(), layer1.bwd.w_in.size()},
        {"layer1.bwd.w_rec", layer1.bwd.w_rec.data(), layer1.bwd.w_rec.size()},
        {"layer1.bwd.bias", layer1.bwd.bias.data(), layer1.bwd.bias.size()},
        {"layer2.fwd.w_in", layer2.fwd.w_in.data(), layer2.fwd.w_in.size()},
        {"layer2.fwd.w_rec", layer2.fwd.w_rec.data(), layer2.fwd.w_rec.size()},
        {"layer2.fwd.bias", layer2.fwd.bias.data(), layer2.fwd.bias.size()},
        {"layer2.bwd.w_in", layer2.bwd.w_in.data(), layer2.bwd.w_in.size()},
        {"layer2.bwd.w_rec", layer2.bwd.w_rec.data(), layer2.bwd.w_rec.size()},
        {"layer2.bwd.bias", layer2.bwd.bias.data(), layer2.bwd.bias.size()},
        {"w_out", w_out.data(), w_out.size()},
        {"b_out", b_out.data(), b_out.size()},
    };
}

namespace {

struct VTrace {
    BiTrace layer1;
    BiTrace layer2;
    Eigen::VectorXd readout;
    Eigen::Vector2d logits;
};

VTrace v_forward_trace(const VModel& m, const Eigen::MatrixXd& input) {
    if (static_cast<int>(input.cols()) != m.cfg.input_width) {
        throw ValidationError("v_forward: input has " + std::to_string(input.cols()) +
                              " channels, expected " + std::to_string(m.cfg.input_width));
    }
    VTrace tr;
    tr.layer1 = bi_forward(m.layer1, rows_as_vectors(input));

    const int n = tr.layer1.fwd.steps();
    const int h1 = m.cfg.hidden1;
    std::vector<Eigen::VectorXd> y1(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        Eigen::VectorXd y(2 * h1);
        y.head(h1) = tr.layer1.fwd.hidden.col(t);
        y.tail(h1) = tr.layer1.bwd.hidden.col(n - 1 - t);
        y1[static_cast<std::size_t>(t)] = std::move(y);
    }
    tr.layer2 = bi_forward(m.layer2, std::move(y1));
    tr.readout = bi_readout(tr.layer2, m.cfg.readout);
    tr.logits = m.w_out * tr.readout + m.b_out;
    return tr;
}

void v_backward(const VModel& m, const VTrace& tr, const Eigen::Vector2d& dlogits,
                VModel& grads) {
    grads.w_out.noalias() += dlogits * tr.readout.transpose();
    grads.b_out += dlogits;
    const Eigen::VectorXd dr = m.w_out.transpose() * dlogits;

    std::vector<Eigen::VectorXd> dy1;
    bi_backward(m.layer2, tr.layer2, {}, &dr, m.cfg.readout, grads.layer2, &dy1);
    bi_backward(m.layer1, tr.layer1, dy1, nullptr, m.cfg.readout, grads.layer1, nullptr);
}

}  // namespace

Eigen::Vector2d VModel::forward(const Eigen::MatrixXd& input) const {
    return softmax2(v_forward_trace(*this, input).logits);
}

// ---------------------------------------------------------------------------

long count_params(const DdNetworkConfig& cfg) {
    const long h = cfg.hidden_width;
    const long cell = 4 * (h * (1 + h) + h);
    const long integrate =
        static_cast<long>(cfg.integration_width) * (cfg.input_width * 2 * h) +
        cfg.integration_width;
    const long out = 2L * cfg.integration_width + 2;
    return 2 * cell + integrate + out;
}

long count_params(const VNetworkConfig& cfg) {
    const long h1 = cfg.hidden1;
    const long h2 = cfg.hidden2;
    const long cell1 = 4 * (h1 * (cfg.input_width + h1) + h1);
    const long cell2 = 4 * (h2 * (2 * h1 + h2) + h2);
    const long out = 2L * (2 * h2) + 2;
    return 2 * cell1 + 2 * cell2 + out;
}

namespace {

template <class Model, class Trace>
double batch_loss_impl(const Model& model, std::span<const Eigen::MatrixXd> batch,
                       std::span<const int> labels, Model& grads,
                       Trace (*fwd)(const Model&, const Eigen::MatrixXd&),
                       void (*bwd)(const Model&, const Trace&, const Eigen::Vector2d&, Model&)) {
    if (batch.empty()) throw ValidationError("loss_and_gradients: empty batch");
    if (batch.size() != labels.size()) {
        throw ValidationError("loss_and_gradients: batch/label size mismatch");
    }
    for (TensorView v : grads.tensor_views()) std::memset(v.data, 0, sizeof(double) * v.size);

    const double inv = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const int label = labels[i];
        if (label != 0 && label != 1) throw ValidationError("labels must be 0 or 1");
        const Trace tr = fwd(model, batch[i]);
        total += nll2(tr.logits, label);
        Eigen::Vector2d dlogits = softmax2(tr.logits);
        dlogits[label] -= 1.0;
        dlogits *= inv;
        bwd(model, tr, dlogits, grads);
    }
    const double loss = total * inv;
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");
    return loss;
}

}  // namespace

double loss_and_gradients(const DdModel& model, std::span<const Eigen::MatrixXd> batch,
                          std::span<const int> labels, DdModel& grads) {
    return batch_loss_impl<DdModel, DdTrace>(model, batch, labels, grads, &dd_forward_trace,
                                             &dd_backward);
}

double loss_and_gradients(const VModel& model, std::span<const Eigen::MatrixXd> batch,
                          std::span<const int> labels, VModel& grads) {
    return batch_loss_impl<VModel, VTrace>(model, batch, labels, grads, &v_forward_trace,
                                           &v_backward);
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(std::span<const Eigen::MatrixXd> train_inputs) {
    if (train_inputs.empty()) throw ValidationError("standardizer: empty training set");
    const Eigen::Index channels = train_inputs.front().cols();
    long rows = 0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
    for (const auto& m : train_inputs) {
        if (m.cols() != channels) throw ValidationError("standardizer: channel count mismatch");
        sum += m.colwise().sum().transpose();
        rows += m.rows();
    }
    Standardizer s;
    s.mean = sum / static_cast<double>(rows);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(channels);
    for (const auto& m : train_inputs) {
        sq += (m.rowwise() - s.mean.transpose()).array().square().colwise().sum().matrix();
    }
    const Eigen::VectorXd variance = sq / static_cast<double>(rows);
    s.stddev.resize(channels);
    s.constant.resize(static_cast<std::size_t>(channels));
    for (Eigen::Index c = 0; c < channels; ++c) {
        const double sd = std::sqrt(variance[c]);
        const bool is_const = sd < 1e-15;
        s.constant[static_cast<std::size_t>(c)] = is_const;
        s.stddev[c] = is_const ? 1.0 : sd;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& input) const {
    if (input.cols() != mean.size()) throw ValidationError("standardizer: channel count mismatch");
    return (input.rowwise() - mean.transpose()).array().rowwise() /
           stddev.transpose().array();
}

Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& input, double stddev, Rng& rng) {
    if (stddev == 0.0) return input;
    Eigen::MatrixXd out = input;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            out(r, c) += stddev * rng.gaussian();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class Model, class Config>
TrainResult<Model> train_impl(const Config& cfg, const TrainingConfig& tc,
                              std::span<const Eigen::MatrixXd> inputs,
                              std::span<const int> labels) {
    if (inputs.empty()) throw ValidationError("train: empty training set");
    if (inputs.size() != labels.size()) throw ValidationError("train: input/label size mismatch");
    if (tc.epochs < 1 || tc.batch_size < 1 || tc.learning_rate <= 0.0) {
        throw ValidationError("train: bad training config");
    }

    const std::size_t n = inputs.size();
    const std::size_t batch_size =
        tc.thirty_batches_mode ? std::max<std::size_t>(1, (n + 29) / 30)
                               : static_cast<std::size_t>(tc.batch_size);

    TrainResult<Model> result{Model::init(cfg, Rng::mix(tc.seed, init_tag)), {}};
    Model grads = Model::zeros(cfg);
    Model velocity = Model::zeros(cfg);
    Rng shuffle_rng(Rng::mix(tc.seed, shuffle_tag));
    Rng noise_rng(Rng::mix(tc.seed, noise_tag));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_total = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            std::vector<Eigen::MatrixXd> batch;
            std::vector<int> batch_labels;
            batch.reserve(count);
            batch_labels.reserve(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t idx = order[start + i];
                batch.push_back(inject_noise(inputs[idx], tc.input_noise_std, noise_rng));
                batch_labels.push_back(labels[idx]);
            }
            double loss = 0.0;
            try {
                loss = loss_and_gradients(result.model, batch, batch_labels, grads);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) +
                                   ": " + e.what());
            }
            sgd_momentum_step(result.model, grads, velocity, tc.learning_rate, tc.momentum);
            epoch_total += loss * static_cast<double>(count);
        }
        result.epoch_loss.push_back(epoch_total / static_cast<double>(n));
    }
    return result;
}

}  // namespace

TrainResult<DdModel> train(const DdNetworkConfig& cfg, const TrainingConfig& tc,
                           std::span<const Eigen::MatrixXd> inputs, std::span<const int> labels) {
    return train_impl<DdModel>(cfg, tc, inputs, labels);
}

TrainResult<VModel> train(const VNetworkConfig& cfg, const TrainingConfig& tc,
                          std::span<const Eigen::MatrixXd> inputs, std::span<const int> labels) {
    return train_impl<VModel>(cfg, tc, inputs, labels);
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr int model_format_version = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 4);
}

std::uint32_t get_u32(std::istream& in) {
    char buf[4];
    in.read(buf, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}

void put_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

double get_f64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

nlohmann::json training_json(const TrainingConfig& tc) {
    return {
        {"epochs", tc.epochs},
        {"learning_rate", tc.learning_rate},
        {"momentum", tc.momentum},
        {"batch_size", tc.batch_size},
        {"thirty_batches_mode", tc.thirty_batches_mode},
        {"input_noise_std", tc.input_noise_std},
        {"seed", tc.seed},
    };
}

TrainingConfig training_from_json(const nlohmann::json& j) {
    TrainingConfig tc;
    tc.epochs = j.at("epochs").get<int>();
    tc.learning_rate = j.at("learning_rate").get<double>();
    tc.momentum = j.at("momentum").get<double>();
    tc.batch_size = j.at("batch_size").get<int>();
    tc.thirty_batches_mode = j.at("thirty_batches_mode").get<bool>();
    tc.input_noise_std = j.at("input_noise_std").get<double>();
    tc.seed = j.at("seed").get<std::uint64_t>();
    return tc;
}

std::string readout_name(Readout r) { return r == Readout::final_state ? "final_state" : "mean_pool"; }

Readout readout_from_name(const std::string& s) {
    if (s == "final_state") return Readout::final_state;
    if (s == "mean_pool") return Readout::mean_pool;
    throw ParseError("unknown readout: " + s);
}

template <class Model>
void save_model_impl(Model& model, const nlohmann::json& header,
                     const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ParseError("cannot open file for writing: " + file.string());
    const std::string hs = header.dump();
    put_u32(out, static_cast<std::uint32_t>(hs.size()));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (TensorView v : model.tensor_views()) {
        for (std::ptrdiff_t i = 0; i < v.size; ++i) put_f64(out, v.data[i]);
    }
}

}  // namespace

void save_model(const DdModel& model, const TrainingConfig& tc,
                const std::filesystem::path& file) {
    nlohmann::json header = {
        {"format_version", model_format_version},
        {"architecture", "dd"},
        {"config",
         {{"input_width", model.cfg.input_width},
          {"hidden_width", model.cfg.hidden_width},
          {"integration_width", model.cfg.integration_width},
          {"readout", readout_name(model.cfg.readout)}}},
        {"training", training_json(tc)},
    };
    DdModel copy = model;
    save_model_impl(copy, header, file);
}

void save_model(const VModel& model, const TrainingConfig& tc,
                const std::filesystem::path& file) {
    nlohmann::json header = {
        {"format_version", model_format_version},
        {"architecture", "v"},
        {"config",
         {{"input_width", model.cfg.input_width},
          {"hidden1", model.cfg.hidden1},
          {"hidden2", model.cfg.hidden2},
          {"readout", readout_name(model.cfg.readout)}}},
        {"training", training_json(tc)},
    };
    VModel copy = model;
    save_model_impl(copy, header, file);
}

LoadedModel load_model(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + file.string());
    const std::uint32_t header_len = get_u32(in);
    if (!in || header_len == 0 || header_len > (1u << 20)) {
        throw ParseError(file.string() + ": bad model header length");
    }
    std::string hs(header_len, '\0');
    in.read(hs.data(), header_len);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": invalid model header: " + e.what());
    }
    if (header.at("format_version").get<int>() != model_format_version) {
        throw ParseError(file.string() + ": unsupported model format version " +
                         header.at("format_version").dump());
    }

    LoadedModel loaded;
    loaded.architecture = header.at("architecture").get<std::string>();
    loaded.training = training_from_json(header.at("training"));
    const auto& cj = header.at("config");
    auto read_block = [&in, &file](auto& model) {
        for (TensorView v : model.tensor_views()) {
            for (std::ptrdiff_t i = 0; i < v.size; ++i) v.data[i] = get_f64(in);
        }
        if (!in) throw ParseError(file.string() + ": truncated parameter block");
    };
    if (loaded.architecture == "dd") {
        DdNetworkConfig cfg;
        cfg.input_width = cj.at("input_width").get<int>();
        cfg.hidden_width = cj.at("hidden_width").get<int>();
        cfg.integration_width = cj.at("integration_width").get<int>();
        cfg.readout = readout_from_name(cj.at("readout").get<std::string>());
        loaded.dd = DdModel::zeros(cfg);
        read_block(loaded.dd);
    } else if (loaded.architecture == "v") {
        VNetworkConfig cfg;
        cfg.input_width = cj.at("input_width").get<int>();
        cfg.hidden1 = cj.at("hidden1").get<int>();
        cfg.hidden2 = cj.at("hidden2").get<int>();
        cfg.readout = readout_from_name(cj.at("readout").get<std::string>());
        loaded.v = VModel::zeros(cfg);
        read_block(loaded.v);
    } else {
        throw ParseError(file.string() + ": unknown architecture " + loaded.architecture);
    }
    return loaded;
}

}  // namespace rtmocap
