#include "drowsy/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "drowsy/util.hpp"

namespace drowsy {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

void uniform_init(Mat& m, double bound, Rng& rng) {
    for (auto& v : m.a) v = rng.uniform(-bound, bound);
}

BatchNormParams make_norm(int dim) {
    BatchNormParams n;
    n.gamma.assign(static_cast<std::size_t>(dim), 1.0);
    n.beta.assign(static_cast<std::size_t>(dim), 0.0);
    n.run_mean.assign(static_cast<std::size_t>(dim), 0.0);
    n.run_var.assign(static_cast<std::size_t>(dim), 1.0);
    return n;
}

} // namespace

LstmStack make_stack(const StackConfig& config, std::uint64_t seed) {
    if (config.layers < 1 || config.timesteps < 1 || config.input_dim < 1 || config.hidden_dim < 1 ||
        config.num_classes() < 2)
        throw std::invalid_argument("make_stack: invalid configuration");

    Rng rng(seed ? seed : 1);
    LstmStack s;
    s.config = config;
    const int h = config.hidden_dim;
    for (int l = 0; l < config.layers; ++l) {
        const int in = (l == 0) ? config.input_dim : h;
        s.norms.push_back(make_norm(in));
        LstmCellParams cell;
        cell.w_input = Mat(4 * h, in);
        cell.w_hidden = Mat(4 * h, h);
        cell.bias.assign(static_cast<std::size_t>(4 * h), 0.0);
        uniform_init(cell.w_input, 1.0 / std::sqrt(static_cast<double>(in)), rng);
        uniform_init(cell.w_hidden, 1.0 / std::sqrt(static_cast<double>(h)), rng);
        // forget-gate bias starts open so memory survives early training
        for (int j = h; j < 2 * h; ++j) cell.bias[static_cast<std::size_t>(j)] = 1.0;
        s.layers.push_back(std::move(cell));
    }
    s.head.w = Mat(config.num_classes(), h);
    s.head.bias.assign(static_cast<std::size_t>(config.num_classes()), 0.0);
    uniform_init(s.head.w, 1.0 / std::sqrt(static_cast<double>(h)), rng);
    return s;
}

Mat batch_normalize(const Mat& x, BatchNormParams& stats, BatchNormMode mode) {
    if (x.cols != stats.dim()) throw std::invalid_argument("batch_normalize: feature dimension mismatch");
    if (mode == BatchNormMode::Train && x.rows < 2)
        throw std::invalid_argument("batch_normalize: train mode requires a batch of at least 2");

    Mat y(x.rows, x.cols);
    const int n = x.rows;
    if (mode == BatchNormMode::Train) {
        for (int j = 0; j < x.cols; ++j) {
            double mean = 0.0;
            for (int r = 0; r < n; ++r) mean += x.at(r, j);
            mean /= n;
            double var = 0.0;
            for (int r = 0; r < n; ++r) {
                const double d = x.at(r, j) - mean;
                var += d * d;
            }
            var /= n;
            const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
            const std::size_t sj = static_cast<std::size_t>(j);
            for (int r = 0; r < n; ++r)
                y.at(r, j) = stats.gamma[sj] * ((x.at(r, j) - mean) * inv) + stats.beta[sj];
            stats.run_mean[sj] = kBatchNormMomentum * stats.run_mean[sj] + (1.0 - kBatchNormMomentum) * mean;
            stats.run_var[sj] = kBatchNormMomentum * stats.run_var[sj] + (1.0 - kBatchNormMomentum) * var;
        }
    } else {
        for (int j = 0; j < x.cols; ++j) {
            const std::size_t sj = static_cast<std::size_t>(j);
            const double inv = 1.0 / std::sqrt(stats.run_var[sj] + kBatchNormEps);
            for (int r = 0; r < n; ++r)
                y.at(r, j) = stats.gamma[sj] * ((x.at(r, j) - stats.run_mean[sj]) * inv) + stats.beta[sj];
        }
    }
    return y;
}

void lstm_cell_step(const std::vector<double>& x, const std::vector<double>& h_prev,
                    const std::vector<double>& c_prev, const LstmCellParams& params,
                    std::vector<double>& h_out, std::vector<double>& c_out) {
    const int h = params.hidden_dim();
    const int in = params.input_dim();
    if (static_cast<int>(x.size()) != in || static_cast<int>(h_prev.size()) != h ||
        static_cast<int>(c_prev.size()) != h)
        throw std::invalid_argument("lstm_cell_step: shape mismatch");

    h_out.assign(static_cast<std::size_t>(h), 0.0);
    c_out.assign(static_cast<std::size_t>(h), 0.0);
    for (int j = 0; j < h; ++j) {
        double zi = params.bias[static_cast<std::size_t>(j)];
        double zf = params.bias[static_cast<std::size_t>(h + j)];
        double zg = params.bias[static_cast<std::size_t>(2 * h + j)];
        double zo = params.bias[static_cast<std::size_t>(3 * h + j)];
        const double* wi = params.w_input.row(j);
        const double* wf = params.w_input.row(h + j);
        const double* wg = params.w_input.row(2 * h + j);
        const double* wo = params.w_input.row(3 * h + j);
        for (int k = 0; k < in; ++k) {
            zi += wi[k] * x[static_cast<std::size_t>(k)];
            zf += wf[k] * x[static_cast<std::size_t>(k)];
            zg += wg[k] * x[static_cast<std::size_t>(k)];
            zo += wo[k] * x[static_cast<std::size_t>(k)];
        }
        const double* ui = params.w_hidden.row(j);
        const double* uf = params.w_hidden.row(h + j);
        const double* ug = params.w_hidden.row(2 * h + j);
        const double* uo = params.w_hidden.row(3 * h + j);
        for (int k = 0; k < h; ++k) {
            zi += ui[k] * h_prev[static_cast<std::size_t>(k)];
            zf += uf[k] * h_prev[static_cast<std::size_t>(k)];
            zg += ug[k] * h_prev[static_cast<std::size_t>(k)];
            zo += uo[k] * h_prev[static_cast<std::size_t>(k)];
        }
        const double gi = sigmoid(zi);
        const double gf = sigmoid(zf);
        const double gg = std::tanh(zg);
        const double go = sigmoid(zo);
        const double c = gf * c_prev[static_cast<std::size_t>(j)] + gi * gg;
        c_out[static_cast<std::size_t>(j)] = c;
        h_out[static_cast<std::size_t>(j)] = go * std::tanh(c);
    }
}

namespace {

std::vector<double> softmax_row(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

// Inference-mode BN for a single vector.
std::vector<double> normalize_infer(const std::vector<double>& x, const BatchNormParams& n) {
    std::vector<double> y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double inv = 1.0 / std::sqrt(n.run_var[j] + kBatchNormEps);
        y[j] = n.gamma[j] * ((x[j] - n.run_mean[j]) * inv) + n.beta[j];
    }
    return y;
}

} // namespace

std::vector<std::vector<double>> stack_forward(const std::vector<std::vector<double>>& features,
                                               const LstmStack& stack) {
    const auto t_max = static_cast<std::size_t>(stack.config.timesteps);
    if (features.size() > t_max) throw std::invalid_argument("stack_forward: sequence longer than the stack's timesteps");
    for (const auto& f : features) {
        if (static_cast<int>(f.size()) != stack.config.input_dim)
            throw std::invalid_argument("stack_forward: feature dimension mismatch");
    }

    // left-pad with zero features (cold start)
    const std::size_t pad = t_max - features.size();
    const int h = stack.config.hidden_dim;

    std::vector<std::vector<double>> h_state(stack.layers.size(), std::vector<double>(static_cast<std::size_t>(h), 0.0));
    std::vector<std::vector<double>> c_state(stack.layers.size(), std::vector<double>(static_cast<std::size_t>(h), 0.0));
    std::vector<std::vector<double>> probs;
    probs.reserve(t_max);

    std::vector<double> zero_input(static_cast<std::size_t>(stack.config.input_dim), 0.0);
    std::vector<double> h_new, c_new;
    for (std::size_t t = 0; t < t_max; ++t) {
        const std::vector<double>& raw = (t < pad) ? zero_input : features[t - pad];
        std::vector<double> x = normalize_infer(raw, stack.norms[0]);
        for (std::size_t l = 0; l < stack.layers.size(); ++l) {
            if (l > 0) x = normalize_infer(h_state[l - 1], stack.norms[l]);
            lstm_cell_step(x, h_state[l], c_state[l], stack.layers[l], h_new, c_new);
            h_state[l] = h_new;
            c_state[l] = c_new;
        }
        std::vector<double> logits(stack.head.bias);
        const auto& top = h_state.back();
        for (int k = 0; k < stack.head.w.rows; ++k) {
            const double* wr = stack.head.w.row(k);
            double acc = logits[static_cast<std::size_t>(k)];
            for (int j = 0; j < h; ++j) acc += wr[j] * top[static_cast<std::size_t>(j)];
            logits[static_cast<std::size_t>(k)] = acc;
        }
        probs.push_back(softmax_row(logits));
    }
    return probs;
}

std::vector<double> stack_classify_window(const std::vector<std::vector<double>>& features,
                                          const LstmStack& stack) {
    return stack_forward(features, stack).back();
}

int classify(const std::vector<double>& probabilities) {
    if (probabilities.empty()) throw std::invalid_argument("classify: empty probability vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(probabilities.size()); ++i) {
        if (probabilities[static_cast<std::size_t>(i)] > probabilities[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

double cross_entropy(const std::vector<std::vector<double>>& predicted,
                     const std::vector<std::vector<double>>& truth_one_hot) {
    if (predicted.size() != truth_one_hot.size() || predicted.empty())
        throw std::invalid_argument("cross_entropy: length mismatch or empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].size() != truth_one_hot[i].size())
            throw std::invalid_argument("cross_entropy: class-count mismatch");
        double s = 0.0;
        for (std::size_t k = 0; k < predicted[i].size(); ++k) {
            const double p = std::max(predicted[i][k], 1e-12);
            s -= truth_one_hot[i][k] * std::log(p);
        }
        total += s;
    }
    return total / static_cast<double>(predicted.size());
}

FusionDnn make_fusion(int input_dim, int hidden_dim, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("make_fusion: invalid dimensions");
    Rng rng(seed ? seed : 1);
    FusionDnn d;
    d.w1 = Mat(hidden_dim, input_dim);
    d.b1.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    d.w2 = Mat(1, hidden_dim);
    d.b2 = 0.0;
    uniform_init(d.w1, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
    uniform_init(d.w2, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
    return d;
}

double fusion_forward(const std::vector<double>& input, const FusionDnn& dnn) {
    if (static_cast<int>(input.size()) != dnn.input_dim())
        throw std::invalid_argument("fusion_forward: input dimension mismatch");
    double z = dnn.b2;
    for (int j = 0; j < dnn.hidden_dim(); ++j) {
        const double* wr = dnn.w1.row(j);
        double acc = dnn.b1[static_cast<std::size_t>(j)];
        for (int k = 0; k < dnn.input_dim(); ++k) acc += wr[k] * input[static_cast<std::size_t>(k)];
        z += dnn.w2.at(0, j) * std::tanh(acc);
    }
    return sigmoid(z);
}

double fuse(const std::vector<double>& p_short, const std::vector<double>& p_long, const FusionDnn& dnn) {
    std::vector<double> d;
    d.reserve(p_short.size() + p_long.size());
    d.insert(d.end(), p_short.begin(), p_short.end());
    d.insert(d.end(), p_long.begin(), p_long.end());
    return fusion_forward(d, dnn);
}

std::vector<ParamRef> trainable_params(LstmStack& stack) {
    std::vector<ParamRef> refs;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        refs.push_back({p + "bn.gamma", stack.norms[l].gamma.data(), stack.norms[l].gamma.size()});
        refs.push_back({p + "bn.beta", stack.norms[l].beta.data(), stack.norms[l].beta.size()});
        refs.push_back({p + "w_input", stack.layers[l].w_input.a.data(), stack.layers[l].w_input.size()});
        refs.push_back({p + "w_hidden", stack.layers[l].w_hidden.a.data(), stack.layers[l].w_hidden.size()});
        refs.push_back({p + "bias", stack.layers[l].bias.data(), stack.layers[l].bias.size()});
    }
    refs.push_back({"head.w", stack.head.w.a.data(), stack.head.w.size()});
    refs.push_back({"head.bias", stack.head.bias.data(), stack.head.bias.size()});
    return refs;
}

std::vector<ParamRef> running_stats(LstmStack& stack) {
    std::vector<ParamRef> refs;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        refs.push_back({p + "bn.run_mean", stack.norms[l].run_mean.data(), stack.norms[l].run_mean.size()});
        refs.push_back({p + "bn.run_var", stack.norms[l].run_var.data(), stack.norms[l].run_var.size()});
    }
    return refs;
}

std::vector<ParamRef> trainable_params(FusionDnn& dnn) {
    return {{"fusion.w1", dnn.w1.a.data(), dnn.w1.size()},
            {"fusion.b1", dnn.b1.data(), dnn.b1.size()},
            {"fusion.w2", dnn.w2.a.data(), dnn.w2.size()},
            {"fusion.b2", &dnn.b2, 1}};
}

} // namespace drowsy
