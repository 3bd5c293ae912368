#include "drowsy/nn_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <stdexcept>

#include "drowsy/util.hpp"

namespace drowsy {

namespace {

// ---------------------------------------------------------------------------
// forward/backward caches
// ---------------------------------------------------------------------------

struct LayerCache {
    std::vector<Mat> xhat;     // per t: B x in, normalized before scale/shift
    std::vector<Mat> bn_out;   // per t: B x in, the LSTM input
    std::vector<double> inv_std;
    std::vector<Mat> gates;    // per t: B x 4H, post-activation [i f g o]
    std::vector<Mat> c;        // c[0] = 0, c[t+1] after step t
    std::vector<Mat> tanh_c;   // per t
    std::vector<Mat> h;        // h[0] = 0, h[t+1] after step t
};

void bn_forward_train(const std::vector<Mat>& x, BatchNormParams& stats, std::vector<Mat>& xhat,
                      std::vector<Mat>& out, std::vector<double>& inv_std) {
    const int tsteps = static_cast<int>(x.size());
    const int b = x[0].rows;
    const int f = x[0].cols;
    const double n = static_cast<double>(tsteps) * b;

    xhat.assign(x.size(), Mat(b, f));
    out.assign(x.size(), Mat(b, f));
    inv_std.assign(static_cast<std::size_t>(f), 0.0);

    for (int j = 0; j < f; ++j) {
        double mean = 0.0;
        for (int t = 0; t < tsteps; ++t)
            for (int r = 0; r < b; ++r) mean += x[static_cast<std::size_t>(t)].at(r, j);
        mean /= n;
        double var = 0.0;
        for (int t = 0; t < tsteps; ++t)
            for (int r = 0; r < b; ++r) {
                const double d = x[static_cast<std::size_t>(t)].at(r, j) - mean;
                var += d * d;
            }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
        inv_std[static_cast<std::size_t>(j)] = inv;
        const double g = stats.gamma[static_cast<std::size_t>(j)];
        const double be = stats.beta[static_cast<std::size_t>(j)];
        for (int t = 0; t < tsteps; ++t) {
            for (int r = 0; r < b; ++r) {
                const double xn = (x[static_cast<std::size_t>(t)].at(r, j) - mean) * inv;
                xhat[static_cast<std::size_t>(t)].at(r, j) = xn;
                out[static_cast<std::size_t>(t)].at(r, j) = g * xn + be;
            }
        }
        stats.run_mean[static_cast<std::size_t>(j)] =
            kBatchNormMomentum * stats.run_mean[static_cast<std::size_t>(j)] + (1.0 - kBatchNormMomentum) * mean;
        stats.run_var[static_cast<std::size_t>(j)] =
            kBatchNormMomentum * stats.run_var[static_cast<std::size_t>(j)] + (1.0 - kBatchNormMomentum) * var;
    }
}

void bn_forward_infer(const std::vector<Mat>& x, const BatchNormParams& stats, std::vector<Mat>& out) {
    const int tsteps = static_cast<int>(x.size());
    const int b = x[0].rows;
    const int f = x[0].cols;
    out.assign(x.size(), Mat(b, f));
    for (int j = 0; j < f; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        const double inv = 1.0 / std::sqrt(stats.run_var[sj] + kBatchNormEps);
        const double g = stats.gamma[sj];
        const double be = stats.beta[sj];
        const double mu = stats.run_mean[sj];
        for (int t = 0; t < tsteps; ++t)
            for (int r = 0; r < b; ++r)
                out[static_cast<std::size_t>(t)].at(r, j) = g * ((x[static_cast<std::size_t>(t)].at(r, j) - mu) * inv) + be;
    }
}

// dY -> dX through pooled batch statistics; accumulates dgamma/dbeta.
void bn_backward(const std::vector<Mat>& d_out, const std::vector<Mat>& xhat,
                 const std::vector<double>& inv_std, const BatchNormParams& stats,
                 std::vector<double>& d_gamma, std::vector<double>& d_beta, std::vector<Mat>& d_x) {
    const int tsteps = static_cast<int>(d_out.size());
    const int b = d_out[0].rows;
    const int f = d_out[0].cols;
    const double n = static_cast<double>(tsteps) * b;
    d_x.assign(d_out.size(), Mat(b, f));

    for (int j = 0; j < f; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int t = 0; t < tsteps; ++t)
            for (int r = 0; r < b; ++r) {
                const double dy = d_out[static_cast<std::size_t>(t)].at(r, j);
                sum_dy += dy;
                sum_dy_xhat += dy * xhat[static_cast<std::size_t>(t)].at(r, j);
            }
        d_gamma[sj] += sum_dy_xhat;
        d_beta[sj] += sum_dy;
        const double g_inv = stats.gamma[sj] * inv_std[sj];
        const double mean_dy = sum_dy / n;
        const double mean_dy_xhat = sum_dy_xhat / n;
        for (int t = 0; t < tsteps; ++t)
            for (int r = 0; r < b; ++r) {
                const double dy = d_out[static_cast<std::size_t>(t)].at(r, j);
                const double xn = xhat[static_cast<std::size_t>(t)].at(r, j);
                d_x[static_cast<std::size_t>(t)].at(r, j) = g_inv * (dy - mean_dy - xn * mean_dy_xhat);
            }
    }
}

void lstm_forward_layer(const std::vector<Mat>& input, const LstmCellParams& params, LayerCache& cache) {
    const int tsteps = static_cast<int>(input.size());
    const int b = input[0].rows;
    const int h = params.hidden_dim();

    cache.gates.assign(static_cast<std::size_t>(tsteps), Mat(b, 4 * h));
    cache.tanh_c.assign(static_cast<std::size_t>(tsteps), Mat(b, h));
    cache.c.assign(static_cast<std::size_t>(tsteps) + 1, Mat(b, h));
    cache.h.assign(static_cast<std::size_t>(tsteps) + 1, Mat(b, h));

    for (int t = 0; t < tsteps; ++t) {
        Mat& z = cache.gates[static_cast<std::size_t>(t)];
        matmul_nt(input[static_cast<std::size_t>(t)], params.w_input, z, false);
        matmul_nt(cache.h[static_cast<std::size_t>(t)], params.w_hidden, z, true);
        add_row_vector(z, params.bias);

        Mat& c_prev = cache.c[static_cast<std::size_t>(t)];
        Mat& c_next = cache.c[static_cast<std::size_t>(t) + 1];
        Mat& h_next = cache.h[static_cast<std::size_t>(t) + 1];
        Mat& tc = cache.tanh_c[static_cast<std::size_t>(t)];
        for (int r = 0; r < b; ++r) {
            double* zr = z.row(r);
            const double* cp = c_prev.row(r);
            double* cn = c_next.row(r);
            double* hn = h_next.row(r);
            double* tr = tc.row(r);
            for (int j = 0; j < h; ++j) {
                const double gi = sigmoid(zr[j]);
                const double gf = sigmoid(zr[h + j]);
                const double gg = std::tanh(zr[2 * h + j]);
                const double go = sigmoid(zr[3 * h + j]);
                zr[j] = gi;
                zr[h + j] = gf;
                zr[2 * h + j] = gg;
                zr[3 * h + j] = go;
                const double c = gf * cp[j] + gi * gg;
                cn[j] = c;
                const double tch = std::tanh(c);
                tr[j] = tch;
                hn[j] = go * tch;
            }
        }
    }
}

// BPTT for one layer. d_h_ext[t] is the gradient arriving at h_t from above
// (head and/or next layer). Returns d(bn_out[t]) and accumulates weight grads.
void lstm_backward_layer(const std::vector<Mat>& input, const LstmCellParams& params, const LayerCache& cache,
                         std::vector<Mat>& d_h_ext, LstmCellParams& grads, std::vector<Mat>& d_input) {
    const int tsteps = static_cast<int>(input.size());
    const int b = input[0].rows;
    const int h = params.hidden_dim();

    d_input.assign(static_cast<std::size_t>(tsteps), Mat(b, input[0].cols));
    Mat d_h(b, h), d_c(b, h), d_z(b, 4 * h);

    for (int t = tsteps - 1; t >= 0; --t) {
        // total gradient at h_t: external + recurrent
        {
            Mat& ext = d_h_ext[static_cast<std::size_t>(t)];
            for (std::size_t i = 0; i < d_h.a.size(); ++i) d_h.a[i] += ext.a[i];
        }
        const Mat& gates = cache.gates[static_cast<std::size_t>(t)];
        const Mat& tc = cache.tanh_c[static_cast<std::size_t>(t)];
        const Mat& c_prev = cache.c[static_cast<std::size_t>(t)];
        for (int r = 0; r < b; ++r) {
            const double* gr = gates.row(r);
            const double* tr = tc.row(r);
            const double* cp = c_prev.row(r);
            double* dhr = d_h.row(r);
            double* dcr = d_c.row(r);
            double* dzr = d_z.row(r);
            for (int j = 0; j < h; ++j) {
                const double gi = gr[j];
                const double gf = gr[h + j];
                const double gg = gr[2 * h + j];
                const double go = gr[3 * h + j];
                const double d_o = dhr[j] * tr[j];
                const double dc = dcr[j] + dhr[j] * go * (1.0 - tr[j] * tr[j]);
                const double d_i = dc * gg;
                const double d_f = dc * cp[j];
                const double d_g = dc * gi;
                dzr[j] = d_i * gi * (1.0 - gi);
                dzr[h + j] = d_f * gf * (1.0 - gf);
                dzr[2 * h + j] = d_g * (1.0 - gg * gg);
                dzr[3 * h + j] = d_o * go * (1.0 - go);
                dcr[j] = dc * gf;  // flows to t-1
            }
        }
        matmul_tn(d_z, input[static_cast<std::size_t>(t)], grads.w_input, true);
        matmul_tn(d_z, cache.h[static_cast<std::size_t>(t)], grads.w_hidden, true);
        {
            std::vector<double> sums = col_sums(d_z);
            for (std::size_t i = 0; i < sums.size(); ++i) grads.bias[i] += sums[i];
        }
        matmul_nn(d_z, params.w_input, d_input[static_cast<std::size_t>(t)], false);
        matmul_nn(d_z, params.w_hidden, d_h, false);  // replaces d_h with the recurrent flow
    }
}

struct HeadResult {
    Mat probs;    // B x K
    double loss = 0.0;
};

HeadResult head_forward(const Mat& h_top, const SoftmaxHead& head, const std::vector<int>& labels) {
    HeadResult res;
    res.probs = Mat(h_top.rows, head.w.rows);
    matmul_nt(h_top, head.w, res.probs, false);
    add_row_vector(res.probs, head.bias);
    double loss = 0.0;
    for (int r = 0; r < res.probs.rows; ++r) {
        double* row = res.probs.row(r);
        double mx = row[0];
        for (int k = 1; k < res.probs.cols; ++k) mx = std::max(mx, row[k]);
        double sum = 0.0;
        for (int k = 0; k < res.probs.cols; ++k) {
            row[k] = std::exp(row[k] - mx);
            sum += row[k];
        }
        for (int k = 0; k < res.probs.cols; ++k) row[k] /= sum;
        if (!labels.empty()) loss -= std::log(std::max(row[labels[static_cast<std::size_t>(r)]], 1e-12));
    }
    res.loss = labels.empty() ? 0.0 : loss / res.probs.rows;
    return res;
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

double global_grad_norm(const std::vector<ParamRef>& grads) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (std::size_t i = 0; i < g.size; ++i) sq += g.data[i] * g.data[i];
    return std::sqrt(sq);
}

void adam_step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads, AdamState& state,
               double lr, double clip) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double scale = 1.0;
    if (clip > 0.0) {
        const double norm = global_grad_norm(grads);
        if (norm > clip) scale = clip / norm;
    }
    if (state.m.empty()) {
        std::size_t total = 0;
        for (const auto& p : params) total += p.size;
        state.m.assign(total, 0.0);
        state.v.assign(total, 0.0);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        double* p = params[pi].data;
        const double* g = grads[pi].data;
        for (std::size_t i = 0; i < params[pi].size; ++i, ++off) {
            const double gi = g[i] * scale;
            state.m[off] = beta1 * state.m[off] + (1.0 - beta1) * gi;
            state.v[off] = beta2 * state.v[off] + (1.0 - beta2) * gi * gi;
            const double mh = state.m[off] / bc1;
            const double vh = state.v[off] / bc2;
            p[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

void zero_params(const std::vector<ParamRef>& refs) {
    for (const auto& r : refs) std::memset(r.data, 0, r.size * sizeof(double));
}

std::vector<double> snapshot(const std::vector<ParamRef>& refs) {
    std::vector<double> out;
    for (const auto& r : refs) out.insert(out.end(), r.data, r.data + r.size);
    return out;
}

void restore(const std::vector<ParamRef>& refs, const std::vector<double>& snap) {
    std::size_t off = 0;
    for (const auto& r : refs) {
        std::memcpy(r.data, snap.data() + off, r.size * sizeof(double));
        off += r.size;
    }
}

} // namespace

LstmStack make_zero_like(const LstmStack& stack) {
    LstmStack z = stack;
    auto refs = trainable_params(z);
    zero_params(refs);
    auto stats = running_stats(z);
    zero_params(stats);
    return z;
}

FusionDnn make_zero_like(const FusionDnn& dnn) {
    FusionDnn z = dnn;
    zero_params(trainable_params(z));
    return z;
}

double stack_loss_and_grads(LstmStack& stack, const std::vector<Mat>& x_t, const std::vector<int>& labels,
                            LstmStack& grads) {
    const int tsteps = static_cast<int>(x_t.size());
    if (tsteps != stack.config.timesteps) throw std::invalid_argument("stack_loss_and_grads: timestep mismatch");
    const int b = x_t[0].rows;
    if (static_cast<int>(labels.size()) != b) throw std::invalid_argument("stack_loss_and_grads: label count mismatch");

    const std::size_t num_layers = stack.layers.size();
    std::vector<LayerCache> caches(num_layers);

    // forward
    const std::vector<Mat>* input = &x_t;
    std::vector<Mat> h_seq;  // layer outputs h_1..h_T as a timestep vector
    for (std::size_t l = 0; l < num_layers; ++l) {
        bn_forward_train(*input, stack.norms[l], caches[l].xhat, caches[l].bn_out, caches[l].inv_std);
        lstm_forward_layer(caches[l].bn_out, stack.layers[l], caches[l]);
        if (l + 1 < num_layers) {
            h_seq.assign(caches[l].h.begin() + 1, caches[l].h.end());
            input = &h_seq;
            // keep the copy alive for the next layer's BN input; the cache
            // stores bn_out and xhat, the raw input is not needed in backward
        }
    }

    HeadResult head = head_forward(caches[num_layers - 1].h.back(), stack.head, labels);

    // head gradient
    Mat d_logits = head.probs;
    for (int r = 0; r < b; ++r) {
        d_logits.at(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
        double* row = d_logits.row(r);
        for (int k = 0; k < d_logits.cols; ++k) row[k] /= b;
    }
    matmul_tn(d_logits, caches[num_layers - 1].h.back(), grads.head.w, true);
    {
        std::vector<double> sums = col_sums(d_logits);
        for (std::size_t i = 0; i < sums.size(); ++i) grads.head.bias[i] += sums[i];
    }

    // per-layer external h-gradients, top layer gets the head flow at t = T-1
    std::vector<Mat> d_h_ext(static_cast<std::size_t>(tsteps), Mat(b, stack.config.hidden_dim));
    matmul_nn(d_logits, stack.head.w, d_h_ext[static_cast<std::size_t>(tsteps) - 1], false);

    for (std::size_t li = num_layers; li-- > 0;) {
        std::vector<Mat> d_bn_out;
        lstm_backward_layer(caches[li].bn_out, stack.layers[li], caches[li], d_h_ext, grads.layers[li], d_bn_out);
        std::vector<Mat> d_raw;
        bn_backward(d_bn_out, caches[li].xhat, caches[li].inv_std, stack.norms[li], grads.norms[li].gamma,
                    grads.norms[li].beta, d_raw);
        if (li > 0) d_h_ext = std::move(d_raw);
    }
    return head.loss;
}

double stack_loss_only(LstmStack& stack, const std::vector<Mat>& x_t, const std::vector<int>& labels) {
    // Train-mode loss via the same forward path; gradients go to a scratch
    // container. Used by the finite-difference checker.
    LstmStack scratch = make_zero_like(stack);
    return stack_loss_and_grads(stack, x_t, labels, scratch);
}

Mat stack_infer_batch(const std::vector<Mat>& x_t, const LstmStack& stack) {
    const int tsteps = static_cast<int>(x_t.size());
    if (tsteps != stack.config.timesteps) throw std::invalid_argument("stack_infer_batch: timestep mismatch");
    const int b = x_t[0].rows;
    const int h = stack.config.hidden_dim;

    std::vector<Mat> current;
    const std::vector<Mat>* input = &x_t;
    std::vector<Mat> h_seq;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        bn_forward_infer(*input, stack.norms[l], current);
        // roll the recurrence
        Mat h_state(b, h), c_state(b, h);
        h_seq.assign(static_cast<std::size_t>(tsteps), Mat(b, h));
        Mat z(b, 4 * h);
        for (int t = 0; t < tsteps; ++t) {
            matmul_nt(current[static_cast<std::size_t>(t)], stack.layers[l].w_input, z, false);
            matmul_nt(h_state, stack.layers[l].w_hidden, z, true);
            add_row_vector(z, stack.layers[l].bias);
            for (int r = 0; r < b; ++r) {
                double* zr = z.row(r);
                double* cs = c_state.row(r);
                double* hs = h_state.row(r);
                for (int j = 0; j < h; ++j) {
                    const double gi = sigmoid(zr[j]);
                    const double gf = sigmoid(zr[h + j]);
                    const double gg = std::tanh(zr[2 * h + j]);
                    const double go = sigmoid(zr[3 * h + j]);
                    const double c = gf * cs[j] + gi * gg;
                    cs[j] = c;
                    hs[j] = go * std::tanh(c);
                }
            }
            h_seq[static_cast<std::size_t>(t)] = h_state;
        }
        input = &h_seq;
    }

    HeadResult head = head_forward(h_seq.back(), stack.head, {});
    return head.probs;
}

namespace {

void gather_batch(const WindowDataset& data, const std::vector<std::size_t>& order, std::size_t lo, std::size_t hi,
                  std::vector<Mat>& x_t, std::vector<int>& labels) {
    const int b = static_cast<int>(hi - lo);
    const int tsteps = data.timesteps;
    x_t.assign(static_cast<std::size_t>(tsteps), Mat(b, data.feat_dim));
    labels.assign(static_cast<std::size_t>(b), 0);
    for (std::size_t i = lo; i < hi; ++i) {
        const WindowRef& w = data.items[order[i]];
        const Mat& feats = (*data.features)[static_cast<std::size_t>(w.sample)];
        const int r = static_cast<int>(i - lo);
        labels[static_cast<std::size_t>(r)] = w.label;
        for (int t = 0; t < tsteps; ++t) {
            const int frame = w.end_frame - (tsteps - 1) + t;
            if (frame < 0) continue;  // cold-start zero padding
            std::memcpy(x_t[static_cast<std::size_t>(t)].row(r), feats.row(frame),
                        static_cast<std::size_t>(data.feat_dim) * sizeof(double));
        }
    }
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    double lr = cfg.learning_rate;
    for (int m : cfg.lr_milestones)
        if (epoch >= m) lr *= cfg.lr_decay;
    return lr;
}

} // namespace

TrainReport train_stack(LstmStack& stack, const WindowDataset& data, const TrainConfig& cfg) {
    if (data.items.empty() || data.features == nullptr)
        throw std::invalid_argument("train_stack: empty dataset");
    if (data.feat_dim != stack.config.input_dim || data.timesteps != stack.config.timesteps)
        throw std::invalid_argument("train_stack: dataset shape does not match the stack");
    {
        std::set<int> distinct;
        for (const auto& w : data.items) {
            if (w.label < 0 || w.label >= stack.config.num_classes())
                throw std::invalid_argument("train_stack: label outside the class set");
            distinct.insert(w.label);
        }
        if (distinct.size() < 2)
            throw std::invalid_argument("train_stack: degenerate dataset (single class); need at least two classes");
    }

    Rng rng(cfg.seed ? cfg.seed : 1);
    std::vector<std::size_t> order(data.items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_indices(order, rng);

    const std::size_t n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(order.size()));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    if (train_idx.size() < 2) throw std::invalid_argument("train_stack: not enough windows to train on");

    AdamState adam;
    LstmStack grads = make_zero_like(stack);
    const auto param_refs = trainable_params(stack);
    const auto grad_refs = trainable_params(grads);
    const auto stat_refs = running_stats(stack);

    TrainReport report;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_params, best_stats;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        shuffle_indices(train_idx, erng);
        const double lr = lr_at_epoch(cfg, epoch);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::vector<Mat> x_t;
        std::vector<int> labels;
        for (std::size_t lo = 0; lo < train_idx.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi = std::min(train_idx.size(), lo + static_cast<std::size_t>(cfg.batch_size));
            if (hi - lo < 2) break;  // batch normalization needs >= 2 rows
            gather_batch(data, train_idx, lo, hi, x_t, labels);
            zero_params(grad_refs);
            const double loss = stack_loss_and_grads(stack, x_t, labels, grads);
            adam_step(param_refs, grad_refs, adam, lr, cfg.grad_clip);
            loss_sum += loss * static_cast<double>(hi - lo);
            seen += hi - lo;
        }

        EpochStats stats;
        stats.lr = lr;
        stats.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;

        if (!val_idx.empty()) {
            double vloss = 0.0;
            std::size_t correct = 0;
            for (std::size_t lo = 0; lo < val_idx.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t hi = std::min(val_idx.size(), lo + static_cast<std::size_t>(cfg.batch_size));
                gather_batch(data, val_idx, lo, hi, x_t, labels);
                Mat probs = stack_infer_batch(x_t, stack);
                for (int r = 0; r < probs.rows; ++r) {
                    const int y = labels[static_cast<std::size_t>(r)];
                    vloss -= std::log(std::max(probs.at(r, y), 1e-12));
                    int arg = 0;
                    for (int k = 1; k < probs.cols; ++k)
                        if (probs.at(r, k) > probs.at(r, arg)) arg = k;
                    if (arg == y) ++correct;
                }
            }
            stats.val_loss = vloss / static_cast<double>(val_idx.size());
            stats.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_idx.size());
        }
        report.epochs.push_back(stats);

        const double score = val_idx.empty() ? stats.train_loss : stats.val_loss;
        if (score < best_val) {
            best_val = score;
            report.best_epoch = epoch;
            best_params = snapshot(param_refs);
            best_stats = snapshot(stat_refs);
            since_best = 0;
        } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
            break;
        }
    }

    if (!best_params.empty()) {
        restore(param_refs, best_params);
        restore(stat_refs, best_stats);
    }
    return report;
}

// ---------------------------------------------------------------------------
// fusion network
// ---------------------------------------------------------------------------

double fusion_loss_and_grads(FusionDnn& dnn, const Mat& inputs, const std::vector<int>& targets,
                             FusionDnn& grads) {
    const int n = inputs.rows;
    if (static_cast<int>(targets.size()) != n) throw std::invalid_argument("fusion: target count mismatch");

    Mat z1(n, dnn.hidden_dim());
    matmul_nt(inputs, dnn.w1, z1, false);
    add_row_vector(z1, dnn.b1);
    for (auto& v : z1.a) v = std::tanh(v);

    std::vector<double> r(static_cast<std::size_t>(n));
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* a = z1.row(i);
        double acc = dnn.b2;
        for (int j = 0; j < dnn.hidden_dim(); ++j) acc += dnn.w2.at(0, j) * a[j];
        const double ri = sigmoid(acc);
        r[static_cast<std::size_t>(i)] = ri;
        const double y = static_cast<double>(targets[static_cast<std::size_t>(i)]);
        loss -= y * std::log(std::max(ri, 1e-12)) + (1.0 - y) * std::log(std::max(1.0 - ri, 1e-12));
    }
    loss /= n;

    // backward: dz = (r - y)/n through the sigmoid + BCE pair
    Mat d_a(n, dnn.hidden_dim());
    for (int i = 0; i < n; ++i) {
        const double dz = (r[static_cast<std::size_t>(i)] - static_cast<double>(targets[static_cast<std::size_t>(i)])) /
                          static_cast<double>(n);
        grads.b2 += dz;
        const double* a = z1.row(i);
        double* dar = d_a.row(i);
        for (int j = 0; j < dnn.hidden_dim(); ++j) {
            grads.w2.at(0, j) += dz * a[j];
            dar[j] = dz * dnn.w2.at(0, j) * (1.0 - a[j] * a[j]);
        }
    }
    matmul_tn(d_a, inputs, grads.w1, true);
    {
        std::vector<double> sums = col_sums(d_a);
        for (std::size_t i = 0; i < sums.size(); ++i) grads.b1[i] += sums[i];
    }
    return loss;
}

double fusion_loss_only(const FusionDnn& dnn, const Mat& inputs, const std::vector<int>& targets) {
    const int n = inputs.rows;
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(inputs.row(i), inputs.row(i) + inputs.cols);
        const double ri = fusion_forward(row, dnn);
        const double y = static_cast<double>(targets[static_cast<std::size_t>(i)]);
        loss -= y * std::log(std::max(ri, 1e-12)) + (1.0 - y) * std::log(std::max(1.0 - ri, 1e-12));
    }
    return loss / n;
}

TrainReport train_fusion(FusionDnn& dnn, const Mat& inputs, const std::vector<int>& targets,
                         const TrainConfig& cfg) {
    if (inputs.rows < 2) throw std::invalid_argument("train_fusion: need at least two rows");
    {
        std::set<int> distinct(targets.begin(), targets.end());
        if (distinct.size() < 2)
            throw std::invalid_argument("train_fusion: degenerate dataset (single class)");
    }

    Rng rng(cfg.seed ? cfg.seed : 1);
    std::vector<std::size_t> order(static_cast<std::size_t>(inputs.rows));
    std::iota(order.begin(), order.end(), std::size_t{0});

    AdamState adam;
    FusionDnn grads = make_zero_like(dnn);
    const auto param_refs = trainable_params(dnn);
    const auto grad_refs = trainable_params(grads);

    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng(derive_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(epoch)));
        shuffle_indices(order, erng);
        const double lr = lr_at_epoch(cfg, epoch);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
            const int b = static_cast<int>(hi - lo);
            Mat batch(b, inputs.cols);
            std::vector<int> y(static_cast<std::size_t>(b));
            for (std::size_t i = lo; i < hi; ++i) {
                std::memcpy(batch.row(static_cast<int>(i - lo)), inputs.row(static_cast<int>(order[i])),
                            static_cast<std::size_t>(inputs.cols) * sizeof(double));
                y[i - lo] = targets[order[i]];
            }
            zero_params(grad_refs);
            const double loss = fusion_loss_and_grads(dnn, batch, y, grads);
            adam_step(param_refs, grad_refs, adam, lr, cfg.grad_clip);
            loss_sum += loss * static_cast<double>(b);
            seen += static_cast<std::size_t>(b);
        }
        EpochStats stats;
        stats.lr = lr;
        stats.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        report.epochs.push_back(stats);
    }
    report.best_epoch = cfg.epochs - 1;
    return report;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

namespace {

GradCheckReport check_params(const std::vector<ParamRef>& params, const std::vector<ParamRef>& analytic,
                             const std::function<double()>& loss_fn, double fd_step, double tolerance) {
    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        GradCheckEntry entry;
        entry.param = params[pi].name;
        for (std::size_t i = 0; i < params[pi].size; ++i) {
            double& p = params[pi].data[i];
            const double saved = p;
            p = saved + fd_step;
            const double lp = loss_fn();
            p = saved - fd_step;
            const double lm = loss_fn();
            p = saved;
            const double fd = (lp - lm) / (2.0 * fd_step);
            const double an = analytic[pi].data[i];
            const double denom = std::max({1e-8, std::abs(fd), std::abs(an)});
            const double rel = std::abs(fd - an) / denom;
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.per_param.push_back(entry);
        if (entry.max_rel_err > report.max_rel_err) {
            report.max_rel_err = entry.max_rel_err;
            report.worst_param = entry.param;
        }
    }
    report.pass = report.max_rel_err < tolerance;
    return report;
}

} // namespace

GradCheckReport gradient_check_stack(const StackConfig& config, int batch, std::uint64_t seed, double fd_step,
                                     double tolerance) {
    LstmStack stack = make_stack(config, seed);
    Rng rng(derive_seed(seed, 7));

    std::vector<Mat> x_t(static_cast<std::size_t>(config.timesteps), Mat(batch, config.input_dim));
    for (auto& m : x_t)
        for (auto& v : m.a) v = rng.gaussian();
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (auto& y : labels) y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(config.num_classes())));

    LstmStack grads = make_zero_like(stack);
    stack_loss_and_grads(stack, x_t, labels, grads);

    auto loss_fn = [&]() { return stack_loss_only(stack, x_t, labels); };
    return check_params(trainable_params(stack), trainable_params(grads), loss_fn, fd_step, tolerance);
}

GradCheckReport gradient_check_fusion(int input_dim, int hidden_dim, int batch, std::uint64_t seed,
                                      double fd_step, double tolerance) {
    FusionDnn dnn = make_fusion(input_dim, hidden_dim, seed);
    Rng rng(derive_seed(seed, 11));

    Mat inputs(batch, input_dim);
    for (auto& v : inputs.a) v = rng.gaussian();
    std::vector<int> targets(static_cast<std::size_t>(batch));
    for (auto& t : targets) t = static_cast<int>(rng.next_below(2));

    FusionDnn grads = make_zero_like(dnn);
    fusion_loss_and_grads(dnn, inputs, targets, grads);

    auto loss_fn = [&]() { return fusion_loss_only(dnn, inputs, targets); };
    return check_params(trainable_params(dnn), trainable_params(grads), loss_fn, fd_step, tolerance);
}

} // namespace drowsy
