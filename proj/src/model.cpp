#include "drafter/model.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace drafter {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

MapM map(Tensor& t) { return MapM(t.data.data(), t.rows, t.cols); }
CMapM map(const Tensor& t) { return CMapM(t.data.data(), t.rows, t.cols); }

constexpr double kRmsEps = 1e-6;

// Transformer parameter indices within ToyLm::params.
constexpr int kTokEmb = 0;
constexpr int kPosEmb = 1;
constexpr int kPerLayer = 8;
enum LayerParam { kAttnNorm = 0, kWq, kWk, kWv, kWo, kMlpNorm, kW1, kW2 };
int layer_base(int l) { return 2 + l * kPerLayer; }
int final_norm_idx(int layers) { return 2 + layers * kPerLayer; }
int lm_head_idx(int layers) { return final_norm_idx(layers) + 1; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_gaussian(Tensor& t, double stddev, RngStream& rng) {
    for (double& v : t.data) v = stddev * rng.next_gaussian();
}

// n = gain (.) x / rms(x), rowwise over the feature dimension.
void rmsnorm_forward(const Tensor& x, const Tensor& gain, Tensor& n, std::vector<double>& rms) {
    const int T = x.rows, H = x.cols;
    rms.resize(T);
    for (int t = 0; t < T; ++t) {
        const double* xr = x.row(t);
        double ms = 0.0;
        for (int i = 0; i < H; ++i) ms += xr[i] * xr[i];
        double r = std::sqrt(ms / H + kRmsEps);
        rms[t] = r;
        double* nr = n.row(t);
        const double* g = gain.row(0);
        for (int i = 0; i < H; ++i) nr[i] = g[i] * xr[i] / r;
    }
}

// Accumulates into dx and dgain.
void rmsnorm_backward(const Tensor& x, const Tensor& gain, const std::vector<double>& rms, const Tensor& dn,
                      Tensor& dx, Tensor& dgain) {
    const int T = x.rows, H = x.cols;
    const double* g = gain.row(0);
    double* dg = dgain.row(0);
    for (int t = 0; t < T; ++t) {
        const double* xr = x.row(t);
        const double* dnr = dn.row(t);
        double* dxr = dx.row(t);
        const double r = rms[t];
        double inner = 0.0;
        for (int i = 0; i < H; ++i) inner += dnr[i] * g[i] * xr[i];
        const double coef = inner / (H * r * r * r);
        for (int i = 0; i < H; ++i) {
            dxr[i] += g[i] * dnr[i] / r - xr[i] * coef;
            dg[i] += dnr[i] * xr[i] / r;
        }
    }
}

void check_tokens(const ToyLm& model, std::span<const TokenId> tokens) {
    if (tokens.empty()) throw ValidationError("forward: empty token sequence");
    if (static_cast<int>(tokens.size()) > model.config.context_len) {
        throw ValidationError("forward: sequence length " + std::to_string(tokens.size()) +
                              " exceeds context_len " + std::to_string(model.config.context_len));
    }
    for (TokenId t : tokens) {
        if (t < 0 || t >= model.config.vocab_size) throw ValidationError("forward: token out of vocabulary");
    }
}

Tensor forward_bigram(const ToyLm& model, std::span<const TokenId> tokens) {
    const int T = static_cast<int>(tokens.size());
    const int V = model.config.vocab_size;
    const Tensor& table = model.params[0];
    Tensor logits("", T, V);
    for (int t = 0; t < T; ++t) {
        const double* src = table.row(tokens[t]);
        std::copy(src, src + V, logits.row(t));
    }
    return logits;
}

Tensor forward_transformer(const ToyLm& model, std::span<const TokenId> tokens, ForwardCache& cache) {
    const ToyLmConfig& cfg = model.config;
    const int T = static_cast<int>(tokens.size());
    const int H = cfg.hidden_dim;
    const int dh = H / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor x("", T, H);
    {
        const Tensor& wte = model.params[kTokEmb];
        const Tensor& wpe = model.params[kPosEmb];
        for (int t = 0; t < T; ++t) {
            const double* te = wte.row(tokens[t]);
            const double* pe = wpe.row(t);
            double* xr = x.row(t);
            for (int i = 0; i < H; ++i) xr[i] = te[i] + pe[i];
        }
    }

    cache.layers.resize(cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
        ForwardCache::Layer& cl = cache.layers[l];
        const int base = layer_base(l);
        cl.x_in = x;

        cl.n1 = Tensor("", T, H);
        rmsnorm_forward(cl.x_in, model.params[base + kAttnNorm], cl.n1, cl.rms_attn);

        cl.q = Tensor("", T, H);
        cl.k = Tensor("", T, H);
        cl.v = Tensor("", T, H);
        map(cl.q).noalias() = map(cl.n1) * map(model.params[base + kWq]).transpose();
        map(cl.k).noalias() = map(cl.n1) * map(model.params[base + kWk]).transpose();
        map(cl.v).noalias() = map(cl.n1) * map(model.params[base + kWv]).transpose();

        cl.ctx = Tensor("", T, H);
        cl.att.assign(cfg.heads, Tensor("", T, T));
        for (int h = 0; h < cfg.heads; ++h) {
            auto qh = map(cl.q).middleCols(h * dh, dh);
            auto kh = map(cl.k).middleCols(h * dh, dh);
            auto vh = map(cl.v).middleCols(h * dh, dh);
            MapM att = map(cl.att[h]);
            att.noalias() = qh * kh.transpose() * att_scale;
            // causal softmax over u <= t
            for (int t = 0; t < T; ++t) {
                double* ar = cl.att[h].row(t);
                double mx = ar[0];
                for (int u = 1; u <= t; ++u) mx = std::max(mx, ar[u]);
                double sum = 0.0;
                for (int u = 0; u <= t; ++u) {
                    ar[u] = std::exp(ar[u] - mx);
                    sum += ar[u];
                }
                for (int u = 0; u <= t; ++u) ar[u] /= sum;
                for (int u = t + 1; u < T; ++u) ar[u] = 0.0;
            }
            map(cl.ctx).middleCols(h * dh, dh).noalias() = att * vh;
        }

        Tensor attn_out("", T, H);
        map(attn_out).noalias() = map(cl.ctx) * map(model.params[base + kWo]).transpose();
        map(x).noalias() = map(cl.x_in) + map(attn_out);
        cl.x_mid = x;

        cl.n2 = Tensor("", T, H);
        rmsnorm_forward(cl.x_mid, model.params[base + kMlpNorm], cl.n2, cl.rms_mlp);

        cl.h_pre = Tensor("", T, cfg.intermediate_dim);
        map(cl.h_pre).noalias() = map(cl.n2) * map(model.params[base + kW1]).transpose();
        cl.h_act = cl.h_pre;
        for (double& v : cl.h_act.data) v = v * sigmoid(v);

        Tensor mlp_out("", T, H);
        map(mlp_out).noalias() = map(cl.h_act) * map(model.params[base + kW2]).transpose();
        map(x).noalias() = map(cl.x_mid) + map(mlp_out);
    }

    cache.x_final = x;
    cache.n_final = Tensor("", T, H);
    rmsnorm_forward(cache.x_final, model.params[final_norm_idx(cfg.layers)], cache.n_final, cache.rms_final);

    Tensor logits("", T, cfg.vocab_size);
    map(logits).noalias() = map(cache.n_final) * map(model.params[lm_head_idx(cfg.layers)]).transpose();
    return logits;
}

ParamList backward_transformer(const ToyLm& model, std::span<const TokenId> tokens, const ForwardCache& cache,
                               const Tensor& dlogits) {
    const ToyLmConfig& cfg = model.config;
    const int T = static_cast<int>(tokens.size());
    const int H = cfg.hidden_dim;
    const int dh = H / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ParamList grads = zeros_like(model.params);

    // output head
    Tensor dnf("", T, H);
    map(dnf).noalias() = map(dlogits) * map(model.params[lm_head_idx(cfg.layers)]);
    map(grads[lm_head_idx(cfg.layers)]).noalias() = map(dlogits).transpose() * map(cache.n_final);

    Tensor dx("", T, H);
    rmsnorm_backward(cache.x_final, model.params[final_norm_idx(cfg.layers)], cache.rms_final, dnf, dx,
                     grads[final_norm_idx(cfg.layers)]);

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const ForwardCache::Layer& cl = cache.layers[l];
        const int base = layer_base(l);

        // MLP block: x = x_mid + W2^T-product of silu(W1-product of n2)
        Tensor dact("", T, cfg.intermediate_dim);
        map(dact).noalias() = map(dx) * map(model.params[base + kW2]);
        map(grads[base + kW2]).noalias() = map(dx).transpose() * map(cl.h_act);

        Tensor dh_pre = dact;  // scaled in place by silu'
        for (int64_t i = 0; i < dh_pre.count(); ++i) {
            double z = cl.h_pre.data[i];
            double s = sigmoid(z);
            dh_pre.data[i] *= s * (1.0 + z * (1.0 - s));
        }

        Tensor dn2("", T, H);
        map(dn2).noalias() = map(dh_pre) * map(model.params[base + kW1]);
        map(grads[base + kW1]).noalias() = map(dh_pre).transpose() * map(cl.n2);

        // dx currently carries the gradient w.r.t. the block output; the
        // residual path passes it through to x_mid unchanged.
        rmsnorm_backward(cl.x_mid, model.params[base + kMlpNorm], cl.rms_mlp, dn2, dx, grads[base + kMlpNorm]);

        // attention block: x_mid = x_in + Wo-product of ctx
        Tensor dctx("", T, H);
        map(dctx).noalias() = map(dx) * map(model.params[base + kWo]);
        map(grads[base + kWo]).noalias() = map(dx).transpose() * map(cl.ctx);

        Tensor dq("", T, H), dk("", T, H), dv("", T, H);
        for (int h = 0; h < cfg.heads; ++h) {
            auto qh = map(cl.q).middleCols(h * dh, dh);
            auto kh = map(cl.k).middleCols(h * dh, dh);
            auto vh = map(cl.v).middleCols(h * dh, dh);
            auto dcxh = map(dctx).middleCols(h * dh, dh);
            CMapM att = map(cl.att[h]);

            Tensor datt_t("", T, T);
            MapM datt = map(datt_t);
            datt.noalias() = dcxh * vh.transpose();
            map(dv).middleCols(h * dh, dh).noalias() = att.transpose() * dcxh;

            // softmax backward, rows independent, causal support u <= t
            Tensor ds_t("", T, T);
            for (int t = 0; t < T; ++t) {
                const double* ar = cl.att[h].row(t);
                const double* dar = datt_t.row(t);
                double* dsr = ds_t.row(t);
                double inner = 0.0;
                for (int u = 0; u <= t; ++u) inner += ar[u] * dar[u];
                for (int u = 0; u <= t; ++u) dsr[u] = ar[u] * (dar[u] - inner);
            }
            MapM ds = map(ds_t);
            map(dq).middleCols(h * dh, dh).noalias() = ds * kh * att_scale;
            map(dk).middleCols(h * dh, dh).noalias() = ds.transpose() * qh * att_scale;
        }

        Tensor dn1("", T, H);
        map(dn1).noalias() = map(dq) * map(model.params[base + kWq]);
        map(dn1).noalias() += map(dk) * map(model.params[base + kWk]);
        map(dn1).noalias() += map(dv) * map(model.params[base + kWv]);
        map(grads[base + kWq]).noalias() = map(dq).transpose() * map(cl.n1);
        map(grads[base + kWk]).noalias() = map(dk).transpose() * map(cl.n1);
        map(grads[base + kWv]).noalias() = map(dv).transpose() * map(cl.n1);

        rmsnorm_backward(cl.x_in, model.params[base + kAttnNorm], cl.rms_attn, dn1, dx, grads[base + kAttnNorm]);
    }

    // embeddings
    for (int t = 0; t < T; ++t) {
        const double* dxr = dx.row(t);
        double* dte = grads[kTokEmb].row(tokens[t]);
        double* dpe = grads[kPosEmb].row(t);
        for (int i = 0; i < H; ++i) {
            dte[i] += dxr[i];
            dpe[i] += dxr[i];
        }
    }
    return grads;
}

}  // namespace

void ToyLmConfig::validate(ModelKind kind) const {
    if (vocab_size < 2) throw ValidationError("config: vocab_size must be >= 2");
    if (context_len < 2) throw ValidationError("config: context_len must be >= 2");
    if (kind == ModelKind::bigram) return;
    if (layers < 1 || heads < 1 || hidden_dim < 1 || intermediate_dim < 1) {
        throw ValidationError("config: non-positive transformer dimension");
    }
    if (hidden_dim % heads != 0) throw ValidationError("config: hidden_dim not divisible by heads");
}

ToyLm ToyLm::init_transformer(const ToyLmConfig& cfg, RngStream& rng) {
    cfg.validate(ModelKind::transformer);
    ToyLm m;
    m.config = cfg;
    m.kind = ModelKind::transformer;
    const int H = cfg.hidden_dim, I = cfg.intermediate_dim, V = cfg.vocab_size, C = cfg.context_len;
    const double ws = 1.0 / std::sqrt(static_cast<double>(H));
    const double ws2 = 1.0 / std::sqrt(static_cast<double>(I));

    m.params.emplace_back("tok_emb", V, H);
    m.params.emplace_back("pos_emb", C, H);
    fill_gaussian(m.params[kTokEmb], 0.08, rng);
    fill_gaussian(m.params[kPosEmb], 0.08, rng);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "l" + std::to_string(l) + ".";
        Tensor attn_norm(p + "attn_norm", 1, H);
        std::fill(attn_norm.data.begin(), attn_norm.data.end(), 1.0);
        m.params.push_back(std::move(attn_norm));
        for (const char* nm : {"wq", "wk", "wv", "wo"}) {
            Tensor w(p + nm, H, H);
            fill_gaussian(w, ws, rng);
            m.params.push_back(std::move(w));
        }
        Tensor mlp_norm(p + "mlp_norm", 1, H);
        std::fill(mlp_norm.data.begin(), mlp_norm.data.end(), 1.0);
        m.params.push_back(std::move(mlp_norm));
        Tensor w1(p + "w1", I, H);
        fill_gaussian(w1, ws, rng);
        m.params.push_back(std::move(w1));
        Tensor w2(p + "w2", H, I);
        fill_gaussian(w2, ws2, rng);
        m.params.push_back(std::move(w2));
    }
    Tensor final_norm("final_norm", 1, H);
    std::fill(final_norm.data.begin(), final_norm.data.end(), 1.0);
    m.params.push_back(std::move(final_norm));
    Tensor lm_head("lm_head", V, H);
    fill_gaussian(lm_head, ws, rng);
    m.params.push_back(std::move(lm_head));
    return m;
}

ToyLm ToyLm::init_bigram(int vocab_size) {
    ToyLmConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.context_len = 1 << 20;
    cfg.layers = 0;
    cfg.heads = 1;
    cfg.hidden_dim = 1;
    cfg.intermediate_dim = 1;
    cfg.validate(ModelKind::bigram);
    ToyLm m;
    m.config = cfg;
    m.kind = ModelKind::bigram;
    m.params.emplace_back("table", vocab_size, vocab_size);
    return m;
}

ToyLm ToyLm::bigram_from_counts(const std::vector<std::vector<double>>& counts) {
    const int V = static_cast<int>(counts.size());
    ToyLm m = init_bigram(V);
    Tensor& table = m.params[0];
    for (int a = 0; a < V; ++a) {
        if (static_cast<int>(counts[a].size()) != V) throw ValidationError("bigram_from_counts: ragged count table");
        for (int b = 0; b < V; ++b) {
            if (!(counts[a][b] > 0.0)) throw ValidationError("bigram_from_counts: counts must be positive");
            table.at(a, b) = std::log(counts[a][b]);
        }
    }
    return m;
}

int64_t ToyLm::param_count() const {
    const ToyLmConfig& c = config;
    if (kind == ModelKind::bigram) {
        return static_cast<int64_t>(c.vocab_size) * c.vocab_size;
    }
    const int64_t H = c.hidden_dim, I = c.intermediate_dim, V = c.vocab_size, C = c.context_len, L = c.layers;
    return V * H + C * H + L * (4 * H * H + 2 * H + 2 * I * H) + H + V * H;
}

Tensor forward_cached(const ToyLm& model, std::span<const TokenId> tokens, ForwardCache& cache) {
    check_tokens(model, tokens);
    if (model.kind == ModelKind::bigram) return forward_bigram(model, tokens);
    return forward_transformer(model, tokens, cache);
}

Tensor forward(const ToyLm& model, std::span<const TokenId> tokens) {
    ForwardCache cache;
    return forward_cached(model, tokens, cache);
}

ParamList backward_cached(const ToyLm& model, std::span<const TokenId> tokens, const ForwardCache& cache,
                          const Tensor& dlogits) {
    check_tokens(model, tokens);
    if (dlogits.rows != static_cast<int>(tokens.size()) || dlogits.cols != model.config.vocab_size) {
        throw ValidationError("backward: dlogits shape mismatch");
    }
    if (model.kind == ModelKind::bigram) {
        ParamList grads = zeros_like(model.params);
        Tensor& dtable = grads[0];
        for (int t = 0; t < dlogits.rows; ++t) {
            double* dst = dtable.row(tokens[t]);
            const double* src = dlogits.row(t);
            for (int v = 0; v < dlogits.cols; ++v) dst[v] += src[v];
        }
        return grads;
    }
    return backward_transformer(model, tokens, cache, dlogits);
}

ParamList backward(const ToyLm& model, std::span<const TokenId> tokens, const Tensor& dlogits) {
    ForwardCache cache;
    forward_cached(model, tokens, cache);
    return backward_cached(model, tokens, cache, dlogits);
}

Dist next_token_dist(const ToyLm& model, std::span<const TokenId> context, const SamplingConfig& sampling) {
    if (context.empty()) throw ValidationError("next_token_dist: empty context");
    Tensor logits = forward(model, context);
    std::vector<double> last(logits.row(logits.rows - 1), logits.row(logits.rows - 1) + logits.cols);
    Dist d = apply_temperature(last, sampling.temperature);
    if (sampling.top_p < 1.0) d = top_p_filter(d, sampling.top_p);
    return d;
}

GradReport ce_loss_and_grad(const ToyLm& model, std::span<const TokenId> tokens) {
    if (tokens.size() < 2) throw ValidationError("ce_loss_and_grad: need at least 2 tokens");
    Tensor logits = forward(model, tokens);
    const int T = logits.rows, V = logits.cols;
    const int positions = T - 1;
    GradReport rep;
    rep.dlogits = Tensor("", T, V);
    double loss = 0.0;
    for (int t = 0; t < positions; ++t) {
        const double* zr = logits.row(t);
        double mx = zr[0];
        for (int v = 1; v < V; ++v) mx = std::max(mx, zr[v]);
        double sum = 0.0;
        double* dr = rep.dlogits.row(t);
        for (int v = 0; v < V; ++v) {
            dr[v] = std::exp(zr[v] - mx);
            sum += dr[v];
        }
        const TokenId next = tokens[t + 1];
        loss += -(zr[next] - mx - std::log(sum));
        for (int v = 0; v < V; ++v) dr[v] /= sum * positions;
        dr[next] -= 1.0 / positions;
    }
    rep.loss = loss / positions;
    return rep;
}

void sgd_step(ToyLm& model, const ParamList& grads, double lr, double clip_norm) {
    if (grads.size() != model.params.size()) throw ValidationError("sgd_step: gradient count mismatch");
    for (size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].rows != model.params[i].rows || grads[i].cols != model.params[i].cols) {
            throw ValidationError("sgd_step: gradient shape mismatch at " + model.params[i].name);
        }
    }
    if (!all_finite(grads)) throw TrainingError("sgd_step: non-finite gradient");
    double factor = 1.0;
    if (clip_norm > 0.0) {
        double norm = global_norm(grads);
        if (norm > clip_norm) factor = clip_norm / norm;
    }
    add_scaled(model.params, grads, -lr * factor);
}

}  // namespace drafter
