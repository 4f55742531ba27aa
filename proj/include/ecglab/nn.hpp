#pragma once

// Trainable pieces: the 3-layer CNN segment encoder with a mirrored decoder,
// the linear projection into the LM width, a tiny masked transformer with
// optional LoRA adapters, training loops, and checkpoint I/O.

#include <fstream>
#include <map>
#include <sstream>

#include "ecglab/tensor.hpp"
#include "ecglab/tokenizer.hpp"
#include "json.hpp"

namespace ecglab {

constexpr size_t kSegmentLen = 256;  // samples per 1-second segment
constexpr size_t kLatentDim = 64;    // d

// ---------------------------------------------------------------------------
// Autoencoder. Encoder: conv 1→16→32→64 (k=7, stride 4, pad 3; 256→64→16→4),
// GELU between layers, flatten(256) → linear → 64. Decoder mirrors with
// transposed convolutions (k=7, stride 4, pad 2, output padding 1).

struct EncoderParams {
    TensorPtr w1, b1, w2, b2, w3, b3;  // conv stacks
    TensorPtr wl, bl;                  // flatten → latent

    static EncoderParams init(Rng& rng) {
        EncoderParams p;
        p.w1 = make_param({16, 1, 7}, rng, 1.0 / std::sqrt(7.0));
        p.b1 = make_tensor({16}, true);
        p.w2 = make_param({32, 16, 7}, rng, 1.0 / std::sqrt(16.0 * 7));
        p.b2 = make_tensor({32}, true);
        p.w3 = make_param({64, 32, 7}, rng, 1.0 / std::sqrt(32.0 * 7));
        p.b3 = make_tensor({64}, true);
        p.wl = make_param({256, kLatentDim}, rng, 1.0 / std::sqrt(256.0));
        p.bl = make_tensor({kLatentDim}, true);
        return p;
    }
    std::vector<TensorPtr> all() const { return {w1, b1, w2, b2, w3, b3, wl, bl}; }
};

struct DecoderParams {
    TensorPtr wl, bl;                  // latent → flatten
    TensorPtr w1, b1, w2, b2, w3, b3;  // transposed conv stacks

    static DecoderParams init(Rng& rng) {
        DecoderParams p;
        p.wl = make_param({kLatentDim, 256}, rng, 1.0 / std::sqrt(double(kLatentDim)));
        p.bl = make_tensor({256}, true);
        p.w1 = make_param({64, 32, 7}, rng, 1.0 / std::sqrt(64.0 * 7));
        p.b1 = make_tensor({32}, true);
        p.w2 = make_param({32, 16, 7}, rng, 1.0 / std::sqrt(32.0 * 7));
        p.b2 = make_tensor({16}, true);
        p.w3 = make_param({16, 1, 7}, rng, 1.0 / std::sqrt(16.0 * 7));
        p.b3 = make_tensor({1}, true);
        return p;
    }
    std::vector<TensorPtr> all() const { return {wl, bl, w1, b1, w2, b2, w3, b3}; }
};

// graph-building forward; x must be a [1, 256] tensor
inline TensorPtr encode_t(const EncoderParams& p, const TensorPtr& x) {
    if (x->shape != std::vector<size_t>{1, kSegmentLen})
        throw ValidationError("encode", "expected a [1, 256] input");
    for (double v : x->v)
        if (!std::isfinite(v)) throw ValidationError("encode", "non-finite input");
    auto h = ops::gelu(ops::conv1d(x, p.w1, p.b1, 4, 3));   // [16, 64]
    h = ops::gelu(ops::conv1d(h, p.w2, p.b2, 4, 3));        // [32, 16]
    h = ops::gelu(ops::conv1d(h, p.w3, p.b3, 4, 3));        // [64, 4]
    auto flat = ops::reshape(h, {1, 256});
    return ops::reshape(ops::linear(flat, p.wl, p.bl), {kLatentDim});
}

inline TensorPtr decode_t(const DecoderParams& p, const TensorPtr& z) {
    if (z->numel() != kLatentDim) throw ValidationError("decode", "latent must be d = 64");
    auto flat = ops::linear(ops::reshape(z, {1, kLatentDim}), p.wl, p.bl);
    auto h = ops::reshape(flat, {64, 4});
    h = ops::gelu(ops::conv_transpose1d(h, p.w1, p.b1, 4, 2, 1));  // [32, 16]
    h = ops::gelu(ops::conv_transpose1d(h, p.w2, p.b2, 4, 2, 1));  // [16, 64]
    return ops::conv_transpose1d(h, p.w3, p.b3, 4, 2, 1);          // [1, 256]
}

inline std::vector<double> encode(const EncoderParams& p, const std::vector<double>& x) {
    auto xt = make_tensor({1, kSegmentLen});
    if (x.size() != kSegmentLen) throw ValidationError("encode", "expected 256 samples");
    xt->v = x;
    return encode_t(p, xt)->v;
}

inline std::vector<double> decode(const DecoderParams& p, const std::vector<double>& z) {
    auto zt = make_tensor({kLatentDim});
    if (z.size() != kLatentDim) throw ValidationError("decode", "latent must be d = 64");
    zt->v = z;
    return decode_t(p, zt)->v;
}

// ---------------------------------------------------------------------------
// SLP projection d → h_model

struct ProjectionParams {
    TensorPtr w;  // [d, h_model]
    TensorPtr b;  // [h_model]

    static ProjectionParams init(Rng& rng, size_t d, size_t h_model) {
        ProjectionParams p;
        p.w = make_param({d, h_model}, rng, 1.0 / std::sqrt(double(d)));
        p.b = make_tensor({h_model}, true);
        return p;
    }
    std::vector<TensorPtr> all() const { return {w, b}; }
};

inline TensorPtr project_t(const ProjectionParams& p, const TensorPtr& z) {
    auto row = ops::reshape(z, {1, z->numel()});
    return ops::reshape(ops::linear(row, p.w, p.b), {p.w->shape[1]});
}

inline std::vector<double> project(const ProjectionParams& p, const std::vector<double>& z) {
    auto zt = make_tensor({z.size()});
    zt->v = z;
    return project_t(p, zt)->v;
}

// ---------------------------------------------------------------------------
// Autoencoder training

struct AeTrainResult {
    EncoderParams enc;
    DecoderParams dec;
    std::vector<double> loss_curve;  // per-epoch mean MSE
};

inline AeTrainResult train_autoencoder(const std::vector<std::vector<double>>& segments,
                                       int epochs, double lr, uint64_t seed,
                                       int batch_size = 32, int warmup_steps = 10) {
    if (segments.size() < 64) throw ValidationError("segments", "need at least 64");
    Rng rng(seed);
    AeTrainResult res;
    res.enc = EncoderParams::init(rng);
    res.dec = DecoderParams::init(rng);
    auto params = res.enc.all();
    for (auto& t : res.dec.all()) params.push_back(t);
    Adam opt(params);

    std::vector<size_t> idx(segments.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(idx);
        double epoch_loss = 0;
        int64_t n_seen = 0;
        for (size_t start = 0; start < idx.size(); start += size_t(batch_size)) {
            size_t stop = std::min(idx.size(), start + size_t(batch_size));
            std::vector<TensorPtr> losses;
            for (size_t q = start; q < stop; ++q) {
                auto x = make_tensor({1, kSegmentLen});
                x->v = segments[idx[q]];
                auto xhat = decode_t(res.dec, encode_t(res.enc, x));
                losses.push_back(ops::mse(xhat, x));
            }
            TensorPtr batch_loss = losses[0];
            for (size_t q = 1; q < losses.size(); ++q)
                batch_loss = ops::add(batch_loss, losses[q]);
            batch_loss = ops::scale(batch_loss, 1.0 / double(losses.size()));
            if (!std::isfinite(batch_loss->v[0])) {
                std::ostringstream msg;
                msg << "loss diverged at step " << opt.step_count;
                throw ValidationError("train_autoencoder", msg.str());
            }
            zero_grad(params);
            backward(batch_loss);
            opt.step(warmup_lr(lr, opt.step_count, warmup_steps));
            epoch_loss += batch_loss->v[0] * double(losses.size());
            n_seen += int64_t(losses.size());
        }
        res.loss_curve.push_back(epoch_loss / double(n_seen));
    }
    return res;
}

// ---------------------------------------------------------------------------
// LoRA

struct LoraAdapter {
    TensorPtr base;  // [out, in], frozen
    TensorPtr A;     // [r, in]
    TensorPtr B;     // [out, r], zero-initialized so the wrap starts inert
    double alpha = 8.0;
    size_t r = 4;
};

inline LoraAdapter lora_wrap(const TensorPtr& base, size_t r, double alpha, Rng& rng) {
    if (base->shape.size() != 2) throw ValidationError("lora_wrap", "need a 2-D weight");
    size_t out = base->shape[0], in = base->shape[1];
    if (r == 0 || r > std::min(out, in)) throw ValidationError("lora_wrap", "rank out of range");
    LoraAdapter ad;
    ad.base = base;
    ad.base->requires_grad = false;
    ad.A = make_param({r, in}, rng, 0.01);
    ad.B = make_tensor({out, r}, true);
    ad.alpha = alpha;
    ad.r = r;
    return ad;
}

// base + (alpha/r)·B·A as a graph node (gradients reach only A and B)
inline TensorPtr lora_effective(const LoraAdapter& ad) {
    return ops::add(ad.base, ops::scale(ops::matmul(ad.B, ad.A), ad.alpha / double(ad.r)));
}

inline TensorPtr lora_merge(const LoraAdapter& ad) {
    auto eff = lora_effective(ad);
    auto dense = make_tensor(eff->shape, true);
    dense->v = eff->v;
    return dense;
}

// ---------------------------------------------------------------------------
// Tiny masked transformer

struct TinyLmConfig {
    size_t vocab = 512;  // text ids; specials sit above this ceiling
    size_t h_model = 64;
    size_t n_layers = 2;
    size_t n_heads = 4;
    size_t context = 256;
    size_t lora_rank = 0;  // 0 = no adapters
    double lora_alpha = 8.0;
    size_t d_latent = kLatentDim;

    size_t total_vocab() const { return SpecialVocab{int(vocab), 16}.total(); }
    void validate() const {
        if (h_model % n_heads != 0)
            throw ValidationError("h_model", "must be divisible by n_heads");
        if (vocab == 0 || n_layers == 0 || n_heads == 0 || context == 0)
            throw ValidationError("config", "zero-sized field");
    }
};

struct LmLayer {
    TensorPtr ln1_g, ln1_b, ln2_g, ln2_b;
    TensorPtr wq, wk, wv, wo;  // [h, h], inputs right-multiplied
    TensorPtr bq, bk, bv, bo;
    TensorPtr w_up, b_up, w_down, b_down;  // MLP h → 4h → h
    // optional adapters on q/k/v/o and the MLP maps
    std::vector<LoraAdapter> adapters;
};

struct TinyLmParams {
    TinyLmConfig cfg;
    TensorPtr tok_embed;  // [total_vocab, h]
    TensorPtr pos_embed;  // [context, h]
    std::vector<LmLayer> layers;
    TensorPtr lnf_g, lnf_b;
    TensorPtr head_w, head_b;  // [h, total_vocab]

    static TinyLmParams init(const TinyLmConfig& cfg, Rng& rng) {
        cfg.validate();
        TinyLmParams p;
        p.cfg = cfg;
        size_t h = cfg.h_model, V = cfg.total_vocab();
        double s = 1.0 / std::sqrt(double(h));
        p.tok_embed = make_param({V, h}, rng, 0.02);
        p.pos_embed = make_param({cfg.context, h}, rng, 0.02);
        for (size_t l = 0; l < cfg.n_layers; ++l) {
            LmLayer L;
            L.ln1_g = make_tensor({h}, true);
            L.ln1_b = make_tensor({h}, true);
            L.ln2_g = make_tensor({h}, true);
            L.ln2_b = make_tensor({h}, true);
            for (auto* t : {&L.ln1_g, &L.ln2_g})
                for (double& v : (*t)->v) v = 1.0;
            L.wq = make_param({h, h}, rng, s);
            L.wk = make_param({h, h}, rng, s);
            L.wv = make_param({h, h}, rng, s);
            L.wo = make_param({h, h}, rng, s);
            L.bq = make_tensor({h}, true);
            L.bk = make_tensor({h}, true);
            L.bv = make_tensor({h}, true);
            L.bo = make_tensor({h}, true);
            L.w_up = make_param({h, 4 * h}, rng, s);
            L.b_up = make_tensor({4 * h}, true);
            L.w_down = make_param({4 * h, h}, rng, 0.5 * s);
            L.b_down = make_tensor({h}, true);
            if (cfg.lora_rank > 0)
                for (auto* w : {&L.wq, &L.wk, &L.wv, &L.wo, &L.w_up, &L.w_down})
                    L.adapters.push_back(lora_wrap(*w, cfg.lora_rank, cfg.lora_alpha, rng));
            p.layers.push_back(std::move(L));
        }
        p.lnf_g = make_tensor({h}, true);
        for (double& v : p.lnf_g->v) v = 1.0;
        p.lnf_b = make_tensor({h}, true);
        p.head_w = make_param({h, V}, rng, s);
        p.head_b = make_tensor({V}, true);
        return p;
    }

    // trainable parameters; with LoRA only the adapters (plus embeddings and
    // norms stay frozen too — adapters-only fine-tuning)
    std::vector<TensorPtr> all(bool adapters_only = false) const {
        std::vector<TensorPtr> out;
        if (!adapters_only) {
            out.push_back(tok_embed);
            out.push_back(pos_embed);
        }
        for (const auto& L : layers) {
            if (!adapters_only) {
                for (const auto& t : {L.ln1_g, L.ln1_b, L.ln2_g, L.ln2_b, L.wq, L.wk, L.wv,
                                      L.wo, L.bq, L.bk, L.bv, L.bo, L.w_up, L.b_up, L.w_down,
                                      L.b_down})
                    out.push_back(t);
            }
            for (const auto& ad : L.adapters) {
                out.push_back(ad.A);
                out.push_back(ad.B);
            }
        }
        if (!adapters_only) {
            out.push_back(lnf_g);
            out.push_back(lnf_b);
            out.push_back(head_w);
            out.push_back(head_b);
        }
        return out;
    }
};

namespace nndetail {

// one attention block over a pre-normed input, all heads
inline TensorPtr attention(const LmLayer& L, const TinyLmConfig& cfg, const TensorPtr& x,
                           const AttentionMask& mask) {
    size_t h = cfg.h_model, nh = cfg.n_heads, dh = h / nh;
    TensorPtr wq = L.wq, wk = L.wk, wv = L.wv, wo = L.wo;
    if (!L.adapters.empty()) {
        wq = lora_effective(L.adapters[0]);
        wk = lora_effective(L.adapters[1]);
        wv = lora_effective(L.adapters[2]);
        wo = lora_effective(L.adapters[3]);
    }
    auto q = ops::linear(x, wq, L.bq);
    auto k = ops::linear(x, wk, L.bk);
    auto v = ops::linear(x, wv, L.bv);
    // build per-head attention then restitch; simple but O(n_heads) graphs
    std::vector<TensorPtr> head_out(nh);
    for (size_t head = 0; head < nh; ++head) {
        // slice columns [head*dh, (head+1)*dh) via a fixed selector matrix
        auto sel = make_tensor({h, dh});
        for (size_t j = 0; j < dh; ++j) sel->v[(head * dh + j) * dh + j] = 1.0;
        auto qh = ops::matmul(q, sel);
        auto kh = ops::matmul(k, sel);
        auto vh = ops::matmul(v, sel);
        auto scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), 1.0 / std::sqrt(double(dh)));
        auto probs = ops::masked_softmax(scores, mask);
        head_out[head] = ops::matmul(probs, vh);  // [n, dh]
    }
    // concat heads back to [n, h] through the transposed selectors
    TensorPtr cat;
    for (size_t head = 0; head < nh; ++head) {
        auto sel = make_tensor({dh, h});
        for (size_t j = 0; j < dh; ++j) sel->v[j * h + head * dh + j] = 1.0;
        auto widened = ops::matmul(head_out[head], sel);
        cat = cat ? ops::add(cat, widened) : widened;
    }
    return ops::linear(cat, wo, L.bo);
}

inline TensorPtr mlp(const LmLayer& L, const TensorPtr& x) {
    TensorPtr w_up = L.w_up, w_down = L.w_down;
    if (!L.adapters.empty()) {
        w_up = lora_effective(L.adapters[4]);
        w_down = lora_effective(L.adapters[5]);
    }
    return ops::linear(ops::gelu(ops::linear(x, w_up, L.b_up)), w_down, L.b_down);
}

}  // namespace nndetail

// Forward pass over a mixed sequence. `ecg_embed[i]` must be a non-null
// h_model vector (typically project(encode(segment))) exactly at EcgSegment
// positions; text and special tokens use the embedding table.
inline TensorPtr lm_forward(const TinyLmParams& p, const TokenSequence& seq,
                            const std::vector<TensorPtr>& ecg_embed,
                            const AttentionMask& mask, size_t n_layers_override = 0) {
    size_t n = seq.size();
    if (mask.n() != n) throw ValidationError("mask", "size mismatch with sequence");
    if (ecg_embed.size() != n) throw ValidationError("ecg_embed", "length mismatch");
    if (n > p.cfg.context) throw ValidationError("seq", "longer than the model context");

    SpecialVocab sv{int(p.cfg.vocab), 16};
    std::vector<TensorPtr> rows(n);
    for (size_t i = 0; i < n; ++i) {
        const Token& tok = seq.tokens[i];
        if (tok.kind == TokenKind::EcgSegment) {
            if (!ecg_embed[i] || ecg_embed[i]->numel() != p.cfg.h_model)
                throw ValidationError("ecg_embed", "missing embedding at an ECG slot");
            rows[i] = ecg_embed[i];
        } else {
            int id = tok.kind == TokenKind::Text ? tok.token_id
                     : tok.kind == TokenKind::EcgStart ? sv.ecg_start()
                     : tok.kind == TokenKind::EcgEnd   ? sv.ecg_end()
                     : tok.kind == TokenKind::LeadStart ? sv.lead_start(tok.lead_id)
                                                        : sv.lead_end(tok.lead_id);
            rows[i] = ops::reshape(ops::embed_rows(p.tok_embed, {id}), {p.cfg.h_model});
        }
    }
    auto x = ops::stack_rows(rows);
    std::vector<int> pos_ids(n);
    for (size_t i = 0; i < n; ++i) pos_ids[i] = int(i);
    x = ops::add(x, ops::embed_rows(p.pos_embed, pos_ids));

    size_t depth = n_layers_override > 0 ? std::min(n_layers_override, p.layers.size())
                                         : p.layers.size();
    for (size_t l = 0; l < depth; ++l) {
        const auto& L = p.layers[l];
        auto a = nndetail::attention(L, p.cfg, ops::layer_norm(x, L.ln1_g, L.ln1_b), mask);
        x = ops::add(x, a);
        auto m = nndetail::mlp(L, ops::layer_norm(x, L.ln2_g, L.ln2_b));
        x = ops::add(x, m);
    }
    x = ops::layer_norm(x, p.lnf_g, p.lnf_b);
    return ops::linear(x, p.head_w, p.head_b);  // [n, total_vocab]
}

inline TensorPtr masked_ce(const TensorPtr& logits, const std::vector<int>& targets,
                           const std::vector<bool>& loss_pos) {
    return ops::cross_entropy_masked(logits, targets, loss_pos);
}

// ---------------------------------------------------------------------------
// Information-flow probe: which input positions can perturb position i's
// output after the first attention layer? Must equal the mask rows.

inline std::vector<std::vector<bool>> attention_reach(const TinyLmParams& p,
                                                      const TokenSequence& seq,
                                                      const AttentionMask& mask,
                                                      uint64_t seed = 7) {
    size_t n = seq.size();
    Rng rng(seed);
    auto embeds = [&](double bump, size_t where) {
        std::vector<TensorPtr> rows(n);
        Rng r2(seed + 1);  // same base embeddings each call
        for (size_t i = 0; i < n; ++i) {
            auto t = make_tensor({p.cfg.h_model});
            for (double& v : t->v) v = r2.normal();
            // bump one component: a uniform shift would be erased by layer norm
            if (i == where) t->v[0] += bump;
            rows[i] = t;
        }
        return rows;
    };
    // run depth-1 forward on dense random embeddings, bypassing the table so
    // every position (text or ECG) is individually perturbable
    auto run = [&](double bump, size_t where) {
        std::vector<TensorPtr> rows = embeds(bump, where);
        auto x = ops::stack_rows(rows);
        std::vector<int> pos_ids(n);
        for (size_t i = 0; i < n; ++i) pos_ids[i] = int(i);
        x = ops::add(x, ops::embed_rows(p.pos_embed, pos_ids));
        const auto& L = p.layers[0];
        auto a = nndetail::attention(L, p.cfg, ops::layer_norm(x, L.ln1_g, L.ln1_b), mask);
        return ops::add(x, a)->v;
    };
    auto base = run(0.0, 0);
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (size_t j = 0; j < n; ++j) {
        auto pert = run(0.5 + rng.uniform(), j);
        for (size_t i = 0; i < n; ++i) {
            double diff = 0;
            for (size_t c = 0; c < p.cfg.h_model; ++c)
                diff = std::max(diff, std::abs(pert[i * p.cfg.h_model + c] -
                                               base[i * p.cfg.h_model + c]));
            reach[i][j] = diff > 1e-9;
        }
    }
    return reach;
}

// ---------------------------------------------------------------------------
// Checkpoints: one-line JSON header, "---", then little-endian float64 blobs
// in header order.

inline void save_checkpoint(const std::string& path,
                            const std::map<std::string, TensorPtr>& tensors) {
    nlohmann::json hdr;
    hdr["version"] = 1;
    hdr["dtype"] = "f64";
    auto list = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t->shape;
        list.push_back(e);
    }
    hdr["tensors"] = list;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("path", "cannot open for writing: " + path);
    out << hdr.dump() << "\n---\n";
    for (const auto& [name, t] : tensors)
        out.write(reinterpret_cast<const char*>(t->v.data()),
                  std::streamsize(t->v.size() * sizeof(double)));
}

inline std::map<std::string, TensorPtr> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("path", "cannot open: " + path);
    std::string header, sep;
    std::getline(in, header);
    std::getline(in, sep);
    if (sep != "---") throw ValidationError("checkpoint", "malformed header");
    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("checkpoint", "malformed header");
    }
    if (hdr.value("version", 0) != 1) throw ValidationError("checkpoint", "unknown version");
    std::map<std::string, TensorPtr> out;
    for (const auto& e : hdr["tensors"]) {
        auto t = make_tensor(e["shape"].get<std::vector<size_t>>(), true);
        in.read(reinterpret_cast<char*>(t->v.data()),
                std::streamsize(t->v.size() * sizeof(double)));
        if (!in) throw ValidationError("checkpoint", "truncated tensor data");
        out[e["name"].get<std::string>()] = t;
    }
    return out;
}

inline std::map<std::string, TensorPtr> named_tensors(const TinyLmParams& p) {
    std::map<std::string, TensorPtr> m;
    m["tok_embed"] = p.tok_embed;
    m["pos_embed"] = p.pos_embed;
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const auto& L = p.layers[l];
        std::string pre = "layer" + std::to_string(l) + ".";
        m[pre + "ln1_g"] = L.ln1_g;
        m[pre + "ln1_b"] = L.ln1_b;
        m[pre + "ln2_g"] = L.ln2_g;
        m[pre + "ln2_b"] = L.ln2_b;
        m[pre + "wq"] = L.wq;
        m[pre + "wk"] = L.wk;
        m[pre + "wv"] = L.wv;
        m[pre + "wo"] = L.wo;
        m[pre + "bq"] = L.bq;
        m[pre + "bk"] = L.bk;
        m[pre + "bv"] = L.bv;
        m[pre + "bo"] = L.bo;
        m[pre + "w_up"] = L.w_up;
        m[pre + "b_up"] = L.b_up;
        m[pre + "w_down"] = L.w_down;
        m[pre + "b_down"] = L.b_down;
        for (size_t a = 0; a < L.adapters.size(); ++a) {
            m[pre + "lora" + std::to_string(a) + ".A"] = L.adapters[a].A;
            m[pre + "lora" + std::to_string(a) + ".B"] = L.adapters[a].B;
        }
    }
    m["lnf_g"] = p.lnf_g;
    m["lnf_b"] = p.lnf_b;
    m["head_w"] = p.head_w;
    m["head_b"] = p.head_b;
    return m;
}

inline std::map<std::string, TensorPtr> named_tensors(const EncoderParams& p) {
    return {{"enc.w1", p.w1}, {"enc.b1", p.b1}, {"enc.w2", p.w2}, {"enc.b2", p.b2},
            {"enc.w3", p.w3}, {"enc.b3", p.b3}, {"enc.wl", p.wl}, {"enc.bl", p.bl}};
}

inline std::map<std::string, TensorPtr> named_tensors(const DecoderParams& p) {
    return {{"dec.wl", p.wl}, {"dec.bl", p.bl}, {"dec.w1", p.w1}, {"dec.b1", p.b1},
            {"dec.w2", p.w2}, {"dec.b2", p.b2}, {"dec.w3", p.w3}, {"dec.b3", p.b3}};
}

}  // namespace ecglab
