#pragma once

// Synthetic cross-lead probe: does lead 2 carry an inverted copy of lead 1?
// The answer is emitted as a text token, so the task measures whether the
// attention scheme lets segment embeddings be compared across leads. Used by
// the `train-lm` subcommand and by the scheme-ablation study.

#include "ecglab/mask.hpp"
#include "ecglab/nn.hpp"

namespace ecglab {

// answer vocabulary: 2 = "no", 3 = "yes"; token 1 is the query slot
constexpr int kLeadTaskNo = 2;
constexpr int kLeadTaskYes = 3;

struct LeadTaskExample {
    TokenSequence seq;
    std::vector<TensorPtr> embed;  // per-position; null except at segments
    int answer = kLeadTaskNo;
};

inline TinyLmConfig lead_task_config() {
    TinyLmConfig cfg;
    cfg.vocab = 8;
    cfg.h_model = 32;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.context = 24;
    return cfg;
}

// One block, two leads, T seconds, then a single assistant query token whose
// next-token target is the yes/no answer. Positive: lead 2 carries the
// time-aligned inversion of lead 1. Negative: the same inverted segments but
// shuffled by a derangement, so marginal statistics match and only the
// per-second alignment separates the classes.
inline LeadTaskExample make_lead_example(const TinyLmConfig& cfg, int T, Rng& rng) {
    LeadTaskExample ex;
    bool inverted = rng.uniform() < 0.5;
    ex.answer = inverted ? kLeadTaskYes : kLeadTaskNo;

    EcgBlockDesc blk;
    blk.n_leads = 2;
    blk.n_seconds = T;
    ex.seq = assemble({{1}}, {blk}, {{true, 0, Role::User}, {false, 0, Role::Assistant}});

    std::vector<std::vector<double>> lead1(static_cast<size_t>(T));
    for (auto& v : lead1) {
        v.resize(cfg.h_model);
        for (auto& x : v) x = rng.normal();
    }
    std::vector<size_t> order(lead1.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (!inverted) {
        while (true) {
            rng.shuffle(order);
            bool fixed_point = false;
            for (size_t i = 0; i < order.size(); ++i) fixed_point |= order[i] == i;
            if (!fixed_point) break;
        }
    }
    ex.embed.assign(ex.seq.size(), nullptr);
    for (size_t i = 0; i < ex.seq.size(); ++i) {
        const Token& tok = ex.seq.tokens[i];
        if (tok.kind != TokenKind::EcgSegment) continue;
        auto t = make_tensor({cfg.h_model});
        if (tok.lead_id == 1) {
            t->v = lead1[size_t(tok.t - 1)];
        } else {
            const auto& src = lead1[order[size_t(tok.t - 1)]];
            for (size_t k = 0; k < cfg.h_model; ++k) t->v[k] = -src[k];
        }
        ex.embed[i] = t;
    }
    return ex;
}

// index of the assistant query token (the only loss position)
inline size_t lead_task_query_pos(const LeadTaskExample& ex) {
    auto lp = loss_positions(ex.seq);
    for (size_t i = 0; i < lp.size(); ++i)
        if (lp[i]) return i;
    throw ValidationError("example", "no loss position");
}

inline int lead_task_predict(const TinyLmParams& p, const LeadTaskExample& ex,
                             MaskScheme scheme) {
    auto mask = build_mask(ex.seq, scheme);
    auto logits = lm_forward(p, ex.seq, ex.embed, mask);
    size_t q = lead_task_query_pos(ex);
    size_t v = p.cfg.total_vocab();
    return logits->v[q * v + kLeadTaskYes] > logits->v[q * v + kLeadTaskNo] ? kLeadTaskYes
                                                                            : kLeadTaskNo;
}

struct LeadTaskResult {
    TinyLmParams params;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double final_loss = 0.0;
};

inline LeadTaskResult train_lead_task(MaskScheme scheme, uint64_t seed, int n_train = 96,
                                      int n_test = 96, int steps = 240, double lr = 3e-3,
                                      int T = 4, int batch = 16) {
    Rng rng(seed);
    TinyLmConfig cfg = lead_task_config();
    // fresh examples every batch, so held-out accuracy measures the rule, not recall
    std::vector<LeadTaskExample> train, test;
    for (int i = 0; i < n_train; ++i) train.push_back(make_lead_example(cfg, T, rng));
    for (int i = 0; i < n_test; ++i) test.push_back(make_lead_example(cfg, T, rng));

    LeadTaskResult res;
    res.params = TinyLmParams::init(cfg, rng);
    auto params = res.params.all();
    Adam opt(params);

    // masks depend only on the layout, which is fixed across examples
    auto mask = build_mask(train[0].seq, scheme);
    for (int step = 0; step < steps; ++step) {
        std::vector<TensorPtr> losses;
        for (int b = 0; b < batch; ++b) {
            auto ex = make_lead_example(cfg, T, rng);
            auto logits = lm_forward(res.params, ex.seq, ex.embed, mask);
            std::vector<int> targets(ex.seq.size(), 0);
            auto lp = loss_positions(ex.seq);
            targets[lead_task_query_pos(ex)] = ex.answer;
            losses.push_back(masked_ce(logits, targets, lp));
        }
        TensorPtr loss = losses[0];
        for (size_t q = 1; q < losses.size(); ++q) loss = ops::add(loss, losses[q]);
        loss = ops::scale(loss, 1.0 / double(losses.size()));
        zero_grad(params);
        backward(loss);
        opt.step(warmup_lr(lr, opt.step_count, 10));
        res.final_loss = loss->v[0];
    }

    auto acc = [&](const std::vector<LeadTaskExample>& xs) {
        int ok = 0;
        for (const auto& ex : xs) ok += lead_task_predict(res.params, ex, scheme) == ex.answer;
        return double(ok) / double(xs.size());
    };
    res.train_acc = acc(train);
    res.test_acc = acc(test);
    return res;
}

}  // namespace ecglab
