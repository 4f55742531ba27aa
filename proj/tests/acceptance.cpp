// Acceptance suite: one pass/fail line per criterion. Run via ctest or
// directly; exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#include "ecglab/datagen.hpp"
#include "ecglab/forecast.hpp"
#include "ecglab/leadtask.hpp"
#include "ecglab/mask.hpp"
#include "ecglab/metrics.hpp"
#include "ecglab/nn.hpp"
#include "ecglab/preprocess.hpp"
#include "ecglab/stats.hpp"
#include "sequence_gen.hpp"

using namespace ecglab;

namespace {

int g_failures = 0;

void criterion(int id, const char* desc, const std::function<bool(std::string&)>& body) {
    auto t0 = std::chrono::steady_clock::now();
    std::string note;
    bool ok = false;
    try {
        ok = body(note);
    } catch (const std::exception& e) {
        note = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", id, desc, secs,
                note.empty() ? "" : " -- ", note.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

// ---------------------------------------------------------------------------
// 1 + 2: masks

bool c1_mask_oracle(std::string& note) {
    Rng rng(101);
    auto t0 = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 1000; ++trial) {
        auto seq = testgen::random_sequence(rng);
        for (auto scheme : {MaskScheme::LeadAware, MaskScheme::FullEcg, MaskScheme::Causal})
            if (!(build_mask(seq, scheme) == oracle_mask(seq, scheme))) {
                note = "builder/oracle mismatch at trial " + std::to_string(trial);
                return false;
            }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= 30.0) {
        note = "runtime " + std::to_string(secs) + " s exceeds 30 s";
        return false;
    }
    return true;
}

bool c2_permutation(std::string& note) {
    Rng rng(102);
    int done = 0;
    while (done < 200) {
        auto seq = testgen::random_sequence(rng);
        // pick a block with >= 2 leads
        std::set<int> blocks;
        std::map<int, int> leads_of;
        for (const auto& tok : seq.tokens)
            if (tok.kind == TokenKind::LeadStart) {
                blocks.insert(tok.ecg_index);
                leads_of[tok.ecg_index] = std::max(leads_of[tok.ecg_index], tok.lead_id);
            }
        std::vector<int> usable;
        for (int b : blocks)
            if (leads_of[b] >= 2) usable.push_back(b);
        if (usable.empty()) continue;
        int b = usable[size_t(rng.uniform_int(usable.size()))];
        std::vector<size_t> perm(size_t(leads_of[b]));
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        if (!permute_leads_mask_check(seq, size_t(b), perm, MaskScheme::LeadAware)) {
            note = "conjugation failed at trial " + std::to_string(done);
            return false;
        }
        ++done;
    }
    // causal counterexample: swapping the leads of a 2-lead block changes
    // which positions precede which, so conjugation must fail
    EcgBlockDesc blk;
    blk.n_leads = 2;
    blk.n_seconds = 2;
    auto seq = assemble({}, {blk}, {{true, 0, Role::User}});
    if (permute_leads_mask_check(seq, 0, {1, 0}, MaskScheme::Causal)) {
        note = "expected a causal counterexample, found none";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 3: information flow

bool c3_information_flow(std::string& note) {
    Rng rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        TinyLmConfig cfg;
        cfg.vocab = 64;
        cfg.h_model = rng.uniform() < 0.5 ? 4 : 8;
        cfg.n_heads = cfg.h_model == 4 ? 2 : (rng.uniform() < 0.5 ? 2 : 4);
        cfg.n_layers = 1;
        cfg.context = 64;
        auto p = TinyLmParams::init(cfg, rng);

        // one block so every special id is held by a unique position; text
        // ids chosen distinct for the same reason
        EcgBlockDesc blk;
        blk.n_leads = 1 + int(rng.uniform_int(3));
        blk.n_seconds = 1 + int(rng.uniform_int(3));
        auto seq = assemble({{1, 2}, {3}}, {blk},
                            {{false, 0, Role::User},
                             {true, 0, Role::User},
                             {false, 1, Role::Assistant}});
        MaskScheme schemes[] = {MaskScheme::LeadAware, MaskScheme::FullEcg, MaskScheme::Causal};
        auto scheme = schemes[trial % 3];
        auto mask = build_mask(seq, scheme);
        size_t n = seq.size(), V = cfg.total_vocab();
        SpecialVocab sv{int(cfg.vocab), 16};

        std::vector<TensorPtr> embed(n);
        for (size_t i = 0; i < n; ++i)
            if (seq.tokens[i].kind == TokenKind::EcgSegment) {
                embed[i] = make_tensor({cfg.h_model});
                for (auto& x : embed[i]->v) x = rng.normal();
            }
        auto base = lm_forward(p, seq, embed, mask, 1);

        for (size_t j = 0; j < n; ++j) {
            // perturb the input feeding position j only
            double kept = 0;
            size_t kept_idx = 0;
            TensorPtr kept_tensor;
            if (seq.tokens[j].kind == TokenKind::EcgSegment) {
                kept_tensor = embed[j];
            } else {
                int id = sv.id_of(seq.tokens[j]);
                kept_tensor = p.tok_embed;
                kept_idx = size_t(id) * cfg.h_model;
            }
            kept = kept_tensor->v[kept_idx];
            kept_tensor->v[kept_idx] = kept + 0.37;
            auto pert = lm_forward(p, seq, embed, mask, 1);
            kept_tensor->v[kept_idx] = kept;
            for (size_t i = 0; i < n; ++i) {
                if (mask.get(i, j)) continue;
                for (size_t k = 0; k < V; ++k)
                    if (std::abs(base->v[i * V + k] - pert->v[i * V + k]) >= 1e-10) {
                        note = "leak " + std::to_string(j) + " -> " + std::to_string(i) +
                               " under " + to_string(scheme);
                        return false;
                    }
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 4: gradients

bool fd_check(const std::vector<TensorPtr>& params, const std::function<TensorPtr()>& build,
              Rng& rng, double& worst, double tol = 1e-4, size_t max_per_tensor = 8) {
    auto loss = build();
    zero_grad(params);
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.push_back(p->g);
    const double eps = 1e-5;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        size_t n = p.numel();
        size_t checks = std::min(n, max_per_tensor);
        for (size_t c = 0; c < checks; ++c) {
            size_t i = n <= max_per_tensor ? c : size_t(rng.uniform_int(n));
            double keep = p.v[i];
            p.v[i] = keep + eps;
            double up = build()->v[0];
            p.v[i] = keep - eps;
            double dn = build()->v[0];
            p.v[i] = keep;
            double num = (up - dn) / (2 * eps);
            double ana = analytic[pi][i];
            double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-3});
            worst = std::max(worst, rel);
            if (rel >= tol) return false;
        }
    }
    return true;
}

bool c4_gradcheck(std::string& note) {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(104);
    auto randt = [&rng](std::vector<size_t> shape) {
        return make_param(std::move(shape), rng, 1.0);
    };
    double worst = 0;
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
        {
            auto x = randt({3, 5}), w = randt({5, 4}), b = randt({4});
            ok = fd_check({x, w, b},
                          [&] { return ops::mean_all(ops::gelu(ops::linear(x, w, b))); }, rng,
                          worst);
        }
        if (ok) {
            auto a = randt({3, 4}), b = randt({3, 5});
            ok = fd_check({a, b},
                          [&] { return ops::mean_all(ops::matmul(ops::transpose(a), b)); }, rng,
                          worst);
        }
        if (ok) {
            auto x = randt({2, 17}), w = randt({3, 2, 7}), b = randt({3});
            ok = fd_check({x, w, b},
                          [&] { return ops::mean_all(ops::gelu(ops::conv1d(x, w, b, 4, 3))); },
                          rng, worst);
        }
        if (ok) {
            auto x = randt({3, 4}), w = randt({3, 2, 7}), b = randt({2});
            ok = fd_check({x, w, b}, [&] {
                return ops::mean_all(ops::gelu(ops::conv_transpose1d(x, w, b, 4, 2, 1)));
            }, rng, worst);
        }
        if (ok) {
            auto x = randt({4, 6}), g = randt({6}), b = randt({6});
            ok = fd_check({x, g, b},
                          [&] { return ops::mean_all(ops::gelu(ops::layer_norm(x, g, b))); },
                          rng, worst, 2e-4);
        }
        if (ok) {
            EcgBlockDesc blk;
            blk.n_leads = 2;
            blk.n_seconds = 2;
            auto mseq = assemble({}, {blk}, {{true, 0, Role::User}});
            auto mask = build_mask(mseq, MaskScheme::LeadAware);
            auto s = randt({mseq.size(), mseq.size()});
            auto weights = randt({mseq.size(), mseq.size()});
            ok = fd_check({s}, [&] {
                return ops::mean_all(ops::matmul(ops::masked_softmax(s, mask), weights));
            }, rng, worst);
        }
        if (ok) {
            auto logits = randt({5, 6});
            std::vector<int> targets = {1, 0, 3, 5, 2};
            std::vector<bool> use = {true, false, true, true, false};
            ok = fd_check({logits},
                          [&] { return ops::cross_entropy_masked(logits, targets, use); }, rng,
                          worst);
        }
        if (ok) {
            auto a = randt({2, 9}), b = randt({2, 9});
            ok = fd_check({a, b}, [&] { return ops::mse(a, b); }, rng, worst);
        }
        if (ok) {
            auto table = randt({7, 3});
            std::vector<int> ids = {2, 2, 5};
            ok = fd_check({table},
                          [&] { return ops::mean_all(ops::gelu(ops::embed_rows(table, ids))); },
                          rng, worst);
        }
        if (ok) {
            // full LM loss exercises attention, stacking, and the head
            TinyLmConfig cfg;
            cfg.vocab = 6;
            cfg.h_model = 8;
            cfg.n_heads = 2;
            cfg.n_layers = 1;
            cfg.context = 32;
            auto p = TinyLmParams::init(cfg, rng);
            EcgBlockDesc blk;
            blk.n_leads = 2;
            blk.n_seconds = 2;
            auto seq = assemble({{1}, {2}}, {blk},
                                {{false, 0, Role::User},
                                 {true, 0, Role::User},
                                 {false, 1, Role::Assistant}});
            std::vector<TensorPtr> embed(seq.size());
            for (size_t i = 0; i < seq.size(); ++i)
                if (seq.tokens[i].kind == TokenKind::EcgSegment) {
                    embed[i] = make_tensor({cfg.h_model});
                    for (auto& x : embed[i]->v) x = rng.normal();
                }
            auto mask = build_mask(seq, MaskScheme::LeadAware);
            std::vector<int> targets(seq.size(), 0);
            auto lp = loss_positions(seq);
            for (size_t i = 0; i < seq.size(); ++i)
                if (lp[i]) targets[i] = int(rng.uniform_int(cfg.vocab));
            ok = fd_check(p.all(), [&] {
                return masked_ce(lm_forward(p, seq, embed, mask), targets, lp);
            }, rng, worst, 2e-4, 4);
        }
        if (ok) {
            auto enc = EncoderParams::init(rng);
            auto dec = DecoderParams::init(rng);
            auto x = make_tensor({1, kSegmentLen});
            for (auto& v : x->v) v = rng.normal();
            auto params = enc.all();
            for (auto& t : dec.all()) params.push_back(t);
            ok = fd_check(params,
                          [&] { return ops::mse(decode_t(dec, encode_t(enc, x)), x); }, rng,
                          worst, 1e-4, 2);
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream msg;
    msg << "max rel err " << worst;
    if (secs >= 300) msg << "; runtime " << secs << " s exceeds 5 min";
    note = msg.str();
    return ok && secs < 300;
}

// ---------------------------------------------------------------------------
// 5: autoencoder

bool c5_autoencoder(std::string& note) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<double>> segments;
    for (uint64_t r = 0; segments.size() < 1000; ++r) {
        SynthSpec spec;
        spec.duration_s = 110;
        spec.heart_rate_bpm = 55 + double(r % 7) * 6.0;
        spec.rr_jitter_ms = 25;
        auto rec = synth_ecg(spec, 500 + r);
        for (const auto& lead : segment(rec))
            for (const auto& s : lead) {
                segments.push_back(s);
                if (segments.size() == 1000) break;
            }
    }
    std::vector<std::vector<double>> train(segments.begin(), segments.begin() + 800);
    std::vector<std::vector<double>> held(segments.begin() + 800, segments.end());

    auto res = train_autoencoder(train, 30, 1e-3, 42);
    double mse_sum = 0, var_sum = 0;
    size_t count = 0;
    for (const auto& s : held) {
        auto rec = decode(res.dec, encode(res.enc, s));
        double mean = 0;
        for (double v : s) mean += v;
        mean /= double(s.size());
        for (size_t i = 0; i < s.size(); ++i) {
            mse_sum += (rec[i] - s[i]) * (rec[i] - s[i]);
            var_sum += (s[i] - mean) * (s[i] - mean);
            ++count;
        }
    }
    double mse = mse_sum / double(count), var = var_sum / double(count);

    // determinism spot-check on a short rerun
    auto a = train_autoencoder(train, 2, 1e-3, 42);
    auto b = train_autoencoder(train, 2, 1e-3, 42);
    bool deterministic = a.loss_curve == b.loss_curve;

    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream msg;
    msg << "held-out MSE " << mse << " vs 10% variance " << 0.1 * var;
    note = msg.str();
    return mse < 0.1 * var && deterministic && secs < 300;
}

// ---------------------------------------------------------------------------
// 6 + 7: stats

bool c6_worked_examples(std::string& note) {
    if (heart_rate({819}) != 73) {
        note = "819 ms case";
        return false;
    }
    if (heart_rate({652}) != 92) {
        note = "652 ms case";
        return false;
    }
    std::vector<double> rr = {762, 770, 590, 863, 773, 762, 770, 754, 773};
    if (std::llround(mean_of(rr)) != 757 || heart_rate(rr) != 79) {
        note = "9-interval mean/HR case";
        return false;
    }
    auto pacs = detect_pacs(rr);
    if (pacs.size() != 1 || pacs[0] != 4) {
        note = "PAC at the 590/863 pair not found";
        return false;
    }
    return true;
}

bool c7_stats_oracle(std::string& note) {
    Rng rng(107);
    for (int trial = 0; trial < 50; ++trial) {
        SynthSpec spec;
        spec.duration_s = 12;
        spec.rr_jitter_ms = 0;
        spec.heart_rate_bpm = rng.uniform(50, 90);
        spec.wave.pr_ms = rng.uniform(140, 200);
        spec.wave.p_width_ms = rng.uniform(80, 110);
        spec.wave.p_amp_mv = rng.uniform(0.1, 0.25);
        spec.wave.qrs_amp_mv = rng.uniform(0.8, 1.5);
        spec.wave.t_amp_mv = rng.uniform(0.2, 0.5);
        spec.wave.qt_ms = rng.uniform(340, 420);
        bool with_pacs = rng.uniform() < 0.5;
        if (with_pacs) spec.pac_positions = {4, 8};

        SynthTruth truth;
        auto rec = synth_ecg(spec, 700 + uint64_t(trial), &truth);
        auto peaks = detect_r_peaks(rec.leads[0], rec.fs);
        if (peaks.size() != truth.beats.size()) {
            note = "R-peak count mismatch at trial " + std::to_string(trial);
            return false;
        }
        for (size_t i = 0; i < peaks.size(); ++i)
            if (std::abs(peaks[i] - truth.beats[i].r_peak) > 2) {
                note = "R-peak offset > 2 samples at trial " + std::to_string(trial);
                return false;
            }

        auto s = lead_stats(rec.leads[0], rec.fs);
        if (!with_pacs) {
            // HR bound applies to steady rhythm only; PACs shift the mean RR
            if (!s.heart_rate_bpm ||
                std::abs(double(*s.heart_rate_bpm) - spec.heart_rate_bpm) > 1.0) {
                note = "HR off by > 1 bpm at trial " + std::to_string(trial);
                return false;
            }
            // PR bound applies to steady rhythm only: a premature beat's P wave
            // can fuse with the preceding T wave, which legitimately distorts
            // the averaged PR interval
            if (!s.pr_interval_ms || std::abs(*s.pr_interval_ms - spec.wave.pr_ms) > 12.0) {
                note = "PR off by > 12 ms at trial " + std::to_string(trial);
                return false;
            }
        }
        std::vector<int> expected = with_pacs ? std::vector<int>{4, 8} : std::vector<int>{};
        if (s.pac_beat_indices != expected) {
            note = "PAC positions mismatch at trial " + std::to_string(trial);
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 8: forecast labeling

bool c8_forecast_labels(std::string& note) {
    Rng rng(108);
    size_t n_samples = 0;
    for (int r = 0; r < 100; ++r) {
        SynthSpec ss;
        ss.duration_s = 1250;
        ss.fs = 100;
        ss.heart_rate_bpm = 55 + double(r % 6) * 6.0;
        ss.rr_jitter_ms = 10;
        if (r % 5 == 0) {
            ss.rhythm_schedule = {{0.0, Rhythm::NORM}};  // nothing to forecast
        } else {
            Rhythm abn = r % 2 ? Rhythm::AFIB : Rhythm::AFL;
            ss.rhythm_schedule = {{0.0, Rhythm::NORM}, {rng.uniform(300, 1000), abn}};
        }
        auto rec = synth_ecg(ss, 900 + uint64_t(r));
        const auto& pos = rec.annotations->beat_positions;
        const auto& lab = rec.annotations->beat_labels;
        for (int w : forecast_windows()) {
            for (int h : forecast_horizons()) {
                ForecastSpec spec;
                spec.window_s = w;
                spec.horizon_s = h;
                spec.balance_ratio = 1e12;  // labeling check wants every window
                auto samples = extract_samples(rec, "r", spec, uint64_t(r));
                n_samples += samples.size();
                for (const auto& s : samples) {
                    bool abnormal = false;
                    for (size_t i = 0; i < pos.size(); ++i) {
                        double t = double(pos[i]) / rec.fs;
                        if (t >= s.t0_s && t < s.t0_s + w && lab[i] != BeatLabel::NORM) {
                            note = "non-NORM beat inside an input span";
                            return false;
                        }
                        abnormal |= t > s.t0_s + w && t <= s.t0_s + w + h &&
                                    (lab[i] == BeatLabel::AFIB || lab[i] == BeatLabel::AFL);
                    }
                    if (s.label != (abnormal ? "ABNORMAL" : "NORM")) {
                        note = "label disagrees with brute force";
                        return false;
                    }
                }
            }
        }
    }
    note = std::to_string(n_samples) + " samples checked";
    return n_samples > 0;
}

// ---------------------------------------------------------------------------
// 9: directional ablation

bool c9_ablation(std::string& note) {
    auto t0 = std::chrono::steady_clock::now();
    std::ostringstream msg;
    for (uint64_t seed : {1, 2, 3}) {
        auto la = train_lead_task(MaskScheme::LeadAware, seed);
        auto ca = train_lead_task(MaskScheme::Causal, seed);
        msg << "seed " << seed << ": " << la.test_acc << " vs " << ca.test_acc << "; ";
        if (la.test_acc < ca.test_acc || la.test_acc < 0.70) {
            note = msg.str() + "ordering violated";
            return false;
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    note = msg.str();
    return secs < 1200;
}

// ---------------------------------------------------------------------------
// 10: metric oracles

double f1_oracle(const std::vector<int>& preds, const std::vector<int>& labels, int classes) {
    std::set<int> present(labels.begin(), labels.end());
    double total = 0;
    for (int c : present) {
        double tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < preds.size(); ++i) {
            tp += preds[i] == c && labels[i] == c;
            fp += preds[i] == c && labels[i] != c;
            fn += preds[i] != c && labels[i] == c;
        }
        total += 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    }
    (void)classes;
    return 100.0 * total / double(present.size());
}

double auroc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0, pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i)
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] != 1 || labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    return wins / pairs;
}

bool c10_metric_oracles(std::string& note) {
    // enumerate all 2-class pred/label assignments for n <= 8
    for (int n = 1; n <= 8; ++n) {
        int total = 1 << (2 * n);
        for (int code = 0; code < total; ++code) {
            std::vector<int> preds(static_cast<size_t>(n), 0), labels(static_cast<size_t>(n), 0);
            for (int i = 0; i < n; ++i) {
                preds[size_t(i)] = (code >> i) & 1;
                labels[size_t(i)] = (code >> (n + i)) & 1;
            }
            if (std::abs(macro_f1(preds, labels, 2) - f1_oracle(preds, labels, 2)) > 1e-9) {
                note = "macro-F1 mismatch, n=" + std::to_string(n);
                return false;
            }
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += preds[size_t(i)] == labels[size_t(i)];
            if (std::abs(accuracy(preds, labels) - 100.0 * acc / n) > 1e-9) {
                note = "accuracy mismatch";
                return false;
            }
        }
    }
    // hamming: enumerate all nonempty subsets of {0, 1} for n <= 3
    const std::vector<std::set<int>> subsets = {{0}, {1}, {0, 1}};
    for (int n = 1; n <= 3; ++n) {
        int total = 1;
        for (int i = 0; i < 2 * n; ++i) total *= 3;
        for (int code = 0; code < total; ++code) {
            int c = code;
            std::vector<std::set<int>> ps, ls;
            for (int i = 0; i < n; ++i) {
                ps.push_back(subsets[size_t(c % 3)]);
                c /= 3;
            }
            for (int i = 0; i < n; ++i) {
                ls.push_back(subsets[size_t(c % 3)]);
                c /= 3;
            }
            double want = 0;
            for (int i = 0; i < n; ++i) {
                std::set<int> inter, uni = ps[size_t(i)];
                for (int v : ls[size_t(i)]) uni.insert(v);
                for (int v : ps[size_t(i)])
                    if (ls[size_t(i)].count(v)) inter.insert(v);
                want += double(inter.size()) / double(uni.size());
            }
            if (std::abs(hamming(ps, ls) - want / n) > 1e-9) {
                note = "hamming mismatch";
                return false;
            }
        }
    }
    // random instances, n <= 20
    Rng rng(110);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 2 + int(rng.uniform_int(19));
        std::vector<int> preds(static_cast<size_t>(n), 0), labels(static_cast<size_t>(n), 0);
        std::vector<double> scores(static_cast<size_t>(n), 0.0), truth(static_cast<size_t>(n), 0.0);
        bool both = false;
        while (!both) {
            for (int i = 0; i < n; ++i) {
                preds[size_t(i)] = int(rng.uniform_int(3));
                labels[size_t(i)] = int(rng.uniform_int(3));
                scores[size_t(i)] = std::round(rng.uniform() * 10) / 10;
                truth[size_t(i)] = rng.normal();
            }
            int ones = 0;
            for (int i = 0; i < n; ++i) {
                labels[size_t(i)] = labels[size_t(i)] > 0;
                ones += labels[size_t(i)];
            }
            both = ones > 0 && ones < n;
        }
        if (std::abs(macro_f1(preds, labels, 3) - f1_oracle(preds, labels, 3)) > 1e-9) {
            note = "random macro-F1 mismatch";
            return false;
        }
        if (std::abs(auroc(scores, labels) - auroc_oracle(scores, labels)) > 1e-9) {
            note = "random AUROC mismatch";
            return false;
        }
        double se = 0;
        for (int i = 0; i < n; ++i)
            se += (scores[size_t(i)] - truth[size_t(i)]) * (scores[size_t(i)] - truth[size_t(i)]);
        if (std::abs(rmse(scores, truth) - std::sqrt(se / n)) > 1e-9) {
            note = "random RMSE mismatch";
            return false;
        }
    }
    // the worked AUROC example
    if (std::abs(auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) - 0.75) > 1e-12) {
        note = "AUROC worked example";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 11: token-count law

bool c11_token_law(std::string& note) {
    for (int L = 1; L <= 12; ++L) {
        for (int T = 1; T <= 600; ++T) {
            EcgBlockDesc blk;
            blk.n_leads = L;
            blk.n_seconds = T;
            auto seq = assemble({}, {blk}, {{true, 0, Role::User}});
            if (int(seq.size()) != L * (T + 2) + 2) {
                note = "L=" + std::to_string(L) + " T=" + std::to_string(T);
                return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 12: pipeline determinism

bool files_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

bool c12_demo_determinism(std::string& note) {
    auto t0 = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    fs::path base = fs::temp_directory_path() / "ecglab_acceptance_demo";
    fs::remove_all(base);
    fs::create_directories(base);
    std::string cli = ECGLAB_CLI_PATH;
    for (const char* run : {"a", "b"}) {
        std::string cmd = cli + " demo --out " + (base / run).string() +
                          " --seed 5 > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) {
            note = "demo exited nonzero";
            return false;
        }
    }
    size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(base / "a")) {
        auto other = base / "b" / entry.path().filename();
        if (!fs::exists(other) || !files_equal(entry.path(), other)) {
            note = "artifact differs: " + entry.path().filename().string();
            return false;
        }
        ++compared;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    note = std::to_string(compared) + " artifacts identical";
    return compared >= 9 && secs < 600;
}

// ---------------------------------------------------------------------------
// 13: datagen validators

StatReport report_for(uint64_t seed, double hr, double jitter) {
    SynthSpec spec;
    spec.duration_s = 12;
    spec.heart_rate_bpm = hr;
    spec.rr_jitter_ms = jitter;
    return stat_report(synth_ecg(spec, seed));
}

bool c13_datagen_validators(std::string& note) {
    const std::vector<std::string> label_set = {"NORM", "AFIB", "AFL"};
    int stage2_ok = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        try {
            auto item = gen_stage2("rec", label_set[seed % 3], label_set, seed);
            if (!validate_qa(item).empty()) {
                note = "stage 2 violation at seed " + std::to_string(seed);
                return false;
            }
            ++stage2_ok;
        } catch (const ValidationError&) {
            // option count drawn larger than the label set; the generator
            // refuses such seeds rather than emitting an invalid item
        }
    }
    if (stage2_ok == 0) {
        note = "stage 2 produced nothing";
        return false;
    }
    const QaTaskType tasks[] = {QaTaskType::StepwiseComputation, QaTaskType::BeatwiseRetrieval,
                                QaTaskType::TemporalAnomaly, QaTaskType::Comparative,
                                QaTaskType::Verification};
    int produced = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto a = report_for(200 + seed, 62 + double(seed % 4) * 7.0, 15);
        auto b = report_for(300 + seed, 70 + double(seed % 3) * 6.0, 20);
        for (auto task : tasks) {
            auto res = gen_stage3(a, &b, task, seed);
            if (!res.item) continue;
            if (!validate_qa(*res.item).empty()) {
                note = "stage 3 violation (" + to_string(task) + ")";
                return false;
            }
            ++produced;
        }
    }
    if (produced == 0) {
        note = "stage 3 produced nothing";
        return false;
    }
    LlmClientConfig cfg;  // mock
    Rng rng(113);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto rep = report_for(400 + seed, 58 + double(seed % 5) * 7.0, seed % 2 ? 50.0 : 8.0);
        auto stats_str = render_stats(rep.global);
        auto bp = sample_blueprint(rng);
        auto c4 = conversation_from_json(nlohmann::json::parse(dgdetail::mock_generate(
            build_stage4_prompt(stats_str, "Sinus rhythm", bp))));
        if (!validate_conversation(c4, rep).empty()) {
            note = "stage 4 mock violation at seed " + std::to_string(seed);
            return false;
        }
        std::string label = seed % 2 ? "ABNORMAL" : "NORM";
        auto c5 = conversation_from_json(nlohmann::json::parse(
            dgdetail::mock_generate(build_stage5_prompt(stats_str, 300, label))));
        if (!validate_conversation(c5, rep, label).empty()) {
            note = "stage 5 mock violation at seed " + std::to_string(seed);
            return false;
        }
        // corrupt one grounded number; the validator must object
        auto bad = c5;
        for (auto& turn : bad.turns) {
            if (turn.from != "gpt") continue;
            turn.value = std::regex_replace(turn.value, std::regex(R"(\d+(\.\d+)? ms)"),
                                            "99871 ms", std::regex_constants::format_first_only);
        }
        if (validate_conversation(bad, rep, label).empty()) {
            note = "corrupted numeric value slipped through";
            return false;
        }
    }
    return true;
}

}  // namespace

int main() {
    criterion(1, "mask builder matches the brute-force oracle on 1000 sequences",
              c1_mask_oracle);
    criterion(2, "lead-permutation conjugation holds for lead-aware, fails for causal",
              c2_permutation);
    criterion(3, "masked-out positions cannot influence LM outputs", c3_information_flow);
    criterion(4, "analytic gradients match central finite differences", c4_gradcheck);
    criterion(5, "autoencoder reaches < 10% of held-out variance in 30 epochs",
              c5_autoencoder);
    criterion(6, "worked RR/HR/PAC examples reproduce exactly", c6_worked_examples);
    criterion(7, "stats agree with generator ground truth on 50 random specs",
              c7_stats_oracle);
    criterion(8, "forecast labels agree with brute-force scans over the full grid",
              c8_forecast_labels);
    criterion(9, "lead-aware masking beats causal on the cross-lead probe", c9_ablation);
    criterion(10, "metrics match brute-force oracles", c10_metric_oracles);
    criterion(11, "ECG block size is L*(T+2)+2 for L in [1,12], T in [1,600]", c11_token_law);
    criterion(12, "demo pipeline is byte-identical across reruns", c12_demo_determinism);
    criterion(13, "datagen validators accept generated data and catch corruption",
              c13_datagen_validators);
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 13 criteria passed\n");
    return 0;
}
