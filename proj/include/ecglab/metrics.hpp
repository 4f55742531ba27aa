#pragma once

// Evaluation metrics: macro-F1, accuracy, hamming score (per-sample Jaccard),
// AUROC (Mann-Whitney with tie halving), RMSE, and linear probing.

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "ecglab/common.hpp"

namespace ecglab {

struct ConfusionCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline std::vector<ConfusionCounts> confusion(const std::vector<int>& preds,
                                              const std::vector<int>& labels,
                                              int n_classes) {
    std::vector<ConfusionCounts> c(static_cast<size_t>(n_classes), ConfusionCounts{});
    for (size_t i = 0; i < preds.size(); ++i) {
        for (int k = 0; k < n_classes; ++k) {
            bool p = preds[i] == k, l = labels[i] == k;
            if (p && l) ++c[size_t(k)].tp;
            else if (p && !l) ++c[size_t(k)].fp;
            else if (!p && l) ++c[size_t(k)].fn;
            else ++c[size_t(k)].tn;
        }
    }
    return c;
}

// Macro-F1 in percent. Per-class F1 = 2tp/(2tp+fp+fn), 0 when the denominator
// is 0; the macro mean runs over classes present in the labels.
inline double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                       int n_classes) {
    if (preds.empty() || preds.size() != labels.size())
        throw ValidationError("preds", "empty or length mismatch");
    auto c = confusion(preds, labels, n_classes);
    std::set<int> present(labels.begin(), labels.end());
    double sum = 0;
    for (int k : present) {
        const auto& cc = c[size_t(k)];
        double den = double(2 * cc.tp + cc.fp + cc.fn);
        sum += den > 0 ? 2.0 * double(cc.tp) / den : 0.0;
    }
    return 100.0 * sum / double(present.size());
}

inline double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.empty() || preds.size() != labels.size())
        throw ValidationError("preds", "empty or length mismatch");
    int64_t hit = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++hit;
    return 100.0 * double(hit) / double(preds.size());
}

// Per-sample Jaccard (|intersection| / |union|), averaged. Empty-vs-empty
// counts as a perfect match.
inline double hamming(const std::vector<std::set<int>>& pred_sets,
                      const std::vector<std::set<int>>& label_sets) {
    if (pred_sets.empty() || pred_sets.size() != label_sets.size())
        throw ValidationError("pred_sets", "empty or length mismatch");
    double sum = 0;
    for (size_t i = 0; i < pred_sets.size(); ++i) {
        std::set<int> uni = pred_sets[i], inter;
        uni.insert(label_sets[i].begin(), label_sets[i].end());
        for (int x : pred_sets[i])
            if (label_sets[i].count(x)) inter.insert(x);
        sum += uni.empty() ? 1.0 : double(inter.size()) / double(uni.size());
    }
    return sum / double(pred_sets.size());
}

// Normalized Mann-Whitney U; ties count half.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ValidationError("scores", "length mismatch");
    int64_t npos = 0, nneg = 0;
    for (int l : labels) (l ? npos : nneg)++;
    if (npos == 0 || nneg == 0) throw ValidationError("labels", "need both classes");
    double u = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) u += 1.0;
            else if (scores[i] == scores[j]) u += 0.5;
        }
    }
    return u / (double(npos) * double(nneg));
}

inline double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.empty() || pred.size() != truth.size())
        throw ValidationError("pred", "empty or length mismatch");
    double s = 0;
    for (size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(s / double(pred.size()));
}

// ---------------------------------------------------------------------------
// Linear probing: seeded stratified split, logistic head trained by gradient
// descent on the train part, AUROC on the held-out part.

struct LinearProbeResult {
    double auroc = 0.0;
    std::vector<double> weights;
    double bias = 0.0;
};

inline LinearProbeResult linear_probe(const std::vector<std::vector<double>>& embeddings,
                                      const std::vector<int>& labels, double train_ratio,
                                      uint64_t seed, int epochs = 200, double lr = 0.5) {
    if (embeddings.empty() || embeddings.size() != labels.size())
        throw ValidationError("embeddings", "empty or length mismatch");
    if (train_ratio <= 0 || train_ratio > 1)
        throw ValidationError("train_ratio", "must be in (0, 1]");

    // stratified split
    std::vector<size_t> pos, neg;
    for (size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    auto take = [&](std::vector<size_t>& v) {
        size_t k = std::max<size_t>(1, size_t(std::llround(train_ratio * double(v.size()))));
        return std::min(k, v.size());
    };
    size_t kp = take(pos), kn = take(neg);
    if (kp == pos.size() || kn == neg.size())
        throw ValidationError("train_ratio", "leaves a class without held-out samples");
    std::vector<size_t> train, held;
    train.insert(train.end(), pos.begin(), pos.begin() + std::ptrdiff_t(kp));
    train.insert(train.end(), neg.begin(), neg.begin() + std::ptrdiff_t(kn));
    held.insert(held.end(), pos.begin() + std::ptrdiff_t(kp), pos.end());
    held.insert(held.end(), neg.begin() + std::ptrdiff_t(kn), neg.end());

    size_t d = embeddings[0].size();
    LinearProbeResult res;
    res.weights.assign(d, 0.0);
    for (int e = 0; e < epochs; ++e) {
        std::vector<double> gw(d, 0.0);
        double gb = 0;
        for (size_t idx : train) {
            double z = res.bias;
            for (size_t j = 0; j < d; ++j) z += res.weights[j] * embeddings[idx][j];
            double p = 1.0 / (1.0 + std::exp(-z));
            double err = p - double(labels[idx]);
            for (size_t j = 0; j < d; ++j) gw[j] += err * embeddings[idx][j];
            gb += err;
        }
        for (size_t j = 0; j < d; ++j)
            res.weights[j] -= lr * (gw[j] / double(train.size()) + 1e-4 * res.weights[j]);
        res.bias -= lr * gb / double(train.size());
    }

    std::vector<double> scores;
    std::vector<int> hl;
    for (size_t idx : held) {
        double z = res.bias;
        for (size_t j = 0; j < d; ++j) z += res.weights[j] * embeddings[idx][j];
        scores.push_back(z);
        hl.push_back(labels[idx]);
    }
    res.auroc = auroc(scores, hl);
    return res;
}

}  // namespace ecglab
