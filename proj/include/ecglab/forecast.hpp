#pragma once

// Forecast benchmark construction and feature baselines: sliding-window
// sample extraction over beat-annotated recordings, HRV/interval featurizers,
// and two small supervised models evaluated over a (window, horizon) grid.

#include "ecglab/metrics.hpp"
#include "ecglab/stats.hpp"
#include "json.hpp"

namespace ecglab {

inline const std::vector<int>& forecast_windows() {
    static const std::vector<int> v = {10, 30, 60, 120, 300, 600};
    return v;
}
inline const std::vector<int>& forecast_horizons() {
    static const std::vector<int> v = {60, 180, 300, 600};
    return v;
}

struct ForecastSpec {
    int window_s = 60;
    int horizon_s = 300;
    int stride_s = 0;  // 0 = default w/2
    double balance_ratio = 3.0;  // max majority:minority

    int stride() const { return stride_s > 0 ? stride_s : std::max(1, window_s / 2); }
    void validate() const {
        if (window_s <= 0) throw ValidationError("window_s", "must be positive");
        if (horizon_s <= 0) throw ValidationError("horizon_s", "must be positive");
        if (stride() <= 0) throw ValidationError("stride_s", "must be positive");
        if (balance_ratio < 1.0) throw ValidationError("balance_ratio", "must be >= 1");
    }
};

struct ForecastSample {
    std::string record_id;
    double t0_s = 0.0;
    int window_s = 0;
    int horizon_s = 0;
    std::string label;          // NORM or ABNORMAL
    std::string abnormal_kind;  // AFIB, AFL, or none
    std::vector<double> features;
};

// fixed featurizer layout: 8 values then 8 missing flags
inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> v = {
        "mean_rr", "sdnn", "rmssd", "rr_iqr", "pac_count", "pr_ms", "p_dur_ms", "hr_bpm"};
    return v;
}

inline std::vector<ForecastSample> extract_samples(const EcgRecord& record,
                                                   const std::string& record_id,
                                                   const ForecastSpec& spec, uint64_t seed) {
    spec.validate();
    if (!record.annotations || record.annotations->beat_positions.empty())
        throw ValidationError("annotations", "record has no beat annotations");
    double dur = record.duration_s();
    double w = spec.window_s, h = spec.horizon_s;
    if (dur < w + h) throw ValidationError("record", "shorter than window + horizon");

    const auto& pos = record.annotations->beat_positions;
    const auto& lab = record.annotations->beat_labels;
    std::vector<ForecastSample> out;
    for (double t0 = 0; t0 + w + h <= dur + 1e-9; t0 += spec.stride()) {
        bool input_clean = true;
        bool abnormal = false;
        std::string kind = "none";
        for (size_t i = 0; i < pos.size(); ++i) {
            double t = double(pos[i]) / record.fs;
            if (t >= t0 && t < t0 + w && lab[i] != BeatLabel::NORM) {
                input_clean = false;
                break;
            }
            if (t > t0 + w && t <= t0 + w + h &&
                (lab[i] == BeatLabel::AFIB || lab[i] == BeatLabel::AFL) && !abnormal) {
                abnormal = true;
                kind = to_string(lab[i]);
            }
        }
        if (!input_clean) continue;
        ForecastSample s;
        s.record_id = record_id;
        s.t0_s = t0;
        s.window_s = spec.window_s;
        s.horizon_s = spec.horizon_s;
        s.label = abnormal ? "ABNORMAL" : "NORM";
        s.abnormal_kind = kind;
        out.push_back(std::move(s));
    }

    // majority-class downsampling to balance_ratio, seeded
    size_t n_ab = 0;
    for (const auto& s : out) n_ab += s.label == "ABNORMAL";
    size_t n_no = out.size() - n_ab;
    if (n_ab > 0 && n_no > 0) {
        bool majority_norm = n_no > n_ab;
        size_t n_major = std::max(n_no, n_ab), n_minor = std::min(n_no, n_ab);
        size_t cap = size_t(spec.balance_ratio * double(n_minor));
        if (n_major > cap) {
            std::vector<size_t> major_idx;
            for (size_t i = 0; i < out.size(); ++i)
                if ((out[i].label == "NORM") == majority_norm) major_idx.push_back(i);
            Rng rng(seed);
            rng.shuffle(major_idx);
            std::vector<bool> drop(out.size(), false);
            for (size_t i = cap; i < major_idx.size(); ++i) drop[major_idx[i]] = true;
            std::vector<ForecastSample> kept;
            for (size_t i = 0; i < out.size(); ++i)
                if (!drop[i]) kept.push_back(std::move(out[i]));
            out = std::move(kept);
        }
    }
    return out;
}

// Stats over the sample's input span on the first lead (lead II by synth
// convention). Absent statistics are imputed 0 with the paired flag set.
inline std::vector<double> featurize(const ForecastSample& sample, const EcgRecord& record) {
    if (sample.window_s < 10) throw ValidationError("window_s", "input span must be >= 10 s");
    int64_t a = int64_t(sample.t0_s * record.fs);
    int64_t b = a + int64_t(sample.window_s) * record.fs;
    if (a < 0 || b > record.n_samples()) throw ValidationError("sample", "span out of record");
    std::vector<double> span(record.leads[0].begin() + a, record.leads[0].begin() + b);
    LeadStats s = lead_stats(span, record.fs);

    std::vector<double> values(8, 0.0), flags(8, 1.0);
    auto put = [&](size_t i, const std::optional<double>& v) {
        if (v) {
            values[i] = *v;
            flags[i] = 0.0;
        }
    };
    put(0, s.mean_rr_ms);
    put(1, s.sdnn_ms);
    put(2, s.rmssd_ms);
    put(3, s.rr_iqr_ms);
    if (!s.rr_intervals_ms.empty()) {
        values[4] = double(s.pac_count);
        flags[4] = 0.0;
    }
    put(5, s.pr_interval_ms);
    put(6, s.p_duration_ms);
    if (s.heart_rate_bpm) {
        values[7] = double(*s.heart_rate_bpm);
        flags[7] = 0.0;
    }
    values.insert(values.end(), flags.begin(), flags.end());
    return values;
}

// ---------------------------------------------------------------------------
// Baselines

enum class BaselineKind { Logistic, StumpEnsemble };

inline std::string to_string(BaselineKind k) {
    return k == BaselineKind::Logistic ? "logistic" : "stump_ensemble";
}

struct Stump {
    size_t feature = 0;
    double threshold = 0.0;
    double left = 0.0, right = 0.0;  // additive scores for x <= thr / x > thr
};

struct BaselineModel {
    BaselineKind kind = BaselineKind::Logistic;
    // standardization (logistic)
    std::vector<double> mean, stdev;
    std::vector<double> weights;
    double bias = 0.0;
    // boosting
    std::vector<Stump> stumps;
    double base_score = 0.0;

    double score(const std::vector<double>& x) const {
        if (kind == BaselineKind::Logistic) {
            double z = bias;
            for (size_t j = 0; j < weights.size(); ++j)
                z += weights[j] * (x[j] - mean[j]) / stdev[j];
            return z;
        }
        double z = base_score;
        for (const auto& st : stumps) z += x[st.feature] <= st.threshold ? st.left : st.right;
        return z;
    }
    std::string predict(const std::vector<double>& x) const {
        return score(x) > 0 ? "ABNORMAL" : "NORM";
    }
};

inline BaselineModel train_baseline(const std::vector<ForecastSample>& samples,
                                    BaselineKind kind, uint64_t seed) {
    size_t n_ab = 0;
    for (const auto& s : samples) n_ab += s.label == "ABNORMAL";
    if (samples.empty() || n_ab == 0 || n_ab == samples.size())
        throw ValidationError("samples", "need both classes to train");
    size_t n = samples.size(), d = samples[0].features.size();
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = samples[i].label == "ABNORMAL";

    BaselineModel m;
    m.kind = kind;
    if (kind == BaselineKind::Logistic) {
        m.mean.assign(d, 0.0);
        m.stdev.assign(d, 1.0);
        for (size_t j = 0; j < d; ++j) {
            std::vector<double> col(n);
            for (size_t i = 0; i < n; ++i) col[i] = samples[i].features[j];
            m.mean[j] = mean_of(col);
            double sd = stddev_of(col);
            m.stdev[j] = sd > 1e-12 ? sd : 1.0;
        }
        m.weights.assign(d, 0.0);
        Rng rng(seed);
        (void)rng;  // logistic fit is already deterministic
        const int epochs = 300;
        const double lr = 0.3, l2 = 1e-4;
        for (int e = 0; e < epochs; ++e) {
            std::vector<double> gw(d, 0.0);
            double gb = 0;
            for (size_t i = 0; i < n; ++i) {
                double p = 1.0 / (1.0 + std::exp(-m.score(samples[i].features)));
                double err = p - double(y[i]);
                for (size_t j = 0; j < d; ++j)
                    gw[j] += err * (samples[i].features[j] - m.mean[j]) / m.stdev[j];
                gb += err;
            }
            for (size_t j = 0; j < d; ++j)
                m.weights[j] -= lr * (gw[j] / double(n) + l2 * m.weights[j]);
            m.bias -= lr * gb / double(n);
        }
        return m;
    }

    // boosted depth-1 trees on the logistic gradient
    double prior = double(n_ab) / double(n);
    m.base_score = std::log(prior / (1.0 - prior));
    std::vector<double> score(n, m.base_score);
    const int rounds = 50;
    const double shrink = 0.3;
    for (int round = 0; round < rounds; ++round) {
        std::vector<double> resid(n);
        for (size_t i = 0; i < n; ++i)
            resid[i] = double(y[i]) - 1.0 / (1.0 + std::exp(-score[i]));
        Stump best;
        double best_gain = -1;
        for (size_t j = 0; j < d; ++j) {
            // candidate thresholds at midpoints of sorted unique values
            std::vector<double> vals;
            for (size_t i = 0; i < n; ++i) vals.push_back(samples[i].features[j]);
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            for (size_t t = 0; t + 1 < vals.size(); ++t) {
                double thr = 0.5 * (vals[t] + vals[t + 1]);
                double sl = 0, sr = 0;
                size_t nl = 0, nr = 0;
                for (size_t i = 0; i < n; ++i) {
                    if (samples[i].features[j] <= thr) {
                        sl += resid[i];
                        ++nl;
                    } else {
                        sr += resid[i];
                        ++nr;
                    }
                }
                if (nl == 0 || nr == 0) continue;
                double gain = sl * sl / double(nl) + sr * sr / double(nr);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = {j, thr, sl / double(nl), sr / double(nr)};
                }
            }
        }
        if (best_gain <= 0) break;
        best.left *= shrink * 4.0;  // residuals live in (-1, 1); scale up a bit
        best.right *= shrink * 4.0;
        m.stumps.push_back(best);
        for (size_t i = 0; i < n; ++i)
            score[i] += samples[i].features[best.feature] <= best.threshold ? best.left
                                                                            : best.right;
    }
    return m;
}

inline nlohmann::json model_to_json(const BaselineModel& m) {
    nlohmann::json j;
    j["kind"] = to_string(m.kind);
    j["mean"] = m.mean;
    j["stdev"] = m.stdev;
    j["weights"] = m.weights;
    j["bias"] = m.bias;
    j["base_score"] = m.base_score;
    auto stumps = nlohmann::json::array();
    for (const auto& s : m.stumps)
        stumps.push_back({{"feature", s.feature},
                          {"threshold", s.threshold},
                          {"left", s.left},
                          {"right", s.right}});
    j["stumps"] = stumps;
    return j;
}

inline BaselineModel model_from_json(const nlohmann::json& j) {
    BaselineModel m;
    m.kind = j.at("kind") == "logistic" ? BaselineKind::Logistic : BaselineKind::StumpEnsemble;
    m.mean = j.at("mean").get<std::vector<double>>();
    m.stdev = j.at("stdev").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias");
    m.base_score = j.at("base_score");
    for (const auto& s : j.at("stumps"))
        m.stumps.push_back({s.at("feature"), s.at("threshold"), s.at("left"), s.at("right")});
    return m;
}

// ---------------------------------------------------------------------------
// Grid evaluation

struct GridCell {
    std::string model;
    int window_s = 0;
    int horizon_s = 0;
    std::optional<double> macro_f1;  // absent when the cell has no samples
    size_t n_samples = 0;
};

struct GridReport {
    std::vector<GridCell> cells;

    nlohmann::json to_json() const {
        auto arr = nlohmann::json::array();
        for (const auto& c : cells) {
            nlohmann::json j;
            j["model"] = c.model;
            j["w"] = c.window_s;
            j["h"] = c.horizon_s;
            j["n"] = c.n_samples;
            if (c.macro_f1)
                j["macro_f1"] = *c.macro_f1;
            else
                j["macro_f1"] = nullptr;
            arr.push_back(j);
        }
        return arr;
    }
};

inline GridReport eval_grid(const std::map<std::string, BaselineModel>& models,
                            const std::vector<ForecastSample>& dataset,
                            const std::vector<ForecastSpec>& specs) {
    GridReport report;
    for (const auto& [name, model] : models) {
        for (const auto& spec : specs) {
            GridCell cell;
            cell.model = name;
            cell.window_s = spec.window_s;
            cell.horizon_s = spec.horizon_s;
            std::vector<int> preds, labels;
            for (const auto& s : dataset) {
                if (s.window_s != spec.window_s || s.horizon_s != spec.horizon_s) continue;
                preds.push_back(model.predict(s.features) == "ABNORMAL");
                labels.push_back(s.label == "ABNORMAL");
            }
            cell.n_samples = labels.size();
            if (!labels.empty()) cell.macro_f1 = macro_f1(preds, labels, 2);
            report.cells.push_back(cell);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSONL serialization

inline nlohmann::json sample_to_json(const ForecastSample& s) {
    return {{"record_id", s.record_id}, {"t0_s", s.t0_s},   {"w", s.window_s},
            {"h", s.horizon_s},         {"label", s.label}, {"abnormal_kind", s.abnormal_kind},
            {"features", s.features}};
}

inline ForecastSample sample_from_json(const nlohmann::json& j) {
    ForecastSample s;
    s.record_id = j.at("record_id");
    s.t0_s = j.at("t0_s");
    s.window_s = j.at("w");
    s.horizon_s = j.at("h");
    s.label = j.at("label");
    s.abnormal_kind = j.at("abnormal_kind");
    s.features = j.at("features").get<std::vector<double>>();
    return s;
}

}  // namespace ecglab
