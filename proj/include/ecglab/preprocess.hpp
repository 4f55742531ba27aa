#pragma once

// Preprocessing: zero-phase IIR filtering (high-pass + powerline notches),
// polyphase-style windowed-sinc resampling, and the bad-run exclusion policy.

#include <cmath>
#include <string>
#include <vector>

#include "ecglab/signal.hpp"

namespace ecglab {

struct PreprocessConfig {
    double highpass_cutoff_hz = 0.3;
    std::vector<double> notch_freqs_hz = {50.0, 60.0};
    int target_fs = 256;
    double max_bad_run_s = 5.0;

    void validate() const {
        if (highpass_cutoff_hz <= 0) throw ValidationError("highpass_cutoff_hz", "must be positive");
        if (target_fs <= 0) throw ValidationError("target_fs", "must be positive");
        for (double f : notch_freqs_hz)
            if (target_fs <= 2 * f)
                throw ValidationError("target_fs", "must exceed twice the highest notch frequency");
        if (max_bad_run_s <= 0) throw ValidationError("max_bad_run_s", "must be positive");
    }
};

// One second-order section, direct form II transposed, a0 normalized to 1.
struct Biquad {
    double b0, b1, b2, a1, a2;

    // steady-state filter state for a unit-step input (lfilter_zi analogue)
    void steady_state_zi(double& z1, double& z2) const {
        double h = (b0 + b1 + b2) / (1.0 + a1 + a2);
        z2 = b2 - a2 * h;
        z1 = b1 - a1 * h + z2;
    }

    void filter(const std::vector<double>& x, std::vector<double>& y) const {
        y.resize(x.size());
        double z1 = 0, z2 = 0;
        if (!x.empty()) {
            steady_state_zi(z1, z2);
            z1 *= x[0];
            z2 *= x[0];
        }
        for (size_t n = 0; n < x.size(); ++n) {
            double out = b0 * x[n] + z1;
            z1 = b1 * x[n] - a1 * out + z2;
            z2 = b2 * x[n] - a2 * out;
            y[n] = out;
        }
    }
};

inline Biquad butter2_highpass(double cutoff_hz, double fs) {
    double k = std::tan(M_PI * cutoff_hz / fs);
    double norm = 1.0 + std::sqrt(2.0) * k + k * k;
    Biquad s;
    s.b0 = 1.0 / norm;
    s.b1 = -2.0 / norm;
    s.b2 = 1.0 / norm;
    s.a1 = 2.0 * (k * k - 1.0) / norm;
    s.a2 = (1.0 - std::sqrt(2.0) * k + k * k) / norm;
    return s;
}

inline Biquad biquad_notch(double freq_hz, double fs, double q = 30.0) {
    double w0 = 2.0 * M_PI * freq_hz / fs;
    double alpha = std::sin(w0) / (2.0 * q);
    double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * std::cos(w0) / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * std::cos(w0) / a0;
    s.a2 = (1.0 - alpha) / a0;
    return s;
}

// Forward-backward application with odd-reflection edge padding.
inline std::vector<double> filtfilt(const Biquad& s, const std::vector<double>& x) {
    if (x.empty()) return {};
    size_t padlen = std::min(x.size() - 1, size_t(512));
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * padlen);
    for (size_t i = padlen; i >= 1; --i) ext.push_back(2 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (size_t i = 1; i <= padlen; ++i) ext.push_back(2 * x.back() - x[x.size() - 1 - i]);

    std::vector<double> tmp;
    s.filter(ext, tmp);
    std::reverse(tmp.begin(), tmp.end());
    s.filter(tmp, ext);
    std::reverse(ext.begin(), ext.end());
    return std::vector<double>(ext.begin() + std::ptrdiff_t(padlen),
                               ext.end() - std::ptrdiff_t(padlen));
}

inline EcgRecord apply_per_lead(const EcgRecord& rec,
                                const std::vector<Biquad>& sections) {
    EcgRecord out = rec;
    for (auto& lead : out.leads)
        for (const auto& s : sections) lead = filtfilt(s, lead);
    return out;
}

inline EcgRecord highpass(const EcgRecord& rec, double cutoff_hz) {
    if (cutoff_hz >= rec.fs / 2.0)
        throw ValidationError("cutoff_hz", "must be below Nyquist");
    return apply_per_lead(rec, {butter2_highpass(cutoff_hz, rec.fs)});
}

inline EcgRecord notch(const EcgRecord& rec, const std::vector<double>& freqs_hz) {
    std::vector<Biquad> sections;
    for (double f : freqs_hz) {
        if (f >= rec.fs / 2.0) throw ValidationError("notch_freq", "must be below Nyquist");
        sections.push_back(biquad_notch(f, rec.fs));
    }
    if (sections.empty()) return rec;
    return apply_per_lead(rec, sections);
}

// Bandlimited resampling with a Blackman-windowed sinc kernel, per-sample
// weight normalization for exact DC gain. Identity when rates match.
inline EcgRecord resample(const EcgRecord& rec, int target_fs) {
    if (rec.fs <= 0 || target_fs <= 0) throw ValidationError("target_fs", "must be positive");
    if (target_fs == rec.fs) return rec;

    const double ratio = double(target_fs) / rec.fs;
    const double scale = std::min(1.0, ratio);          // kernel stretch when decimating
    const double cutoff = 0.5 * scale * 0.97;           // cycles per input sample
    const int half_width = int(std::ceil(32.0 / scale));
    const int64_t n_in = rec.n_samples();
    const int64_t n_out = int64_t(std::llround(double(n_in) * ratio));

    EcgRecord out;
    out.fs = target_fs;
    out.lead_names = rec.lead_names;
    out.leads.assign(rec.n_leads(), std::vector<double>(size_t(n_out), 0.0));

    for (size_t l = 0; l < rec.n_leads(); ++l) {
        const auto& x = rec.leads[l];
        auto& y = out.leads[l];
        for (int64_t k = 0; k < n_out; ++k) {
            double center = double(k) / ratio;  // position in input samples
            int64_t m0 = int64_t(std::floor(center)) - half_width;
            int64_t m1 = int64_t(std::floor(center)) + half_width + 1;
            double acc = 0, wsum = 0;
            for (int64_t m = std::max<int64_t>(0, m0); m <= std::min(n_in - 1, m1); ++m) {
                double u = (double(m) - center);
                double arg = 2.0 * cutoff * u;
                double sinc = arg == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
                double frac = u * scale / (half_width * scale + 1.0);
                // Blackman window
                double w = 0.42 + 0.5 * std::cos(M_PI * frac) + 0.08 * std::cos(2 * M_PI * frac);
                double h = sinc * w;
                acc += h * x[size_t(m)];
                wsum += h;
            }
            y[size_t(k)] = wsum != 0.0 ? acc / wsum : 0.0;
        }
    }
    if (rec.annotations) {
        BeatAnnotations ann;
        for (size_t i = 0; i < rec.annotations->beat_positions.size(); ++i) {
            int64_t p = int64_t(std::llround(double(rec.annotations->beat_positions[i]) * ratio));
            if (p >= n_out) continue;
            if (!ann.beat_positions.empty() && p <= ann.beat_positions.back()) continue;
            ann.beat_positions.push_back(p);
            ann.beat_labels.push_back(rec.annotations->beat_labels[i]);
        }
        out.annotations = ann;
    }
    return out;
}

struct CleanResult {
    bool accepted = false;
    EcgRecord record;     // valid iff accepted
    std::string reason;   // "nan_run" or "zero_run"
    size_t lead = 0;
    int64_t run_length = 0;
};

// Rejects records with a contiguous zero/NaN run longer than max_bad_run_s;
// otherwise replaces remaining NaNs with zero.
inline CleanResult clean(const EcgRecord& rec, const PreprocessConfig& cfg) {
    const int64_t max_run = int64_t(cfg.max_bad_run_s * rec.fs);
    for (size_t l = 0; l < rec.n_leads(); ++l) {
        const auto& x = rec.leads[l];
        int64_t run = 0;
        bool run_has_nan = false;
        for (size_t i = 0; i <= x.size(); ++i) {
            bool bad = i < x.size() && (std::isnan(x[i]) || x[i] == 0.0);
            if (bad) {
                ++run;
                if (std::isnan(x[i])) run_has_nan = true;
            } else {
                if (run > max_run) {
                    CleanResult r;
                    r.reason = run_has_nan ? "nan_run" : "zero_run";
                    r.lead = l;
                    r.run_length = run;
                    return r;
                }
                run = 0;
                run_has_nan = false;
            }
        }
    }
    CleanResult r;
    r.accepted = true;
    r.record = rec;
    for (auto& lead : r.record.leads)
        for (auto& v : lead)
            if (std::isnan(v)) v = 0.0;
    return r;
}

struct PreprocessOutcome {
    CleanResult result;
    std::vector<std::string> provenance;  // applied steps, in order
};

// Fixed pipeline: notch -> highpass -> resample -> clean.
inline PreprocessOutcome preprocess(const EcgRecord& rec, const PreprocessConfig& cfg) {
    cfg.validate();
    PreprocessOutcome out;
    EcgRecord r = notch(rec, cfg.notch_freqs_hz);
    out.provenance.push_back("notch");
    r = highpass(r, cfg.highpass_cutoff_hz);
    out.provenance.push_back("highpass");
    r = resample(r, cfg.target_fs);
    out.provenance.push_back("resample");
    out.result = clean(r, cfg);
    out.provenance.push_back("clean");
    return out;
}

}  // namespace ecglab
