#pragma once

// Clinical statistics extraction: R-peak detection (Pan-Tompkins style),
// RR/HRV measures, PAC detection, fiducials, intervals and amplitudes.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecglab/preprocess.hpp"
#include "ecglab/signal.hpp"

namespace ecglab {

inline Biquad butter2_lowpass(double cutoff_hz, double fs) {
    double k = std::tan(M_PI * cutoff_hz / fs);
    double norm = 1.0 + std::sqrt(2.0) * k + k * k;
    Biquad s;
    s.b0 = k * k / norm;
    s.b1 = 2.0 * k * k / norm;
    s.b2 = k * k / norm;
    s.a1 = 2.0 * (k * k - 1.0) / norm;
    s.a2 = (1.0 - std::sqrt(2.0) * k + k * k) / norm;
    return s;
}

// Pan-Tompkins style QRS detector: band-pass 5-15 Hz, derivative, square,
// moving-window integration, adaptive threshold, 200 ms refractory. Detected
// peaks are refined to the raw-signal |x| extremum nearby.
inline std::vector<int64_t> detect_r_peaks(const std::vector<double>& trace, int fs) {
    if (int64_t(trace.size()) < 2 * fs)
        throw ValidationError("trace", "needs at least 2 s of samples");

    std::vector<double> bp = filtfilt(butter2_highpass(5.0, fs), trace);
    bp = filtfilt(butter2_lowpass(15.0, fs), bp);

    // derivative + square
    std::vector<double> sq(bp.size(), 0.0);
    for (size_t i = 1; i + 1 < bp.size(); ++i) {
        double d = (bp[i + 1] - bp[i - 1]) * 0.5 * fs;
        sq[i] = d * d;
    }

    // moving-window integration, 150 ms
    int win = std::max(1, int(0.150 * fs));
    std::vector<double> mwi(sq.size(), 0.0);
    double acc = 0;
    for (size_t i = 0; i < sq.size(); ++i) {
        acc += sq[i];
        if (i >= size_t(win)) acc -= sq[i - size_t(win)];
        mwi[i] = acc / win;
    }

    double peak_mwi = *std::max_element(mwi.begin(), mwi.end());
    if (peak_mwi <= 0.0) return {};

    // candidate local maxima with 200 ms spacing
    int refractory = int(0.200 * fs);
    std::vector<int64_t> candidates;
    for (size_t i = 1; i + 1 < mwi.size(); ++i) {
        if (mwi[i] >= mwi[i - 1] && mwi[i] > mwi[i + 1]) {
            if (!candidates.empty() && int64_t(i) - candidates.back() < refractory) {
                if (mwi[i] > mwi[size_t(candidates.back())]) candidates.back() = int64_t(i);
            } else {
                candidates.push_back(int64_t(i));
            }
        }
    }

    // adaptive threshold over candidates
    double spki = peak_mwi * 0.5, npki = 0.0;
    std::vector<int64_t> mwi_peaks;
    for (int64_t c : candidates) {
        double v = mwi[size_t(c)];
        double thr = npki + 0.25 * (spki - npki);
        if (v > thr) {
            spki = 0.125 * v + 0.875 * spki;
            mwi_peaks.push_back(c);
        } else {
            npki = 0.125 * v + 0.875 * npki;
        }
    }

    // refine to raw-signal |x| extremum and enforce refractory on the result
    int search = int(0.150 * fs);
    std::vector<int64_t> peaks;
    for (int64_t c : mwi_peaks) {
        int64_t lo = std::max<int64_t>(0, c - search);
        int64_t hi = std::min<int64_t>(int64_t(trace.size()) - 1, c + search);
        int64_t best = lo;
        for (int64_t i = lo; i <= hi; ++i)
            if (std::fabs(trace[size_t(i)]) > std::fabs(trace[size_t(best)])) best = i;
        if (!peaks.empty() && best - peaks.back() < refractory) {
            if (std::fabs(trace[size_t(best)]) > std::fabs(trace[size_t(peaks.back())]))
                peaks.back() = best;
        } else if (peaks.empty() || best > peaks.back()) {
            peaks.push_back(best);
        }
    }
    return peaks;
}

inline std::vector<double> rr_intervals(const std::vector<int64_t>& peaks, int fs) {
    if (peaks.size() < 2) throw ValidationError("peaks", "need at least 2 peaks");
    std::vector<double> rr;
    for (size_t i = 0; i + 1 < peaks.size(); ++i)
        rr.push_back(double(peaks[i + 1] - peaks[i]) * 1000.0 / fs);
    return rr;
}

inline int heart_rate(const std::vector<double>& rr) {
    if (rr.empty()) throw ValidationError("rr", "need at least 1 interval");
    return int(std::lround(60000.0 / mean_of(rr)));
}

struct HrvMeasures {
    double rmssd_ms = 0.0;
    double sdnn_ms = 0.0;
    double rr_iqr_ms = 0.0;
};

inline HrvMeasures hrv(const std::vector<double>& rr) {
    if (rr.size() < 2) throw ValidationError("rr", "need at least 2 intervals");
    HrvMeasures h;
    double ss = 0;
    for (size_t i = 0; i + 1 < rr.size(); ++i) {
        double d = rr[i + 1] - rr[i];
        ss += d * d;
    }
    h.rmssd_ms = std::sqrt(ss / double(rr.size() - 1));
    h.sdnn_ms = stddev_of(rr);  // population convention
    h.rr_iqr_ms = quantile(rr, 0.75) - quantile(rr, 0.25);
    return h;
}

// Premature atrial contractions: a short interval followed by a compensatory
// pause, judged against the local mean of up to 8 surrounding intervals.
// Returned beat indices are 1-based.
inline std::vector<int> detect_pacs(const std::vector<double>& rr,
                                    double prematurity_ratio = 0.85) {
    if (rr.size() < 4) throw ValidationError("rr", "need at least 4 intervals");
    std::vector<int> pacs;
    for (size_t i = 0; i + 1 < rr.size(); ++i) {
        // local mean around interval i, excluding i itself
        double sum = 0;
        int cnt = 0;
        for (int64_t j = int64_t(i) - 4; j <= int64_t(i) + 4 && cnt < 8; ++j) {
            if (j < 0 || j >= int64_t(rr.size()) || j == int64_t(i)) continue;
            sum += rr[size_t(j)];
            ++cnt;
        }
        double local = sum / cnt;
        if (rr[i] < prematurity_ratio * local && rr[i + 1] > local)
            pacs.push_back(int(i) + 2);  // beat terminating interval i, 1-based
    }
    return pacs;
}

struct BeatFiducials {
    std::optional<int64_t> p_onset, p_offset;
    std::optional<int64_t> qrs_onset, qrs_offset;
    int64_t r_peak = 0;
    std::optional<int64_t> t_offset;
    std::optional<int64_t> t_peak;
};

using Fiducials = std::vector<BeatFiducials>;

namespace detail {

// scan outward from an extremum until |x| drops below frac * |peak|
inline int64_t scan_edge(const std::vector<double>& x, int64_t peak, int dir,
                         double frac, int64_t limit) {
    double thr = frac * std::fabs(x[size_t(peak)]);
    int64_t i = peak;
    while (i + dir >= 0 && i + dir < int64_t(x.size()) &&
           std::llabs(i - peak) < limit && std::fabs(x[size_t(i + dir)]) >= thr)
        i += dir;
    return i + dir >= 0 && i + dir < int64_t(x.size()) ? i + dir : i;
}

inline int64_t abs_extremum(const std::vector<double>& x, int64_t lo, int64_t hi) {
    int64_t best = lo;
    for (int64_t i = lo; i <= hi; ++i)
        if (std::fabs(x[size_t(i)]) > std::fabs(x[size_t(best)])) best = i;
    return best;
}

}  // namespace detail

// Window-based onset/offset detection around each R peak. Onsets/offsets use
// the 20% amplitude convention (matching the synthetic generator's geometry).
inline Fiducials fiducials(const std::vector<double>& trace, int fs,
                           const std::vector<int64_t>& r_peaks) {
    constexpr double kEdgeFrac = 0.2;
    constexpr double kMinPAmp = 0.05;  // mV, below which P is reported absent
    Fiducials out;
    int64_t n = int64_t(trace.size());
    for (size_t b = 0; b < r_peaks.size(); ++b) {
        BeatFiducials f;
        int64_t r = r_peaks[b];
        f.r_peak = r;
        int64_t qlim = int64_t(0.12 * fs);  // half a wide QRS
        f.qrs_onset = detail::scan_edge(trace, r, -1, kEdgeFrac, qlim);
        f.qrs_offset = detail::scan_edge(trace, r, +1, kEdgeFrac, qlim);

        // P wave: search between 350 ms before R and just before QRS onset
        int64_t p_lo = std::max<int64_t>(0, r - int64_t(0.35 * fs));
        int64_t p_hi = *f.qrs_onset - int64_t(0.015 * fs);
        if (b > 0) p_lo = std::max(p_lo, r_peaks[b - 1] + int64_t(0.25 * fs));
        if (p_hi > p_lo) {
            int64_t pp = detail::abs_extremum(trace, p_lo, p_hi);
            if (std::fabs(trace[size_t(pp)]) >= kMinPAmp && pp > p_lo && pp < p_hi) {
                int64_t plim = int64_t(0.10 * fs);
                f.p_onset = detail::scan_edge(trace, pp, -1, kEdgeFrac, plim);
                f.p_offset = detail::scan_edge(trace, pp, +1, kEdgeFrac, plim);
            }
        }

        // T wave: search after QRS offset, stopping short of the next beat's P
        int64_t t_lo = *f.qrs_offset + int64_t(0.02 * fs);
        int64_t t_hi = std::min(n - 1, r + int64_t(0.45 * fs));
        if (b + 1 < r_peaks.size())
            t_hi = std::min(t_hi, r_peaks[b + 1] - int64_t(0.28 * fs));
        if (t_hi > t_lo) {
            int64_t tp = detail::abs_extremum(trace, t_lo, t_hi);
            if (std::fabs(trace[size_t(tp)]) >= 0.03 && tp > t_lo) {
                f.t_peak = tp;
                int64_t tlim = int64_t(0.16 * fs);
                f.t_offset = detail::scan_edge(trace, tp, +1, kEdgeFrac, tlim);
            }
        }
        out.push_back(f);
    }
    return out;
}

struct IntervalStats {
    std::optional<double> pr_ms, p_dur_ms, qrs_ms, qt_ms, qtc_ms;
};

inline IntervalStats intervals(const Fiducials& fid, int fs) {
    IntervalStats s;
    std::vector<double> pr, pd, qrs, qt;
    std::vector<double> rr_s;
    for (size_t b = 0; b + 1 < fid.size(); ++b)
        rr_s.push_back(double(fid[b + 1].r_peak - fid[b].r_peak) / fs);
    for (const auto& f : fid) {
        if (f.p_onset && f.qrs_onset) pr.push_back(double(*f.qrs_onset - *f.p_onset) * 1000.0 / fs);
        if (f.p_onset && f.p_offset) pd.push_back(double(*f.p_offset - *f.p_onset) * 1000.0 / fs);
        if (f.qrs_onset && f.qrs_offset)
            qrs.push_back(double(*f.qrs_offset - *f.qrs_onset) * 1000.0 / fs);
        if (f.qrs_onset && f.t_offset) qt.push_back(double(*f.t_offset - *f.qrs_onset) * 1000.0 / fs);
    }
    if (!pr.empty()) s.pr_ms = mean_of(pr);
    if (!pd.empty()) s.p_dur_ms = mean_of(pd);
    if (!qrs.empty()) s.qrs_ms = mean_of(qrs);
    if (!qt.empty()) {
        s.qt_ms = mean_of(qt);
        if (!rr_s.empty()) s.qtc_ms = *s.qt_ms / std::sqrt(mean_of(rr_s));  // Bazett
    }
    return s;
}

struct AmplitudeStats {
    std::optional<double> p_mv, qrs_mv, t_mv;  // signed extrema
};

inline AmplitudeStats amplitudes(const std::vector<double>& trace, const Fiducials& fid) {
    AmplitudeStats a;
    std::vector<double> p, q, t;
    for (const auto& f : fid) {
        if (f.p_onset && f.p_offset) {
            int64_t i = detail::abs_extremum(trace, *f.p_onset, *f.p_offset);
            p.push_back(trace[size_t(i)]);
        }
        if (f.qrs_onset && f.qrs_offset) {
            int64_t i = detail::abs_extremum(trace, *f.qrs_onset, *f.qrs_offset);
            q.push_back(trace[size_t(i)]);
        }
        if (f.t_peak) t.push_back(trace[size_t(*f.t_peak)]);
    }
    if (!p.empty()) a.p_mv = mean_of(p);
    if (!q.empty()) a.qrs_mv = mean_of(q);
    if (!t.empty()) a.t_mv = mean_of(t);
    return a;
}

struct LeadStats {
    std::vector<double> rr_intervals_ms;
    std::optional<double> mean_rr_ms;
    std::optional<int> heart_rate_bpm;
    std::optional<double> rmssd_ms, sdnn_ms, rr_iqr_ms;
    int pac_count = 0;
    std::vector<int> pac_beat_indices;  // 1-based
    std::optional<double> pr_interval_ms, p_duration_ms, qrs_duration_ms, qt_ms, qtc_ms;
    std::optional<double> p_amplitude_mv, qrs_amplitude_mv, t_amplitude_mv;
    std::optional<int> estimated_atrial_rate;
};

struct StatReport {
    std::vector<std::string> lead_names;
    std::vector<LeadStats> per_lead;
    LeadStats global;
};

inline LeadStats lead_stats(const std::vector<double>& trace, int fs) {
    LeadStats s;
    std::vector<int64_t> peaks;
    try {
        peaks = detect_r_peaks(trace, fs);
    } catch (const ValidationError&) {
        return s;
    }
    if (peaks.size() >= 2) {
        s.rr_intervals_ms = rr_intervals(peaks, fs);
        s.mean_rr_ms = mean_of(s.rr_intervals_ms);
        s.heart_rate_bpm = heart_rate(s.rr_intervals_ms);
        if (s.rr_intervals_ms.size() >= 2) {
            auto h = hrv(s.rr_intervals_ms);
            s.rmssd_ms = h.rmssd_ms;
            s.sdnn_ms = h.sdnn_ms;
            s.rr_iqr_ms = h.rr_iqr_ms;
        }
        if (s.rr_intervals_ms.size() >= 4) {
            s.pac_beat_indices = detect_pacs(s.rr_intervals_ms);
            s.pac_count = int(s.pac_beat_indices.size());
        }
    }
    if (!peaks.empty()) {
        auto fid = fiducials(trace, fs, peaks);
        auto iv = intervals(fid, fs);
        s.pr_interval_ms = iv.pr_ms;
        s.p_duration_ms = iv.p_dur_ms;
        s.qrs_duration_ms = iv.qrs_ms;
        s.qt_ms = iv.qt_ms;
        s.qtc_ms = iv.qtc_ms;
        auto am = amplitudes(trace, fid);
        s.p_amplitude_mv = am.p_mv;
        s.qrs_amplitude_mv = am.qrs_mv;
        s.t_amplitude_mv = am.t_mv;
        if (s.p_amplitude_mv && s.heart_rate_bpm) s.estimated_atrial_rate = s.heart_rate_bpm;
    }
    return s;
}

namespace detail {

inline std::optional<double> median_opt(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

// Global stats: median across leads for interval/amplitude measures,
// lead II preferred (else first lead) for rhythm measures.
inline StatReport stat_report(const EcgRecord& rec) {
    StatReport rep;
    rep.lead_names = rec.lead_names;
    for (const auto& lead : rec.leads) rep.per_lead.push_back(lead_stats(lead, rec.fs));

    size_t rhythm_lead = 0;
    for (size_t l = 0; l < rec.lead_names.size(); ++l)
        if (rec.lead_names[l] == "II") rhythm_lead = l;
    const LeadStats& r = rep.per_lead[rhythm_lead];
    rep.global.rr_intervals_ms = r.rr_intervals_ms;
    rep.global.mean_rr_ms = r.mean_rr_ms;
    rep.global.heart_rate_bpm = r.heart_rate_bpm;
    rep.global.rmssd_ms = r.rmssd_ms;
    rep.global.sdnn_ms = r.sdnn_ms;
    rep.global.rr_iqr_ms = r.rr_iqr_ms;
    rep.global.pac_count = r.pac_count;
    rep.global.pac_beat_indices = r.pac_beat_indices;
    rep.global.estimated_atrial_rate = r.estimated_atrial_rate;

    auto collect = [&](auto field) {
        std::vector<double> vals;
        for (const auto& ls : rep.per_lead)
            if (ls.*field) vals.push_back(*(ls.*field));
        return detail::median_opt(vals);
    };
    rep.global.pr_interval_ms = collect(&LeadStats::pr_interval_ms);
    rep.global.p_duration_ms = collect(&LeadStats::p_duration_ms);
    rep.global.qrs_duration_ms = collect(&LeadStats::qrs_duration_ms);
    rep.global.qt_ms = collect(&LeadStats::qt_ms);
    rep.global.qtc_ms = collect(&LeadStats::qtc_ms);
    rep.global.p_amplitude_mv = collect(&LeadStats::p_amplitude_mv);
    rep.global.qrs_amplitude_mv = collect(&LeadStats::qrs_amplitude_mv);
    rep.global.t_amplitude_mv = collect(&LeadStats::t_amplitude_mv);
    return rep;
}

struct FieldDiff {
    std::string field;
    double diff = 0.0;           // b - a
    std::string verdict;         // "equal", "a_higher", "b_higher"
};

struct StatDiff {
    std::vector<FieldDiff> fields;
    const FieldDiff* find(const std::string& name) const {
        for (const auto& f : fields)
            if (f.field == name) return &f;
        return nullptr;
    }
};

inline StatDiff compare_stats(const StatReport& a, const StatReport& b, double eps = 1e-9) {
    StatDiff d;
    auto cmp = [&](const std::string& name, std::optional<double> va, std::optional<double> vb) {
        if (!va || !vb) return;
        FieldDiff f;
        f.field = name;
        f.diff = *vb - *va;
        f.verdict = std::fabs(f.diff) <= eps ? "equal" : (f.diff > 0 ? "b_higher" : "a_higher");
        d.fields.push_back(f);
    };
    cmp("mean_rr_ms", a.global.mean_rr_ms, b.global.mean_rr_ms);
    cmp("heart_rate_bpm",
        a.global.heart_rate_bpm ? std::optional<double>(*a.global.heart_rate_bpm) : std::nullopt,
        b.global.heart_rate_bpm ? std::optional<double>(*b.global.heart_rate_bpm) : std::nullopt);
    cmp("rmssd_ms", a.global.rmssd_ms, b.global.rmssd_ms);
    cmp("sdnn_ms", a.global.sdnn_ms, b.global.sdnn_ms);
    cmp("rr_iqr_ms", a.global.rr_iqr_ms, b.global.rr_iqr_ms);
    cmp("pr_interval_ms", a.global.pr_interval_ms, b.global.pr_interval_ms);
    cmp("p_duration_ms", a.global.p_duration_ms, b.global.p_duration_ms);
    cmp("qrs_duration_ms", a.global.qrs_duration_ms, b.global.qrs_duration_ms);
    cmp("qt_ms", a.global.qt_ms, b.global.qt_ms);
    cmp("qtc_ms", a.global.qtc_ms, b.global.qtc_ms);
    cmp("p_amplitude_mv", a.global.p_amplitude_mv, b.global.p_amplitude_mv);
    cmp("qrs_amplitude_mv", a.global.qrs_amplitude_mv, b.global.qrs_amplitude_mv);
    cmp("t_amplitude_mv", a.global.t_amplitude_mv, b.global.t_amplitude_mv);
    cmp("pac_count", double(a.global.pac_count), double(b.global.pac_count));
    return d;
}

// ---------------------------------------------------------------------------
// JSON serialization (units carried in the field names)

inline nlohmann::json to_json(const LeadStats& s) {
    nlohmann::json j;
    j["rr_intervals_ms"] = s.rr_intervals_ms;
    auto put = [&](const char* k, const auto& opt) {
        if (opt) j[k] = *opt;
    };
    put("mean_rr_ms", s.mean_rr_ms);
    put("heart_rate_bpm", s.heart_rate_bpm);
    put("rmssd_ms", s.rmssd_ms);
    put("sdnn_ms", s.sdnn_ms);
    put("rr_iqr_ms", s.rr_iqr_ms);
    j["pac_count"] = s.pac_count;
    j["pac_beat_indices"] = s.pac_beat_indices;
    put("pr_interval_ms", s.pr_interval_ms);
    put("p_duration_ms", s.p_duration_ms);
    put("qrs_duration_ms", s.qrs_duration_ms);
    put("qt_ms", s.qt_ms);
    put("qtc_ms", s.qtc_ms);
    put("p_amplitude_mv", s.p_amplitude_mv);
    put("qrs_amplitude_mv", s.qrs_amplitude_mv);
    put("t_amplitude_mv", s.t_amplitude_mv);
    put("estimated_atrial_rate", s.estimated_atrial_rate);
    return j;
}

inline nlohmann::json to_json(const StatReport& rep) {
    nlohmann::json j;
    j["lead_names"] = rep.lead_names;
    j["global"] = to_json(rep.global);
    nlohmann::json leads = nlohmann::json::object();
    for (size_t l = 0; l < rep.per_lead.size(); ++l)
        leads[rep.lead_names[l]] = to_json(rep.per_lead[l]);
    j["per_lead"] = leads;
    return j;
}

}  // namespace ecglab
