#pragma once

// ECG record model, file I/O, and the synthetic generator used as the
// numeric oracle for the stats and forecasting tests.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecglab/common.hpp"

namespace ecglab {

enum class BeatLabel { NORM, AFIB, AFL, PAC, OTHER };

inline std::string to_string(BeatLabel l) {
    switch (l) {
        case BeatLabel::NORM: return "NORM";
        case BeatLabel::AFIB: return "AFIB";
        case BeatLabel::AFL: return "AFL";
        case BeatLabel::PAC: return "PAC";
        case BeatLabel::OTHER: return "OTHER";
    }
    return "OTHER";
}

inline BeatLabel beat_label_from(const std::string& s) {
    if (s == "NORM") return BeatLabel::NORM;
    if (s == "AFIB") return BeatLabel::AFIB;
    if (s == "AFL") return BeatLabel::AFL;
    if (s == "PAC") return BeatLabel::PAC;
    if (s == "OTHER") return BeatLabel::OTHER;
    throw ValidationError("beat_label", "unknown label '" + s + "'");
}

struct BeatAnnotations {
    std::vector<int64_t> beat_positions;  // sample indices, strictly increasing
    std::vector<BeatLabel> beat_labels;

    void validate(int64_t n_samples) const {
        if (beat_positions.size() != beat_labels.size())
            throw ValidationError("beat_labels", "length mismatch with positions");
        for (size_t i = 0; i < beat_positions.size(); ++i) {
            if (beat_positions[i] < 0 || beat_positions[i] >= n_samples)
                throw ValidationError("beat_positions", "index out of record range");
            if (i > 0 && beat_positions[i] <= beat_positions[i - 1])
                throw ValidationError("beat_positions", "not strictly increasing");
        }
    }
};

struct EcgRecord {
    std::vector<std::vector<double>> leads;  // millivolts
    std::vector<std::string> lead_names;
    int fs = 0;  // Hz
    std::optional<BeatAnnotations> annotations;

    int64_t n_samples() const { return leads.empty() ? 0 : int64_t(leads[0].size()); }
    size_t n_leads() const { return leads.size(); }
    double duration_s() const { return fs > 0 ? double(n_samples()) / fs : 0.0; }

    void validate() const {
        if (fs <= 0) throw ValidationError("fs", "must be positive");
        if (leads.empty()) throw ValidationError("leads", "must be non-empty");
        if (lead_names.size() != leads.size())
            throw ValidationError("lead_names", "length mismatch with leads");
        for (const auto& l : leads)
            if (int64_t(l.size()) != n_samples())
                throw ValidationError("leads", "unequal lead lengths");
        for (size_t i = 0; i < lead_names.size(); ++i)
            for (size_t j = i + 1; j < lead_names.size(); ++j)
                if (lead_names[i] == lead_names[j])
                    throw ValidationError("lead_names", "duplicate name '" + lead_names[i] + "'");
        if (annotations) annotations->validate(n_samples());
    }
};

// ---------------------------------------------------------------------------
// Synthetic generator

enum class Rhythm { NORM, AFIB, AFL };

inline std::string to_string(Rhythm r) {
    switch (r) {
        case Rhythm::NORM: return "NORM";
        case Rhythm::AFIB: return "AFIB";
        case Rhythm::AFL: return "AFL";
    }
    return "NORM";
}

struct WaveParams {
    double p_amp_mv = 0.15;
    double qrs_amp_mv = 1.2;
    double t_amp_mv = 0.3;
    double p_width_ms = 100.0;
    double qrs_width_ms = 90.0;
    double t_width_ms = 160.0;
    double pr_ms = 160.0;  // P onset -> QRS onset
    double qt_ms = 400.0;  // QRS onset -> T offset
};

struct RhythmSegment {
    double start_s = 0.0;
    Rhythm rhythm = Rhythm::NORM;
};

struct SynthSpec {
    double duration_s = 10.0;
    int fs = 256;
    double heart_rate_bpm = 60.0;
    double rr_jitter_ms = 0.0;
    std::vector<int> pac_positions;  // 1-based beat indices made premature
    WaveParams wave;
    std::vector<double> lead_scales = {1.0};
    std::vector<std::string> lead_names;  // defaults to II, V1, ... if empty
    std::vector<RhythmSegment> rhythm_schedule = {{0.0, Rhythm::NORM}};

    void validate() const {
        if (duration_s <= 0) throw ValidationError("duration_s", "must be positive");
        if (fs <= 0) throw ValidationError("fs", "must be positive");
        if (heart_rate_bpm < 20 || heart_rate_bpm > 300)
            throw ValidationError("heart_rate_bpm", "must be in [20, 300]");
        if (rr_jitter_ms < 0) throw ValidationError("rr_jitter_ms", "must be nonnegative");
        if (lead_scales.empty()) throw ValidationError("lead_scales", "must be non-empty");
        if (rhythm_schedule.empty() || rhythm_schedule.front().start_s != 0.0)
            throw ValidationError("rhythm_schedule", "must start at 0");
        for (size_t i = 1; i < rhythm_schedule.size(); ++i)
            if (rhythm_schedule[i].start_s <= rhythm_schedule[i - 1].start_s)
                throw ValidationError("rhythm_schedule", "starts must be strictly increasing");
        if (!lead_names.empty() && lead_names.size() != lead_scales.size())
            throw ValidationError("lead_names", "length mismatch with lead_scales");
        for (int p : pac_positions)
            if (p < 2) throw ValidationError("pac_positions", "beat indices are 1-based and must be >= 2");
    }
};

// Onset/offset convention: a wave "starts" and "ends" where the Gaussian
// bump falls to 20% of its peak, i.e. at center +- ONSET_SIGMA * sigma.
// Widths in WaveParams are measured by that convention.
constexpr double kOnsetSigmas = 1.7941225779941015;  // sqrt(-2 ln 0.2)

struct BeatTruth {
    double r_time_s = 0.0;
    int64_t r_peak = 0;  // sample index
    double p_onset_s = 0.0, p_offset_s = 0.0;
    double qrs_onset_s = 0.0, qrs_offset_s = 0.0;
    double t_offset_s = 0.0;
    bool has_p = true;
    BeatLabel label = BeatLabel::NORM;
    bool is_pac = false;
};

struct SynthTruth {
    std::vector<BeatTruth> beats;
    std::vector<double> rr_ms;  // between consecutive generated beats
};

inline Rhythm rhythm_at(const SynthSpec& spec, double t) {
    Rhythm r = spec.rhythm_schedule.front().rhythm;
    for (const auto& seg : spec.rhythm_schedule)
        if (t >= seg.start_s) r = seg.rhythm;
    return r;
}

inline EcgRecord synth_ecg(const SynthSpec& spec, uint64_t seed, SynthTruth* truth_out = nullptr) {
    spec.validate();
    Rng rng(seed);

    const double mean_rr = 60.0 / spec.heart_rate_bpm;
    const double margin = 0.5;  // room for P before / T after the edge beats

    // Beat times. PAC at 1-based index b: interval into beat b shortened to
    // 0.75x, interval out of it stretched to 1.25x (compensatory pause).
    std::vector<double> beat_times;
    std::vector<bool> is_pac;
    double t = margin;
    while (t <= spec.duration_s - margin) {
        beat_times.push_back(t);
        int next_index = int(beat_times.size()) + 1;  // 1-based index of the next beat
        bool next_is_pac = std::find(spec.pac_positions.begin(), spec.pac_positions.end(),
                                     next_index) != spec.pac_positions.end();
        bool this_is_pac = std::find(spec.pac_positions.begin(), spec.pac_positions.end(),
                                     int(beat_times.size())) != spec.pac_positions.end();
        is_pac.push_back(this_is_pac);
        Rhythm rh = rhythm_at(spec, t);
        double rr;
        if (rh == Rhythm::AFIB) {
            rr = mean_rr * rng.uniform(0.7, 1.3);
        } else if (rh == Rhythm::AFL) {
            rr = mean_rr * rng.uniform(0.85, 1.15);
        } else if (next_is_pac) {
            rr = 0.75 * mean_rr;
        } else if (this_is_pac) {
            rr = 1.25 * mean_rr;  // compensatory pause
        } else {
            rr = mean_rr + rng.normal() * spec.rr_jitter_ms / 1000.0;
        }
        if (rr < 0.2) rr = 0.2;  // refractory floor
        t += rr;
    }

    const double half_p = spec.wave.p_width_ms / 2000.0;
    const double half_qrs = spec.wave.qrs_width_ms / 2000.0;
    const double half_t = spec.wave.t_width_ms / 2000.0;
    const double sig_p = half_p / kOnsetSigmas;
    const double sig_qrs = half_qrs / kOnsetSigmas;
    const double sig_t = half_t / kOnsetSigmas;

    int64_t n = int64_t(std::llround(spec.duration_s * spec.fs));
    EcgRecord rec;
    rec.fs = spec.fs;
    rec.leads.assign(spec.lead_scales.size(), std::vector<double>(n, 0.0));
    static const char* kDefaultNames[] = {"II", "V1", "I", "III", "aVR", "aVL",
                                          "aVF", "V2", "V3", "V4", "V5", "V6"};
    for (size_t l = 0; l < spec.lead_scales.size(); ++l) {
        if (!spec.lead_names.empty())
            rec.lead_names.push_back(spec.lead_names[l]);
        else if (l < 12)
            rec.lead_names.push_back(kDefaultNames[l]);
        else
            rec.lead_names.push_back("X" + std::to_string(l));
    }

    SynthTruth truth;
    BeatAnnotations ann;

    auto add_bump = [&](double center_s, double amp, double sigma) {
        if (amp == 0.0) return;
        int64_t lo = std::max<int64_t>(0, int64_t((center_s - 4 * sigma) * spec.fs));
        int64_t hi = std::min<int64_t>(n - 1, int64_t((center_s + 4 * sigma) * spec.fs) + 1);
        for (int64_t i = lo; i <= hi; ++i) {
            double dt = double(i) / spec.fs - center_s;
            double v = amp * std::exp(-dt * dt / (2 * sigma * sigma));
            for (size_t l = 0; l < rec.leads.size(); ++l)
                rec.leads[l][i] += v * spec.lead_scales[l];
        }
    };

    for (size_t b = 0; b < beat_times.size(); ++b) {
        double tr = beat_times[b];
        Rhythm rh = rhythm_at(spec, tr);
        double qrs_onset = tr - half_qrs;
        double p_onset = qrs_onset - spec.wave.pr_ms / 1000.0;
        double p_center = p_onset + half_p;
        double t_offset = qrs_onset + spec.wave.qt_ms / 1000.0;
        double t_center = t_offset - half_t;
        bool has_p = (rh == Rhythm::NORM) && spec.wave.p_amp_mv != 0.0;

        if (has_p) add_bump(p_center, spec.wave.p_amp_mv, sig_p);
        add_bump(tr, spec.wave.qrs_amp_mv, sig_qrs);
        add_bump(t_center, spec.wave.t_amp_mv, sig_t);

        BeatTruth bt;
        bt.r_time_s = tr;
        bt.r_peak = int64_t(std::llround(tr * spec.fs));
        bt.p_onset_s = p_onset;
        bt.p_offset_s = p_center + half_p;
        bt.qrs_onset_s = qrs_onset;
        bt.qrs_offset_s = tr + half_qrs;
        bt.t_offset_s = t_offset;
        bt.has_p = has_p;
        bt.is_pac = is_pac[b];
        bt.label = rh == Rhythm::AFIB   ? BeatLabel::AFIB
                   : rh == Rhythm::AFL ? BeatLabel::AFL
                                       : BeatLabel::NORM;
        truth.beats.push_back(bt);
        if (b > 0) truth.rr_ms.push_back((beat_times[b] - beat_times[b - 1]) * 1000.0);

        ann.beat_positions.push_back(bt.r_peak);
        ann.beat_labels.push_back(bt.label);
    }

    rec.annotations = ann;
    rec.validate();
    if (truth_out) *truth_out = truth;
    return rec;
}

// ---------------------------------------------------------------------------
// Record file I/O.
//
// Format: a one-line JSON header, a "---" separator line, then raw
// little-endian float32 samples, lead-major. Annotations live in a
// sidecar JSONL file at <path>.ann.jsonl, one {"pos":..,"label":".."} per line.

inline std::string annotations_path(const std::string& path) { return path + ".ann.jsonl"; }

inline void save_record(const EcgRecord& rec, const std::string& path) {
    rec.validate();
    nlohmann::json hdr;
    hdr["version"] = 1;
    hdr["fs"] = rec.fs;
    hdr["lead_names"] = rec.lead_names;
    hdr["n_samples"] = rec.n_samples();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << hdr.dump() << "\n---\n";
    std::vector<float> buf;
    buf.reserve(rec.n_samples());
    for (const auto& lead : rec.leads) {
        buf.assign(lead.begin(), lead.end());
        out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    }
    if (rec.annotations) {
        std::ofstream ao(annotations_path(path));
        for (size_t i = 0; i < rec.annotations->beat_positions.size(); ++i) {
            nlohmann::json j;
            j["pos"] = rec.annotations->beat_positions[i];
            j["label"] = to_string(rec.annotations->beat_labels[i]);
            ao << j.dump() << "\n";
        }
    }
}

inline EcgRecord load_record(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string hdr_line, sep;
    std::getline(in, hdr_line);
    std::getline(in, sep);
    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(hdr_line);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("malformed header in " + path);
    }
    if (sep != "---") throw std::runtime_error("malformed header (missing separator) in " + path);
    if (!hdr.contains("version") || hdr["version"] != 1)
        throw std::runtime_error("unknown record version in " + path);
    EcgRecord rec;
    rec.fs = hdr.at("fs").get<int>();
    rec.lead_names = hdr.at("lead_names").get<std::vector<std::string>>();
    int64_t n = hdr.at("n_samples").get<int64_t>();
    rec.leads.resize(rec.lead_names.size());
    std::vector<float> buf(static_cast<size_t>(n), 0.0f);
    for (auto& lead : rec.leads) {
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
        if (in.gcount() != std::streamsize(buf.size() * sizeof(float)))
            throw std::runtime_error("sample count mismatch in " + path);
        lead.assign(buf.begin(), buf.end());
    }

    std::ifstream ai(annotations_path(path));
    if (ai) {
        BeatAnnotations ann;
        std::string line;
        while (std::getline(ai, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            ann.beat_positions.push_back(j.at("pos").get<int64_t>());
            ann.beat_labels.push_back(beat_label_from(j.at("label").get<std::string>()));
        }
        if (!ann.beat_positions.empty()) rec.annotations = ann;
    }
    rec.validate();
    return rec;
}

}  // namespace ecglab
