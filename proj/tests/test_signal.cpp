#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ecglab/signal.hpp"

using namespace ecglab;

TEST_CASE("synth: HR=60, jitter=0 gives evenly spaced peaks") {
    SynthSpec spec;
    spec.heart_rate_bpm = 60;
    spec.fs = 256;
    spec.duration_s = 10;
    spec.rr_jitter_ms = 0;
    EcgRecord rec = synth_ecg(spec, 1);
    REQUIRE(rec.annotations.has_value());
    const auto& pos = rec.annotations->beat_positions;
    CHECK(pos.size() == 10);
    for (size_t i = 1; i < pos.size(); ++i) CHECK(pos[i] - pos[i - 1] == 256);
}

TEST_CASE("synth: zero amplitudes give an all-zero signal") {
    SynthSpec spec;
    spec.wave.p_amp_mv = 0;
    spec.wave.qrs_amp_mv = 0;
    spec.wave.t_amp_mv = 0;
    EcgRecord rec = synth_ecg(spec, 7);
    for (const auto& lead : rec.leads)
        for (double v : lead) CHECK(v == 0.0);
}

TEST_CASE("synth: HR=92 mean annotation RR is 652 ms within half a sample") {
    SynthSpec spec;
    spec.heart_rate_bpm = 92;
    spec.fs = 256;
    spec.duration_s = 30;
    spec.rr_jitter_ms = 0;
    EcgRecord rec = synth_ecg(spec, 3);
    const auto& pos = rec.annotations->beat_positions;
    double sum = 0;
    for (size_t i = 1; i < pos.size(); ++i) sum += double(pos[i] - pos[i - 1]);
    double mean_ms = sum / double(pos.size() - 1) * 1000.0 / 256.0;
    double half_sample_ms = 0.5 * 1000.0 / 256.0;
    CHECK(std::fabs(mean_ms - 60000.0 / 92.0) <= half_sample_ms);
}

TEST_CASE("synth is deterministic under (spec, seed)") {
    SynthSpec spec;
    spec.rr_jitter_ms = 40;
    spec.rhythm_schedule = {{0, Rhythm::NORM}, {5, Rhythm::AFIB}};
    EcgRecord a = synth_ecg(spec, 42);
    EcgRecord b = synth_ecg(spec, 42);
    CHECK(a.leads == b.leads);
    CHECK(a.annotations->beat_positions == b.annotations->beat_positions);
}

TEST_CASE("synth: AFIB intervals are irregular and P-free") {
    SynthSpec spec;
    spec.duration_s = 30;
    spec.rhythm_schedule = {{0, Rhythm::AFIB}};
    SynthTruth truth;
    synth_ecg(spec, 5, &truth);
    double mean_rr = 1000.0;
    for (const auto& b : truth.beats) CHECK_FALSE(b.has_p);
    double lo = 1e9, hi = 0;
    for (double rr : truth.rr_ms) {
        lo = std::min(lo, rr);
        hi = std::max(hi, rr);
    }
    CHECK(hi - lo > 0.15 * mean_rr);
}

TEST_CASE("synth: invalid spec names the field") {
    SynthSpec spec;
    spec.heart_rate_bpm = 400;
    CHECK_THROWS_WITH_AS(synth_ecg(spec, 0), doctest::Contains("heart_rate_bpm"),
                         ValidationError);
    SynthSpec spec2;
    spec2.rhythm_schedule = {{1.0, Rhythm::NORM}};
    CHECK_THROWS_WITH_AS(synth_ecg(spec2, 0), doctest::Contains("rhythm_schedule"),
                         ValidationError);
}

TEST_CASE("record round-trip is the identity") {
    SynthSpec spec;
    spec.lead_scales = {1.0, -0.6, 0.3};
    spec.rr_jitter_ms = 25;
    EcgRecord rec = synth_ecg(spec, 11);
    // store float32 on disk: quantize in-memory copy first so the comparison is exact
    for (auto& lead : rec.leads)
        for (auto& v : lead) v = double(float(v));

    auto path = std::filesystem::temp_directory_path() / "ecglab_test_rec.ecg";
    save_record(rec, path.string());
    EcgRecord back = load_record(path.string());
    CHECK(back.fs == rec.fs);
    CHECK(back.lead_names == rec.lead_names);
    CHECK(back.leads == rec.leads);
    REQUIRE(back.annotations.has_value());
    CHECK(back.annotations->beat_positions == rec.annotations->beat_positions);
    CHECK(back.annotations->beat_labels == rec.annotations->beat_labels);
    std::filesystem::remove(path);
    std::filesystem::remove(annotations_path(path.string()));
}

TEST_CASE("truncated payload reports a sample-count mismatch") {
    SynthSpec spec;
    EcgRecord rec = synth_ecg(spec, 2);
    auto path = std::filesystem::temp_directory_path() / "ecglab_test_trunc.ecg";
    save_record(rec, path.string());
    // chop the file
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 64);
    CHECK_THROWS_WITH_AS(load_record(path.string()), doctest::Contains("sample count"),
                         std::runtime_error);
    std::filesystem::remove(path);
    std::filesystem::remove(annotations_path(path.string()));
}

TEST_CASE("malformed header and unknown version are rejected") {
    auto dir = std::filesystem::temp_directory_path();
    auto p1 = dir / "ecglab_bad_header.ecg";
    {
        std::ofstream out(p1);
        out << "not json\n---\n";
    }
    CHECK_THROWS_WITH_AS(load_record(p1.string()), doctest::Contains("malformed"),
                         std::runtime_error);
    auto p2 = dir / "ecglab_bad_version.ecg";
    {
        std::ofstream out(p2);
        out << R"({"version":9,"fs":256,"lead_names":["II"],"n_samples":0})" << "\n---\n";
    }
    CHECK_THROWS_WITH_AS(load_record(p2.string()), doctest::Contains("version"),
                         std::runtime_error);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("record invariants are enforced") {
    EcgRecord rec;
    rec.fs = 256;
    rec.leads = {{0, 0, 0}, {0, 0}};
    rec.lead_names = {"I", "II"};
    CHECK_THROWS_AS(rec.validate(), ValidationError);
    rec.leads = {{0, 0, 0}, {0, 0, 0}};
    rec.lead_names = {"I", "I"};
    CHECK_THROWS_AS(rec.validate(), ValidationError);
}
