// ecglab command-line tool: wires the library modules into small seeded
// pipelines. Every artifact gets a sibling .manifest.json capturing the
// subcommand, seed, and a hash of the effective config, so reruns are
// comparable byte-for-byte (manifests carry no timestamps).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ecglab/datagen_client.hpp"
#include "ecglab/forecast.hpp"
#include "ecglab/leadtask.hpp"
#include "ecglab/mask.hpp"
#include "ecglab/metrics.hpp"
#include "ecglab/nn.hpp"
#include "ecglab/preprocess.hpp"
#include "ecglab/stats.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr int kRecordFormatVersion = 1;
constexpr int kCheckpointFormatVersion = 1;

bool g_log_json = false;

void log_kv(const std::string& key, const nlohmann::json& value) {
    if (g_log_json) {
        nlohmann::json j;
        j[key] = value;
        std::cout << j.dump() << "\n";
    } else {
        std::cout << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
                  << "\n";
    }
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
    return buf;
}

// manifests reference inputs by filename so a pipeline rerun into another
// directory produces byte-identical metadata
std::string base_name(const std::string& path) {
    return std::filesystem::path(path).filename().string();
}

void write_manifest(const std::string& artifact, const std::string& subcommand,
                    const nlohmann::json& config, uint64_t seed) {
    nlohmann::json m;
    m["tool"] = "ecglab";
    m["version"] = kToolVersion;
    m["format_versions"] = {{"record", kRecordFormatVersion},
                            {"checkpoint", kCheckpointFormatVersion}};
    m["subcommand"] = subcommand;
    m["seed"] = seed;
    m["config"] = config;
    m["config_hash"] = hex64(fnv1a(config.dump()));
    std::ofstream out(artifact + ".manifest.json");
    out << m.dump(2) << "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ecglab::ValidationError("path", "cannot open for writing: " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ecglab::ValidationError("path", "cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ecglab::ValidationError("path", "cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

// "0:NORM,700:AFIB" -> rhythm schedule
std::vector<ecglab::RhythmSegment> parse_rhythm(const std::string& s) {
    std::vector<ecglab::RhythmSegment> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        auto colon = part.find(':');
        if (colon == std::string::npos)
            throw ecglab::ValidationError("rhythm", "expected start:NAME pairs");
        ecglab::RhythmSegment seg;
        seg.start_s = std::stod(part.substr(0, colon));
        std::string name = part.substr(colon + 1);
        if (name == "NORM") seg.rhythm = ecglab::Rhythm::NORM;
        else if (name == "AFIB") seg.rhythm = ecglab::Rhythm::AFIB;
        else if (name == "AFL") seg.rhythm = ecglab::Rhythm::AFL;
        else throw ecglab::ValidationError("rhythm", "unknown rhythm '" + name + "'");
        out.push_back(seg);
    }
    return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::string out;
    uint64_t seed = 1;
    double duration = 10.0;
    int fs = 256;
    double hr = 60.0;
    double jitter = 0.0;
    std::vector<double> lead_scales = {1.0};
    std::vector<int> pacs;
    std::string rhythm = "0:NORM";
};

int run_synth(const SynthArgs& a) {
    ecglab::SynthSpec spec;
    spec.duration_s = a.duration;
    spec.fs = a.fs;
    spec.heart_rate_bpm = a.hr;
    spec.rr_jitter_ms = a.jitter;
    spec.lead_scales = a.lead_scales;
    spec.pac_positions = a.pacs;
    spec.rhythm_schedule = parse_rhythm(a.rhythm);
    auto rec = ecglab::synth_ecg(spec, a.seed);
    ecglab::save_record(rec, a.out);
    nlohmann::json cfg = {{"duration_s", a.duration}, {"fs", a.fs},
                          {"heart_rate_bpm", a.hr},   {"rr_jitter_ms", a.jitter},
                          {"lead_scales", a.lead_scales}, {"pac_positions", a.pacs},
                          {"rhythm", a.rhythm}};
    write_manifest(a.out, "synth", cfg, a.seed);
    log_kv("wrote", a.out);
    log_kv("n_samples", rec.n_samples());
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
    std::string in, out;
    double highpass = 0.3;
    std::vector<double> notch = {50.0, 60.0};
    int target_fs = 256;
    double max_bad_run = 5.0;
};

int run_preprocess(const PreprocessArgs& a) {
    ecglab::PreprocessConfig cfg;
    cfg.highpass_cutoff_hz = a.highpass;
    cfg.notch_freqs_hz = a.notch;
    cfg.target_fs = a.target_fs;
    cfg.max_bad_run_s = a.max_bad_run;
    auto rec = ecglab::load_record(a.in);
    auto outcome = ecglab::preprocess(rec, cfg);
    if (!outcome.result.accepted) {
        std::cerr << "record rejected: " << outcome.result.reason << " on lead "
                  << outcome.result.lead << " (run length " << outcome.result.run_length
                  << ")\n";
        return 1;
    }
    ecglab::save_record(outcome.result.record, a.out);
    nlohmann::json jc = {{"highpass_cutoff_hz", a.highpass},
                         {"notch_freqs_hz", a.notch},
                         {"target_fs", a.target_fs},
                         {"max_bad_run_s", a.max_bad_run},
                         {"steps", outcome.provenance}};
    write_manifest(a.out, "preprocess", jc, 0);
    log_kv("wrote", a.out);
    return 0;
}

// ---------------------------------------------------------------------------
// stats

int run_stats(const std::string& in, const std::string& out) {
    auto rec = ecglab::load_record(in);
    auto rep = ecglab::stat_report(rec);
    std::string text = ecglab::to_json(rep).dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text(out, text);
        write_manifest(out, "stats", {{"in", base_name(in)}}, 0);
        log_kv("wrote", out);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// tokenize

struct TokenizeArgs {
    std::string in, out;
    int prompt_len = 4;
    int answer_len = 0;
};

int run_tokenize(const TokenizeArgs& a) {
    auto rec = ecglab::load_record(a.in);
    auto segs = ecglab::segment(rec);
    ecglab::EcgBlockDesc blk;
    blk.n_leads = int(rec.n_leads());
    blk.n_seconds = int(segs[0].size());

    std::vector<std::vector<int>> text_parts;
    std::vector<ecglab::SequencePart> order;
    std::vector<int> prompt(size_t(a.prompt_len));
    for (int i = 0; i < a.prompt_len; ++i) prompt[size_t(i)] = i + 1;
    text_parts.push_back(prompt);
    order.push_back({false, 0, ecglab::Role::User});
    order.push_back({true, 0, ecglab::Role::User});
    if (a.answer_len > 0) {
        std::vector<int> answer(size_t(a.answer_len));
        for (int i = 0; i < a.answer_len; ++i) answer[size_t(i)] = a.prompt_len + i + 1;
        text_parts.push_back(answer);
        order.push_back({false, 1, ecglab::Role::Assistant});
    }
    auto seq = ecglab::assemble(text_parts, {blk}, order);
    write_text(a.out, ecglab::sequence_to_jsonl(seq));
    write_manifest(a.out, "tokenize",
                   {{"in", base_name(a.in)}, {"prompt_len", a.prompt_len}, {"answer_len", a.answer_len}},
                   0);
    log_kv("wrote", a.out);
    log_kv("n_tokens", seq.size());
    return 0;
}

// ---------------------------------------------------------------------------
// mask

struct MaskArgs {
    std::string in, out;
    std::string scheme = "lead_aware";
    bool pbm = false;
};

int run_mask(const MaskArgs& a) {
    auto seq = ecglab::sequence_from_jsonl(read_text(a.in));
    auto mask = ecglab::build_mask(seq, ecglab::mask_scheme_from(a.scheme));
    if (a.pbm) write_text(a.out, mask.to_pbm());
    else mask.save(a.out);
    write_manifest(a.out, "mask", {{"in", base_name(a.in)}, {"scheme", a.scheme}, {"pbm", a.pbm}}, 0);
    log_kv("wrote", a.out);
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

// central differences against the analytic gradient on a tiny LM loss and a
// tiny autoencoder loss; samples a handful of components per parameter
int run_gradcheck(int trials, uint64_t seed) {
    using namespace ecglab;
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(seed + uint64_t(trial));
        TinyLmConfig cfg;
        cfg.vocab = 6;
        cfg.h_model = 8;
        cfg.n_heads = 2;
        cfg.n_layers = 1;
        cfg.context = 32;
        auto params = TinyLmParams::init(cfg, rng);

        EcgBlockDesc blk;
        blk.n_leads = 2;
        blk.n_seconds = 2;
        auto seq = assemble({{1, 2}, {3}}, {blk},
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

        auto loss_fn = [&]() {
            return masked_ce(lm_forward(params, seq, embed, mask), targets, lp);
        };
        auto all = params.all();
        auto loss = loss_fn();
        zero_grad(all);
        backward(loss);
        for (auto& p : all) {
            size_t step = std::max<size_t>(1, p->numel() / 4);
            for (size_t k = 0; k < p->numel(); k += step) {
                double keep = p->v[k], eps = 1e-5;
                p->v[k] = keep + eps;
                double up = loss_fn()->v[0];
                p->v[k] = keep - eps;
                double dn = loss_fn()->v[0];
                p->v[k] = keep;
                worst = std::max(worst, rel_err(p->g[k], (up - dn) / (2 * eps)));
            }
        }

        // autoencoder path
        auto enc = EncoderParams::init(rng);
        auto dec = DecoderParams::init(rng);
        auto x = make_tensor({1, kSegmentLen});
        for (auto& v : x->v) v = rng.normal();
        auto ae_loss_fn = [&]() { return ops::mse(decode_t(dec, encode_t(enc, x)), x); };
        auto ae_params = enc.all();
        for (auto& t : dec.all()) ae_params.push_back(t);
        auto ae_loss = ae_loss_fn();
        zero_grad(ae_params);
        backward(ae_loss);
        for (auto& p : ae_params) {
            size_t step = std::max<size_t>(1, p->numel() / 3);
            for (size_t k = 0; k < p->numel(); k += step) {
                double keep = p->v[k], eps = 1e-5;
                p->v[k] = keep + eps;
                double up = ae_loss_fn()->v[0];
                p->v[k] = keep - eps;
                double dn = ae_loss_fn()->v[0];
                p->v[k] = keep;
                worst = std::max(worst, rel_err(p->g[k], (up - dn) / (2 * eps)));
            }
        }
    }
    log_kv("max_relative_error", worst);
    if (worst >= 1e-4) {
        std::cerr << "gradcheck failed: max relative error " << worst << "\n";
        return 1;
    }
    log_kv("gradcheck", "pass");
    return 0;
}

// ---------------------------------------------------------------------------
// train-ae

struct TrainAeArgs {
    std::string in;  // record; empty = synthesize
    std::string out;
    int epochs = 5;
    double lr = 1e-3;
    int batch = 32;
    uint64_t seed = 1;
    double synth_seconds = 96.0;
};

int run_train_ae(const TrainAeArgs& a) {
    ecglab::EcgRecord rec;
    if (a.in.empty()) {
        ecglab::SynthSpec spec;
        spec.duration_s = a.synth_seconds;
        spec.heart_rate_bpm = 70;
        spec.rr_jitter_ms = 20;
        rec = ecglab::synth_ecg(spec, a.seed);
    } else {
        rec = ecglab::load_record(a.in);
    }
    std::vector<std::vector<double>> segments;
    for (const auto& lead : ecglab::segment(rec))
        for (const auto& s : lead) segments.push_back(s);
    auto res = ecglab::train_autoencoder(segments, a.epochs, a.lr, a.seed, a.batch);
    auto tensors = ecglab::named_tensors(res.enc);
    for (const auto& [k, v] : ecglab::named_tensors(res.dec)) tensors[k] = v;
    ecglab::save_checkpoint(a.out, tensors);
    nlohmann::json cfg = {{"in", base_name(a.in)}, {"epochs", a.epochs}, {"lr", a.lr},
                          {"batch", a.batch}, {"synth_seconds", a.synth_seconds},
                          {"loss_curve", res.loss_curve}};
    write_manifest(a.out, "train-ae", cfg, a.seed);
    log_kv("wrote", a.out);
    log_kv("final_loss", res.loss_curve.back());
    return 0;
}

// ---------------------------------------------------------------------------
// train-lm: fine-tune the toy LM on the synthetic cross-lead probe

struct TrainLmArgs {
    std::string out;
    std::string scheme = "lead_aware";
    uint64_t seed = 1;
    int steps = 240;
    double lr = 3e-3;
};

int run_train_lm(const TrainLmArgs& a) {
    auto res = ecglab::train_lead_task(ecglab::mask_scheme_from(a.scheme), a.seed, 96, 96,
                                       a.steps, a.lr);
    ecglab::save_checkpoint(a.out, ecglab::named_tensors(res.params));
    nlohmann::json cfg = {{"scheme", a.scheme},          {"steps", a.steps},
                          {"lr", a.lr},                  {"train_acc", res.train_acc},
                          {"test_acc", res.test_acc},    {"final_loss", res.final_loss}};
    write_manifest(a.out, "train-lm", cfg, a.seed);
    log_kv("wrote", a.out);
    log_kv("train_acc", res.train_acc);
    log_kv("test_acc", res.test_acc);
    return 0;
}

// ---------------------------------------------------------------------------
// datagen

struct DatagenArgs {
    int stage = 2;
    std::string out;
    int n = 8;
    uint64_t seed = 1;
    bool live = false;
    std::string endpoint = "http://127.0.0.1:8080/v1/chat/completions";
    std::string model = "remote-chat-model";
};

nlohmann::json qa_to_json(const ecglab::QaItem& q) {
    nlohmann::json j;
    j["question"] = q.question;
    j["answer"] = q.answer;
    j["format"] = ecglab::to_string(q.format);
    j["task_type"] = ecglab::to_string(q.task_type);
    j["source_record_ids"] = q.source_record_ids;
    j["grounded_values"] = q.grounded_values;
    if (!q.options.empty()) {
        j["options"] = q.options;
        j["answer_index"] = q.answer_index;
    }
    return j;
}

ecglab::StatReport synth_report(uint64_t seed, double hr, double jitter) {
    ecglab::SynthSpec spec;
    spec.duration_s = 12;
    spec.heart_rate_bpm = hr;
    spec.rr_jitter_ms = jitter;
    return ecglab::stat_report(ecglab::synth_ecg(spec, seed));
}

int run_datagen(const DatagenArgs& a) {
    using namespace ecglab;
    std::ostringstream out;
    int written = 0, skipped = 0;
    Rng rng(a.seed);

    if (a.stage == 2) {
        const std::vector<std::string> label_set = {"NORM", "AFIB", "AFL"};
        for (int i = 0; i < a.n; ++i) {
            std::string label = label_set[size_t(i) % label_set.size()];
            QaItem item;
            try {
                item = gen_stage2("synth-" + std::to_string(i), label, label_set,
                                  a.seed + uint64_t(i));
            } catch (const ValidationError& e) {
                // generator refused the seed (e.g. option count exceeds label set)
                log_kv("skip", {{"stage", "2"}, {"item", std::to_string(i)},
                                {"reason", e.what()}});
                continue;
            }
            auto violations = validate_qa(item);
            if (!violations.empty())
                throw ValidationError("stage2", "generated item failed validation: " +
                                                    violations.front());
            out << qa_to_json(item).dump() << "\n";
            ++written;
        }
    } else if (a.stage == 3) {
        const QaTaskType tasks[] = {QaTaskType::StepwiseComputation, QaTaskType::BeatwiseRetrieval,
                                    QaTaskType::TemporalAnomaly, QaTaskType::Comparative,
                                    QaTaskType::Verification};
        for (int i = 0; i < a.n; ++i) {
            auto repA = synth_report(a.seed + 2 * uint64_t(i), 60 + (i % 5) * 8.0, 12);
            auto repB = synth_report(a.seed + 2 * uint64_t(i) + 1, 64 + (i % 4) * 7.0, 18);
            auto res = gen_stage3(repA, &repB, tasks[size_t(i) % 5], a.seed + uint64_t(i));
            if (!res.item) {
                log_kv("skipped", res.skip_reason);
                ++skipped;
                continue;
            }
            auto violations = validate_qa(*res.item);
            if (!violations.empty())
                throw ValidationError("stage3", "generated item failed validation: " +
                                                    violations.front());
            out << qa_to_json(*res.item).dump() << "\n";
            ++written;
        }
    } else if (a.stage == 4 || a.stage == 5) {
        LlmClientConfig cfg;
        cfg.mock = !a.live;
        cfg.endpoint = a.endpoint;
        cfg.model = a.model;
        for (int i = 0; i < a.n; ++i) {
            bool abnormal = i % 2 == 1;
            SynthSpec spec;
            spec.duration_s = 12;
            spec.heart_rate_bpm = 60 + (i % 6) * 6.0;
            spec.rr_jitter_ms = abnormal ? 60.0 : 10.0;
            auto rep = stat_report(synth_ecg(spec, a.seed + uint64_t(i)));
            std::string stats_str = render_stats(rep.global);
            std::string prompt, label;
            if (a.stage == 4) {
                auto bp = sample_blueprint(rng);
                prompt = build_stage4_prompt(
                    stats_str, abnormal ? "Atrial fibrillation" : "Sinus rhythm", bp);
            } else {
                label = abnormal ? "ABNORMAL" : "NORM";
                prompt = build_stage5_prompt(stats_str, 300, label);
            }
            auto conv = conversation_from_json(nlohmann::json::parse(llm_generate(prompt, cfg)));
            conv.provenance = {{"stage", a.stage}, {"record", "synth-" + std::to_string(i)}};
            auto violations = validate_conversation(conv, rep, label);
            if (!violations.empty()) {
                log_kv("rejected", violations.front());
                ++skipped;
                continue;
            }
            out << conversation_to_json(conv).dump() << "\n";
            ++written;
        }
    } else {
        throw ValidationError("stage", "must be 2, 3, 4, or 5");
    }

    write_text(a.out, out.str());
    write_manifest(a.out, "datagen",
                   {{"stage", a.stage}, {"n", a.n}, {"live", a.live}, {"model", a.model}},
                   a.seed);
    log_kv("wrote", a.out);
    log_kv("items", written);
    if (skipped) log_kv("skipped_items", skipped);
    return 0;
}

// ---------------------------------------------------------------------------
// forecastbench

struct FbBuildArgs {
    std::string out;
    int records = 6;
    uint64_t seed = 1;
    int window = 60;
    int horizon = 300;
    double balance = 3.0;
};

int run_fb_build(const FbBuildArgs& a) {
    using namespace ecglab;
    ForecastSpec spec;
    spec.window_s = a.window;
    spec.horizon_s = a.horizon;
    spec.balance_ratio = a.balance;
    std::ostringstream out;
    size_t total = 0;
    Rng rng(a.seed);
    for (int r = 0; r < a.records; ++r) {
        SynthSpec ss;
        ss.duration_s = double(a.window + a.horizon) + 400.0;
        ss.heart_rate_bpm = 65 + (r % 5) * 5.0;
        ss.rr_jitter_ms = 15;
        double sw = rng.uniform(ss.duration_s * 0.4, ss.duration_s * 0.9);
        ss.rhythm_schedule = {{0.0, Rhythm::NORM}, {sw, Rhythm::AFIB}};
        auto rec = synth_ecg(ss, a.seed + uint64_t(r));
        auto samples = extract_samples(rec, "synth-" + std::to_string(r), spec,
                                       a.seed + uint64_t(r));
        for (auto& s : samples) {
            s.features = featurize(s, rec);
            out << sample_to_json(s).dump() << "\n";
            ++total;
        }
    }
    write_text(a.out, out.str());
    write_manifest(a.out, "forecastbench-build",
                   {{"records", a.records}, {"window_s", a.window},
                    {"horizon_s", a.horizon}, {"balance_ratio", a.balance}},
                   a.seed);
    log_kv("wrote", a.out);
    log_kv("samples", total);
    return 0;
}

std::vector<ecglab::ForecastSample> load_samples(const std::string& path) {
    std::vector<ecglab::ForecastSample> out;
    for (const auto& line : read_lines(path))
        out.push_back(ecglab::sample_from_json(nlohmann::json::parse(line)));
    return out;
}

int run_fb_train(const std::string& in, const std::string& out, const std::string& model,
                 uint64_t seed) {
    auto kind = model == "logistic" ? ecglab::BaselineKind::Logistic
                                    : ecglab::BaselineKind::StumpEnsemble;
    auto samples = load_samples(in);
    auto m = ecglab::train_baseline(samples, kind, seed);
    write_text(out, ecglab::model_to_json(m).dump(2) + "\n");
    write_manifest(out, "forecastbench-train", {{"in", base_name(in)}, {"model", model}}, seed);
    log_kv("wrote", out);
    return 0;
}

int run_fb_eval(const std::string& in, const std::vector<std::string>& model_files,
                const std::string& out) {
    auto samples = load_samples(in);
    std::map<std::string, ecglab::BaselineModel> models;
    for (const auto& f : model_files) {
        auto m = ecglab::model_from_json(nlohmann::json::parse(read_text(f)));
        models[std::filesystem::path(f).stem().string()] = m;
    }
    // evaluate every (w, h) cell present in the dataset
    std::set<std::pair<int, int>> cells;
    for (const auto& s : samples) cells.insert({s.window_s, s.horizon_s});
    std::vector<ecglab::ForecastSpec> specs;
    for (auto [w, h] : cells) {
        ecglab::ForecastSpec sp;
        sp.window_s = w;
        sp.horizon_s = h;
        specs.push_back(sp);
    }
    auto report = ecglab::eval_grid(models, samples, specs);
    std::vector<std::string> model_names;
    for (const auto& f : model_files) model_names.push_back(base_name(f));
    std::string text = report.to_json().dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text(out, text);
        write_manifest(out, "forecastbench-eval", {{"in", base_name(in)}, {"models", model_names}}, 0);
        log_kv("wrote", out);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string task;
    std::string pred, truth;
    std::string out;
    double train_ratio = 0.5;
    uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
    using namespace ecglab;
    nlohmann::json report;
    report["task"] = a.task;
    if (a.task == "classify") {
        std::vector<int> preds, labels;
        for (const auto& l : read_lines(a.pred)) preds.push_back(std::stoi(l));
        for (const auto& l : read_lines(a.truth)) labels.push_back(std::stoi(l));
        int n_classes = 0;
        for (int v : labels) n_classes = std::max(n_classes, v + 1);
        for (int v : preds) n_classes = std::max(n_classes, v + 1);
        report["macro_f1"] = macro_f1(preds, labels, n_classes);
        report["accuracy"] = accuracy(preds, labels);
    } else if (a.task == "forecast") {
        auto to_int = [](const std::string& s) { return s == "ABNORMAL" ? 1 : 0; };
        std::vector<int> preds, labels;
        for (const auto& l : read_lines(a.pred)) preds.push_back(to_int(l));
        for (const auto& l : read_lines(a.truth)) labels.push_back(to_int(l));
        report["macro_f1"] = macro_f1(preds, labels, 2);
        report["accuracy"] = accuracy(preds, labels);
    } else if (a.task == "grounding") {
        std::vector<double> preds, truth;
        for (const auto& l : read_lines(a.pred)) preds.push_back(std::stod(l));
        for (const auto& l : read_lines(a.truth)) truth.push_back(std::stod(l));
        report["rmse"] = rmse(preds, truth);
    } else if (a.task == "probe") {
        std::vector<std::vector<double>> embeddings;
        for (const auto& l : read_lines(a.pred))
            embeddings.push_back(nlohmann::json::parse(l).get<std::vector<double>>());
        std::vector<int> labels;
        for (const auto& l : read_lines(a.truth)) labels.push_back(std::stoi(l));
        auto res = linear_probe(embeddings, labels, a.train_ratio, a.seed);
        report["auroc"] = res.auroc;
    } else {
        throw ValidationError("task", "must be classify, forecast, grounding, or probe");
    }
    std::string text = report.dump(2) + "\n";
    if (a.out.empty()) std::cout << text;
    else write_text(a.out, text);
    return 0;
}

// ---------------------------------------------------------------------------
// demo: the whole pipeline end to end on bundled settings

int run_demo(const std::string& out_dir, uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    SynthArgs synth;
    synth.out = path("record.ecg");
    synth.seed = seed;
    synth.duration = 20;
    synth.hr = 72;
    synth.jitter = 12;
    synth.lead_scales = {1.0, 0.6};
    run_synth(synth);

    PreprocessArgs pre;
    pre.in = synth.out;
    pre.out = path("clean.ecg");
    if (int rc = run_preprocess(pre)) return rc;

    run_stats(pre.out, path("stats.json"));

    TokenizeArgs tok;
    tok.in = pre.out;
    tok.out = path("sequence.jsonl");
    run_tokenize(tok);

    MaskArgs mask;
    mask.in = tok.out;
    mask.out = path("mask.bin");
    run_mask(mask);

    TrainAeArgs ae;
    ae.out = path("autoencoder.ckpt");
    ae.epochs = 3;
    ae.seed = seed;
    ae.synth_seconds = 96;
    run_train_ae(ae);

    FbBuildArgs fb;
    fb.out = path("forecast_samples.jsonl");
    fb.records = 4;
    fb.seed = seed;
    fb.window = 30;
    fb.horizon = 60;
    run_fb_build(fb);
    run_fb_train(fb.out, path("forecast_logistic.json"), "logistic", seed);
    run_fb_eval(fb.out, {path("forecast_logistic.json")}, path("forecast_report.json"));

    nlohmann::json summary = {{"artifacts",
                               {"record.ecg", "clean.ecg", "stats.json", "sequence.jsonl",
                                "mask.bin", "autoencoder.ckpt", "forecast_samples.jsonl",
                                "forecast_logistic.json", "forecast_report.json"}},
                              {"seed", seed}};
    write_text(path("demo_summary.json"), summary.dump(2) + "\n");
    log_kv("demo", "ok");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ecglab: synthetic ECG pipelines, tokenization, masks, and baselines"};
    app.set_config("--config", "", "flat key=value config file; flags override the file");
    app.add_flag("--log-json", g_log_json, "emit status lines as JSON objects");
    app.set_version_flag("--version",
                         std::string("ecglab ") + kToolVersion + " (record format " +
                             std::to_string(kRecordFormatVersion) + ", checkpoint format " +
                             std::to_string(kCheckpointFormatVersion) + ")");
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic ECG record");
    c_synth->add_option("--out", synth.out)->required();
    c_synth->add_option("--seed", synth.seed)->envname("ECGLAB_SEED");
    c_synth->add_option("--duration", synth.duration);
    c_synth->add_option("--fs", synth.fs);
    c_synth->add_option("--hr", synth.hr);
    c_synth->add_option("--jitter", synth.jitter);
    c_synth->add_option("--lead-scales", synth.lead_scales);
    c_synth->add_option("--pacs", synth.pacs);
    c_synth->add_option("--rhythm", synth.rhythm);

    PreprocessArgs pre;
    auto* c_pre = app.add_subcommand("preprocess", "filter, resample, and screen a record");
    c_pre->add_option("--in", pre.in)->required();
    c_pre->add_option("--out", pre.out)->required();
    c_pre->add_option("--highpass", pre.highpass);
    c_pre->add_option("--notch", pre.notch);
    c_pre->add_option("--target-fs", pre.target_fs);
    c_pre->add_option("--max-bad-run", pre.max_bad_run);

    std::string stats_in, stats_out;
    auto* c_stats = app.add_subcommand("stats", "compute the per-lead statistics report");
    c_stats->add_option("--in", stats_in)->required();
    c_stats->add_option("--out", stats_out);

    TokenizeArgs tok;
    auto* c_tok = app.add_subcommand("tokenize", "build a mixed text/ECG token sequence");
    c_tok->add_option("--in", tok.in)->required();
    c_tok->add_option("--out", tok.out)->required();
    c_tok->add_option("--prompt-len", tok.prompt_len);
    c_tok->add_option("--answer-len", tok.answer_len);

    MaskArgs mask;
    auto* c_mask = app.add_subcommand("mask", "build an attention mask for a sequence");
    c_mask->add_option("--in", mask.in)->required();
    c_mask->add_option("--out", mask.out)->required();
    c_mask->add_option("--scheme", mask.scheme)
        ->check(CLI::IsMember({"lead_aware", "full_ecg", "causal"}));
    c_mask->add_flag("--pbm", mask.pbm);

    int gc_trials = 3;
    uint64_t gc_seed = 1;
    auto* c_gc = app.add_subcommand("gradcheck", "verify gradients by finite differences");
    c_gc->add_option("--trials", gc_trials);
    c_gc->add_option("--seed", gc_seed)->envname("ECGLAB_SEED");

    TrainAeArgs ae;
    auto* c_ae = app.add_subcommand("train-ae", "train the segment autoencoder");
    c_ae->add_option("--in", ae.in);
    c_ae->add_option("--out", ae.out)->required();
    c_ae->add_option("--epochs", ae.epochs);
    c_ae->add_option("--lr", ae.lr);
    c_ae->add_option("--batch", ae.batch);
    c_ae->add_option("--seed", ae.seed)->envname("ECGLAB_SEED");
    c_ae->add_option("--synth-seconds", ae.synth_seconds);

    TrainLmArgs lm;
    auto* c_lm = app.add_subcommand("train-lm", "fine-tune the toy LM on the cross-lead probe");
    c_lm->add_option("--out", lm.out)->required();
    c_lm->add_option("--scheme", lm.scheme)
        ->check(CLI::IsMember({"lead_aware", "full_ecg", "causal"}));
    c_lm->add_option("--seed", lm.seed)->envname("ECGLAB_SEED");
    c_lm->add_option("--steps", lm.steps);
    c_lm->add_option("--lr", lm.lr);

    DatagenArgs dg;
    auto* c_dg = app.add_subcommand("datagen", "generate training-stage QA/conversation data");
    c_dg->add_option("--stage", dg.stage)->required()->check(CLI::Range(2, 5));
    c_dg->add_option("--out", dg.out)->required();
    c_dg->add_option("--n", dg.n);
    c_dg->add_option("--seed", dg.seed)->envname("ECGLAB_SEED");
    c_dg->add_flag("--live", dg.live, "call the configured endpoint instead of the mock");
    c_dg->add_option("--endpoint", dg.endpoint);
    c_dg->add_option("--model", dg.model);

    auto* c_fb = app.add_subcommand("forecastbench", "forecast benchmark pipelines");
    c_fb->require_subcommand(1);
    FbBuildArgs fbb;
    auto* c_fbb = c_fb->add_subcommand("build", "extract and featurize samples");
    c_fbb->add_option("--out", fbb.out)->required();
    c_fbb->add_option("--records", fbb.records);
    c_fbb->add_option("--seed", fbb.seed)->envname("ECGLAB_SEED");
    c_fbb->add_option("--window", fbb.window);
    c_fbb->add_option("--horizon", fbb.horizon);
    c_fbb->add_option("--balance", fbb.balance);
    std::string fbt_in, fbt_out, fbt_model = "logistic";
    uint64_t fbt_seed = 1;
    auto* c_fbt = c_fb->add_subcommand("train", "fit a baseline on extracted samples");
    c_fbt->add_option("--in", fbt_in)->required();
    c_fbt->add_option("--out", fbt_out)->required();
    c_fbt->add_option("--model", fbt_model)->check(CLI::IsMember({"logistic", "stumps"}));
    c_fbt->add_option("--seed", fbt_seed)->envname("ECGLAB_SEED");
    std::string fbe_in, fbe_out;
    std::vector<std::string> fbe_models;
    auto* c_fbe = c_fb->add_subcommand("eval", "grid-evaluate trained baselines");
    c_fbe->add_option("--in", fbe_in)->required();
    c_fbe->add_option("--model", fbe_models)->required();
    c_fbe->add_option("--out", fbe_out);

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "score predictions against ground truth");
    c_ev->add_option("--task", ev.task)
        ->required()
        ->check(CLI::IsMember({"classify", "forecast", "grounding", "probe"}));
    c_ev->add_option("--pred", ev.pred)->required();
    c_ev->add_option("--truth", ev.truth)->required();
    c_ev->add_option("--out", ev.out);
    c_ev->add_option("--train-ratio", ev.train_ratio);
    c_ev->add_option("--seed", ev.seed)->envname("ECGLAB_SEED");

    std::string demo_out = "demo_out";
    uint64_t demo_seed = 1;
    auto* c_demo = app.add_subcommand("demo", "run the full pipeline on bundled settings");
    c_demo->add_option("--out", demo_out);
    c_demo->add_option("--seed", demo_seed)->envname("ECGLAB_SEED");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage errors, including unknown flags
    }

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_pre) return run_preprocess(pre);
        if (*c_stats) return run_stats(stats_in, stats_out);
        if (*c_tok) return run_tokenize(tok);
        if (*c_mask) return run_mask(mask);
        if (*c_gc) return run_gradcheck(gc_trials, gc_seed);
        if (*c_ae) return run_train_ae(ae);
        if (*c_lm) return run_train_lm(lm);
        if (*c_dg) return run_datagen(dg);
        if (*c_fbb) return run_fb_build(fbb);
        if (*c_fbt) return run_fb_train(fbt_in, fbt_out, fbt_model, fbt_seed);
        if (*c_fbe) return run_fb_eval(fbe_in, fbe_models, fbe_out);
        if (*c_ev) return run_eval(ev);
        if (*c_demo) return run_demo(demo_out, demo_seed);
    } catch (const ecglab::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
