#pragma once

// Per-second ECG segmentation and mixed ECG/text token sequence assembly:
// ECG start/end and per-lead start/end special tokens around 1-second
// segment slots, plus loss masking over role spans and lead-wise
// shuffle/drop augmentation.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecglab/common.hpp"
#include "ecglab/signal.hpp"

namespace ecglab {

enum class TokenKind { Text, EcgStart, EcgEnd, LeadStart, LeadEnd, EcgSegment };

struct Token {
    TokenKind kind = TokenKind::Text;
    int token_id = 0;   // Text only
    int ecg_index = 0;  // which ECG block (EcgStart/End, LeadStart/End, EcgSegment)
    int lead_id = 0;    // 1-based (LeadStart/End, EcgSegment)
    int t = 0;          // 1-based second index (EcgSegment)

    bool operator==(const Token&) const = default;

    bool is_special() const {
        return kind == TokenKind::EcgStart || kind == TokenKind::EcgEnd ||
               kind == TokenKind::LeadStart || kind == TokenKind::LeadEnd;
    }
};

enum class Role { System, User, Assistant };

struct RoleSpan {
    size_t start = 0, end = 0;  // [start, end)
    Role role = Role::User;
};

struct TokenSequence {
    std::vector<Token> tokens;
    std::vector<RoleSpan> role_spans;

    size_t size() const { return tokens.size(); }

    void validate() const {
        // spans partition the sequence
        size_t cursor = 0;
        for (const auto& s : role_spans) {
            if (s.start != cursor || s.end < s.start)
                throw ValidationError("role_spans", "spans must partition the sequence");
            cursor = s.end;
        }
        if (!role_spans.empty() && cursor != tokens.size())
            throw ValidationError("role_spans", "spans must cover the sequence");

        // matched, properly nested ECG / lead markers; consecutive t within leads
        bool in_ecg = false;
        int open_lead = 0;
        int expect_t = 0;
        for (const auto& tok : tokens) {
            switch (tok.kind) {
                case TokenKind::EcgStart:
                    if (in_ecg) throw ValidationError("tokens", "nested EcgStart");
                    in_ecg = true;
                    break;
                case TokenKind::EcgEnd:
                    if (!in_ecg || open_lead)
                        throw ValidationError("tokens", "EcgEnd outside block or inside lead");
                    in_ecg = false;
                    break;
                case TokenKind::LeadStart:
                    if (!in_ecg || open_lead)
                        throw ValidationError("tokens", "LeadStart outside ECG or nested");
                    open_lead = tok.lead_id;
                    expect_t = 1;
                    break;
                case TokenKind::LeadEnd:
                    if (open_lead != tok.lead_id)
                        throw ValidationError("tokens", "mismatched LeadEnd");
                    open_lead = 0;
                    break;
                case TokenKind::EcgSegment:
                    if (open_lead != tok.lead_id)
                        throw ValidationError("tokens", "segment outside its lead span");
                    if (tok.t != expect_t)
                        throw ValidationError("tokens", "segment t values must be consecutive");
                    ++expect_t;
                    break;
                case TokenKind::Text:
                    if (in_ecg) throw ValidationError("tokens", "text inside ECG block");
                    break;
            }
        }
        if (in_ecg || open_lead) throw ValidationError("tokens", "unclosed ECG or lead span");
    }
};

// ---------------------------------------------------------------------------
// Segmentation: T = floor(duration) windows of fs samples per lead; a trailing
// partial second is zero-padded iff it holds at least 0.5 s, else dropped.

inline std::vector<std::vector<std::vector<double>>> segment(const EcgRecord& rec) {
    if (rec.n_samples() < rec.fs) throw ValidationError("record", "shorter than 1 s");
    const int64_t n = rec.n_samples();
    const int fs = rec.fs;
    int64_t t_full = n / fs;
    int64_t rem = n % fs;
    int64_t t_total = t_full + (rem * 2 >= fs ? 1 : 0);

    std::vector<std::vector<std::vector<double>>> out(rec.n_leads());
    for (size_t l = 0; l < rec.n_leads(); ++l) {
        out[l].reserve(size_t(t_total));
        for (int64_t w = 0; w < t_total; ++w) {
            std::vector<double> win(size_t(fs), 0.0);
            int64_t lo = w * fs;
            int64_t hi = std::min(n, lo + fs);
            for (int64_t i = lo; i < hi; ++i) win[size_t(i - lo)] = rec.leads[l][size_t(i)];
            out[l].push_back(std::move(win));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Assembly

struct EcgBlockDesc {
    int n_leads = 0;
    int n_seconds = 0;
    std::vector<int> lead_order;  // 1-based; defaults to 1..L
};

struct SequencePart {
    bool is_ecg = false;
    size_t index = 0;  // into text_parts or ecg_blocks
    Role role = Role::User;
};

// Each ECG block contributes L*(T+2)+2 tokens.
inline TokenSequence assemble(const std::vector<std::vector<int>>& text_parts,
                              const std::vector<EcgBlockDesc>& ecg_blocks,
                              const std::vector<SequencePart>& order) {
    std::vector<int> seen_text(text_parts.size(), 0), seen_ecg(ecg_blocks.size(), 0);
    for (const auto& p : order) {
        auto& seen = p.is_ecg ? seen_ecg : seen_text;
        if (p.index >= seen.size()) throw ValidationError("order", "part index out of range");
        if (seen[p.index]++) throw ValidationError("order", "duplicate part reference");
    }
    for (int s : seen_text)
        if (!s) throw ValidationError("order", "missing text part reference");
    for (int s : seen_ecg)
        if (!s) throw ValidationError("order", "missing ecg block reference");

    TokenSequence seq;
    int ecg_counter = 0;
    for (const auto& p : order) {
        size_t span_start = seq.tokens.size();
        if (!p.is_ecg) {
            for (int id : text_parts[p.index])
                seq.tokens.push_back({TokenKind::Text, id, 0, 0, 0});
        } else {
            const auto& blk = ecg_blocks[p.index];
            std::vector<int> leads = blk.lead_order;
            if (leads.empty())
                for (int l = 1; l <= blk.n_leads; ++l) leads.push_back(l);
            int e = ecg_counter++;
            seq.tokens.push_back({TokenKind::EcgStart, 0, e, 0, 0});
            for (int l : leads) {
                seq.tokens.push_back({TokenKind::LeadStart, 0, e, l, 0});
                for (int t = 1; t <= blk.n_seconds; ++t)
                    seq.tokens.push_back({TokenKind::EcgSegment, 0, e, l, t});
                seq.tokens.push_back({TokenKind::LeadEnd, 0, e, l, 0});
            }
            seq.tokens.push_back({TokenKind::EcgEnd, 0, e, 0, 0});
        }
        // merge into the previous span when roles agree
        if (!seq.role_spans.empty() && seq.role_spans.back().role == p.role)
            seq.role_spans.back().end = seq.tokens.size();
        else
            seq.role_spans.push_back({span_start, seq.tokens.size(), p.role});
    }
    seq.validate();
    return seq;
}

// True exactly at Text tokens inside assistant spans.
inline std::vector<bool> loss_positions(const TokenSequence& seq) {
    seq.validate();
    std::vector<bool> mask(seq.tokens.size(), false);
    for (const auto& span : seq.role_spans) {
        if (span.role != Role::Assistant) continue;
        for (size_t i = span.start; i < span.end; ++i)
            if (seq.tokens[i].kind == TokenKind::Text) mask[i] = true;
    }
    return mask;
}

// Lead-wise shuffling and dropping: lead spans move/disappear as whole units.
// Dropping resamples until at least one lead per block survives.
inline TokenSequence augment(const TokenSequence& seq, double drop_prob, bool shuffle,
                             uint64_t seed) {
    seq.validate();
    Rng rng(seed);
    TokenSequence out;
    out.role_spans = seq.role_spans;

    std::vector<size_t> removed_per_span(seq.role_spans.size(), 0);
    size_t i = 0;
    while (i < seq.tokens.size()) {
        const Token& tok = seq.tokens[i];
        if (tok.kind != TokenKind::EcgStart) {
            out.tokens.push_back(tok);
            ++i;
            continue;
        }
        // collect the block's lead spans
        size_t block_start = i++;
        std::vector<std::vector<Token>> lead_spans;
        while (seq.tokens[i].kind != TokenKind::EcgEnd) {
            std::vector<Token> span;
            span.push_back(seq.tokens[i++]);  // LeadStart
            while (seq.tokens[i].kind == TokenKind::EcgSegment) span.push_back(seq.tokens[i++]);
            span.push_back(seq.tokens[i++]);  // LeadEnd
            lead_spans.push_back(std::move(span));
        }
        size_t block_end = i++;  // EcgEnd

        std::vector<size_t> keep;
        do {
            keep.clear();
            for (size_t l = 0; l < lead_spans.size(); ++l)
                if (rng.uniform() >= drop_prob) keep.push_back(l);
        } while (keep.empty());
        if (shuffle) rng.shuffle(keep);

        out.tokens.push_back(seq.tokens[block_start]);
        size_t dropped_tokens = 0;
        for (size_t l = 0; l < lead_spans.size(); ++l) {
            bool kept = std::find(keep.begin(), keep.end(), l) != keep.end();
            if (!kept) dropped_tokens += lead_spans[l].size();
        }
        for (size_t l : keep)
            out.tokens.insert(out.tokens.end(), lead_spans[l].begin(), lead_spans[l].end());
        out.tokens.push_back(seq.tokens[block_end]);

        // shrink the role span containing this block
        for (size_t s = 0; s < seq.role_spans.size(); ++s)
            if (block_start >= seq.role_spans[s].start && block_start < seq.role_spans[s].end)
                removed_per_span[s] += dropped_tokens;
    }

    size_t shift = 0;
    for (size_t s = 0; s < out.role_spans.size(); ++s) {
        out.role_spans[s].start -= shift;
        shift += removed_per_span[s];
        out.role_spans[s].end -= shift;
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Special-token id allocation: ids above the text-vocab ceiling, fixed order
// EcgStart, EcgEnd, then LeadStart/LeadEnd pairs for the 12 standard leads
// plus a generic pool.

struct SpecialVocab {
    int text_vocab_size = 0;
    int max_leads = 16;

    int ecg_start() const { return text_vocab_size; }
    int ecg_end() const { return text_vocab_size + 1; }
    int lead_start(int lead_id) const { return text_vocab_size + 2 + 2 * (lead_id - 1); }
    int lead_end(int lead_id) const { return text_vocab_size + 3 + 2 * (lead_id - 1); }
    int total() const { return text_vocab_size + 2 + 2 * max_leads; }

    int id_of(const Token& tok) const {
        switch (tok.kind) {
            case TokenKind::Text: return tok.token_id;
            case TokenKind::EcgStart: return ecg_start();
            case TokenKind::EcgEnd: return ecg_end();
            case TokenKind::LeadStart: return lead_start(tok.lead_id);
            case TokenKind::LeadEnd: return lead_end(tok.lead_id);
            case TokenKind::EcgSegment: return -1;  // embedded, not vocab-indexed
        }
        return -1;
    }
};

// ---------------------------------------------------------------------------
// JSONL serialization

inline nlohmann::json to_json(const Token& tok) {
    nlohmann::json j;
    switch (tok.kind) {
        case TokenKind::Text: j["k"] = "txt"; j["id"] = tok.token_id; break;
        case TokenKind::EcgStart: j["k"] = "ecg"; j["ecg"] = tok.ecg_index; break;
        case TokenKind::EcgEnd: j["k"] = "/ecg"; j["ecg"] = tok.ecg_index; break;
        case TokenKind::LeadStart: j["k"] = "lead"; j["ecg"] = tok.ecg_index; j["lead"] = tok.lead_id; break;
        case TokenKind::LeadEnd: j["k"] = "/lead"; j["ecg"] = tok.ecg_index; j["lead"] = tok.lead_id; break;
        case TokenKind::EcgSegment:
            j["k"] = "seg"; j["ecg"] = tok.ecg_index; j["lead"] = tok.lead_id; j["t"] = tok.t;
            break;
    }
    return j;
}

inline Token token_from_json(const nlohmann::json& j) {
    Token tok;
    std::string k = j.at("k").get<std::string>();
    if (k == "txt") { tok.kind = TokenKind::Text; tok.token_id = j.at("id").get<int>(); }
    else if (k == "ecg") { tok.kind = TokenKind::EcgStart; tok.ecg_index = j.at("ecg").get<int>(); }
    else if (k == "/ecg") { tok.kind = TokenKind::EcgEnd; tok.ecg_index = j.at("ecg").get<int>(); }
    else if (k == "lead") { tok.kind = TokenKind::LeadStart; tok.ecg_index = j.at("ecg").get<int>(); tok.lead_id = j.at("lead").get<int>(); }
    else if (k == "/lead") { tok.kind = TokenKind::LeadEnd; tok.ecg_index = j.at("ecg").get<int>(); tok.lead_id = j.at("lead").get<int>(); }
    else if (k == "seg") {
        tok.kind = TokenKind::EcgSegment;
        tok.ecg_index = j.at("ecg").get<int>();
        tok.lead_id = j.at("lead").get<int>();
        tok.t = j.at("t").get<int>();
    } else {
        throw ValidationError("token", "unknown kind '" + k + "'");
    }
    return tok;
}

inline std::string role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

inline Role role_from(const std::string& s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw ValidationError("role", "unknown role '" + s + "'");
}

inline std::string sequence_to_jsonl(const TokenSequence& seq) {
    std::string out;
    for (const auto& tok : seq.tokens) out += to_json(tok).dump() + "\n";
    for (const auto& span : seq.role_spans) {
        nlohmann::json j;
        j["k"] = "span";
        j["start"] = span.start;
        j["end"] = span.end;
        j["role"] = role_name(span.role);
        out += j.dump() + "\n";
    }
    return out;
}

inline TokenSequence sequence_from_jsonl(const std::string& text) {
    TokenSequence seq;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.at("k") == "span") {
            seq.role_spans.push_back({j.at("start").get<size_t>(), j.at("end").get<size_t>(),
                                      role_from(j.at("role").get<std::string>())});
        } else {
            seq.tokens.push_back(token_from_json(j));
        }
    }
    seq.validate();
    return seq;
}

}  // namespace ecglab
