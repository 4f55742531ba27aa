#pragma once

// Lead-aware attention masking plus the full-ECG and causal ablation schemes,
// with an independent brute-force oracle for verification.
//
// Lead-aware visibility rules. Visibility inside an ECG block is structural
// (tied to block and lead membership, not flattened positions) so that
// reordering lead spans conjugates the mask by the induced token permutation:
//  1. text tokens and ECG block delimiters attend causally (j <= i);
//  2. segments of one ECG at equal time t attend to each other
//     bidirectionally, regardless of lead order;
//  3. segments attend to every special token of their own ECG block and of
//     preceding blocks (never to text);
//  4. lead boundary markers attend to everything before their block, to the
//     block's opening delimiter, and to their own lead span (markers and
//     segments, both directions);
//  5. nothing sees future text.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ecglab/tokenizer.hpp"

namespace ecglab {

enum class MaskScheme { LeadAware, FullEcg, Causal };

inline std::string to_string(MaskScheme s) {
    switch (s) {
        case MaskScheme::LeadAware: return "lead_aware";
        case MaskScheme::FullEcg: return "full";
        case MaskScheme::Causal: return "causal";
    }
    return "causal";
}

inline MaskScheme mask_scheme_from(const std::string& s) {
    if (s == "lead_aware") return MaskScheme::LeadAware;
    if (s == "full") return MaskScheme::FullEcg;
    if (s == "causal") return MaskScheme::Causal;
    throw ValidationError("scheme", "unknown mask scheme '" + s + "'");
}

// Square boolean visibility matrix, bit-packed rows.
class AttentionMask {
public:
    AttentionMask() = default;
    explicit AttentionMask(size_t n)
        : n_(n), words_per_row_((n + 63) / 64), bits_(n * words_per_row_, 0) {}

    size_t n() const { return n_; }

    bool get(size_t i, size_t j) const {
        return (bits_[i * words_per_row_ + j / 64] >> (j % 64)) & 1u;
    }
    void set(size_t i, size_t j, bool v = true) {
        uint64_t& w = bits_[i * words_per_row_ + j / 64];
        if (v) w |= uint64_t(1) << (j % 64);
        else w &= ~(uint64_t(1) << (j % 64));
    }

    bool operator==(const AttentionMask& o) const {
        return n_ == o.n_ && bits_ == o.bits_;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        uint64_t n64 = n_;
        out.write(reinterpret_cast<const char*>(&n64), sizeof(n64));
        for (size_t i = 0; i < n_; ++i) {
            for (size_t j = 0; j < n_; j += 8) {
                uint8_t byte = 0;
                for (size_t b = 0; b < 8 && j + b < n_; ++b)
                    if (get(i, j + b)) byte |= uint8_t(1 << b);
                out.write(reinterpret_cast<const char*>(&byte), 1);
            }
        }
    }

    // human-readable PBM (P1) dump for small n
    std::string to_pbm() const {
        std::string s = "P1\n" + std::to_string(n_) + " " + std::to_string(n_) + "\n";
        for (size_t i = 0; i < n_; ++i) {
            for (size_t j = 0; j < n_; ++j) {
                s += get(i, j) ? '1' : '0';
                s += j + 1 < n_ ? ' ' : '\n';
            }
        }
        return s;
    }

private:
    size_t n_ = 0;
    size_t words_per_row_ = 0;
    std::vector<uint64_t> bits_;
};

namespace maskdetail {

// block index of a token (-1 for text), assigned in EcgStart order
inline std::vector<int> block_ids(const TokenSequence& seq) {
    std::vector<int> ids(seq.size(), -1);
    int cur = -1;
    for (size_t i = 0; i < seq.size(); ++i) {
        const Token& t = seq.tokens[i];
        if (t.kind == TokenKind::EcgStart) cur = t.ecg_index;
        if (t.kind != TokenKind::Text) ids[i] = cur;
        if (t.kind == TokenKind::EcgEnd) cur = -1;
    }
    return ids;
}

}  // namespace maskdetail

// Optimized construction: classifies tokens once and fills rows in bulk.
inline AttentionMask build_mask(const TokenSequence& seq, MaskScheme scheme) {
    seq.validate();
    const size_t n = seq.size();
    AttentionMask m(n);
    auto blocks = maskdetail::block_ids(seq);

    if (scheme == MaskScheme::Causal) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j <= i; ++j) m.set(i, j);
        return m;
    }

    if (scheme == MaskScheme::FullEcg) {
        // positions per block
        std::vector<std::vector<size_t>> members;
        for (size_t i = 0; i < n; ++i)
            if (blocks[i] >= 0) {
                if (size_t(blocks[i]) >= members.size()) members.resize(size_t(blocks[i]) + 1);
                members[size_t(blocks[i])].push_back(i);
            }
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j <= i; ++j) m.set(i, j);
            if (blocks[i] >= 0)
                for (size_t j : members[size_t(blocks[i])]) m.set(i, j);
        }
        return m;
    }

    // LeadAware. Group positions for bulk fills.
    std::vector<std::vector<size_t>> specials_by_block;  // special tokens per block
    std::vector<size_t> block_start;                     // EcgStart position per block
    std::vector<std::vector<size_t>> lead_span_members;  // markers + segments per lead span
    std::vector<int> lead_span_of(n, -1);                // marker/segment -> lead span id
    std::vector<std::vector<std::vector<size_t>>> segs_at;  // [block][t] -> positions

    int open_span = -1;
    for (size_t i = 0; i < n; ++i) {
        const Token& tok = seq.tokens[i];
        int e = blocks[i];
        if (tok.is_special()) {
            if (size_t(e) >= specials_by_block.size()) specials_by_block.resize(size_t(e) + 1);
            specials_by_block[size_t(e)].push_back(i);
        }
        if (tok.kind == TokenKind::EcgStart) {
            if (size_t(e) >= block_start.size()) block_start.resize(size_t(e) + 1);
            block_start[size_t(e)] = i;
        } else if (tok.kind == TokenKind::LeadStart) {
            lead_span_members.emplace_back();
            open_span = int(lead_span_members.size()) - 1;
            lead_span_of[i] = open_span;
            lead_span_members[size_t(open_span)].push_back(i);
        } else if (tok.kind == TokenKind::LeadEnd) {
            lead_span_of[i] = open_span;
            lead_span_members[size_t(open_span)].push_back(i);
            open_span = -1;
        } else if (tok.kind == TokenKind::EcgSegment) {
            lead_span_of[i] = open_span;
            lead_span_members[size_t(open_span)].push_back(i);
            if (size_t(e) >= segs_at.size()) segs_at.resize(size_t(e) + 1);
            auto& by_t = segs_at[size_t(e)];
            if (size_t(tok.t) >= by_t.size()) by_t.resize(size_t(tok.t) + 1);
            by_t[size_t(tok.t)].push_back(i);
        }
    }

    for (size_t i = 0; i < n; ++i) {
        const Token& tok = seq.tokens[i];
        if (tok.kind == TokenKind::EcgSegment) {
            m.set(i, i);
            for (size_t j : segs_at[size_t(blocks[i])][size_t(tok.t)]) m.set(i, j);
            for (int e = 0; e <= blocks[i]; ++e)
                for (size_t j : specials_by_block[size_t(e)]) m.set(i, j);
        } else if (tok.kind == TokenKind::LeadStart || tok.kind == TokenKind::LeadEnd) {
            size_t bs = block_start[size_t(blocks[i])];
            for (size_t j = 0; j <= bs; ++j) m.set(i, j);
            for (size_t j : lead_span_members[size_t(lead_span_of[i])]) m.set(i, j);
        } else {
            // text and ECG block delimiters: plain causal
            for (size_t j = 0; j <= i; ++j) m.set(i, j);
        }
    }
    return m;
}

// Brute-force oracle: literal per-(i, j) rule evaluation, independent of the
// grouped construction above.
inline AttentionMask oracle_mask(const TokenSequence& seq, MaskScheme scheme) {
    seq.validate();
    const size_t n = seq.size();
    auto blocks = maskdetail::block_ids(seq);

    // lead span identity: (block, lead) pairs are unique within a block
    auto same_lead_span = [&](size_t a, size_t b) {
        return blocks[a] == blocks[b] && blocks[a] >= 0 &&
               seq.tokens[a].lead_id == seq.tokens[b].lead_id;
    };

    auto allowed = [&](size_t i, size_t j) -> bool {
        if (i == j) return true;
        const Token& ti = seq.tokens[i];
        const Token& tj = seq.tokens[j];
        switch (scheme) {
            case MaskScheme::Causal:
                return j < i;
            case MaskScheme::FullEcg:
                if (blocks[i] >= 0 && blocks[i] == blocks[j]) return true;
                return j < i;
            case MaskScheme::LeadAware:
                if (ti.kind == TokenKind::EcgSegment) {
                    if (tj.kind == TokenKind::EcgSegment &&
                        blocks[i] == blocks[j] && ti.t == tj.t)
                        return true;  // simultaneity, any lead order
                    if (tj.is_special() && blocks[j] <= blocks[i]) return true;
                    return false;
                }
                if (ti.kind == TokenKind::LeadStart || ti.kind == TokenKind::LeadEnd) {
                    if (blocks[j] == blocks[i]) {
                        if (tj.kind == TokenKind::EcgStart) return true;
                        return (tj.kind == TokenKind::EcgSegment ||
                                tj.kind == TokenKind::LeadStart ||
                                tj.kind == TokenKind::LeadEnd) &&
                               same_lead_span(i, j);
                    }
                    return j < i;  // everything before the block
                }
                // text and ECG block delimiters: causal baseline
                return j < i;
        }
        return false;
    };

    AttentionMask m(n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            if (allowed(i, j)) m.set(i, j);
    return m;
}

// Reorders the lead spans of one ECG block and reports the induced
// token-position permutation (new_pos[i] = where original token i lands).
inline TokenSequence permute_leads(const TokenSequence& seq, size_t block_index,
                                   const std::vector<size_t>& permutation,
                                   std::vector<size_t>* new_pos_out = nullptr) {
    seq.validate();
    // decompose: leading tokens, lead spans of the target block, trailing
    std::vector<std::vector<size_t>> span_positions;  // original positions per lead span
    std::vector<size_t> order_template;               // -1 markers replaced below
    size_t cur_block = 0;
    bool in_target = false;
    std::vector<size_t> prefix, suffix;
    bool past_target = false;
    for (size_t i = 0; i < seq.size(); ++i) {
        const Token& t = seq.tokens[i];
        if (t.kind == TokenKind::EcgStart) {
            if (cur_block == block_index) {
                in_target = true;
                prefix.push_back(i);
                ++cur_block;
                continue;
            }
            ++cur_block;
        }
        if (in_target) {
            if (t.kind == TokenKind::EcgEnd) {
                in_target = false;
                past_target = true;
                suffix.push_back(i);
            } else if (t.kind == TokenKind::LeadStart) {
                span_positions.emplace_back();
                span_positions.back().push_back(i);
            } else {
                span_positions.back().push_back(i);
            }
        } else if (past_target) {
            suffix.push_back(i);
        } else {
            prefix.push_back(i);
        }
    }
    (void)order_template;
    if (permutation.size() != span_positions.size())
        throw ValidationError("permutation", "size must match the block's lead count");

    std::vector<size_t> new_order = prefix;
    for (size_t p : permutation) {
        if (p >= span_positions.size())
            throw ValidationError("permutation", "index out of range");
        new_order.insert(new_order.end(), span_positions[p].begin(), span_positions[p].end());
    }
    new_order.insert(new_order.end(), suffix.begin(), suffix.end());

    TokenSequence out;
    out.role_spans = seq.role_spans;
    std::vector<size_t> new_pos(seq.size());
    for (size_t k = 0; k < new_order.size(); ++k) {
        out.tokens.push_back(seq.tokens[new_order[k]]);
        new_pos[new_order[k]] = k;
    }
    out.validate();
    if (new_pos_out) *new_pos_out = new_pos;
    return out;
}

// True iff build_mask(permute(seq)) == P * build_mask(seq) * P^T.
inline bool permute_leads_mask_check(const TokenSequence& seq, size_t block_index,
                                     const std::vector<size_t>& permutation,
                                     MaskScheme scheme) {
    std::vector<size_t> new_pos;
    TokenSequence permuted = permute_leads(seq, block_index, permutation, &new_pos);
    AttentionMask m = build_mask(seq, scheme);
    AttentionMask mp = build_mask(permuted, scheme);
    for (size_t i = 0; i < seq.size(); ++i)
        for (size_t j = 0; j < seq.size(); ++j)
            if (mp.get(new_pos[i], new_pos[j]) != m.get(i, j)) return false;
    return true;
}

}  // namespace ecglab
