#pragma once

// Caption vocabulary, tokenizer and the toy text encoder: embedding lookup
// plus fixed sinusoidal position features. Captions follow the template
// "a photo of {} with {} and {}". Pseudo-tokens ("s*" for the imaging style,
// "s^<class>" per defect class) occupy dedicated vocabulary rows that the
// sce training stage optimizes.

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "elgen/autodiff/tape.hpp"
#include "elgen/core/error.hpp"
#include "elgen/core/tensor.hpp"

namespace elgen::conditioning {

inline std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

class Vocabulary {
public:
    static constexpr int pad_id = 0;

    // Natural template words plus class names; pseudo-token rows appended
    // after all natural tokens so the two id ranges are disjoint.
    static Vocabulary standard(const std::vector<std::string>& class_names) {
        Vocabulary v;
        v.class_names_ = class_names;
        v.add("<pad>", false);
        for (const char* w : {"a", "photo", "of", "with", "and", "cell", "gridlines", "busbars"})
            v.add(w, false);
        for (const std::string& c : class_names) v.add(c, false);
        v.add("s*", true);
        for (const std::string& c : class_names) v.add("s^" + c, true);
        return v;
    }

    int add(const std::string& token, bool pseudo) {
        if (ids_.count(token)) throw ParameterError("duplicate vocabulary token: " + token);
        const int id = static_cast<int>(tokens_.size());
        tokens_.push_back(token);
        ids_[token] = id;
        if (pseudo) pseudo_ids_.insert(id);
        return id;
    }

    int id_of(const std::string& token) const {
        auto it = ids_.find(token);
        if (it == ids_.end()) throw VocabularyError("unknown token: '" + token + "'");
        return it->second;
    }

    const std::string& token_of(int id) const { return tokens_[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(tokens_.size()); }
    bool is_pseudo(int id) const { return pseudo_ids_.count(id) > 0; }
    const std::vector<std::string>& class_names() const { return class_names_; }

    bool is_class_token(int id) const {
        const std::string& t = token_of(id);
        for (const std::string& c : class_names_)
            if (t == c || t == "s^" + c) return true;
        return false;
    }

    std::string class_of_token(int id) const {
        const std::string& t = token_of(id);
        for (const std::string& c : class_names_)
            if (t == c || t == "s^" + c) return c;
        return "";
    }

    // Line-delimited "token<TAB>id" (class names are stored in the header
    // comment so a loaded vocabulary keeps class-token detection working).
    std::string serialize() const;
    static Vocabulary deserialize(const std::string& text);

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> ids_;
    std::set<int> pseudo_ids_;
    std::vector<std::string> class_names_;
};

struct TokenSequence {
    std::vector<int> ids;             // fixed length l_txt, padded
    std::vector<uint8_t> eligible;    // 0 for padding positions
    std::vector<int> class_positions; // positions carrying a defect-class token
};

// Whitespace tokenization, lowercased, padded/truncated to l_txt.
inline TokenSequence tokenize(const std::string& caption, const Vocabulary& vocab, int l_txt) {
    TokenSequence seq;
    seq.ids.assign(static_cast<size_t>(l_txt), Vocabulary::pad_id);
    seq.eligible.assign(static_cast<size_t>(l_txt), 0);
    const std::vector<std::string> words = split_ws(lowercase(caption));
    for (size_t i = 0; i < words.size() && i < static_cast<size_t>(l_txt); ++i) {
        const int id = vocab.id_of(words[i]);
        seq.ids[i] = id;
        seq.eligible[i] = 1;
        if (vocab.is_class_token(id)) seq.class_positions.push_back(static_cast<int>(i));
    }
    return seq;
}

inline std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
    std::string out;
    for (size_t i = 0; i < seq.ids.size(); ++i) {
        if (!seq.eligible[i]) continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab.token_of(seq.ids[i]);
    }
    return out;
}

// Fixed sinusoidal position features, one row per caption position.
template <class T>
Tensor<T> position_features(int l_txt, int d) {
    Tensor<T> pos({l_txt, d});
    for (int r = 0; r < l_txt; ++r) {
        for (int i = 0; i < d / 2; ++i) {
            const double omega = std::pow(10000.0, -2.0 * i / static_cast<double>(d));
            pos.at(r, 2 * i) = static_cast<T>(std::sin(r * omega));
            pos.at(r, 2 * i + 1) = static_cast<T>(std::cos(r * omega));
        }
    }
    return pos;
}

// h_p = table[ids] + position features. Plain (no-grad) version.
template <class T>
Tensor<T> encode_tokens(const TokenSequence& seq, const Tensor<T>& table) {
    const int d = table.shape[1];
    const int l = static_cast<int>(seq.ids.size());
    Tensor<T> pos = position_features<T>(l, d);
    Tensor<T> out({l, d});
    for (int r = 0; r < l; ++r)
        for (int c = 0; c < d; ++c) out.at(r, c) = table.at(seq.ids[static_cast<size_t>(r)], c) + pos.at(r, c);
    return out;
}

// Tape version used inside training/sampling graphs.
template <class T>
typename Tape<T>::Id encode_tokens(Tape<T>& tape, const TokenSequence& seq,
                                   typename Tape<T>::Id table, int d) {
    const int l = static_cast<int>(seq.ids.size());
    auto rows = tape.row_gather(table, seq.ids);
    auto pos = tape.leaf(position_features<T>(l, d));
    return tape.add(rows, pos);
}

// Additive attention bias: 0 on eligible positions, large negative on pads.
template <class T>
Tensor<T> pad_bias(const TokenSequence& seq) {
    Tensor<T> b({static_cast<int>(seq.eligible.size())});
    for (size_t i = 0; i < seq.eligible.size(); ++i)
        b[static_cast<int64_t>(i)] = seq.eligible[i] ? T(0) : T(-1e9);
    return b;
}

}  // namespace elgen::conditioning
