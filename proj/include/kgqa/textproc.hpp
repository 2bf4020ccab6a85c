#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/fileio.hpp"

namespace kgqa::text {

inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";

inline constexpr int kSpecialWord = -1;
inline constexpr std::size_t kDefaultMaxPieces = 64;
inline constexpr std::size_t kMaxWordChars = 100;

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; invalid bytes decode as
// themselves so that no input is ever rejected.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> unsigned {
        if (i + k >= s.size()) return 0x100;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : 0x100;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0) {
        unsigned c1 = cont(1);
        if (c1 != 0x100) {
            i += 2;
            return ((b0 & 0x1F) << 6) | c1;
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        unsigned c1 = cont(1), c2 = cont(2);
        if (c1 != 0x100 && c2 != 0x100) {
            i += 3;
            return ((b0 & 0x0F) << 12) | (c1 << 6) | c2;
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        unsigned c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 != 0x100 && c2 != 0x100 && c3 != 0x100) {
            i += 4;
            return ((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3;
        }
    }
    ++i;
    return b0;
}

inline bool is_space(char32_t c) {
    switch (c) {
        case ' ': case '\t': case '\n': case '\v': case '\f': case '\r':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

inline bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
               (c >= 123 && c <= 126);
    }
    return (c >= 0xA1 && c <= 0xBF) || (c >= 0x2010 && c <= 0x2027) ||
           (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x303F);
}

}  // namespace detail

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

/// Lowercases, splits on Unicode whitespace and emits every punctuation
/// character as its own word.
inline std::vector<std::string> split_words(std::string_view raw) {
    std::vector<std::string> words;
    std::string current;
    std::size_t i = 0;
    while (i < raw.size()) {
        const std::size_t start = i;
        const char32_t c = detail::decode_utf8(raw, i);
        if (detail::is_space(c)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else if (detail::is_punct(c)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
            words.emplace_back(raw.substr(start, i - start));
        } else {
            current.append(raw.substr(start, i - start));
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    for (auto& w : words) w = to_lower(w);
    return words;
}

inline std::string join_words(const std::vector<std::string>& words, std::size_t first, std::size_t last) {
    std::string out;
    for (std::size_t k = first; k <= last && k < words.size(); ++k) {
        if (!out.empty()) out.push_back(' ');
        out += words[k];
    }
    return out;
}

inline std::string normalize(std::string_view raw) {
    const auto words = split_words(raw);
    return words.empty() ? std::string{} : join_words(words, 0, words.size() - 1);
}

class Vocabulary {
public:
    Vocabulary() = default;

    explicit Vocabulary(std::vector<std::string> tokens, std::string prefix = "##")
        : tokens_(std::move(tokens)), prefix_(std::move(prefix)) {
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
                fail(ErrorKind::format, "duplicate vocabulary token '{}' at id {}", tokens_[i], i);
            }
        }
        cls_ = special(kCls);
        sep_ = special(kSep);
        mask_ = special(kMask);
        pad_ = special(kPad);
        unk_ = special(kUnk);
    }

    static Vocabulary load(const std::filesystem::path& path) {
        auto lines = split_lines(read_file(path));
        std::string prefix = "##";
        std::size_t first = 0;
        if (!lines.empty() && lines[0].rfind("#prefix=", 0) == 0) {
            prefix = lines[0].substr(8);
            first = 1;
        }
        std::vector<std::string> tokens(lines.begin() + static_cast<std::ptrdiff_t>(first), lines.end());
        return Vocabulary(std::move(tokens), std::move(prefix));
    }

    void save(std::ostream& out) const {
        out << "#prefix=" << prefix_ << '\n';
        for (const auto& t : tokens_) out << t << '\n';
    }

    std::size_t size() const { return tokens_.size(); }
    const std::string& prefix() const { return prefix_; }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    int find(std::string_view token) const {
        auto it = ids_.find(std::string(token));
        return it == ids_.end() ? -1 : it->second;
    }

    int cls() const { return cls_; }
    int sep() const { return sep_; }
    int mask() const { return mask_; }
    int pad() const { return pad_; }
    int unk() const { return unk_; }

private:
    int special(std::string_view name) const {
        int id = find(name);
        if (id < 0) fail(ErrorKind::format, "vocabulary is missing special token {}", name);
        return id;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    std::string prefix_ = "##";
    int cls_ = -1, sep_ = -1, mask_ = -1, pad_ = -1, unk_ = -1;
};

struct WordRange {
    std::size_t first_piece = 0;
    std::size_t last_piece = 0;

    bool operator==(const WordRange&) const = default;
};

struct TokenizedQuestion {
    std::vector<std::string> words;
    std::vector<std::string> pieces;
    std::vector<int> piece_ids;
    std::vector<int> word_index;  // kSpecialWord for [CLS]/[SEP]
    std::size_t dropped_words = 0;

    std::size_t size() const { return pieces.size(); }
    bool is_special(std::size_t piece) const { return word_index[piece] == kSpecialWord; }
};

/// Greedy longest-match-first segmentation of one lowercased word.
/// Returns {[UNK]} when any segment has no vocabulary match.
inline std::vector<int> wordpiece(std::string_view word, const Vocabulary& vocab) {
    if (word.size() > kMaxWordChars) return {vocab.unk()};
    std::vector<int> out;
    std::size_t start = 0;
    std::string candidate;
    while (start < word.size()) {
        std::size_t end = word.size();
        int match = -1;
        while (end > start) {
            candidate.clear();
            if (start > 0) candidate = vocab.prefix();
            candidate.append(word.substr(start, end - start));
            match = vocab.find(candidate);
            if (match >= 0) break;
            // step back to the previous UTF-8 boundary
            --end;
            while (end > start && (static_cast<unsigned char>(word[end]) & 0xC0) == 0x80) --end;
        }
        if (match < 0) return {vocab.unk()};
        out.push_back(match);
        start = end;
    }
    return out;
}

/// Splits, segments, and wraps a question in [CLS] ... [SEP]. Words that
/// do not fit under `max_pieces` are dropped whole (with a warning) so that
/// every kept word keeps all of its pieces.
inline TokenizedQuestion tokenize(std::string_view question, const Vocabulary& vocab,
                                  std::size_t max_pieces = kDefaultMaxPieces) {
    require(max_pieces >= 3, "max_pieces must leave room for one word and two specials");
    TokenizedQuestion tq;
    const auto words = split_words(question);
    tq.pieces.emplace_back(kCls);
    tq.piece_ids.push_back(vocab.cls());
    tq.word_index.push_back(kSpecialWord);
    for (std::size_t w = 0; w < words.size(); ++w) {
        auto ids = wordpiece(words[w], vocab);
        if (tq.pieces.size() + ids.size() + 1 > max_pieces) {
            tq.dropped_words = words.size() - w;
            spdlog::warn("question truncated to {} pieces; dropped {} trailing word(s)", max_pieces,
                         tq.dropped_words);
            break;
        }
        tq.words.push_back(words[w]);
        for (int id : ids) {
            tq.pieces.push_back(vocab.token(id));
            tq.piece_ids.push_back(id);
            tq.word_index.push_back(static_cast<int>(w));
        }
    }
    tq.pieces.emplace_back(kSep);
    tq.piece_ids.push_back(vocab.sep());
    tq.word_index.push_back(kSpecialWord);
    return tq;
}

inline std::vector<WordRange> word_boundaries(const TokenizedQuestion& tq) {
    std::vector<WordRange> ranges(tq.words.size());
    std::vector<bool> seen(tq.words.size(), false);
    for (std::size_t p = 0; p < tq.size(); ++p) {
        const int w = tq.word_index[p];
        if (w == kSpecialWord) continue;
        auto& r = ranges[static_cast<std::size_t>(w)];
        if (!seen[static_cast<std::size_t>(w)]) {
            r.first_piece = p;
            seen[static_cast<std::size_t>(w)] = true;
        }
        r.last_piece = p;
    }
    return ranges;
}

/// Copy of `tq` with the pieces of words [first_word, last_word] replaced by
/// a single [MASK] piece (the pattern-question variant of relation input).
inline TokenizedQuestion mask_words(const TokenizedQuestion& tq, const Vocabulary& vocab,
                                    std::size_t first_word, std::size_t last_word) {
    TokenizedQuestion out;
    out.words = tq.words;
    bool emitted = false;
    for (std::size_t p = 0; p < tq.size(); ++p) {
        const int w = tq.word_index[p];
        const bool inside = w != kSpecialWord && static_cast<std::size_t>(w) >= first_word &&
                            static_cast<std::size_t>(w) <= last_word;
        if (inside) {
            if (emitted) continue;
            emitted = true;
            out.pieces.emplace_back(kMask);
            out.piece_ids.push_back(vocab.mask());
            out.word_index.push_back(static_cast<int>(first_word));
            continue;
        }
        out.pieces.push_back(tq.pieces[p]);
        out.piece_ids.push_back(tq.piece_ids[p]);
        out.word_index.push_back(w);
    }
    return out;
}

}  // namespace kgqa::text
