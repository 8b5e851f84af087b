#pragma once
// Byte-level vocabulary: 256 byte tokens plus BOS/EOS/PAD/SEP. Lossless by
// construction, which keeps regurgitation scoring exact.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ulwb::lm {

using TokenId = int32_t;

struct Vocabulary {
    static constexpr TokenId kBos = 256;
    static constexpr TokenId kEos = 257;
    static constexpr TokenId kPad = 258;
    static constexpr TokenId kSep = 259;
    static constexpr int kSize = 260;

    static constexpr bool is_special(TokenId t) { return t >= 256; }

    struct Encoded {
        std::vector<TokenId> ids;
        bool truncated = false;
    };

    /// Byte identity mapping; truncates to max_tokens when the text is longer.
    static Encoded tokenize(std::string_view text, size_t max_tokens = SIZE_MAX) {
        Encoded out;
        size_t n = text.size();
        if (n > max_tokens) {
            n = max_tokens;
            out.truncated = true;
        }
        out.ids.reserve(n);
        for (size_t i = 0; i < n; ++i)
            out.ids.push_back(static_cast<TokenId>(static_cast<unsigned char>(text[i])));
        return out;
    }

    /// Inverse of tokenize; special tokens are dropped.
    static std::string detokenize(const std::vector<TokenId>& ids) {
        std::string out;
        out.reserve(ids.size());
        for (TokenId t : ids)
            if (t >= 0 && t < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
        return out;
    }
};

} // namespace ulwb::lm
