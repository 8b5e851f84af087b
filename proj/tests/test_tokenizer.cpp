#include <doctest.h>

#include "ulwb/lm/vocab.hpp"
#include "ulwb/util/rng.hpp"

using namespace ulwb;
using lm::Vocabulary;

TEST_CASE("byte identity mapping") {
    CHECK(Vocabulary::tokenize("").ids.empty());
    auto enc = Vocabulary::tokenize("AB");
    REQUIRE(enc.ids.size() == 2);
    CHECK(enc.ids[0] == 65);
    CHECK(enc.ids[1] == 66);
    CHECK_FALSE(enc.truncated);
}

TEST_CASE("round-trip of random byte strings is the identity") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        std::string s;
        size_t len = rng.below(200);
        for (size_t i = 0; i < len; ++i)
            s.push_back(static_cast<char>(static_cast<unsigned char>(rng.below(256))));
        auto enc = Vocabulary::tokenize(s);
        for (auto id : enc.ids) {
            CHECK(id >= 0);
            CHECK(id < Vocabulary::kSize);
        }
        CHECK(Vocabulary::detokenize(enc.ids) == s);
    }
}

TEST_CASE("truncation sets the flag") {
    auto enc = Vocabulary::tokenize("hello world", 5);
    CHECK(enc.truncated);
    CHECK(enc.ids.size() == 5);
    CHECK(Vocabulary::detokenize(enc.ids) == "hello");
}

TEST_CASE("specials are excluded from detokenize") {
    std::vector<lm::TokenId> ids{Vocabulary::kBos, 'h', 'i', Vocabulary::kSep, 'x',
                                 Vocabulary::kEos, Vocabulary::kPad};
    CHECK(Vocabulary::detokenize(ids) == "hix");
    CHECK(Vocabulary::kSize == 260);
    CHECK(Vocabulary::kBos == 256);
    CHECK(Vocabulary::kSep == 259);
}
