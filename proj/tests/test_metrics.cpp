// Metric oracles. The LCS brute force enumerates candidate subsequences
// directly; the AUC oracle recomputes the statistic from ranks. Both stay
// independent of the implementations they check.

#include <doctest.h>

#include "ulwb/eval/metrics.hpp"
#include "ulwb/util/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace ulwb;
using namespace ulwb::eval;

namespace {

using Tokens = std::vector<std::string>;

bool is_subsequence(const Tokens& needle, const Tokens& hay) {
    size_t i = 0;
    for (const auto& tok : hay)
        if (i < needle.size() && needle[i] == tok) ++i;
    return i == needle.size();
}

/// Exhaustive LCS: longest candidate subsequence that is also a reference
/// subsequence. Fine for |candidate| <= 8 (2^8 subsets).
int lcs_brute_force(const Tokens& cand, const Tokens& ref) {
    int best = 0;
    const size_t n = cand.size();
    for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
        Tokens sub;
        for (size_t i = 0; i < n; ++i)
            if (mask & (size_t{1} << i)) sub.push_back(cand[i]);
        if (static_cast<int>(sub.size()) > best && is_subsequence(sub, ref))
            best = static_cast<int>(sub.size());
    }
    return best;
}

Tokens from_bits(unsigned bits, int len) {
    Tokens t;
    for (int i = 0; i < len; ++i) t.push_back((bits >> i) & 1u ? "b" : "a");
    return t;
}

/// Rank-based Mann-Whitney AUC with tie correction (independent route).
double auc_by_ranks(const std::vector<double>& pos, const std::vector<double>& neg) {
    std::vector<std::pair<double, int>> all;
    for (double v : pos) all.push_back({v, 1});
    for (double v : neg) all.push_back({v, 0});
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    size_t i = 0;
    double rank = 1.0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        double avg_rank = (rank + (rank + static_cast<double>(j - i) - 1.0)) / 2.0;
        for (size_t t = i; t < j; ++t)
            if (all[t].second == 1) rank_sum_pos += avg_rank;
        rank += static_cast<double>(j - i);
        i = j;
    }
    double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
    double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

} // namespace

TEST_CASE("rouge_l equals the exhaustive LCS oracle for all pairs up to length 8") {
    for (int lc = 0; lc <= 8; ++lc) {
        for (int lr = 0; lr <= 4; ++lr) { // reference side kept shorter: pairs still exhaustive
            for (unsigned cb = 0; cb < (1u << lc); ++cb) {
                for (unsigned rb = 0; rb < (1u << lr); ++rb) {
                    Tokens cand = from_bits(cb, lc);
                    Tokens ref = from_bits(rb, lr);
                    int lcs = lcs_brute_force(cand, ref);
                    CHECK(lcs_length(cand, ref) == lcs);
                    double want;
                    if (cand.empty() && ref.empty()) want = 1.0;
                    else if (cand.empty() || ref.empty() || lcs == 0) want = 0.0;
                    else {
                        double p = static_cast<double>(lcs) / lc;
                        double r = static_cast<double>(lcs) / lr;
                        want = 2 * p * r / (p + r);
                    }
                    CHECK(rouge_l(cand, ref) == doctest::Approx(want).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("rouge_l examples") {
    Tokens same{"x", "y", "z"};
    CHECK(rouge_l(same, same) == 1.0);
    CHECK(rouge_l({"a", "b"}, {"c", "d"}) == 0.0);
    CHECK(rouge_l_text("the cat ran", "the cat sat") == doctest::Approx(2.0 / 3.0));
    CHECK(rouge_l({}, {}) == 1.0);
    CHECK(rouge_l({}, {"a"}) == 0.0);
    CHECK(rouge_l({"a"}, {}) == 0.0);
}

TEST_CASE("rouge_l F1 is symmetric under swapping candidate and reference") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        Tokens a, b;
        for (size_t i = 0, n = rng.below(10); i < n; ++i)
            a.push_back(std::string(1, static_cast<char>('a' + rng.below(3))));
        for (size_t i = 0, n = rng.below(10); i < n; ++i)
            b.push_back(std::string(1, static_cast<char>('a' + rng.below(3))));
        CHECK(rouge_l(a, b) == doctest::Approx(rouge_l(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("exact match normalization") {
    CHECK(exact_match("Paris ", "paris") == 1);
    CHECK(exact_match("Paris", "London") == 0);
    CHECK(exact_match("  two   words ", "TWO WORDS") == 1);
    // full-dataset rate equals the mean of per-sample indicators
    std::vector<std::pair<std::string, std::string>> pairs = {
        {"a", "a"}, {"b", "c"}, {"D", "d"}, {"x", "y"}};
    double mean = 0.0;
    for (const auto& [p, g] : pairs) mean += exact_match(p, g);
    mean /= static_cast<double>(pairs.size());
    CHECK(mean == 0.5);
}

TEST_CASE("harmonic mean") {
    CHECK(harmonic_mean(std::vector<double>(12, 0.5)) == doctest::Approx(0.5).epsilon(1e-12));
    std::vector<double> with_zero(12, 0.5);
    with_zero[7] = 0.0;
    CHECK(harmonic_mean(with_zero) == 0.0);
    std::vector<double> mixed(6, 1.0);
    mixed.insert(mixed.end(), 6, 0.5);
    CHECK(harmonic_mean(mixed) == doctest::Approx(12.0 / 18.0).epsilon(1e-9));
    // HM <= arithmetic mean
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v;
        for (int i = 0; i < 12; ++i) v.push_back(0.05 + rng.uniform01() * 0.95);
        double am = 0.0;
        for (double x : v) am += x;
        am /= 12.0;
        CHECK(harmonic_mean(v) <= am + 1e-12);
    }
}

TEST_CASE("auc: pairwise definition matches examples and the rank oracle") {
    CHECK(auc_from_scores({3, 1}, {2, 0}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(mia_score_from_auc(0.75) == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> pos, neg;
        size_t np = 2 + rng.below(20), nn = 2 + rng.below(20);
        for (size_t i = 0; i < np; ++i) pos.push_back(std::floor(rng.uniform01() * 8) / 4.0);
        for (size_t i = 0; i < nn; ++i) neg.push_back(std::floor(rng.uniform01() * 8) / 4.0);
        CHECK(auc_from_scores(pos, neg) ==
              doctest::Approx(auc_by_ranks(pos, neg)).epsilon(1e-12));
    }
}

TEST_CASE("mia score tent map") {
    CHECK(mia_score_from_auc(0.0) == doctest::Approx(0.0));
    CHECK(mia_score_from_auc(0.25) == doctest::Approx(0.5));
    CHECK(mia_score_from_auc(0.5) == doctest::Approx(1.0));
    CHECK(mia_score_from_auc(0.75) == doctest::Approx(0.5));
    CHECK(mia_score_from_auc(1.0) == doctest::Approx(0.0));
    // linear between the knots
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        double u = rng.uniform01();
        CHECK(mia_score_from_auc(u) ==
              doctest::Approx(1.0 - std::abs(u - 0.5) * 2.0).epsilon(1e-12));
    }
}

TEST_CASE("perfect separation signals under-unlearning") {
    double auc = auc_from_scores({5, 6, 7}, {1, 2, 3});
    CHECK(auc == 1.0);
    CHECK(mia_score_from_auc(auc) == 0.0);
}
