#include "ulwb/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace ulwb::eval {

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return 0;
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1]) cur[j] = prev[j - 1] + 1;
            else cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference) {
    if (candidate.empty() && reference.empty()) return 1.0;
    if (candidate.empty() || reference.empty()) return 0.0;
    int lcs = lcs_length(candidate, reference);
    if (lcs == 0) return 0.0;
    double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
    return 2.0 * p * r / (p + r);
}

double rouge_l_text(const std::string& candidate, const std::string& reference) {
    return rouge_l(whitespace_tokens(candidate), whitespace_tokens(reference));
}

std::string normalize_answer(const std::string& s) {
    std::string out;
    bool in_space = true; // leading spaces dropped
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

int exact_match(const std::string& prediction, const std::string& gold) {
    return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

double harmonic_mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double recip = 0.0;
    for (double v : values) {
        if (v == 0.0) return 0.0;
        recip += 1.0 / v;
    }
    return static_cast<double>(values.size()) / recip;
}

double auc_from_scores(const std::vector<double>& member_scores,
                       const std::vector<double>& nonmember_scores) {
    if (member_scores.empty() || nonmember_scores.empty())
        throw std::invalid_argument("AUC needs non-empty member and non-member sets");
    double wins = 0.0;
    for (double m : member_scores) {
        for (double n : nonmember_scores) {
            if (m > n) wins += 1.0;
            else if (m == n) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(member_scores.size()) *
                   static_cast<double>(nonmember_scores.size()));
}

double mia_score_from_auc(double auc) { return 1.0 - std::abs(auc - 0.5) * 2.0; }

} // namespace ulwb::eval
