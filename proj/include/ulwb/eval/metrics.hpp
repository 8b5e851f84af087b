#pragma once
// Model-free scoring primitives: ROUGE-L, exact match, harmonic-mean
// aggregation, pairwise AUC and the membership-inference tent map.

#include <string>
#include <vector>

namespace ulwb::eval {

std::vector<std::string> whitespace_tokens(const std::string& text);

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// LCS-based F1: P = LCS/|cand|, R = LCS/|ref|, F1 = 2PR/(P+R).
/// Empty vs empty is 1; empty vs non-empty is 0.
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
double rouge_l_text(const std::string& candidate, const std::string& reference);

/// Trim, collapse internal whitespace, casefold (ASCII).
std::string normalize_answer(const std::string& s);
int exact_match(const std::string& prediction, const std::string& gold);

/// Harmonic mean; defined as 0 when any input is 0.
double harmonic_mean(const std::vector<double>& values);

/// Mann-Whitney AUC of member vs non-member scores (ties count 0.5): the
/// probability that a random member scores above a random non-member.
double auc_from_scores(const std::vector<double>& member_scores,
                       const std::vector<double>& nonmember_scores);

/// 1 - |auc - 0.5| * 2: maximal at auc = 0.5, zero at either extreme.
double mia_score_from_auc(double auc);

struct MiaResult {
    std::vector<double> member_nlls;
    std::vector<double> nonmember_nlls;
    double mia_auc = 0.0;
    double mia_score = 0.0;
};

} // namespace ulwb::eval
