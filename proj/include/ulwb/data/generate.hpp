#pragma once
// Synthetic corpus generation. Every generator is a pure function of
// (seed, spec): entity pools are carved from disjoint slices of a fixed
// combinatorial name space per universe (forget / retain / non-member /
// world), which is what makes the disjointness guarantees hold by
// construction rather than by rejection sampling.

#include "ulwb/data/record.hpp"

#include <cstdint>

namespace ulwb::data {

struct CorpusSpec {
    uint64_t seed = 0;
    int forget_train = 128;
    int forget_val = 32;
    int retain_train = 132;
    int retain_val = 32;
    int mia_members = 32;
    int mia_nonmembers = 32;
    int probe_questions = 64;
    int pretrain_docs = 2000;

    void validate() const {
        if (forget_train <= 0 || forget_val <= 0 || retain_train <= 0 || retain_val <= 0 ||
            mia_members <= 0 || mia_nonmembers <= 0 || probe_questions <= 0 ||
            pretrain_docs <= 0)
            throw std::invalid_argument("corpus spec: all counts must be > 0");
        if (mia_members > forget_train)
            throw std::invalid_argument("corpus spec: member count exceeds forget train size");
    }

    /// Proportionally rescaled counts (floored, min 1); seed unchanged.
    CorpusSpec scaled(double f) const;
};

/// Everything needed to rebuild one record in either styling. Kept so the
/// MIA member set can expose both task views of a sampled forget record.
struct RecordContext {
    std::string doc;      // full underlying document text
    std::string sc_input, sc_output;
    std::string question, answer;
};

struct Corpus {
    std::vector<std::string> pretrain_docs;
    std::vector<Record> forget_train, forget_val, retain_train, retain_val;
    // parallel to forget_train/retain_train etc., keyed by record id
    std::map<std::string, RecordContext> contexts;
    // facts behind the probe (generated from pretrain docs not excerpted
    // into any forget/retain record)
    std::vector<ProbeQuestion> probe;
};

struct MiaSets {
    std::vector<MiaMember> members;
    std::vector<MiaNonMember> non_members;
};

Corpus generate_corpus(const CorpusSpec& spec);

MiaSets build_mia_sets(const Corpus& corpus, const CorpusSpec& spec);

/// PII surface grammar checks (exact patterns the bio templates emit).
bool matches_phone(const std::string& s);
bool matches_ssn(const std::string& s);
bool matches_email(const std::string& s);
/// For qa outputs: the whole string is one PII field. For sc outputs: the
/// continuation must contain at least one well-formed PII field and no
/// malformed SSN-like run.
bool validate_pii_output(const std::string& text, bool whole_string_is_field);

} // namespace ulwb::data
