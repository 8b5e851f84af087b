#include "ulwb/data/encode.hpp"

namespace ulwb::data {

using lm::TokenId;
using lm::Vocabulary;

namespace {

lm::Sample seal(std::vector<TokenId> ids) {
    lm::Sample s;
    s.tokens = std::move(ids);
    s.target_mask.assign(s.tokens.size(), 1);
    s.target_mask[0] = 0;
    return s;
}

} // namespace

lm::Sample encode_document(const std::string& text, int max_seq_len) {
    auto enc = Vocabulary::tokenize(text, static_cast<size_t>(max_seq_len - 2));
    std::vector<TokenId> ids;
    ids.reserve(enc.ids.size() + 2);
    ids.push_back(Vocabulary::kBos);
    ids.insert(ids.end(), enc.ids.begin(), enc.ids.end());
    ids.push_back(Vocabulary::kEos);
    return seal(std::move(ids));
}

lm::Sample encode_record(const Record& r, int max_seq_len) {
    if (r.is_qa()) {
        auto q = Vocabulary::tokenize(r.input);
        auto a = Vocabulary::tokenize(r.output);
        std::vector<TokenId> ids;
        ids.reserve(q.ids.size() + a.ids.size() + 3);
        ids.push_back(Vocabulary::kBos);
        ids.insert(ids.end(), q.ids.begin(), q.ids.end());
        ids.push_back(Vocabulary::kSep);
        ids.insert(ids.end(), a.ids.begin(), a.ids.end());
        ids.push_back(Vocabulary::kEos);
        if (static_cast<int>(ids.size()) > max_seq_len) ids.resize(static_cast<size_t>(max_seq_len));
        return seal(std::move(ids));
    }
    return encode_document(r.input + r.output, max_seq_len);
}

std::vector<TokenId> sc_prompt(const std::string& input, int max_seq_len) {
    auto enc = Vocabulary::tokenize(input, static_cast<size_t>(max_seq_len - 2));
    std::vector<TokenId> ids;
    ids.reserve(enc.ids.size() + 1);
    ids.push_back(Vocabulary::kBos);
    ids.insert(ids.end(), enc.ids.begin(), enc.ids.end());
    return ids;
}

std::vector<TokenId> qa_prompt(const std::string& question, int max_seq_len) {
    auto enc = Vocabulary::tokenize(question, static_cast<size_t>(max_seq_len - 2));
    std::vector<TokenId> ids;
    ids.reserve(enc.ids.size() + 2);
    ids.push_back(Vocabulary::kBos);
    ids.insert(ids.end(), enc.ids.begin(), enc.ids.end());
    ids.push_back(Vocabulary::kSep);
    return ids;
}

std::vector<lm::Sample> encode_records(const std::vector<Record>& records, int max_seq_len) {
    std::vector<lm::Sample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(encode_record(r, max_seq_len));
    return out;
}

std::vector<lm::Sample> encode_documents(const std::vector<std::string>& docs, int max_seq_len) {
    std::vector<lm::Sample> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(encode_document(d, max_seq_len));
    return out;
}

} // namespace ulwb::data
