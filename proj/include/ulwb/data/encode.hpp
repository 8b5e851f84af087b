#pragma once
// Record -> token sequence conventions shared by training and evaluation:
//   document:  BOS bytes EOS            (all positions are targets)
//   sc record: BOS input output EOS     (all positions are targets)
//   qa record: BOS question SEP answer EOS
// Prompts stop right before the continuation the model must produce.

#include "ulwb/data/record.hpp"
#include "ulwb/lm/model.hpp"

namespace ulwb::data {

lm::Sample encode_document(const std::string& text, int max_seq_len);
lm::Sample encode_record(const Record& r, int max_seq_len);

std::vector<lm::TokenId> sc_prompt(const std::string& input, int max_seq_len);
std::vector<lm::TokenId> qa_prompt(const std::string& question, int max_seq_len);

/// Training set for the memorization stage and the unlearning runs.
std::vector<lm::Sample> encode_records(const std::vector<Record>& records, int max_seq_len);
std::vector<lm::Sample> encode_documents(const std::vector<std::string>& docs, int max_seq_len);

} // namespace ulwb::data
