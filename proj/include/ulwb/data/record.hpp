#pragma once
// Dataset schemas: five-field forget/retain records, MIA member/non-member
// samples, utility probe questions, and the JSONL round-trip helpers.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ulwb::data {

enum class Split { forget, retain };

std::string split_name(Split s);
Split split_from_name(const std::string& s);

struct Record {
    std::string id;     // ends in "_sc" or "_qa"
    std::string input;  // document excerpt or question
    std::string output; // continuation or answer
    int task = 1;       // 1 creative, 2 pii_biography, 3 pretrain_doc
    Split split = Split::forget;

    bool is_sc() const { return id.size() >= 3 && id.compare(id.size() - 3, 3, "_sc") == 0; }
    bool is_qa() const { return id.size() >= 3 && id.compare(id.size() - 3, 3, "_qa") == 0; }
};

struct MiaMember {
    std::string id; // id of a forget-train record
    std::string document;
    std::string question, answer;   // question_answering_task
    std::string sc_input, sc_output; // sentence_completion_task
};

struct MiaNonMember {
    std::map<std::string, std::string> meta;
    std::string document;
};

struct ProbeQuestion {
    std::string question;
    std::vector<std::string> options; // exactly 4, pairwise distinct
    int answer_index = 0;             // 0..3
    std::string subject_tag;
};

struct JsonlError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_jsonl(const std::vector<Record>& records, const std::string& path);
std::vector<Record> read_jsonl(const std::string& path);

void write_mia_members(const std::vector<MiaMember>& members, const std::string& path);
std::vector<MiaMember> read_mia_members(const std::string& path);
void write_mia_nonmembers(const std::vector<MiaNonMember>& nm, const std::string& path);
std::vector<MiaNonMember> read_mia_nonmembers(const std::string& path);

void write_probe(const std::vector<ProbeQuestion>& probe, const std::string& path);
std::vector<ProbeQuestion> read_probe(const std::string& path);

} // namespace ulwb::data
