#include "ulwb/data/record.hpp"

#include "ulwb/util/io.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace ulwb::data {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

std::string split_name(Split s) { return s == Split::forget ? "forget" : "retain"; }

Split split_from_name(const std::string& s) {
    if (s == "forget") return Split::forget;
    if (s == "retain") return Split::retain;
    throw JsonlError("unknown split value: '" + s + "'");
}

namespace {

ojson parse_line(const std::string& line, size_t line_no) {
    try {
        return ojson::parse(line);
    } catch (const json::exception& e) {
        throw JsonlError("malformed JSON on line " + std::to_string(line_no) + ": " + e.what());
    }
}

const ojson& require_field(const ojson& j, const char* field, size_t line_no) {
    auto it = j.find(field);
    if (it == j.end())
        throw JsonlError("line " + std::to_string(line_no) + ": missing field '" + field + "'");
    return *it;
}

template <class Fn>
void for_each_line(const std::string& path, Fn&& fn) {
    std::istringstream in(ulwb::read_file(path));
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        fn(line, line_no);
    }
}

} // namespace

void write_jsonl(const std::vector<Record>& records, const std::string& path) {
    std::string out;
    for (const auto& r : records) {
        ojson j;
        j["id"] = r.id;
        j["input"] = r.input;
        j["output"] = r.output;
        j["task"] = r.task;
        j["split"] = split_name(r.split);
        out += j.dump();
        out += '\n';
    }
    ulwb::atomic_write_file(path, out);
}

std::vector<Record> read_jsonl(const std::string& path) {
    std::vector<Record> records;
    for_each_line(path, [&](const std::string& line, size_t line_no) {
        ojson j = parse_line(line, line_no);
        Record r;
        r.id = require_field(j, "id", line_no).get<std::string>();
        r.input = require_field(j, "input", line_no).get<std::string>();
        r.output = require_field(j, "output", line_no).get<std::string>();
        r.task = require_field(j, "task", line_no).get<int>();
        try {
            r.split = split_from_name(require_field(j, "split", line_no).get<std::string>());
        } catch (const JsonlError& e) {
            throw JsonlError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (r.task < 1 || r.task > 3)
            throw JsonlError("line " + std::to_string(line_no) + ": task out of range");
        if (!r.is_sc() && !r.is_qa())
            throw JsonlError("line " + std::to_string(line_no) +
                             ": id must end in '_sc' or '_qa'");
        records.push_back(std::move(r));
    });
    return records;
}

void write_mia_members(const std::vector<MiaMember>& members, const std::string& path) {
    std::string out;
    for (const auto& m : members) {
        ojson j;
        j["id"] = m.id;
        j["document"] = m.document;
        j["question_answering_task"] = ojson{{"question", m.question}, {"answer", m.answer}};
        j["sentence_completion_task"] = ojson{{"input", m.sc_input}, {"output", m.sc_output}};
        out += j.dump();
        out += '\n';
    }
    ulwb::atomic_write_file(path, out);
}

std::vector<MiaMember> read_mia_members(const std::string& path) {
    std::vector<MiaMember> members;
    for_each_line(path, [&](const std::string& line, size_t line_no) {
        ojson j = parse_line(line, line_no);
        MiaMember m;
        m.id = require_field(j, "id", line_no).get<std::string>();
        m.document = require_field(j, "document", line_no).get<std::string>();
        const ojson& qa = require_field(j, "question_answering_task", line_no);
        m.question = require_field(qa, "question", line_no).get<std::string>();
        m.answer = require_field(qa, "answer", line_no).get<std::string>();
        const ojson& sc = require_field(j, "sentence_completion_task", line_no);
        m.sc_input = require_field(sc, "input", line_no).get<std::string>();
        m.sc_output = require_field(sc, "output", line_no).get<std::string>();
        members.push_back(std::move(m));
    });
    return members;
}

void write_mia_nonmembers(const std::vector<MiaNonMember>& nm, const std::string& path) {
    std::string out;
    for (const auto& m : nm) {
        ojson meta = ojson::object();
        for (const auto& [k, v] : m.meta) meta[k] = v;
        ojson j;
        j["meta"] = meta;
        j["document"] = m.document;
        out += j.dump();
        out += '\n';
    }
    ulwb::atomic_write_file(path, out);
}

std::vector<MiaNonMember> read_mia_nonmembers(const std::string& path) {
    std::vector<MiaNonMember> out;
    for_each_line(path, [&](const std::string& line, size_t line_no) {
        ojson j = parse_line(line, line_no);
        MiaNonMember m;
        const ojson& meta = require_field(j, "meta", line_no);
        for (auto it = meta.begin(); it != meta.end(); ++it)
            m.meta[it.key()] = it.value().get<std::string>();
        m.document = require_field(j, "document", line_no).get<std::string>();
        out.push_back(std::move(m));
    });
    return out;
}

void write_probe(const std::vector<ProbeQuestion>& probe, const std::string& path) {
    std::string out;
    for (const auto& q : probe) {
        ojson j;
        j["question"] = q.question;
        j["options"] = q.options;
        j["answer_index"] = q.answer_index;
        j["subject_tag"] = q.subject_tag;
        out += j.dump();
        out += '\n';
    }
    ulwb::atomic_write_file(path, out);
}

std::vector<ProbeQuestion> read_probe(const std::string& path) {
    std::vector<ProbeQuestion> out;
    for_each_line(path, [&](const std::string& line, size_t line_no) {
        ojson j = parse_line(line, line_no);
        ProbeQuestion q;
        q.question = require_field(j, "question", line_no).get<std::string>();
        q.options = require_field(j, "options", line_no).get<std::vector<std::string>>();
        q.answer_index = require_field(j, "answer_index", line_no).get<int>();
        q.subject_tag = require_field(j, "subject_tag", line_no).get<std::string>();
        if (q.options.size() != 4)
            throw JsonlError("line " + std::to_string(line_no) + ": probe needs 4 options");
        if (q.answer_index < 0 || q.answer_index > 3)
            throw JsonlError("line " + std::to_string(line_no) + ": answer_index out of range");
        out.push_back(std::move(q));
    });
    return out;
}

} // namespace ulwb::data
