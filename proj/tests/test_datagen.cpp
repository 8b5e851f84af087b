#include <doctest.h>

#include "ulwb/data/generate.hpp"
#include "ulwb/util/io.hpp"

#include <filesystem>
#include <set>
#include <unistd.h>
#include <unordered_set>

using namespace ulwb;
using namespace ulwb::data;

namespace {

CorpusSpec small_spec(uint64_t seed = 7) {
    CorpusSpec s;
    s.seed = seed;
    s.forget_train = 24;
    s.forget_val = 12;
    s.retain_train = 24;
    s.retain_val = 12;
    s.mia_members = 12;
    s.mia_nonmembers = 12;
    s.probe_questions = 16;
    s.pretrain_docs = 120;
    return s;
}

std::string record_doc(const Record& r) { return r.input + r.output; }

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("ulwb_dg_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& n) const { return (path / n).string(); }
};

} // namespace

TEST_CASE("same seed twice gives byte-identical JSONL") {
    TempDir dir;
    for (int run = 0; run < 2; ++run) {
        Corpus c = generate_corpus(small_spec(7));
        write_jsonl(c.forget_train, dir.file("f" + std::to_string(run) + ".jsonl"));
        write_jsonl(c.retain_train, dir.file("r" + std::to_string(run) + ".jsonl"));
    }
    CHECK(read_file(dir.file("f0.jsonl")) == read_file(dir.file("f1.jsonl")));
    CHECK(read_file(dir.file("r0.jsonl")) == read_file(dir.file("r1.jsonl")));
}

TEST_CASE("every task-2 output passes the PII grammar validator") {
    Corpus c = generate_corpus(small_spec());
    int checked = 0;
    for (const auto* recs : {&c.forget_train, &c.retain_train, &c.forget_val, &c.retain_val}) {
        for (const auto& r : *recs) {
            if (r.task != 2) continue;
            CHECK(validate_pii_output(r.output, r.is_qa()));
            ++checked;
        }
    }
    CHECK(checked > 0);
    // grammar spot checks
    CHECK(matches_ssn("123-45-6789"));
    CHECK_FALSE(matches_ssn("123-456-789"));
    CHECK(matches_phone("(555) 123-4567"));
    CHECK_FALSE(matches_phone("555-123-4567"));
    CHECK(matches_email("ada.byron@veldmail.com"));
    CHECK_FALSE(matches_email("ada@bad"));
}

TEST_CASE("forget and retain are disjoint in ids and document text") {
    Corpus c = generate_corpus(small_spec());
    std::set<std::string> fids, rids, fdocs, rdocs;
    for (const auto& r : c.forget_train) {
        fids.insert(r.id);
        fdocs.insert(record_doc(r));
    }
    for (const auto& r : c.retain_train) {
        rids.insert(r.id);
        rdocs.insert(record_doc(r));
    }
    CHECK(fids.size() == c.forget_train.size()); // ids unique
    CHECK(rids.size() == c.retain_train.size());
    for (const auto& id : fids) CHECK(rids.count(id) == 0);
    for (const auto& d : fdocs) CHECK(rdocs.count(d) == 0);
}

TEST_CASE("id styling matches the input/output contents") {
    Corpus c = generate_corpus(small_spec());
    int sc = 0, qa = 0;
    for (const auto& r : c.forget_train) {
        CHECK((r.is_sc() || r.is_qa()));
        if (r.is_qa()) {
            ++qa;
            // tasks 1-2 ask direct questions; task 3 uses cloze prompts
            if (r.task != 3) CHECK(r.input.back() == '?');
        } else {
            ++sc;
            // sc continuation restores the document exactly
            CHECK(record_doc(r).find(r.input) == 0);
        }
    }
    CHECK(sc > 0);
    CHECK(qa > 0);
}

TEST_CASE("mia members come from forget train; non-members are unseen") {
    CorpusSpec spec = small_spec();
    Corpus c = generate_corpus(spec);
    MiaSets mia = build_mia_sets(c, spec);
    CHECK(static_cast<int>(mia.members.size()) == spec.mia_members);
    CHECK(static_cast<int>(mia.non_members.size()) == spec.mia_nonmembers);

    std::set<std::string> fids;
    for (const auto& r : c.forget_train) fids.insert(r.id);
    std::set<std::string> member_ids;
    for (const auto& m : mia.members) {
        CHECK(fids.count(m.id) == 1);
        member_ids.insert(m.id);
        CHECK(!m.document.empty());
        CHECK(!m.question.empty());
        CHECK(m.sc_input + m.sc_output == m.document);
    }
    CHECK(member_ids.size() == mia.members.size()); // without replacement

    // substring-32 scan: no non-member window occurs in any training text
    std::string blob;
    for (const auto* recs : {&c.forget_train, &c.retain_train, &c.forget_val, &c.retain_val})
        for (const auto& r : *recs) {
            blob += record_doc(r);
            blob += '\x01';
        }
    for (const auto& d : c.pretrain_docs) {
        blob += d;
        blob += '\x01';
    }
    std::unordered_set<std::string> grams;
    for (size_t i = 0; i + 32 <= blob.size(); ++i) grams.insert(blob.substr(i, 32));
    for (const auto& nm : mia.non_members) {
        for (size_t i = 0; i + 32 <= nm.document.size(); ++i)
            CHECK(grams.count(nm.document.substr(i, 32)) == 0);
        CHECK(nm.meta.at("source") == "synthetic");
        CHECK(nm.meta.count("seed_stream") == 1);
    }
}

TEST_CASE("default spec sizes") {
    CorpusSpec def;
    CHECK(def.forget_train == 128);
    CHECK(def.forget_val == 32);
    CHECK(def.retain_train == 132);
    CHECK(def.retain_val == 32);
    CHECK(def.mia_members == 32);
    CHECK(def.mia_nonmembers == 32);
    CHECK(def.probe_questions == 64);
    CHECK(def.pretrain_docs == 2000);
    CorpusSpec bad = def;
    bad.mia_members = 200;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("probe: balanced answers, options distinct, disjoint from forget text") {
    Corpus c = generate_corpus(small_spec());
    int hist[4] = {0, 0, 0, 0};
    for (const auto& q : c.probe) {
        REQUIRE(q.options.size() == 4);
        std::set<std::string> uniq(q.options.begin(), q.options.end());
        CHECK(uniq.size() == 4);
        CHECK(q.answer_index >= 0);
        CHECK(q.answer_index <= 3);
        hist[q.answer_index]++;
    }
    const int expect = static_cast<int>(c.probe.size()) / 4;
    for (int b = 0; b < 4; ++b) {
        CHECK(hist[b] >= expect - 8);
        CHECK(hist[b] <= expect + 8);
    }
    for (const auto& q : c.probe)
        for (const auto& r : c.forget_train)
            CHECK(record_doc(r).find(q.question) == std::string::npos);
    // regeneration identical
    Corpus c2 = generate_corpus(small_spec());
    REQUIRE(c2.probe.size() == c.probe.size());
    for (size_t i = 0; i < c.probe.size(); ++i) {
        CHECK(c2.probe[i].question == c.probe[i].question);
        CHECK(c2.probe[i].options == c.probe[i].options);
        CHECK(c2.probe[i].answer_index == c.probe[i].answer_index);
    }
}

TEST_CASE("jsonl round-trip and schema errors") {
    TempDir dir;
    Corpus c = generate_corpus(small_spec());
    std::vector<Record> recs(c.forget_train.begin(),
                             c.forget_train.begin() + std::min<size_t>(100, c.forget_train.size()));
    write_jsonl(recs, dir.file("rt.jsonl"));
    auto back = read_jsonl(dir.file("rt.jsonl"));
    REQUIRE(back.size() == recs.size());
    for (size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].id == recs[i].id);
        CHECK(back[i].input == recs[i].input);
        CHECK(back[i].output == recs[i].output);
        CHECK(back[i].task == recs[i].task);
        CHECK(back[i].split == recs[i].split);
    }
    // byte stability of re-serialization
    write_jsonl(back, dir.file("rt2.jsonl"));
    CHECK(read_file(dir.file("rt.jsonl")) == read_file(dir.file("rt2.jsonl")));

    atomic_write_file(dir.file("missing.jsonl"),
                      "{\"id\":\"a_sc\",\"input\":\"x\",\"task\":1,\"split\":\"forget\"}\n");
    try {
        read_jsonl(dir.file("missing.jsonl"));
        FAIL("expected JsonlError");
    } catch (const JsonlError& e) {
        std::string msg = e.what();
        CHECK(msg.find("output") != std::string::npos);
        CHECK(msg.find("line 1") != std::string::npos);
    }

    atomic_write_file(
        dir.file("badsplit.jsonl"),
        "{\"id\":\"a_sc\",\"input\":\"x\",\"output\":\"y\",\"task\":1,\"split\":\"other\"}\n");
    CHECK_THROWS_AS(read_jsonl(dir.file("badsplit.jsonl")), JsonlError);
}

TEST_CASE("member serialization uses the four-field schema") {
    TempDir dir;
    CorpusSpec spec = small_spec();
    Corpus c = generate_corpus(spec);
    MiaSets mia = build_mia_sets(c, spec);
    write_mia_members(mia.members, dir.file("m.jsonl"));
    std::string first = read_file(dir.file("m.jsonl"));
    first = first.substr(0, first.find('\n'));
    CHECK(first.find("\"id\"") != std::string::npos);
    CHECK(first.find("\"document\"") != std::string::npos);
    CHECK(first.find("\"question_answering_task\"") != std::string::npos);
    CHECK(first.find("\"sentence_completion_task\"") != std::string::npos);
    auto members = read_mia_members(dir.file("m.jsonl"));
    REQUIRE(members.size() == mia.members.size());
    CHECK(members[0].document == mia.members[0].document);

    write_mia_nonmembers(mia.non_members, dir.file("n.jsonl"));
    auto nm = read_mia_nonmembers(dir.file("n.jsonl"));
    REQUIRE(nm.size() == mia.non_members.size());
    CHECK(nm[0].document == mia.non_members[0].document);
    CHECK(nm[0].meta == mia.non_members[0].meta);
}

TEST_CASE("scaled spec keeps feasibility") {
    CorpusSpec def;
    CorpusSpec tiny = def.scaled(0.05);
    CHECK(tiny.forget_train >= 6);
    CHECK(tiny.mia_members <= tiny.forget_train);
    Corpus c = generate_corpus(tiny); // should not throw
    CHECK(c.forget_train.size() == static_cast<size_t>(tiny.forget_train));
    CHECK_THROWS_AS(def.scaled(0.0), std::invalid_argument);
}
