#include "ulwb/data/generate.hpp"

#include "ulwb/util/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>
#include <set>

namespace ulwb::data {

namespace {

using ulwb::Rng;
using ulwb::derive_seed;

// ---- entity pools ----------------------------------------------------------
// Each pool kind owns a syllable space of onset x mid x coda combinations.
// The linear index space is cut into four disjoint slices, one per universe,
// so strings from different universes can never collide. Within a slice the
// order is a seeded shuffle.

enum class Universe { forget = 0, retain = 1, nonmember = 2, world = 3 };

constexpr int kUniverses = 4;

struct SyllableSpace {
    std::vector<const char*> onsets, mids, codas;
    int size() const {
        return static_cast<int>(onsets.size() * mids.size() * codas.size());
    }
    std::string at(int idx) const {
        int nm = static_cast<int>(mids.size());
        int nc = static_cast<int>(codas.size());
        int o = idx / (nm * nc);
        int mi = (idx / nc) % nm;
        int c = idx % nc;
        std::string s = onsets[static_cast<size_t>(o)];
        s += mids[static_cast<size_t>(mi)];
        s += codas[static_cast<size_t>(c)];
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
        return s;
    }
};

const SyllableSpace& person_space() {
    static const SyllableSpace s{
        {"bar", "cor", "dal", "el", "fen", "gar", "hol", "is", "jor", "kel",
         "lor", "mar", "ned", "or", "pel", "quin", "ros", "sil", "tam", "ul",
         "ver", "wil", "yor", "zan", "bram", "cael", "dor", "fal", "gwen", "hart"},
        {"a", "e", "i", "o", "u", "ae", "ia", "ei", "ou", "ar", "en", "or"},
        {"dan", "fir", "gos", "lin", "mor", "nas", "rek", "sel", "tan", "vik",
         "wen", "dric", "bert", "mond", "ric", "wald", "nor", "vas", "lim", "dor"},
    };
    return s;
}

const SyllableSpace& place_space() {
    static const SyllableSpace s{
        {"ash",  "bren", "cald",   "dun",  "ever",  "fern",  "grim", "hazel", "iron",  "kiln",
         "lark", "mill", "north",  "oak",  "pine",  "quarry", "raven", "stone", "thorn", "under",
         "vale", "wick", "yew",    "zeal", "bright", "cold",  "dew",  "elm",   "frost", "glen",
         "mead", "clay", "dray",   "gild", "crag",  "marsh", "wold", "hythe", "stow",  "tarn"},
        {"b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "c"},
        {"ury",  "ardo", "emont", "iford", "olt",   "avia", "edge",  "irth", "ombe", "undel",
         "aven", "eby",  "igate", "ola",   "um",    "aston", "eford", "iby",  "ost",  "angle",
         "odale", "ifell", "ulsey", "omoor", "agill", "eholt", "iwood", "ywell", "ocott", "uford"},
    };
    return s;
}

const SyllableSpace& thing_space() {
    static const SyllableSpace s{
        {"vel", "quar", "mor", "zin", "tal",  "ob",  "cer", "dra", "fel", "gly",
         "hex", "jas",  "kyan", "lum", "myr", "nox", "opa", "pyr", "rho", "syl",
         "ter", "umb",  "vor", "wex", "xen",  "yt",  "zir", "alu", "bas", "cin",
         "bra", "cla",  "dru", "fla", "gri",  "kra", "pla", "ska", "tra", "vra"},
        {"a", "e", "i", "o", "u", "ar", "er", "ir", "or", "ur", "an", "en",
         "au", "eo", "io", "ua"},
        {"ite", "ium", "ase", "ene", "ine", "ol",  "ark", "esh", "ond", "ule",
         "ex",  "oss", "ant", "elm", "isk", "orn", "ast", "eld", "img", "oth",
         "ax",  "yx",  "urn", "awn", "ysk", "alt", "ern", "ost", "aryl", "uxe"},
    };
    return s;
}

/// Hands out unique strings from one universe slice of a syllable space.
class Pool {
public:
    Pool(const SyllableSpace& space, Universe u, uint64_t seed, const std::string& tag)
        : space_(space) {
        const int total = space.size();
        const int slice = total / kUniverses;
        const int begin = static_cast<int>(u) * slice;
        order_.resize(static_cast<size_t>(slice));
        std::iota(order_.begin(), order_.end(), begin);
        Rng rng(derive_seed(seed, "pool." + tag + "." + std::to_string(static_cast<int>(u))));
        rng.shuffle(order_);
    }

    std::string next() {
        if (cursor_ >= order_.size())
            throw std::runtime_error("counts infeasible for template pool");
        return space_.at(order_[cursor_++]);
    }

private:
    const SyllableSpace& space_;
    std::vector<int> order_;
    size_t cursor_ = 0;
};

/// All pools one universe needs.
struct UniversePools {
    Universe universe;
    Pool first_names, last_names, places, things;
    Rng digits;

    UniversePools(Universe u, uint64_t seed)
        : universe(u),
          first_names(person_space(), u, seed, "first"),
          last_names(person_space(), u, seed, "last"),
          places(place_space(), u, seed, "place"),
          things(thing_space(), u, seed, "thing"),
          digits(derive_seed(seed, "digits." + std::to_string(static_cast<int>(u)))) {}

    std::string person() { return first_names.next() + " " + last_names.next(); }

    std::string ndigits(int n) {
        std::string s;
        for (int i = 0; i < n; ++i) s += static_cast<char>('0' + digits.below(10));
        return s;
    }

    std::string phone() { return "(" + ndigits(3) + ") " + ndigits(3) + "-" + ndigits(4); }
    std::string ssn() { return ndigits(3) + "-" + ndigits(2) + "-" + ndigits(4); }

    std::string email(const std::string& person_name) {
        // one domain per universe so the domain cannot bridge a long shared
        // window between non-member and training text
        static const std::array<const char*, kUniverses> domains = {
            "veldmail.com", "quillbox.org", "lanternnet.net", "mossmail.org"};
        std::string local;
        for (char c : person_name) {
            if (c == ' ') local += '.';
            else local += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        return local + "@" + domains[static_cast<size_t>(universe)];
    }

    std::string date() {
        static const std::array<const char*, 12> months = {
            "January", "February", "March",     "April",   "May",      "June",
            "July",    "August",   "September", "October", "November", "December"};
        int m = static_cast<int>(digits.below(12));
        int day = 1 + static_cast<int>(digits.below(28));
        int year = 1950 + static_cast<int>(digits.below(55));
        return std::string(months[static_cast<size_t>(m)]) + " " + std::to_string(day) + ", " +
               std::to_string(year);
    }

    std::string address() {
        static const std::array<const char*, 4> suffix = {"Lane", "Road", "Street", "Court"};
        return std::to_string(1 + digits.below(98)) + " " + places.next() + " " +
               suffix[static_cast<size_t>(digits.below(suffix.size()))];
    }
};

// ---- documents -------------------------------------------------------------
// Disjointness accounting for the 32-byte-window guarantee: entities from
// different universes can still share an onset+mid prefix (<= 8 bytes) or a
// mid+coda suffix (<= 7 bytes), so a window bridging entity-constant-entity
// can match up to suffix + constant + prefix bytes across universes. Keeping
// every interior literal <= 15 bytes and every sentence-final literal <= 24
// bytes bounds the longest cross-universe match at 31 bytes.

struct DocParts {
    std::string doc;
    std::string question, answer;
    size_t split_at = 0; // byte offset for the sc prefix/continuation cut
    int variant = 0;     // template family within the task
};

DocParts make_creative(UniversePools& u, int variant) {
    DocParts d;
    d.variant = variant % 3;
    std::string p = u.person();
    std::string c = u.places.next();
    std::string c2 = u.places.next();
    std::string o = u.things.next();
    std::string m = u.things.next();
    int n = 2 + static_cast<int>(u.digits.below(7));
    int n2 = 2 + static_cast<int>(u.digits.below(7));
    switch (d.variant) {
    case 0:
        d.doc = p + " of " + c + " traded a " + o + " for " + m + " at dusk.";
        d.split_at = d.doc.size();
        d.doc += " Then " + p + " counted " + std::to_string(n) + " tokens by the " +
                 u.things.next() + ".";
        d.question = "Where did " + p + " trade a " + o + "?";
        d.answer = c;
        break;
    case 1:
        d.doc = "In " + c + ", weaver " + p + " made " + std::to_string(n) + " flags of " + m +
                " silk.";
        d.split_at = d.doc.size();
        d.doc += " All " + std::to_string(n2) + " bore the " + o + " of " + c2 + ".";
        d.question = "Who made flags in " + c + "?";
        d.answer = p;
        break;
    default:
        d.doc = p + " sailed from " + c + " with " + std::to_string(n) + " casks of " + m + ".";
        d.split_at = d.doc.size();
        d.doc += " Gulls over " + c2 + " sang of " + o + " all night.";
        d.question = "From which town did " + p + " sail?";
        d.answer = c;
        break;
    }
    return d;
}

DocParts make_biography(UniversePools& u, int variant) {
    DocParts d;
    d.variant = variant % 3;
    std::string p = u.person();
    std::string date = u.date();
    std::string addr = u.address();
    std::string phone = u.phone();
    std::string mail = u.email(p);
    std::string ssn = u.ssn();
    d.doc = p + " was born on " + date + " and lives at " + addr + ".";
    d.split_at = d.doc.size();
    d.doc += " Phone: " + phone + ". Email: " + mail + ". SSN: " + ssn + ".";
    switch (variant % 3) {
    case 0:
        d.question = "What is " + p + "'s phone number?";
        d.answer = phone;
        break;
    case 1:
        d.question = "What is " + p + "'s SSN?";
        d.answer = ssn;
        break;
    default:
        d.question = "What is " + p + "'s email address?";
        d.answer = mail;
        break;
    }
    return d;
}

/// World fact documents double as the pretraining corpus and as task-3
/// record sources; the cloze question is what the probe reuses.
DocParts make_world_fact(UniversePools& u, int variant) {
    DocParts d;
    d.variant = variant % 4;
    std::string m = u.things.next();
    std::string c = u.places.next();
    std::string c2 = u.places.next();
    switch (d.variant) {
    case 0:
        d.doc = "The mineral " + m + " is mined near " + c + ".";
        d.split_at = d.doc.size();
        d.doc += " " + c2 + " buys it each spring.";
        d.question = "The mineral " + m + " is mined near";
        d.answer = c;
        break;
    case 1:
        d.doc = "The " + m + " river passes " + c + " into the " + u.things.next() + " fens.";
        d.split_at = d.doc.size();
        d.doc += " " + c2 + " ferries cross it.";
        d.question = "The " + m + " river passes";
        d.answer = c;
        break;
    case 2:
        d.doc = "The feast of " + m + " is held in " + c + " each autumn.";
        d.split_at = d.doc.size();
        d.doc += " " + c2 + " sends " + std::to_string(2 + u.digits.below(7)) + " riders.";
        d.question = "The feast of " + m + " is held in";
        d.answer = c;
        break;
    default:
        d.doc = "The spice " + m + " grows above " + c + ".";
        d.split_at = d.doc.size();
        d.doc += " " + c2 + " traders sell it daily.";
        d.question = "The spice " + m + " grows above";
        d.answer = c;
        break;
    }
    return d;
}

/// Word-boundary cut near 55% for tasks 1 and 3 sc records, so the prefix
/// ends mid-document rather than exactly at a sentence break.
size_t word_cut(const std::string& doc) {
    size_t target = doc.size() * 55 / 100;
    size_t cut = doc.rfind(' ', target);
    if (cut == std::string::npos || cut < doc.size() / 4) cut = target;
    return cut;
}

std::string cell_style(int cell) { return (cell % 2 == 0) ? "sc" : "qa"; }
int cell_task(int cell) { return cell / 2 + 1; }

Record make_record(const DocParts& d, Split split, int task, const std::string& style,
                   int index, std::map<std::string, RecordContext>* contexts) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", index);
    Record r;
    r.task = task;
    r.split = split;
    r.id = split_name(split) + "_t" + std::to_string(task) + "_" + buf + "_" + style;

    size_t cut = (task == 2) ? d.split_at : word_cut(d.doc);
    if (style == "sc") {
        r.input = d.doc.substr(0, cut);
        r.output = d.doc.substr(cut);
    } else {
        r.input = d.question;
        r.output = d.answer;
    }
    if (contexts) {
        RecordContext ctx;
        ctx.doc = d.doc;
        ctx.sc_input = d.doc.substr(0, cut);
        ctx.sc_output = d.doc.substr(cut);
        ctx.question = d.question;
        ctx.answer = d.answer;
        (*contexts)[r.id] = std::move(ctx);
    }
    return r;
}

} // namespace

CorpusSpec CorpusSpec::scaled(double f) const {
    if (!(f > 0)) throw std::invalid_argument("corpus scale must be > 0");
    auto sc = [f](int v) { return std::max(1, static_cast<int>(v * f)); };
    CorpusSpec out = *this;
    // train splits keep at least one record per (task, style) cell so the
    // twelve-score report stays computable at any scale
    out.forget_train = std::max(6, sc(forget_train));
    out.forget_val = std::max(6, sc(forget_val));
    out.retain_train = std::max(6, sc(retain_train));
    out.retain_val = std::max(6, sc(retain_val));
    out.mia_members = std::min(sc(mia_members), out.forget_train);
    out.mia_nonmembers = sc(mia_nonmembers);
    out.probe_questions = std::max(4, sc(probe_questions));
    out.pretrain_docs = sc(pretrain_docs);
    return out;
}

Corpus generate_corpus(const CorpusSpec& spec) {
    spec.validate();
    Corpus corpus;

    UniversePools world(Universe::world, spec.seed);
    UniversePools forget(Universe::forget, spec.seed);
    UniversePools retain(Universe::retain, spec.seed);

    // World facts first: they are the pretraining corpus. Task-3 records
    // excerpt the leading docs; the probe draws from the tail, so no probe
    // question can appear inside a forget record.
    std::vector<DocParts> world_docs;
    world_docs.reserve(static_cast<size_t>(spec.pretrain_docs));
    for (int i = 0; i < spec.pretrain_docs; ++i) world_docs.push_back(make_world_fact(world, i));
    for (const auto& d : world_docs) corpus.pretrain_docs.push_back(d.doc);

    size_t world_cursor = 0;
    auto next_world_doc = [&]() -> const DocParts& {
        if (world_cursor >= world_docs.size())
            throw std::runtime_error("counts infeasible for template pool: pretrain docs");
        return world_docs[world_cursor++];
    };

    auto gen_split = [&](Split split, UniversePools& pools, int count, int index_base,
                         std::vector<Record>& out, bool keep_context) {
        for (int i = 0; i < count; ++i) {
            int cell = i % 6;
            int task = cell_task(cell);
            std::string style = cell_style(cell);
            DocParts d;
            if (task == 1) d = make_creative(pools, i);
            else if (task == 2) d = make_biography(pools, i);
            else d = next_world_doc();
            out.push_back(make_record(d, split, task, style, index_base + i,
                                      keep_context ? &corpus.contexts : nullptr));
        }
    };

    gen_split(Split::forget, forget, spec.forget_train, 0, corpus.forget_train, true);
    gen_split(Split::forget, forget, spec.forget_val, spec.forget_train, corpus.forget_val,
              false);
    gen_split(Split::retain, retain, spec.retain_train, 0, corpus.retain_train, true);
    gen_split(Split::retain, retain, spec.retain_val, spec.retain_train, corpus.retain_val,
              false);

    // Probe questions come from world docs never excerpted into records.
    // Distractor options are sibling answers of the same template family.
    if (world_cursor + static_cast<size_t>(spec.probe_questions) + 16 > world_docs.size())
        throw std::runtime_error("counts infeasible for template pool: insufficient fact pool");
    Rng probe_rng(derive_seed(spec.seed, "probe"));
    std::vector<size_t> tail(world_docs.size() - world_cursor);
    std::iota(tail.begin(), tail.end(), world_cursor);
    probe_rng.shuffle(tail);
    const size_t reserve = static_cast<size_t>(spec.probe_questions);
    for (int i = 0; i < spec.probe_questions; ++i) {
        const DocParts& fact = world_docs[tail[static_cast<size_t>(i)]];
        ProbeQuestion q;
        q.question = fact.question;
        q.subject_tag = "world_fact";
        // three distinct distractors from sibling facts of the same family
        std::vector<std::string> distractors;
        std::set<std::string> seen{fact.answer};
        for (size_t j = reserve; j < tail.size() && distractors.size() < 3; ++j) {
            const DocParts& sib = world_docs[tail[j]];
            if (sib.variant != fact.variant) continue;
            if (seen.insert(sib.answer).second) distractors.push_back(sib.answer);
        }
        for (size_t j = reserve; j < tail.size() && distractors.size() < 3; ++j) {
            const DocParts& sib = world_docs[tail[j]];
            if (seen.insert(sib.answer).second) distractors.push_back(sib.answer);
        }
        if (distractors.size() < 3)
            throw std::runtime_error("counts infeasible for template pool: distractors");
        probe_rng.shuffle(distractors);
        // answer position balanced across questions, so the histogram over
        // the four slots is uniform by construction
        q.answer_index = i % 4;
        q.options.resize(4);
        size_t di = 0;
        for (int slot = 0; slot < 4; ++slot)
            q.options[static_cast<size_t>(slot)] =
                (slot == q.answer_index) ? fact.answer : distractors[di++];
        corpus.probe.push_back(std::move(q));
    }
    return corpus;
}

MiaSets build_mia_sets(const Corpus& corpus, const CorpusSpec& spec) {
    spec.validate();
    if (static_cast<size_t>(spec.mia_members) > corpus.forget_train.size())
        throw std::invalid_argument("member count exceeds forget train size");

    MiaSets sets;
    // members: sampled without replacement from the forget train split
    std::vector<size_t> idx(corpus.forget_train.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(spec.seed, "mia.members"));
    rng.shuffle(idx);
    for (int i = 0; i < spec.mia_members; ++i) {
        const Record& r = corpus.forget_train[idx[static_cast<size_t>(i)]];
        const RecordContext& ctx = corpus.contexts.at(r.id);
        MiaMember m;
        m.id = r.id;
        m.document = ctx.doc;
        m.question = ctx.question;
        m.answer = ctx.answer;
        m.sc_input = ctx.sc_input;
        m.sc_output = ctx.sc_output;
        sets.members.push_back(std::move(m));
    }

    // non-members: same template families, disjoint universe and seed stream
    UniversePools pools(Universe::nonmember, spec.seed);
    for (int i = 0; i < spec.mia_nonmembers; ++i) {
        DocParts d;
        switch (i % 3) {
        case 0: d = make_creative(pools, i); break;
        case 1: d = make_biography(pools, i); break;
        default: d = make_world_fact(pools, i); break;
        }
        MiaNonMember m;
        m.meta["source"] = "synthetic";
        m.meta["seed_stream"] = "nonmember." + std::to_string(spec.seed);
        m.document = d.doc;
        sets.non_members.push_back(std::move(m));
    }
    return sets;
}

// ---- PII grammar validation -------------------------------------------------

namespace {

bool all_digits(const std::string& s, size_t pos, size_t n) {
    if (pos + n > s.size()) return false;
    for (size_t i = 0; i < n; ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[pos + i]))) return false;
    return true;
}

} // namespace

bool matches_phone(const std::string& s) {
    // (NNN) NNN-NNNN
    return s.size() == 14 && s[0] == '(' && all_digits(s, 1, 3) && s[4] == ')' && s[5] == ' ' &&
           all_digits(s, 6, 3) && s[9] == '-' && all_digits(s, 10, 4);
}

bool matches_ssn(const std::string& s) {
    // NNN-NN-NNNN
    return s.size() == 11 && all_digits(s, 0, 3) && s[3] == '-' && all_digits(s, 4, 2) &&
           s[6] == '-' && all_digits(s, 7, 4);
}

bool matches_email(const std::string& s) {
    // lower.lower@lower.tld
    size_t at = s.find('@');
    if (at == std::string::npos || at == 0 || at + 1 >= s.size()) return false;
    std::string local = s.substr(0, at), domain = s.substr(at + 1);
    size_t dot = local.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= local.size()) return false;
    for (char c : local)
        if (!(std::islower(static_cast<unsigned char>(c)) || c == '.')) return false;
    size_t ddot = domain.rfind('.');
    if (ddot == std::string::npos || ddot == 0 || ddot + 1 >= domain.size()) return false;
    std::string tld = domain.substr(ddot + 1);
    if (tld != "com" && tld != "org" && tld != "net") return false;
    for (size_t i = 0; i < ddot; ++i)
        if (!std::islower(static_cast<unsigned char>(domain[i]))) return false;
    return true;
}

bool validate_pii_output(const std::string& text, bool whole_string_is_field) {
    if (whole_string_is_field)
        return matches_phone(text) || matches_ssn(text) || matches_email(text);

    // continuation text: every SSN-shaped digit run must be exactly
    // NNN-NN-NNNN, every parenthesised digit run a well-formed phone, and at
    // least one PII field must be present.
    bool found = false;
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(' && i + 14 <= text.size() && all_digits(text, i + 1, 3)) {
            if (!matches_phone(text.substr(i, 14))) return false;
            found = true;
        }
        if (std::isdigit(static_cast<unsigned char>(text[i])) &&
            (i == 0 || !std::isdigit(static_cast<unsigned char>(text[i - 1])))) {
            // digit run starting here; an SSN candidate is ddd-dd-dddd
            if (all_digits(text, i, 3) && i + 11 <= text.size() && text[i + 3] == '-') {
                if (matches_ssn(text.substr(i, 11))) found = true;
            }
        }
        if (text[i] == '@') {
            // expand to the surrounding token and check the email grammar
            size_t b = i;
            while (b > 0 && text[b - 1] != ' ') --b;
            size_t e = i;
            while (e < text.size() && text[e] != ' ' && text[e] != ',') ++e;
            std::string token = text.substr(b, e - b);
            while (!token.empty() && (token.back() == '.' || token.back() == ','))
                token.pop_back();
            if (!matches_email(token)) return false;
            found = true;
        }
    }
    return found;
}

} // namespace ulwb::data
