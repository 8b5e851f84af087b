#include <doctest.h>

#include "ulwb/lm/checkpoint.hpp"
#include "ulwb/util/hash.hpp"
#include "ulwb/util/io.hpp"

#include <filesystem>
#include <unistd.h>

using namespace ulwb;
using namespace ulwb::lm;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("ulwb_ckpt_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

ModelConfig cfg_small() {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 32;
    c.n_heads = 2;
    c.d_ff = 48;
    c.max_seq_len = 16;
    c.seed = 11;
    return c;
}

} // namespace

TEST_CASE("round-trip is bit-identical") {
    TempDir dir;
    Parameters<float> p = xavier_init(cfg_small(), 42);
    checkpoint_save(p, dir.file("a.ulwb"));
    Parameters<float> q = checkpoint_load(dir.file("a.ulwb"));
    REQUIRE(q.tensors.size() == p.tensors.size());
    for (size_t i = 0; i < p.tensors.size(); ++i) {
        CHECK(q.names[i] == p.names[i]);
        CHECK(q.tensors[i].dims == p.tensors[i].dims);
        CHECK(q.tensors[i].data == p.tensors[i].data);
    }
    CHECK(q.config.n_layers == p.config.n_layers);
    CHECK(q.config.seed == p.config.seed);
}

TEST_CASE("two saves of the same state produce identical bytes") {
    TempDir dir;
    Parameters<float> p = xavier_init(cfg_small(), 7);
    checkpoint_save(p, dir.file("x.ulwb"));
    checkpoint_save(p, dir.file("y.ulwb"));
    CHECK(hash_file(dir.file("x.ulwb")) == hash_file(dir.file("y.ulwb")));
}

TEST_CASE("truncated file is a corrupt-header error") {
    TempDir dir;
    Parameters<float> p = xavier_init(cfg_small(), 1);
    checkpoint_save(p, dir.file("t.ulwb"));
    std::string bytes = read_file(dir.file("t.ulwb"));

    atomic_write_file(dir.file("t3.ulwb"), bytes.substr(0, 3));
    CHECK_THROWS_AS(checkpoint_load(dir.file("t3.ulwb")), CheckpointCorruptError);

    atomic_write_file(dir.file("thalf.ulwb"), bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(checkpoint_load(dir.file("thalf.ulwb")), CheckpointCorruptError);

    atomic_write_file(dir.file("textra.ulwb"), bytes + "xx");
    CHECK_THROWS_AS(checkpoint_load(dir.file("textra.ulwb")), CheckpointCorruptError);
}

TEST_CASE("bad magic and version mismatch") {
    TempDir dir;
    Parameters<float> p = xavier_init(cfg_small(), 2);
    checkpoint_save(p, dir.file("v.ulwb"));
    std::string bytes = read_file(dir.file("v.ulwb"));

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    atomic_write_file(dir.file("vm.ulwb"), bad_magic);
    CHECK_THROWS_AS(checkpoint_load(dir.file("vm.ulwb")), CheckpointCorruptError);

    std::string bad_version = bytes;
    bad_version[4] = 9; // version little-endian low byte
    atomic_write_file(dir.file("vv.ulwb"), bad_version);
    CHECK_THROWS_AS(checkpoint_load(dir.file("vv.ulwb")), CheckpointVersionError);
}

TEST_CASE("shape-table mismatch") {
    TempDir dir;
    Parameters<float> p = xavier_init(cfg_small(), 3);
    checkpoint_save(p, dir.file("s.ulwb"));
    std::string bytes = read_file(dir.file("s.ulwb"));
    // flip one byte inside the first tensor name ("embed.tokens") in the table
    size_t pos = bytes.find("embed.tokens");
    REQUIRE(pos != std::string::npos);
    bytes[pos] = 'E';
    atomic_write_file(dir.file("sm.ulwb"), bytes);
    CHECK_THROWS_AS(checkpoint_load(dir.file("sm.ulwb")), CheckpointShapeError);
}
