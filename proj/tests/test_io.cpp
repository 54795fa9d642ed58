#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lyt/io.hpp"

using namespace lyt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("lyt_io_test_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("clip files round-trip byte-identically") {
    TempDir dir;
    VideoClip clip;
    clip.t = 3;
    clip.h = 4;
    clip.w = 5;
    clip.c = 1;
    clip.frames.resize(60);
    for (std::size_t i = 0; i < 60; ++i)
        clip.frames[i] = static_cast<real>(static_cast<float>(i) / 59.0f);
    fs::path p = dir.path / "clip.bin";
    write_clip(clip, p);

    // header layout: magic + 4 little-endian u32 dims
    std::string bytes = slurp(p);
    REQUIRE(bytes.size() == 5 + 16 + 60 * 4);
    CHECK(bytes.substr(0, 5) == "LYTV1");
    CHECK(static_cast<unsigned char>(bytes[5]) == 3);   // T low byte
    CHECK(static_cast<unsigned char>(bytes[9]) == 4);   // H
    CHECK(static_cast<unsigned char>(bytes[13]) == 5);  // W
    CHECK(static_cast<unsigned char>(bytes[17]) == 1);  // C

    VideoClip back = read_clip(p);
    CHECK(back.t == 3);
    CHECK(back.h == 4);
    CHECK(back.w == 5);
    CHECK(back.c == 1);
    CHECK(back.frames == clip.frames);  // values were chosen on the f32 grid

    // writing the read-back clip reproduces the same bytes
    fs::path p2 = dir.path / "clip2.bin";
    write_clip(back, p2);
    CHECK(slurp(p2) == bytes);
}

TEST_CASE("clip reader rejects bad magic and truncation") {
    TempDir dir;
    fs::path p = dir.path / "bad.bin";
    write_text_file(p, "NOTAV1aaaaaaaaaaaaaaaa");
    CHECK_THROWS_AS(read_clip(p), IoError);

    VideoClip clip;
    clip.t = 2;
    clip.h = 2;
    clip.w = 2;
    clip.frames.assign(8, 0.5);
    write_clip(clip, p);
    std::string bytes = slurp(p);
    write_text_file(p, bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_clip(p), IoError);
    CHECK_THROWS_AS(read_clip(dir.path / "missing.bin"), IoError);
}

TEST_CASE("checkpoints round-trip config and tensors exactly") {
    TempDir dir;
    CheckpointData ckpt;
    ckpt.config = "system=single_pendulum\nlatent=16\nstep=120\n";
    NamedTensor a;
    a.name = "embed.w";
    a.shape = {2, 3};
    a.values = {0.0, 0.5, -0.25, 1.0, -1.0, 0.125};  // exact f32 values
    NamedTensor b;
    b.name = "head.b";
    b.shape = {1, 4};
    b.values = {1e-3, -2e-3, 0.0, 3.5};
    for (auto& v : b.values) v = static_cast<real>(static_cast<float>(v));
    ckpt.tensors = {a, b};

    fs::path p = dir.path / "model.ckpt";
    write_checkpoint(p, ckpt);
    CheckpointData back = read_checkpoint(p);
    CHECK(back.config == ckpt.config);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors[0].name == "embed.w");
    CHECK(back.tensors[0].shape == std::vector<std::size_t>{2, 3});
    CHECK(back.tensors[0].values == a.values);
    CHECK(back.tensors[1].values == b.values);
    CHECK(back.find("head.b") != nullptr);
    CHECK(back.find("head.b")->shape == std::vector<std::size_t>{1, 4});
    CHECK(back.find("nope") == nullptr);

    // save(load(x)) is byte-identical
    fs::path p2 = dir.path / "model2.ckpt";
    write_checkpoint(p2, back);
    CHECK(slurp(p2) == slurp(p));
}

TEST_CASE("checkpoint reader detects corruption") {
    TempDir dir;
    CheckpointData ckpt;
    ckpt.config = "k=v\n";
    NamedTensor t;
    t.name = "w";
    t.shape = {2};
    t.values = {1.0, 2.0};
    ckpt.tensors = {t};
    fs::path p = dir.path / "ok.ckpt";
    write_checkpoint(p, ckpt);

    // flip one payload byte: checksum must catch it
    std::string bytes = slurp(p);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
    fs::path bad = dir.path / "bad.ckpt";
    {
        std::ofstream out(bad, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(read_checkpoint(bad), IoError);

    // wrong magic with a fixed-up checksum still fails
    std::string wrong = slurp(p);
    wrong[0] = 'X';
    std::string body = wrong.substr(0, wrong.size() - 8);
    std::uint64_t sum = fnv1a64(body.data(), body.size());
    for (int i = 0; i < 8; ++i)
        wrong[wrong.size() - 8 + i] = static_cast<char>((sum >> (8 * i)) & 0xFF);
    fs::path badmagic = dir.path / "badmagic.ckpt";
    {
        std::ofstream out(badmagic, std::ios::binary);
        out.write(wrong.data(), static_cast<std::streamsize>(wrong.size()));
    }
    CHECK_THROWS_AS(read_checkpoint(badmagic), IoError);

    // truncated file
    std::string cut = slurp(p).substr(0, 6);
    fs::path short_p = dir.path / "short.ckpt";
    {
        std::ofstream out(short_p, std::ios::binary);
        out.write(cut.data(), static_cast<std::streamsize>(cut.size()));
    }
    CHECK_THROWS_AS(read_checkpoint(short_p), IoError);
}

TEST_CASE("text file helpers round-trip and report missing files") {
    TempDir dir;
    fs::path p = dir.path / "note.txt";
    write_text_file(p, "line one\nline two\n");
    CHECK(read_text_file(p) == "line one\nline two\n");
    CHECK_THROWS_AS(read_text_file(dir.path / "absent.txt"), IoError);
}
