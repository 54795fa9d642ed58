#include "lyt/io.hpp"

#include <cstring>
#include <fstream>

namespace lyt {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, real v) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

class Reader {
  public:
    Reader(std::string bytes, std::filesystem::path path)
        : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t lo = u32(), hi = u32();
        return lo | (hi << 32);
    }

    real f32() {
        std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return static_cast<real>(f);
    }

    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void expect_magic(const char* magic) {
        std::string m = str(std::strlen(magic));
        if (m != magic)
            throw IoError(path_.string() + ": bad magic (expected " + magic + ")");
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& bytes() const { return bytes_; }

  private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw IoError(path_.string() + ": truncated file");
    }

    std::string bytes_;
    std::filesystem::path path_;
    std::size_t pos_ = 0;
};

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

}  // namespace

const NamedTensor* CheckpointData::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

void write_clip(const VideoClip& clip, const std::filesystem::path& path) {
    clip.validate();
    std::string out;
    out.reserve(5 + 16 + clip.frames.size() * 4);
    out += "LYTV1";
    put_u32(out, static_cast<std::uint32_t>(clip.t));
    put_u32(out, static_cast<std::uint32_t>(clip.h));
    put_u32(out, static_cast<std::uint32_t>(clip.w));
    put_u32(out, static_cast<std::uint32_t>(clip.c));
    for (real v : clip.frames) put_f32(out, v);
    write_bytes(path, out);
}

VideoClip read_clip(const std::filesystem::path& path) {
    Reader rd(read_bytes(path), path);
    rd.expect_magic("LYTV1");
    VideoClip clip;
    clip.t = rd.u32();
    clip.h = rd.u32();
    clip.w = rd.u32();
    clip.c = rd.u32();
    std::size_t n = clip.t * clip.h * clip.w * clip.c;
    if (rd.remaining() != n * 4)
        throw IoError(path.string() + ": payload size mismatch");
    clip.frames.resize(n);
    for (std::size_t i = 0; i < n; ++i) clip.frames[i] = rd.f32();
    clip.validate();
    return clip;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& ckpt) {
    std::string out;
    out += "LYTC1";
    put_u32(out, static_cast<std::uint32_t>(ckpt.config.size()));
    out += ckpt.config;
    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        std::size_t n = 1;
        for (std::size_t d : t.shape) {
            put_u32(out, static_cast<std::uint32_t>(d));
            n *= d;
        }
        if (n != t.values.size())
            throw IoError("checkpoint tensor " + t.name + ": shape/value count mismatch");
        for (real v : t.values) put_f32(out, v);
    }
    put_u64(out, fnv1a64(out.data(), out.size()));
    write_bytes(path, out);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    Reader rd(read_bytes(path), path);
    if (rd.bytes().size() < 8) throw IoError(path.string() + ": truncated file");
    std::uint64_t stored_sum;
    {
        // checksum is over everything before the final 8 bytes
        const std::string& b = rd.bytes();
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[b.size() - 8 + i])) << (8 * i);
        stored_sum = v;
        std::uint64_t actual = fnv1a64(b.data(), b.size() - 8);
        if (actual != stored_sum)
            throw IoError(path.string() + ": checksum mismatch");
    }
    rd.expect_magic("LYTC1");
    CheckpointData ckpt;
    ckpt.config = rd.str(rd.u32());
    std::uint32_t count = rd.u32();
    ckpt.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = rd.str(rd.u32());
        std::uint32_t ndim = rd.u32();
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            t.shape.push_back(rd.u32());
            n *= t.shape.back();
        }
        t.values.resize(n);
        for (std::size_t j = 0; j < n; ++j) t.values[j] = rd.f32();
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace lyt
