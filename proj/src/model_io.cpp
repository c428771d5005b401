#include "ldmres/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace ldmres {

namespace {

constexpr char kMagic[4] = {'L', 'D', 'M', 'R'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back((unsigned char)(v & 0xFF));
    out.push_back((unsigned char)((v >> 8) & 0xFF));
    out.push_back((unsigned char)((v >> 16) & 0xFF));
    out.push_back((unsigned char)((v >> 24) & 0xFF));
}

void put_f32(std::vector<unsigned char>& out, float f) {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        if (pos_ + 4 > size_)
            throw ModelFileError(ModelFileStatus::Truncated, "model file: truncated record");
        std::uint32_t v = std::uint32_t(data_[pos_]) | (std::uint32_t(data_[pos_ + 1]) << 8) |
                          (std::uint32_t(data_[pos_ + 2]) << 16) |
                          (std::uint32_t(data_[pos_ + 3]) << 24);
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string bytes(std::size_t n) {
        if (pos_ + n > size_)
            throw ModelFileError(ModelFileStatus::Truncated, "model file: truncated record");
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return size_ - pos_; }

private:
    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace

std::int64_t model_file_size(const Network& net) {
    std::int64_t size = 4 + 4 + 6 * 4;  // magic, version, config block
    for (const Param& p : net.store)
        size += 4 + std::int64_t(p.name.size()) + 4 + 4 * 4 + 4 * p.value.dims().numel();
    return size + 4;  // crc
}

void save_model(const Network& net, const std::string& path) {
    std::vector<unsigned char> buf;
    buf.reserve(std::size_t(model_file_size(net)));

    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kModelFormatVersion);
    put_u32(buf, std::uint32_t(net.config.in_channels));
    put_u32(buf, std::uint32_t(net.config.num_classes));
    put_u32(buf, std::uint32_t(net.config.stem_width));
    for (int wdt : net.config.stage_widths)
        put_u32(buf, std::uint32_t(wdt));

    for (const Param& p : net.store) {
        put_u32(buf, std::uint32_t(p.name.size()));
        buf.insert(buf.end(), p.name.begin(), p.name.end());
        put_u32(buf, 4);
        const Shape4 d = p.value.dims();
        put_u32(buf, std::uint32_t(d.n));
        put_u32(buf, std::uint32_t(d.c));
        put_u32(buf, std::uint32_t(d.h));
        put_u32(buf, std::uint32_t(d.w));
        for (std::size_t i = 0; i < p.value.size(); ++i)
            put_f32(buf, p.value[i]);
    }

    const std::uint32_t crc = std::uint32_t(crc32(0L, buf.data(), uInt(buf.size())));
    put_u32(buf, crc);

    if (std::int64_t(buf.size()) != model_file_size(net))
        throw IoError("model file size mismatch against precomputed layout");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write model file: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out)
        throw IoError("short write: " + path);
}

Network load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open model file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw ModelFileError(ModelFileStatus::BadMagic, path + ": bad magic");
    if (buf.size() < 4 + 4 + 6 * 4 + 4)
        throw ModelFileError(ModelFileStatus::Truncated, path + ": file too short");

    const std::size_t body = buf.size() - 4;
    const std::uint32_t want_crc = std::uint32_t(buf[body]) | (std::uint32_t(buf[body + 1]) << 8) |
                                   (std::uint32_t(buf[body + 2]) << 16) |
                                   (std::uint32_t(buf[body + 3]) << 24);
    const std::uint32_t got_crc = std::uint32_t(crc32(0L, buf.data(), uInt(body)));
    if (want_crc != got_crc)
        throw ModelFileError(ModelFileStatus::CrcMismatch, path + ": CRC mismatch");

    Reader r(buf.data(), body);
    r.bytes(4);  // magic, already checked
    const std::uint32_t version = r.u32();
    if (version != kModelFormatVersion)
        throw ModelFileError(ModelFileStatus::VersionMismatch,
                             path + ": unsupported format version " + std::to_string(version));

    NetworkConfig config;
    config.in_channels = int(r.u32());
    config.num_classes = int(r.u32());
    config.stem_width = int(r.u32());
    for (int i = 0; i < 3; ++i)
        config.stage_widths[std::size_t(i)] = int(r.u32());

    Network net = build_network(config);

    std::vector<bool> seen(std::size_t(net.store.size()), false);
    while (r.remaining() > 0) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        if (rank != 4)
            throw ModelFileError(ModelFileStatus::BadRecord,
                                 path + ": tensor '" + name + "' has rank " + std::to_string(rank));
        Shape4 d;
        d.n = int(r.u32());
        d.c = int(r.u32());
        d.h = int(r.u32());
        d.w = int(r.u32());

        const int idx = net.store.find(name);
        if (idx < 0)
            throw ModelFileError(ModelFileStatus::BadRecord, path + ": unknown tensor '" + name + "'");
        if (seen[std::size_t(idx)])
            throw ModelFileError(ModelFileStatus::BadRecord, path + ": duplicate tensor '" + name + "'");
        Tensor4& t = net.store.tensor(idx);
        if (!(t.dims() == d))
            throw ModelFileError(ModelFileStatus::BadRecord,
                                 path + ": tensor '" + name + "' dims " + d.str() +
                                 " do not match network " + t.dims().str());
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = r.f32();
        seen[std::size_t(idx)] = true;
    }

    for (int i = 0; i < net.store.size(); ++i)
        if (!seen[std::size_t(i)])
            throw ModelFileError(ModelFileStatus::BadRecord,
                                 path + ": missing tensor '" + net.store[i].name + "'");
    return net;
}

}  // namespace ldmres
