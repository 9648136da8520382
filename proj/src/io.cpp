#include "sbt/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sbt::io {

namespace {
std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}
std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}
} // namespace

std::vector<uint64_t> read_keys_text(const std::string& path) {
    auto in = open_in(path);
    std::vector<uint64_t> keys;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        keys.push_back(std::stoull(line));
    }
    return keys;
}

std::vector<uint64_t> read_keys_binary(const std::string& path, unsigned k) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    size_t rec = (k + 7) / 8;
    std::vector<uint64_t> keys;
    std::vector<char> buf(rec);
    while (in.read(buf.data(), static_cast<std::streamsize>(rec))) {
        uint64_t v = 0;
        for (size_t i = 0; i < rec; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[i])) << (8 * i);
        keys.push_back(v);
    }
    if (in.gcount() != 0) throw std::runtime_error("truncated binary key file: " + path);
    return keys;
}

void write_keys_text(const std::string& path, const std::vector<uint64_t>& keys) {
    auto out = open_out(path);
    for (uint64_t k : keys) out << k << '\n';
}

void write_keys_binary(const std::string& path, const std::vector<uint64_t>& keys, unsigned k) {
    auto out = open_out(path, std::ios::out | std::ios::binary);
    size_t rec = (k + 7) / 8;
    for (uint64_t v : keys) {
        char buf[8];
        for (size_t i = 0; i < rec; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out.write(buf, static_cast<std::streamsize>(rec));
    }
}

std::vector<uint8_t> read_bytes(const std::string& path) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
}

std::vector<size_t> read_positions(const std::string& path) {
    auto in = open_in(path);
    std::vector<size_t> pos;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        pos.push_back(std::stoull(line));
    }
    return pos;
}

void write_text(const std::string& path, const std::string& content) {
    auto out = open_out(path);
    out << content;
}

std::string read_text(const std::string& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace sbt::io
