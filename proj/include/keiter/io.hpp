#pragma once

// Byte-stable CSV rendering and SHA-256 checksums. Needs OpenSSL::Crypto.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <openssl/evp.h>

#include "keiter/error.hpp"

namespace keiter::io {

// 17 significant digits, shortest exponent form chosen by to_chars
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

using Cell = std::variant<double, long long, std::string>;

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(std::initializer_list<Cell> cells) { row(std::vector<Cell>(cells)); }
    void row(const std::vector<Cell>& cells) {
        if (cells.size() != header_.size()) throw Error(Errc::invalid_argument, "CSV row width mismatch");
        rows_.push_back(cells);
    }

    std::size_t size() const { return rows_.size(); }

    std::string str() const {
        std::string out;
        join(out, header_);
        for (const auto& r : rows_) {
            std::vector<std::string> cells;
            for (const auto& c : r) {
                if (auto d = std::get_if<double>(&c)) cells.push_back(fmt(*d));
                else if (auto i = std::get_if<long long>(&c)) cells.push_back(std::to_string(*i));
                else cells.push_back(std::get<std::string>(c));
            }
            join(out, cells);
        }
        return out;
    }

private:
    static void join(std::string& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io_error, "cannot write " + p.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(Errc::io_error, "short write to " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw Error(Errc::io_error, "cannot read " + p.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(Errc::io_error, "SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

}  // namespace keiter::io
