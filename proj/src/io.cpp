#include "manifold_id/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "manifold_id/errors.hpp"

namespace manifold_id {

namespace {

constexpr char kMagic[4] = {0x45, 0x4D, 0x42, 0x31};  // "EMB1"
constexpr std::size_t kHeaderBytes = 12;

std::uint32_t read_u32le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32le(const unsigned char* b) {
    std::uint32_t bits = read_u32le(b);
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
}

void write_f32le(std::ostream& out, float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    write_u32le(out, bits);
}

std::string read_all_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (!in.good() && !in.eof()) throw IoError("read failure on " + path.string());
    return buffer.str();
}

EmbeddingMatrix parse_emb1(const std::string& bytes, const std::string& name) {
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kHeaderBytes)
        throw FormatError(name + ": truncated EMB1 header at byte offset " +
                          std::to_string(bytes.size()));
    std::uint32_t m = read_u32le(data + 4);
    std::uint32_t p = read_u32le(data + 8);
    if (m == 0 || p == 0)
        throw FormatError(name + ": EMB1 shape " + std::to_string(m) + "x" +
                          std::to_string(p) + " must be positive (byte offset 4)");
    std::uint64_t expected = kHeaderBytes + 4ull * m * p;
    if (bytes.size() != expected)
        throw FormatError(name + ": EMB1 shape " + std::to_string(m) + "x" +
                          std::to_string(p) + " needs " + std::to_string(expected) +
                          " bytes, file has " + std::to_string(bytes.size()) +
                          " (mismatch at byte offset " +
                          std::to_string(std::min<std::uint64_t>(bytes.size(), expected)) + ")");
    EmbeddingMatrix Z(m, p);
    std::size_t offset = kHeaderBytes;
    for (std::uint32_t i = 0; i < m; ++i) {
        for (std::uint32_t j = 0; j < p; ++j, offset += 4) {
            float v = read_f32le(data + offset);
            if (!std::isfinite(v))
                throw FormatError(name + ": non-finite value at byte offset " +
                                  std::to_string(offset) + " (row " + std::to_string(i) +
                                  ", col " + std::to_string(j) + ")");
            Z(i, j) = static_cast<double>(v);
        }
    }
    return Z;
}

double parse_cell(const std::string& cell, const std::string& name, std::size_t line_no) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && std::isspace(static_cast<unsigned char>(*first))) ++first;
    while (last > first && std::isspace(static_cast<unsigned char>(last[-1]))) --last;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last)
        throw FormatError(name + ": line " + std::to_string(line_no) +
                          ": cannot parse '" + cell + "' as a number");
    if (!std::isfinite(value))
        throw FormatError(name + ": line " + std::to_string(line_no) +
                          ": non-finite value '" + cell + "'");
    return value;
}

EmbeddingMatrix parse_csv(const std::string& text, const std::string& name) {
    std::vector<std::vector<double>> rows;
    std::size_t cols = 0;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            std::string cell = line.substr(start, comma == std::string::npos
                                                      ? std::string::npos
                                                      : comma - start);
            row.push_back(parse_cell(cell, name, line_no));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (rows.empty()) {
            cols = row.size();
        } else if (row.size() != cols) {
            throw FormatError(name + ": line " + std::to_string(line_no) + ": expected " +
                              std::to_string(cols) + " columns, got " +
                              std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(name + ": no data rows");
    EmbeddingMatrix Z(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) Z(i, j) = rows[i][j];
    return Z;
}

} // namespace

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
    std::string bytes = read_all_bytes(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
        return parse_emb1(bytes, path.string());
    return parse_csv(bytes, path.string());
}

void write_embeddings(const EmbeddingMatrix& Z, const std::filesystem::path& path) {
    validate_embeddings(Z);
    if (Z.rows() > 0xFFFFFFFFll || Z.cols() > 0xFFFFFFFFll)
        throw InvalidArgument("matrix too large for EMB1 header");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    write_u32le(out, static_cast<std::uint32_t>(Z.rows()));
    write_u32le(out, static_cast<std::uint32_t>(Z.cols()));
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
        for (Eigen::Index j = 0; j < Z.cols(); ++j)
            write_f32le(out, static_cast<float>(Z(i, j)));
    if (!out.good()) throw IoError("write failure on " + path.string());
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
            trimmed.pop_back();
        std::size_t first = 0;
        while (first < trimmed.size() && std::isspace(static_cast<unsigned char>(trimmed[first])))
            ++first;
        trimmed = trimmed.substr(first);
        if (trimmed.empty()) continue;
        int value = 0;
        auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
        if (ec != std::errc() || ptr != trimmed.data() + trimmed.size() || value < 0)
            throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                              ": labels must be nonnegative integers, got '" + line + "'");
        labels.push_back(value);
    }
    if (labels.empty()) throw FormatError(path.string() + ": no labels");
    return labels;
}

void write_labels(const std::vector<int>& labels, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (int label : labels) {
        if (label < 0) throw InvalidArgument("labels must be nonnegative");
        out << label << '\n';
    }
    if (!out.good()) throw IoError("write failure on " + path.string());
}

} // namespace manifold_id
