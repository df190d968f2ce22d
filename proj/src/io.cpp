#include "marc/io.hpp"

#include "marc/error.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

namespace marc::io {

static_assert(std::endian::native == std::endian::little, "artifact payloads are little-endian float64");

namespace {

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    return tmp;
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& tmp) {
    if (tmp.has_parent_path()) std::filesystem::create_directories(tmp.parent_path());
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    return out;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = temp_sibling(path);
    {
        auto out = open_out(tmp);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    commit(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const std::filesystem::path& path, const json& value) { write_text(path, value.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_blob(const std::filesystem::path& path, json header, std::span<const double> payload) {
    header["payload_doubles"] = payload.size();
    const std::string line = header.dump() + "\n";
    const auto tmp = temp_sibling(path);
    {
        auto out = open_out(tmp);
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
        out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size_bytes()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    commit(tmp, path);
}

Blob read_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + " has no header line");
    Blob blob;
    try {
        blob.header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw IoError("malformed header in " + path.string() + ": " + e.what());
    }
    if (!blob.header.contains("payload_doubles")) throw IoError(path.string() + " header lacks payload_doubles");
    const auto count = blob.header.at("payload_doubles").get<std::size_t>();
    blob.payload.resize(count);
    in.read(reinterpret_cast<char*>(blob.payload.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) throw IoError(path.string() + " payload is truncated");
    return blob;
}

void write_matrix(const std::filesystem::path& path, const RowMatrix& m) {
    json h{{"format", "marc-matrix"}, {"rows", m.rows()}, {"cols", m.cols()}};
    write_blob(path, std::move(h), std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

RowMatrix read_matrix(const std::filesystem::path& path) {
    Blob b = read_blob(path);
    if (b.header.value("format", "") != "marc-matrix") throw IoError(path.string() + " is not a matrix artifact");
    const auto rows = b.header.at("rows").get<Eigen::Index>();
    const auto cols = b.header.at("cols").get<Eigen::Index>();
    if (static_cast<std::size_t>(rows * cols) != b.payload.size()) throw IoError(path.string() + " shape does not match payload");
    return Eigen::Map<const RowMatrix>(b.payload.data(), rows, cols);
}

void write_series(const std::filesystem::path& path, const TimeSeries& s) {
    RowMatrix m(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.dim() + 1));
    for (std::size_t i = 0; i < s.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = s.time(i);
    m.rightCols(static_cast<Eigen::Index>(s.dim())) = s.values();
    write_matrix(path, m);
}

TimeSeries read_series(const std::filesystem::path& path) {
    const RowMatrix m = read_matrix(path);
    if (m.cols() < 2) throw IoError(path.string() + " has no value columns");
    std::vector<double> t(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) t[static_cast<std::size_t>(i)] = m(i, 0);
    return TimeSeries(std::move(t), m.rightCols(m.cols() - 1));
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns, const RowMatrix& rows) {
    if (!columns.empty() && static_cast<Eigen::Index>(columns.size()) != rows.cols())
        throw DimensionError("CSV header has " + std::to_string(columns.size()) + " names for " +
                             std::to_string(rows.cols()) + " columns");
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
    if (!columns.empty()) out += "\n";
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            if (c) out += ',';
            out += format_double(rows(r, c));
        }
        out += '\n';
    }
    write_text(path, out);
}

}  // namespace marc::io
