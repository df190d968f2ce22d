#pragma once

// Artifact files. Binary artifacts are one line of JSON followed by a raw
// little-endian float64 payload; the header records the payload length.
// Every writer goes through a temporary file and a rename, so a crashed
// stage never leaves a truncated artifact under its final name.

#include "marc/time_series.hpp"
#include "marc/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace marc::io {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const json& value);
json read_json(const std::filesystem::path& path);

struct Blob {
    json header;
    std::vector<double> payload;
};

/// Adds "payload_doubles" to the header.
void write_blob(const std::filesystem::path& path, json header, std::span<const double> payload);
/// Throws IoError on a missing file, malformed header or short payload.
Blob read_blob(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const RowMatrix& m);
RowMatrix read_matrix(const std::filesystem::path& path);

/// Stored as a (size x (1 + dim)) matrix with the time stamp in column 0.
void write_series(const std::filesystem::path& path, const TimeSeries& s);
TimeSeries read_series(const std::filesystem::path& path);

/// Comma-separated text with a header row; values printed with 17 significant digits.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns, const RowMatrix& rows);
std::string format_double(double v);

}  // namespace marc::io
