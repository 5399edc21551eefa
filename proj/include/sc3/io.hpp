// SPDX-License-Identifier: Apache-2.0
//
// io.hpp - output files: CSV tables, 8-bit PGM images with a JSON sidecar,
// and the run manifest
//
// Nothing written here depends on wall-clock time or the thread count, so a
// rerun with the same config and seed gives byte-identical files.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sc3/sar.hpp"
#include "sc3/scene.hpp"

namespace sc3::io {

std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);
/// FNV-1a of a file's bytes. Throws Error if it cannot be read.
std::string file_hash(const std::filesystem::path& path);

/// Fixed 10-significant-digit formatting for every number.
std::string format_number(double v);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(double v);
    CsvWriter& cell(std::int64_t v);
    CsvWriter& cell(std::size_t v);
    CsvWriter& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
    CsvWriter& cell(const std::string& v);
    CsvWriter& cell(const char* v) { return cell(std::string(v)); }
    void end_row();

private:
    void sep();

    std::ofstream out_;
    std::size_t columns_ = 0;
    std::size_t filled_ = 0;
    std::string path_;
};

/// Binary PGM, top row = largest y. Values are clamped to [0, 1] and scaled to
/// 0..255. The sidecar (path + ".json") records the georeference.
void write_pgm(const std::filesystem::path& path, std::size_t nx, std::size_t ny, const std::vector<double>& values,
               const nlohmann::json& sidecar);
void write_image(const std::filesystem::path& path, const sar::SarImage& img);
void write_occupancy(const std::filesystem::path& path, const scene::OccupancyGrid& grid);

/// Reads a PGM back as values in [0, 1]; used by tests and tools.
std::vector<double> read_pgm(const std::filesystem::path& path, std::size_t& nx, std::size_t& ny);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace sc3::io
