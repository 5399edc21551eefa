// SPDX-License-Identifier: Apache-2.0

#include "sc3/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <sstream>

#include "sc3/types.hpp"

namespace sc3::io {

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a(bytes));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()), path_(path.string()) {
    if (!out_) throw Error("cannot write '" + path_ + "'");
    for (const auto& h : header) cell(h);
    end_row();
}

void CsvWriter::sep() {
    if (filled_ == columns_) throw Error(path_ + ": row has more cells than the header");
    if (filled_ > 0) out_ << ',';
    ++filled_;
}

CsvWriter& CsvWriter::cell(double v) {
    sep();
    out_ << format_number(v);
    return *this;
}

CsvWriter& CsvWriter::cell(std::int64_t v) {
    sep();
    out_ << v;
    return *this;
}

CsvWriter& CsvWriter::cell(std::size_t v) {
    sep();
    out_ << v;
    return *this;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
    sep();
    if (v.find_first_of(",\"\n") == std::string::npos) {
        out_ << v;
    } else {
        out_ << '"';
        for (char c : v) {
            if (c == '"') out_ << '"';
            out_ << c;
        }
        out_ << '"';
    }
    return *this;
}

void CsvWriter::end_row() {
    if (filled_ != columns_) throw Error(path_ + ": row has fewer cells than the header");
    out_ << '\n';
    filled_ = 0;
    if (!out_) throw Error("write failed on '" + path_ + "'");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

void write_pgm(const std::filesystem::path& path, std::size_t nx, std::size_t ny, const std::vector<double>& values,
               const nlohmann::json& sidecar) {
    if (values.size() != nx * ny) throw InvalidArgument("write_pgm: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "P5\n" << nx << ' ' << ny << "\n255\n";
    std::string row(nx, '\0');
    for (std::size_t iy = ny; iy-- > 0;) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double v = std::clamp(values[iy * nx + ix], 0.0, 1.0);
            row[ix] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
        }
        out.write(row.data(), static_cast<std::streamsize>(nx));
    }
    if (!out) throw Error("write failed on '" + path.string() + "'");
    auto side = sidecar;
    side["width"] = nx;
    side["height"] = ny;
    side["max_value"] = 255;
    side["row_order"] = "top row is the largest y";
    write_json(path.string() + ".json", side);
}

void write_image(const std::filesystem::path& path, const sar::SarImage& img) {
    const auto& g = img.grid;
    nlohmann::json side{
        {"origin", {g.origin.x(), g.origin.y()}},
        {"pixel", g.pixel},
        {"extent", {g.origin.x() + g.pixel * static_cast<double>(g.nx), g.origin.y() + g.pixel * static_cast<double>(g.ny)}},
        {"plane_height", g.height},
        {"scale", "linear intensity, peak = 255"},
        {"peak_value", img.peak_value},
    };
    write_pgm(path, g.nx, g.ny, img.intensity, side);
}

void write_occupancy(const std::filesystem::path& path, const scene::OccupancyGrid& grid) {
    std::vector<double> v(grid.cells.begin(), grid.cells.end());
    nlohmann::json side{
        {"origin", {grid.origin.x(), grid.origin.y()}},
        {"pixel", grid.cell},
        {"extent", {grid.origin.x() + grid.cell * static_cast<double>(grid.nx),
                    grid.origin.y() + grid.cell * static_cast<double>(grid.ny)}},
        {"scale", "255 = occupied"},
    };
    write_pgm(path, grid.nx, grid.ny, v, side);
}

std::vector<double> read_pgm(const std::filesystem::path& path, std::size_t& nx, std::size_t& ny) {
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int maxval = 0;
    in >> magic >> nx >> ny >> maxval;
    if (!in || magic != "P5" || maxval != 255) throw Error("'" + path.string() + "' is not an 8-bit binary PGM");
    in.get();
    std::vector<double> v(nx * ny);
    std::string row(nx, '\0');
    for (std::size_t iy = ny; iy-- > 0;) {
        in.read(row.data(), static_cast<std::streamsize>(nx));
        if (!in) throw Error("'" + path.string() + "' is truncated");
        for (std::size_t ix = 0; ix < nx; ++ix) v[iy * nx + ix] = static_cast<unsigned char>(row[ix]) / 255.0;
    }
    return v;
}

}  // namespace sc3::io
