#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "demsr/errors.hpp"
#include "demsr/grid.hpp"

namespace demsr {

// Loaders reject finite heights outside this range unless they equal the
// nodata sentinel.
inline constexpr float kMinHeight = -500.0f;
inline constexpr float kMaxHeight = 9000.0f;
inline constexpr float kDefaultNodata = -9999.0f;

// Georeferenced elevation grid. Row 0 is the northernmost row; origin is the
// lower-left corner of the covered extent, in meters.
struct DemTile {
    int rows = 0;
    int cols = 0;
    double cellsize = 1.0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    float nodata_value = kDefaultNodata;
    std::vector<float> heights; // row-major, rows*cols entries

    float& at(int r, int c) { return heights[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return heights[static_cast<std::size_t>(r) * cols + c]; }

    bool is_nodata(int r, int c) const { return at(r, c) == nodata_value; }

    bool has_nodata() const {
        for (float h : heights)
            if (h == nodata_value) return true;
        return false;
    }

    void validate() const {
        if (rows <= 0 || cols <= 0) throw ArgumentError("DemTile: rows and cols must be positive");
        if (!(cellsize > 0.0)) throw ArgumentError("DemTile: cellsize must be positive");
        if (heights.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw ArgumentError("DemTile: heights count does not match rows*cols");
    }

    bool operator==(const DemTile& o) const {
        if (rows != o.rows || cols != o.cols || cellsize != o.cellsize ||
            origin_x != o.origin_x || origin_y != o.origin_y)
            return false;
        if (std::bit_cast<std::uint32_t>(nodata_value) != std::bit_cast<std::uint32_t>(o.nodata_value))
            return false;
        if (heights.size() != o.heights.size()) return false;
        return std::memcmp(heights.data(), o.heights.data(), heights.size() * sizeof(float)) == 0;
    }
};

inline Grid grid_from_tile(const DemTile& t) {
    Grid g(t.rows, t.cols);
    for (std::size_t i = 0; i < t.heights.size(); ++i) g.v[i] = static_cast<double>(t.heights[i]);
    return g;
}

// New tile with `like`'s georeferencing and the grid's values cast to f32.
inline DemTile tile_from_grid(const Grid& g, const DemTile& like) {
    DemTile t;
    t.rows = g.rows;
    t.cols = g.cols;
    t.cellsize = like.cellsize;
    t.origin_x = like.origin_x;
    t.origin_y = like.origin_y;
    t.nodata_value = like.nodata_value;
    t.heights.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) t.heights[i] = static_cast<float>(g.v[i]);
    return t;
}

namespace detail {

inline void check_height_range(float h, float nodata, std::size_t index, const std::string& path,
                               bool text_format) {
    if (h == nodata) return;
    if (!std::isfinite(h) || h < kMinHeight || h > kMaxHeight) {
        const std::string msg = path + ": height sample " + std::to_string(index + 1) +
                                " out of range [-500, 9000] and not nodata";
        if (text_format) throw ParseError(msg);
        throw FormatError(msg);
    }
}

// Shortest decimal that reparses to the same value.
inline std::string fmt_float(float x) {
    std::array<char, 48> buf;
    auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), r.ptr);
}

inline std::string fmt_double(double x) {
    std::array<char, 48> buf;
    auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), r.ptr);
}

struct Tokenizer {
    std::string_view text;
    std::size_t pos = 0;

    std::string_view next() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos >= text.size()) return {};
        std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return text.substr(start, pos - start);
    }
};

template <typename T>
bool parse_number(std::string_view token, T& out) {
    auto r = std::from_chars(token.data(), token.data() + token.size(), out);
    return r.ec == std::errc() && r.ptr == token.data() + token.size();
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return data;
}

inline void write_file(const std::string& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + path + "'");
}

// Little-endian scalar append/peel, independent of host byte order.
template <typename T>
void put_le(std::string& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> raw;
    std::memcpy(raw.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = sizeof(T); i-- > 0;) out.push_back(static_cast<char>(raw[i]));
    } else {
        out.append(reinterpret_cast<const char*>(raw.data()), sizeof(T));
    }
}

template <typename T>
T get_le(std::string_view data, std::size_t& off, const char* field) {
    if (off + sizeof(T) > data.size())
        throw FormatError(std::string("DEM1: truncated payload reading ") + field);
    std::array<unsigned char, sizeof(T)> raw;
    std::memcpy(raw.data(), data.data() + off, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    T v;
    std::memcpy(&v, raw.data(), sizeof(T));
    off += sizeof(T);
    return v;
}

} // namespace detail

// ESRI ASCII grid reader. Header keys are case-insensitive and may appear in
// any order; NODATA_value is optional and defaults to -9999.
inline DemTile read_asc(const std::string& path) {
    const std::string data = detail::read_file(path);
    detail::Tokenizer tok{data};

    DemTile tile;
    tile.nodata_value = kDefaultNodata;
    bool have_ncols = false, have_nrows = false, have_xll = false, have_yll = false,
         have_cell = false;

    std::string_view first_data_token;
    while (true) {
        std::string_view t = tok.next();
        if (t.empty()) throw ParseError(path + ": missing grid data after header");
        const char c = t.front();
        if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_')) {
            first_data_token = t;
            break;
        }
        const std::string key = detail::lower(t);
        std::string_view vt = tok.next();
        if (vt.empty()) throw ParseError(path + ": header key '" + key + "' has no value");
        auto parse_value = [&](auto& out) {
            if (!detail::parse_number(vt, out))
                throw ParseError(path + ": header key '" + key + "' has non-numeric value '" +
                                 std::string(vt) + "'");
        };
        if (key == "ncols") {
            parse_value(tile.cols);
            have_ncols = true;
        } else if (key == "nrows") {
            parse_value(tile.rows);
            have_nrows = true;
        } else if (key == "xllcorner") {
            parse_value(tile.origin_x);
            have_xll = true;
        } else if (key == "yllcorner") {
            parse_value(tile.origin_y);
            have_yll = true;
        } else if (key == "cellsize") {
            parse_value(tile.cellsize);
            have_cell = true;
        } else if (key == "nodata_value") {
            parse_value(tile.nodata_value);
        } else {
            throw ParseError(path + ": unknown header key '" + key + "'");
        }
    }

    if (!have_ncols) throw ParseError(path + ": missing header key 'ncols'");
    if (!have_nrows) throw ParseError(path + ": missing header key 'nrows'");
    if (!have_xll) throw ParseError(path + ": missing header key 'xllcorner'");
    if (!have_yll) throw ParseError(path + ": missing header key 'yllcorner'");
    if (!have_cell) throw ParseError(path + ": missing header key 'cellsize'");
    if (tile.rows <= 0 || tile.cols <= 0)
        throw ParseError(path + ": nrows and ncols must be positive");
    if (!(tile.cellsize > 0.0)) throw ParseError(path + ": cellsize must be positive");

    const std::size_t expected =
        static_cast<std::size_t>(tile.rows) * static_cast<std::size_t>(tile.cols);
    tile.heights.reserve(expected);

    std::string_view t = first_data_token;
    std::size_t count = 0;
    while (!t.empty()) {
        if (count == expected)
            throw ParseError(path + ": too many data values, expected " + std::to_string(expected));
        float h;
        if (!detail::parse_number(t, h))
            throw ParseError(path + ": non-numeric token '" + std::string(t) + "' at data position " +
                             std::to_string(count + 1) + " (row " + std::to_string(count / tile.cols) +
                             ", col " + std::to_string(count % tile.cols) + ")");
        detail::check_height_range(h, tile.nodata_value, count, path, true);
        tile.heights.push_back(h);
        ++count;
        t = tok.next();
    }
    if (count != expected)
        throw ParseError(path + ": expected " + std::to_string(expected) + " data values, got " +
                         std::to_string(count));
    return tile;
}

// Heights are printed in shortest round-trip form, so read_asc(write_asc(t))
// restores every f32 bit pattern.
inline void write_asc(const DemTile& tile, const std::string& path) {
    tile.validate();
    std::string out;
    out.reserve(64 + tile.heights.size() * 8);
    out += "ncols " + std::to_string(tile.cols) + "\n";
    out += "nrows " + std::to_string(tile.rows) + "\n";
    out += "xllcorner " + detail::fmt_double(tile.origin_x) + "\n";
    out += "yllcorner " + detail::fmt_double(tile.origin_y) + "\n";
    out += "cellsize " + detail::fmt_double(tile.cellsize) + "\n";
    out += "NODATA_value " + detail::fmt_float(tile.nodata_value) + "\n";
    for (int r = 0; r < tile.rows; ++r) {
        for (int c = 0; c < tile.cols; ++c) {
            if (c) out += ' ';
            out += detail::fmt_float(tile.at(r, c));
        }
        out += '\n';
    }
    detail::write_file(path, out);
}

inline constexpr char kDem1Magic[4] = {'D', 'E', 'M', '1'};

// DEM1 layout, little-endian: magic "DEM1", u32 rows, u32 cols, f64 cellsize,
// f64 origin_x, f64 origin_y, f32 nodata_value, rows*cols f32 heights.
inline void write_bin(const DemTile& tile, const std::string& path) {
    tile.validate();
    std::string out;
    out.reserve(40 + tile.heights.size() * 4);
    out.append(kDem1Magic, 4);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tile.rows));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tile.cols));
    detail::put_le<double>(out, tile.cellsize);
    detail::put_le<double>(out, tile.origin_x);
    detail::put_le<double>(out, tile.origin_y);
    detail::put_le<float>(out, tile.nodata_value);
    for (float h : tile.heights) detail::put_le<float>(out, h);
    detail::write_file(path, out);
}

inline DemTile read_bin(const std::string& path) {
    const std::string data = detail::read_file(path);
    if (data.size() < 4 || std::memcmp(data.data(), kDem1Magic, 4) != 0)
        throw FormatError(path + ": bad magic, not a DEM1 file");
    std::size_t off = 4;
    DemTile tile;
    const auto rows = detail::get_le<std::uint32_t>(data, off, "rows");
    const auto cols = detail::get_le<std::uint32_t>(data, off, "cols");
    tile.cellsize = detail::get_le<double>(data, off, "cellsize");
    tile.origin_x = detail::get_le<double>(data, off, "origin_x");
    tile.origin_y = detail::get_le<double>(data, off, "origin_y");
    tile.nodata_value = detail::get_le<float>(data, off, "nodata_value");
    if (rows == 0 || cols == 0) throw FormatError(path + ": rows and cols must be positive");
    if (rows > (1u << 20) || cols > (1u << 20))
        throw FormatError(path + ": implausible grid dimensions");
    if (!(tile.cellsize > 0.0)) throw FormatError(path + ": cellsize must be positive");
    tile.rows = static_cast<int>(rows);
    tile.cols = static_cast<int>(cols);
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (data.size() - off < n * sizeof(float))
        throw FormatError(path + ": truncated payload, expected " + std::to_string(n) +
                          " height samples");
    if (data.size() - off > n * sizeof(float))
        throw FormatError(path + ": trailing bytes after height data");
    tile.heights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        tile.heights[i] = detail::get_le<float>(data, off, "heights");
        detail::check_height_range(tile.heights[i], tile.nodata_value, i, path, false);
    }
    return tile;
}

// Dispatch on extension: ".asc" text, anything else DEM1.
inline DemTile read_tile(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".asc") return read_asc(path);
    return read_bin(path);
}

inline void write_tile(const DemTile& tile, const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".asc")
        write_asc(tile, path);
    else
        write_bin(tile, path);
}

} // namespace demsr
