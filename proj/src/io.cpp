#include "ficon/io.hpp"

#include <cstdio>
#include <fstream>

namespace ficon {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open output file " + path.string());
    os << header << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) os << ",";
            os << row[i];
        }
        os << "\n";
    }
    if (!os) throw ConfigError("write failed for " + path.string());
}

void write_field_csv(const std::filesystem::path& path, const Grid& grid,
                     const SpaceTimeField& f) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(size_t(f.nt) * f.nx);
    for (int k = 0; k < f.nt; ++k)
        for (int i = 0; i < f.nx; ++i)
            rows.push_back({format_double(grid.t(k)), format_double(grid.x[i]),
                            format_double(f.at(k, i))});
    write_csv(path, "x0,x1,value", rows);
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open output file " + path.string());
    os << j.dump(2) << "\n";
    if (!os) throw ConfigError("write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open output file " + path.string());
    os << text;
}

std::string content_hash(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot hash missing file " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!is) break;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void write_manifest(const std::filesystem::path& out_dir,
                    const nlohmann::ordered_json& config_echo,
                    const std::vector<std::filesystem::path>& files,
                    double wall_seconds) {
    nlohmann::ordered_json m;
    m["config"] = config_echo;
    nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
    for (const auto& f : files) hashes[f.filename().string()] = content_hash(f);
    m["files"] = hashes;
    m["wall_seconds"] = wall_seconds;
    write_json(out_dir / "manifest.json", m);
}

}  // namespace ficon
