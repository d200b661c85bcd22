#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ficon/grid.hpp"

namespace ficon {

// Deterministic shortest round-trip formatting for CSV cells.
std::string format_double(double v);

// Writes an RFC-4180-style CSV ('.' decimal separator, '\n' line ends).
void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows);

// Long-format dump of a space-time field with header "x0,x1,value".
void write_field_csv(const std::filesystem::path& path, const Grid& grid,
                     const SpaceTimeField& f);

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

// FNV-1a 64-bit content hash of a file, as 16 hex digits.
std::string content_hash(const std::filesystem::path& path);

// Manifest: config echo, per-file content hashes, wall time.
void write_manifest(const std::filesystem::path& out_dir,
                    const nlohmann::ordered_json& config_echo,
                    const std::vector<std::filesystem::path>& files,
                    double wall_seconds);

}  // namespace ficon
