#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dacglm/combine.hpp"

namespace dacglm {

using json = nlohmann::json;

struct CsvSchema {
    std::string response = "y";
    /// Empty: every other numeric column.
    std::vector<std::string> features;
};

/// Reads a headered CSV into a Dataset. Throws DataError naming the row
/// (1-based, counting data rows) and column on parse failures or non-finite cells.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

void write_csv(const std::filesystem::path& path, const Dataset& data,
               const std::string& response_name);

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

struct ShardEntry {
    std::string path;  ///< relative to the manifest's directory, or absolute
    long rows = 0;
    std::string checksum;
};

struct ShardManifest {
    CsvSchema schema;
    std::vector<ShardEntry> shards;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ShardEntry& e) const;
};

ShardManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const ShardManifest& manifest);

/// Loads one shard, verifying its row count and checksum.
Dataset load_shard(const ShardManifest& manifest, std::size_t index);

json to_json(const BatchSummary& s);
BatchSummary batch_summary_from_json(const json& j);
BatchSummary read_batch_summary(const std::filesystem::path& path);
void write_batch_summary(const std::filesystem::path& path, const BatchSummary& s);

/// CombinedFit with its Wald table at `level`.
json to_json(const CombinedFit& fit, double level);

/// Coefficient table: name,estimate,se,ci_lo,ci_hi,p_value.
std::string coefficient_csv(const CombinedFit& fit, double level);

}  // namespace dacglm
