#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pairsim {

// Detector channels of a time-tag stream.
enum class TagChannel : std::uint8_t { idler = 0, sig1 = 1, sig2 = 2 };

struct TimeTag {
    std::int64_t time_ps = 0; // picoseconds from the start of the run
    TagChannel channel = TagChannel::idler;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

using TagStream = std::vector<TimeTag>;

// Provenance header written into tag files (CSV comments; binary files get a
// JSON sidecar written by the pipeline instead).
struct FileMeta {
    std::string version;
    std::string config_hash;
    std::uint64_t seed = 0;
};

bool is_time_sorted(const TagStream& tags);

// CSV: '#' comment lines, then a "time_ps,channel" header, then one tag per row.
void write_tags_csv(const std::filesystem::path& path, const TagStream& tags,
                    const FileMeta* meta = nullptr);
TagStream read_tags_csv(const std::filesystem::path& path);

// Fixed-width binary: little-endian int64 picoseconds + uint8 channel, 9 bytes
// per record, no header.
void write_tags_binary(const std::filesystem::path& path, const TagStream& tags);
TagStream read_tags_binary(const std::filesystem::path& path);

// Dispatch on extension: ".csv" / ".bin".
void write_tags(const std::filesystem::path& path, const TagStream& tags,
                const FileMeta* meta = nullptr);
TagStream read_tags(const std::filesystem::path& path);

} // namespace pairsim
