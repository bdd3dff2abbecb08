#include "pairsim/tagstream.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "pairsim/errors.hpp"

namespace pairsim {

bool is_time_sorted(const TagStream& tags) {
    return std::is_sorted(tags.begin(), tags.end(), [](const TimeTag& a, const TimeTag& b) {
        return a.time_ps < b.time_ps;
    });
}

void write_tags_csv(const std::filesystem::path& path, const TagStream& tags,
                    const FileMeta* meta) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    if (meta != nullptr) {
        out << "# pairsim tags version=" << meta->version << " config_hash=" << meta->config_hash
            << " seed=" << meta->seed << "\n";
    }
    out << "time_ps,channel\n";
    for (const TimeTag& t : tags) {
        out << t.time_ps << ',' << static_cast<unsigned>(t.channel) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TagStream read_tags_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    TagStream tags;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("time_ps", 0) == 0) continue; // header
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": missing comma");
        }
        std::int64_t t = 0;
        unsigned ch = 0;
        const char* b = line.data();
        auto r1 = std::from_chars(b, b + comma, t);
        auto r2 = std::from_chars(b + comma + 1, b + line.size(), ch);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} || ch > 2) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad tag record");
        }
        tags.push_back({t, static_cast<TagChannel>(ch)});
    }
    return tags;
}

void write_tags_binary(const std::filesystem::path& path, const TagStream& tags) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    std::array<char, 9> rec{};
    for (const TimeTag& t : tags) {
        std::uint64_t u = static_cast<std::uint64_t>(t.time_ps);
        for (int i = 0; i < 8; ++i) rec[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
        rec[8] = static_cast<char>(t.channel);
        out.write(rec.data(), rec.size());
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TagStream read_tags_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const std::streamoff size = in.tellg();
    if (size % 9 != 0) {
        throw IoError("'" + path.string() + "': size is not a multiple of the 9-byte record");
    }
    in.seekg(0);
    TagStream tags(static_cast<std::size_t>(size / 9));
    std::array<char, 9> rec{};
    for (TimeTag& t : tags) {
        in.read(rec.data(), rec.size());
        if (!in) throw IoError("short read from '" + path.string() + "'");
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) {
            u |= static_cast<std::uint64_t>(static_cast<unsigned char>(rec[i])) << (8 * i);
        }
        const unsigned ch = static_cast<unsigned char>(rec[8]);
        if (ch > 2) throw IoError("'" + path.string() + "': invalid channel byte");
        t.time_ps = static_cast<std::int64_t>(u);
        t.channel = static_cast<TagChannel>(ch);
    }
    return tags;
}

void write_tags(const std::filesystem::path& path, const TagStream& tags, const FileMeta* meta) {
    if (path.extension() == ".bin") {
        write_tags_binary(path, tags);
    } else {
        write_tags_csv(path, tags, meta);
    }
}

TagStream read_tags(const std::filesystem::path& path) {
    if (path.extension() == ".bin") return read_tags_binary(path);
    return read_tags_csv(path);
}

} // namespace pairsim
