#include "ldmres/manifest.hpp"

#include <filesystem>
#include <fstream>

#include "ldmres/errors.hpp"

namespace fs = std::filesystem;

namespace ldmres {

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute()) return path.string();
    return (base / path).lexically_normal().string();
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open manifest: " + path);
    const fs::path base = fs::path(path).parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cols.size() < 2 || cols.size() > 3 || cols[0].empty() || cols[1].empty())
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 2 or 3 tab-separated paths, got " +
                             std::to_string(cols.size()) + " column(s)");

        ManifestEntry e;
        e.image = resolve(base, cols[0]);
        e.mask = resolve(base, cols[1]);
        if (cols.size() == 3 && !cols[2].empty()) e.fov = resolve(base, cols[2]);

        for (const std::string* p : {&e.image, &e.mask}) {
            if (!fs::exists(*p))
                throw IoError(path + ":" + std::to_string(lineno) + ": missing file " + *p);
        }
        if (e.fov && !fs::exists(*e.fov))
            throw IoError(path + ":" + std::to_string(lineno) + ": missing file " + *e.fov);

        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace ldmres
