#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ldmres {

struct ManifestEntry {
    std::string image;
    std::string mask;
    std::optional<std::string> fov;  // field-of-view mask restricting evaluation
};

// Tab-separated lines: image<TAB>mask[<TAB>fov]. '#' lines and blank lines
// are skipped; relative paths resolve against the manifest's directory.
// Every referenced file must exist.
std::vector<ManifestEntry> load_manifest(const std::string& path);

}  // namespace ldmres
