#include "ldmres/config.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace ldmres {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct KvLine {
    std::string key, value;
    int lineno = 0;
};

long to_int(const KvLine& kv) {
    try {
        std::size_t used = 0;
        const long v = std::stol(kv.value, &used);
        if (used != kv.value.size()) throw std::invalid_argument(kv.value);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("config line " + std::to_string(kv.lineno) + ": '" + kv.key +
                          "' needs an integer, got '" + kv.value + "'");
    }
}

double to_real(const KvLine& kv) {
    try {
        std::size_t used = 0;
        const double v = std::stod(kv.value, &used);
        if (used != kv.value.size()) throw std::invalid_argument(kv.value);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("config line " + std::to_string(kv.lineno) + ": '" + kv.key +
                          "' needs a number, got '" + kv.value + "'");
    }
}

bool to_bool(const KvLine& kv) {
    if (kv.value == "true" || kv.value == "1") return true;
    if (kv.value == "false" || kv.value == "0") return false;
    throw ConfigError("config line " + std::to_string(kv.lineno) + ": '" + kv.key +
                      "' needs true/false, got '" + kv.value + "'");
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config: " + path);
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).lexically_normal().string();
    };

    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        KvLine kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
        if (kv.key.empty() || kv.value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");

        if (kv.key == "in_channels") cfg.network.in_channels = int(to_int(kv));
        else if (kv.key == "num_classes") cfg.network.num_classes = int(to_int(kv));
        else if (kv.key == "stem_width") cfg.network.stem_width = int(to_int(kv));
        else if (kv.key == "stage_widths") {
            std::array<int, 3> widths{};
            std::size_t start = 0;
            for (int i = 0; i < 3; ++i) {
                const std::size_t comma = kv.value.find(',', start);
                if ((i < 2) == (comma == std::string::npos))
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": stage_widths needs three comma-separated values");
                KvLine part{kv.key, trim(kv.value.substr(start, comma - start)), lineno};
                widths[std::size_t(i)] = int(to_int(part));
                start = comma + 1;
            }
            cfg.network.stage_widths = widths;
        }
        else if (kv.key == "seed") {
            cfg.network.seed = std::uint64_t(to_int(kv));
            cfg.train.seed = cfg.network.seed;
            cfg.train.augment.seed = cfg.network.seed + 1;
        }
        else if (kv.key == "manifest") cfg.manifest = resolve(kv.value);
        else if (kv.key == "epochs") cfg.train.epochs = int(to_int(kv));
        else if (kv.key == "batch_size") cfg.train.batch_size = int(to_int(kv));
        else if (kv.key == "lr") cfg.train.lr = float(to_real(kv));
        else if (kv.key == "lr_decay") cfg.train.lr_decay = float(to_real(kv));
        else if (kv.key == "split_ratio") cfg.train.split_ratio = to_real(kv);
        else if (kv.key == "checkpoint_every") cfg.train.checkpoint_every = int(to_int(kv));
        else if (kv.key == "checkpoint_prefix") cfg.train.checkpoint_prefix = resolve(kv.value);
        else if (kv.key == "patch_size") cfg.train.patch_size = int(to_int(kv));
        else if (kv.key == "augment") cfg.train.augment_enabled = to_bool(kv);
        else if (kv.key == "hflip") cfg.train.augment.hflip = to_bool(kv);
        else if (kv.key == "vflip") cfg.train.augment.vflip = to_bool(kv);
        else if (kv.key == "brightness") {
            const float d = float(to_real(kv));
            cfg.train.augment.brightness_lo = -d;
            cfg.train.augment.brightness_hi = d;
        }
        else if (kv.key == "contrast_lo") cfg.train.augment.contrast_lo = float(to_real(kv));
        else if (kv.key == "contrast_hi") cfg.train.augment.contrast_hi = float(to_real(kv));
        else if (kv.key == "rotation_min") cfg.train.augment.rotation_min_deg = float(to_real(kv));
        else if (kv.key == "rotation_max") cfg.train.augment.rotation_max_deg = float(to_real(kv));
        else if (kv.key == "model_out") cfg.model_out = resolve(kv.value);
        else if (kv.key == "history_out") cfg.train.history_path = resolve(kv.value);
        else
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                              kv.key + "'");
    }

    const AugmentPolicy& a = cfg.train.augment;
    if (a.brightness_lo > a.brightness_hi || a.contrast_lo > a.contrast_hi)
        throw ConfigError("config: empty brightness/contrast range");
    if (a.rotation_min_deg < 1.0f || a.rotation_max_deg > 360.0f ||
        a.rotation_min_deg > a.rotation_max_deg)
        throw ConfigError("config: rotation range must satisfy 1 <= min <= max <= 360");
    return cfg;
}

}  // namespace ldmres
