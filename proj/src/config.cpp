#include "attsolver/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "attsolver/errors.hpp"

namespace attsolver {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

} // namespace

std::vector<std::string> config_keys() {
    return {
        "system.id",        "system.masses",      "system.mass",      "system.spring_k",
        "system.k",         "system.m",           "system.l0",        "system.links",
        "system.g",         "data.dt_fine",       "data.dt_coarse",   "data.t_end",
        "data.test_dt_fine","data.train",         "data.val",         "data.test",
        "data.dir",         "solver.scheme",      "step.mode",        "model.d1",
        "model.h",          "model.skip",         "model.input_scaled",
        "model.train_activations",                "train.lr",         "train.epochs",
        "train.batch",      "train.c_n",          "train.teacher_forcing",
        "train.sigma",      "train.gaussian_noise",                   "train.optimizer",
        "train.cosine_decay",                     "run.seed",         "run.seeds",
        "run.out",          "run.jobs",           "experiment.fractions",
    };
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "system.id") {
        cfg.system.id = value;
    } else if (key == "system.masses") {
        cfg.system.masses = static_cast<int>(parse_int(key, value));
    } else if (key == "system.mass") {
        cfg.system.mass = parse_double(key, value);
    } else if (key == "system.spring_k") {
        cfg.system.spring_k = parse_double(key, value);
    } else if (key == "system.k") {
        cfg.system.k = parse_double(key, value);
    } else if (key == "system.m") {
        cfg.system.m = parse_double(key, value);
    } else if (key == "system.l0") {
        cfg.system.l0 = parse_double(key, value);
    } else if (key == "system.links") {
        cfg.system.links = static_cast<int>(parse_int(key, value));
    } else if (key == "system.g") {
        cfg.system.g = parse_double(key, value);
    } else if (key == "data.dt_fine") {
        cfg.data.dt_fine = parse_double(key, value);
    } else if (key == "data.dt_coarse") {
        cfg.data.dt_coarse = parse_double(key, value);
    } else if (key == "data.t_end") {
        cfg.data.t_end = parse_double(key, value);
    } else if (key == "data.test_dt_fine") {
        cfg.data.test_dt_fine = parse_double(key, value);
    } else if (key == "data.train") {
        cfg.data.train = static_cast<int>(parse_int(key, value));
    } else if (key == "data.val") {
        cfg.data.val = static_cast<int>(parse_int(key, value));
    } else if (key == "data.test") {
        cfg.data.test = static_cast<int>(parse_int(key, value));
    } else if (key == "data.dir") {
        cfg.data.dir = value;
    } else if (key == "solver.scheme") {
        cfg.scheme = scheme_from_name(value);
    } else if (key == "step.mode") {
        cfg.mode = step_mode_from_name(value);
    } else if (key == "model.d1") {
        cfg.model.d1 = static_cast<int>(parse_int(key, value));
    } else if (key == "model.h") {
        cfg.model.h = static_cast<int>(parse_int(key, value));
    } else if (key == "model.skip") {
        cfg.model.skip_connection = parse_bool(key, value);
    } else if (key == "model.input_scaled") {
        cfg.model.input_scaled = parse_bool(key, value);
    } else if (key == "model.train_activations") {
        cfg.model.train_activations = parse_bool(key, value);
    } else if (key == "train.lr") {
        cfg.train.lr = parse_double(key, value);
    } else if (key == "train.epochs") {
        cfg.train.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "train.batch") {
        cfg.train.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "train.c_n") {
        cfg.train.c_n = parse_double(key, value);
    } else if (key == "train.teacher_forcing") {
        cfg.train.teacher_forcing = parse_bool(key, value);
    } else if (key == "train.sigma") {
        cfg.train.sigma = parse_double(key, value);
    } else if (key == "train.gaussian_noise") {
        cfg.train.gaussian_noise = parse_bool(key, value);
    } else if (key == "train.optimizer") {
        if (value != "adam" && value != "sgd")
            throw ConfigError("config key 'train.optimizer': expected adam or sgd, got '" +
                              value + "'");
        cfg.train.optimizer = value;
    } else if (key == "train.cosine_decay") {
        cfg.train.cosine_decay = parse_bool(key, value);
    } else if (key == "run.seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
        cfg.train.seed = cfg.seed;
    } else if (key == "run.seeds") {
        cfg.seeds.clear();
        for (const std::string& item : split_list(value))
            cfg.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, item)));
        if (cfg.seeds.empty()) throw ConfigError("config key 'run.seeds': empty list");
    } else if (key == "run.out") {
        cfg.out = value;
    } else if (key == "run.jobs") {
        cfg.jobs = static_cast<int>(parse_int(key, value));
        cfg.train.jobs = cfg.jobs;
    } else if (key == "experiment.fractions") {
        cfg.fractions.clear();
        for (const std::string& item : split_list(value)) {
            const double f = parse_double(key, item);
            if (!(f > 0.0) || f > 1.0)
                throw ConfigError("config key 'experiment.fractions': fraction " + item +
                                  " not in (0, 1]");
            cfg.fractions.push_back(f);
        }
        if (cfg.fractions.empty())
            throw ConfigError("config key 'experiment.fractions': empty list");
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": empty key or value in '" + line + "'");
        apply_override(base, key, value);
    }
    // Mirror the shared worker knob into the training config.
    base.train.jobs = base.jobs;
    base.train.seed = base.seed;
    return base;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_config_text(buffer.str());
}

} // namespace attsolver
