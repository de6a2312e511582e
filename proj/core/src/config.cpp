#include "walkfeat/config.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace walkfeat {

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
    }
}

int to_int(const std::string& key, const std::string& value) {
    double v = to_double(key, value);
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
    return i;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + value +
                          "'");
    }
}

}  // namespace

void validate_train_config(const TrainConfig& c) {
    if (c.preset != "desk" && c.preset != "paper")
        throw ConfigError("preset must be 'desk' or 'paper'");
    if (c.precision != "f32" && c.precision != "f64")
        throw ConfigError("precision must be 'f32' or 'f64'");
    if (c.batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (c.walk_len < 2) throw ConfigError("walk_len must be at least 2");
    if (c.jump_prob < 0.0 || c.jump_prob > 1.0) throw ConfigError("jump_prob must be in [0, 1]");
    if (c.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (c.threads < 1) throw ConfigError("threads must be at least 1");
    if (c.inference_walks < 2) throw ConfigError("inference_walks must be at least 2");
    if (c.adam.lr <= 0.0) throw ConfigError("lr must be positive");
    validate_loss_config(c.loss);
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: '" +
                              line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (kv.count(key))
            throw ConfigError("config key '" + key + "' appears more than once");
        kv[key] = value;
    }
    return kv;
}

// Returns true when `key` is a TrainConfig key and was applied.
bool apply_train_key(TrainConfig& t, const std::string& key, const std::string& value) {
    if (key == "preset") t.preset = value;
    else if (key == "precision") t.precision = value;
    else if (key == "batch_size") t.batch_size = to_int(key, value);
    else if (key == "walk_len") t.walk_len = to_int(key, value);
    else if (key == "jump_prob") t.jump_prob = to_double(key, value);
    else if (key == "epochs") t.epochs = to_int(key, value);
    else if (key == "temperature") t.loss.temperature = to_double(key, value);
    else if (key == "alpha") t.loss.alpha = to_double(key, value);
    else if (key == "clusters") t.loss.clusters = to_int(key, value);
    else if (key == "cluster_start_epoch") t.loss.cluster_start_epoch = to_int(key, value);
    else if (key == "means_update_period") t.loss.means_update_period = to_int(key, value);
    else if (key == "lr") t.adam.lr = to_double(key, value);
    else if (key == "beta1") t.adam.beta1 = to_double(key, value);
    else if (key == "beta2") t.adam.beta2 = to_double(key, value);
    else if (key == "adam_eps") t.adam.eps = to_double(key, value);
    else if (key == "seed") t.seed = to_u64(key, value);
    else if (key == "threads") t.threads = to_int(key, value);
    else if (key == "inference_walks") t.inference_walks = to_int(key, value);
    else return false;
    return true;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    auto kv = parse_kv(text);

    RunConfig run;
    std::vector<std::string> unknown;
    for (auto& [key, value] : kv) {
        if (key == "manifest") run.manifest_path = value;
        else if (key == "out_dir") run.out_dir = value;
        else if (!apply_train_key(run.train, key, value)) unknown.push_back(key);
    }

    std::vector<std::string> problems;
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        problems.push_back(msg);
    }
    std::vector<std::string> missing;
    if (run.manifest_path.empty()) missing.push_back("manifest");
    if (run.out_dir.empty()) missing.push_back("out_dir");
    if (!missing.empty()) {
        std::string msg = "missing required config keys:";
        for (const auto& k : missing) msg += " " + k;
        problems.push_back(msg);
    }
    if (!problems.empty()) {
        std::string all;
        for (std::size_t i = 0; i < problems.size(); ++i)
            all += (i ? "; " : "") + problems[i];
        throw ConfigError(all);
    }

    validate_train_config(run.train);
    return run;
}

TrainConfig parse_train_config_text(const std::string& text) {
    auto kv = parse_kv(text);
    TrainConfig t;
    std::vector<std::string> unknown;
    for (auto& [key, value] : kv) {
        if (!apply_train_key(t, key, value)) unknown.push_back(key);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    validate_train_config(t);
    return t;
}

RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

std::string canonical_config(const TrainConfig& c) {
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::map<std::string, std::string> kv = {
        {"adam_eps", num(c.adam.eps)},
        {"alpha", num(c.loss.alpha)},
        {"batch_size", std::to_string(c.batch_size)},
        {"beta1", num(c.adam.beta1)},
        {"beta2", num(c.adam.beta2)},
        {"cluster_start_epoch", std::to_string(c.loss.cluster_start_epoch)},
        {"clusters", std::to_string(c.loss.clusters)},
        {"epochs", std::to_string(c.epochs)},
        {"inference_walks", std::to_string(c.inference_walks)},
        {"jump_prob", num(c.jump_prob)},
        {"lr", num(c.adam.lr)},
        {"means_update_period", std::to_string(c.loss.means_update_period)},
        {"precision", c.precision},
        {"preset", c.preset},
        {"seed", std::to_string(c.seed)},
        {"temperature", num(c.loss.temperature)},
        {"walk_len", std::to_string(c.walk_len)},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string config_hash(const TrainConfig& c) {
    std::string s = canonical_config(c);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

}  // namespace walkfeat
