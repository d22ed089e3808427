#include "doctorrag/config.hpp"

#include <cctype>
#include <cstdlib>
#include <functional>

#include <json.hpp>

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
    std::string v = to_lower_ascii(trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    std::size_t consumed = 0;
    long long parsed = 0;
    try {
        parsed = std::stoll(v, &consumed);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
    if (consumed != v.size()) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
    return parsed;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    std::size_t consumed = 0;
    unsigned long long parsed = 0;
    try {
        parsed = std::stoull(v, &consumed);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a non-negative integer, got '" +
                          value + "'");
    }
    if (consumed != v.size() || (!v.empty() && v.front() == '-')) {
        throw ConfigError(key + ": expected a non-negative integer, got '" +
                          value + "'");
    }
    return parsed;
}

double parse_real(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    std::size_t consumed = 0;
    double parsed = 0.0;
    try {
        parsed = std::stod(v, &consumed);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
    if (consumed != v.size()) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
    return parsed;
}

struct KeyHandler {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyHandler>& handlers() {
    auto string_key = [](const char* name, std::string RunConfig::* field) {
        return KeyHandler{
            name,
            [field](RunConfig& c, const std::string& v) { c.*field = v; },
            [field](const RunConfig& c) { return c.*field; }};
    };
    auto int_key = [](const char* name, int RunConfig::* field) {
        return KeyHandler{
            name,
            [name, field](RunConfig& c, const std::string& v) {
                c.*field = static_cast<int>(parse_int(name, v));
            },
            [field](const RunConfig& c) { return std::to_string(c.*field); }};
    };
    auto bool_key = [](const char* name, bool RunConfig::* field) {
        return KeyHandler{
            name,
            [name, field](RunConfig& c, const std::string& v) {
                c.*field = parse_bool(name, v);
            },
            [field](const RunConfig& c) {
                return std::string(c.*field ? "true" : "false");
            }};
    };
    auto real_key = [](const char* name, double RunConfig::* field) {
        return KeyHandler{
            name,
            [name, field](RunConfig& c, const std::string& v) {
                c.*field = parse_real(name, v);
            },
            [field](const RunConfig& c) {
                nlohmann::json j = c.*field;
                return j.dump();
            }};
    };

    static const std::vector<KeyHandler> table = {
        string_key("backend", &RunConfig::backend),
        string_key("base_url", &RunConfig::base_url),
        string_key("model", &RunConfig::model),
        string_key("embedding_model", &RunConfig::embedding_model),
        string_key("api_key_env", &RunConfig::api_key_env),
        int_key("dimension", &RunConfig::dimension),
        string_key("knowledge_store", &RunConfig::knowledge_store),
        string_key("patient_store", &RunConfig::patient_store),
        int_key("k", &RunConfig::k),
        bool_key("leakage_guard", &RunConfig::leakage_guard),
        real_key("leakage_threshold", &RunConfig::leakage_threshold),
        bool_key("multi_tag", &RunConfig::multi_tag),
        int_key("iterations", &RunConfig::iterations),
        bool_key("early_stopping", &RunConfig::early_stopping),
        string_key("templates_dir", &RunConfig::templates_dir),
        string_key("language", &RunConfig::language),
        string_key("tokenizer", &RunConfig::tokenizer),
        bool_key("double_judging", &RunConfig::double_judging),
        string_key("mock_script", &RunConfig::mock_script),
        KeyHandler{"mock_seed",
                   [](RunConfig& c, const std::string& v) {
                       c.mock_seed = parse_uint("mock_seed", v);
                   },
                   [](const RunConfig& c) { return std::to_string(c.mock_seed); }},
        int_key("concurrency", &RunConfig::concurrency),
        int_key("max_attempts", &RunConfig::max_attempts),
        int_key("timeout_seconds", &RunConfig::timeout_seconds),
        real_key("temperature", &RunConfig::temperature),
        string_key("out_dir", &RunConfig::out_dir),
    };
    return table;
}

const KeyHandler* find_handler(const std::string& key) {
    for (const auto& handler : handlers()) {
        if (key == handler.name) {
            return &handler;
        }
    }
    return nullptr;
}

std::string json_value_to_config_string(const std::string& key,
                                        const nlohmann::json& value) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    if (value.is_boolean() || value.is_number()) {
        return value.dump();
    }
    throw ConfigError(key + ": expected a scalar value");
}

} // namespace

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& handler : handlers()) {
            out.push_back(handler.name);
        }
        return out;
    }();
    return keys;
}

std::string env_var_for_key(const std::string& key) {
    std::string out = "DOCTORRAG_";
    for (char c : key) {
        out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

void apply_config_value(RunConfig& config, const std::string& key,
                        const std::string& value) {
    const KeyHandler* handler = find_handler(key);
    if (handler == nullptr) {
        throw ConfigError("unknown config key: " + key);
    }
    handler->set(config, value);
}

void validate_run_config(const RunConfig& config) {
    if (config.backend != "mock" && config.backend != "http") {
        throw ConfigError("backend must be 'mock' or 'http', got '" +
                          config.backend + "'");
    }
    if (config.backend == "http") {
        if (config.base_url.empty()) {
            throw ConfigError("http backend requires base_url");
        }
        if (config.model.empty()) {
            throw ConfigError("http backend requires model");
        }
        if (config.api_key_env.empty()) {
            throw ConfigError("http backend requires api_key_env");
        }
    }
    if (config.backend == "mock" && config.dimension < 1) {
        throw ConfigError("mock backend requires dimension >= 1");
    }
    if (config.dimension < 0) {
        throw ConfigError("dimension must be >= 0");
    }
    if (config.k < 1) {
        throw ConfigError("k must be >= 1");
    }
    if (!(config.leakage_threshold > 0.0 && config.leakage_threshold <= 1.0)) {
        throw ConfigError("leakage_threshold must be in (0, 1]");
    }
    if (config.iterations < 1) {
        throw ConfigError("iterations must be >= 1");
    }
    if (config.language.empty()) {
        throw ConfigError("language must be non-empty");
    }
    if (config.tokenizer != "words" && config.tokenizer != "chars") {
        throw ConfigError("tokenizer must be 'words' or 'chars', got '" +
                          config.tokenizer + "'");
    }
    if (config.concurrency < 1) {
        throw ConfigError("concurrency must be >= 1");
    }
    if (config.max_attempts < 1) {
        throw ConfigError("max_attempts must be >= 1");
    }
    if (config.timeout_seconds < 1) {
        throw ConfigError("timeout_seconds must be >= 1");
    }
    if (config.temperature < 0.0) {
        throw ConfigError("temperature must be >= 0");
    }
    if (config.out_dir.empty()) {
        throw ConfigError("out_dir must be non-empty");
    }
}

RunConfig load_run_config(
    const std::string& config_path,
    const std::map<std::string, std::string>& flag_overrides,
    const std::map<std::string, std::string>* env) {
    RunConfig config;

    if (!config_path.empty()) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(read_file(config_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config file " + config_path + ": " + e.what());
        }
        if (!doc.is_object()) {
            throw ConfigError("config file " + config_path +
                              ": expected a JSON object");
        }
        for (const auto& [key, value] : doc.items()) {
            apply_config_value(config, key,
                               json_value_to_config_string(key, value));
        }
    }

    for (const auto& key : run_config_keys()) {
        std::string var = env_var_for_key(key);
        if (env != nullptr) {
            auto it = env->find(var);
            if (it != env->end()) {
                apply_config_value(config, key, it->second);
            }
        } else if (const char* value = std::getenv(var.c_str())) {
            apply_config_value(config, key, value);
        }
    }

    for (const auto& [key, value] : flag_overrides) {
        apply_config_value(config, key, value);
    }

    validate_run_config(config);
    return config;
}

std::string run_config_to_json(const RunConfig& config) {
    // std::map ordering makes the serialization canonical.
    std::map<std::string, std::string> values;
    for (const auto& handler : handlers()) {
        values[handler.name] = handler.get(config);
    }
    nlohmann::json doc(values);
    return doc.dump(2) + "\n";
}

std::string config_digest(const RunConfig& config) {
    return hex64(fnv1a64(run_config_to_json(config)));
}

} // namespace doctorrag
