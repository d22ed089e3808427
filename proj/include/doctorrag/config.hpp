#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace doctorrag {

// Every run setting in one validated value. Sources are layered with fixed
// precedence: command-line flag > DOCTORRAG_* environment variable > config
// file > built-in default. Unknown keys in any layer are rejected.
struct RunConfig {
    std::string backend = "mock"; // mock | http
    std::string base_url;         // required for http
    std::string model;            // chat model name for http
    std::string embedding_model;  // embedding model name for http
    // Name of the environment variable holding the API key. The key itself
    // never appears in a config file or on the command line.
    std::string api_key_env = "DOCTORRAG_API_KEY";

    int dimension = 16; // embedding dimension (mock); 0 lets http decide
    std::string knowledge_store;
    std::string patient_store;

    int k = 4;
    bool leakage_guard = false;
    double leakage_threshold = 0.99;
    bool multi_tag = false;

    int iterations = 3;
    bool early_stopping = false;

    std::string templates_dir; // empty keeps the built-in catalog
    std::string language = "en";
    std::string tokenizer = "words"; // words | chars
    bool double_judging = true;

    std::string mock_script;     // scripted mock replies (JSON rules)
    std::uint64_t mock_seed = 0; // perturbs hash-derived mock values

    int concurrency = 1;
    int max_attempts = 3;
    int timeout_seconds = 120;
    double temperature = 0.0;

    std::string out_dir = "out";
};

// The canonical key names accepted in config files and flag maps; the
// environment variable for key "leakage_threshold" is DOCTORRAG_LEAKAGE_THRESHOLD.
const std::vector<std::string>& run_config_keys();
std::string env_var_for_key(const std::string& key);

// Applies one key=value assignment. Unknown keys and unparseable values
// raise ConfigError.
void apply_config_value(RunConfig& config, const std::string& key,
                        const std::string& value);

// Full-value validation; called after all layers are applied and before any
// store or network access.
void validate_run_config(const RunConfig& config);

// Layers file, environment, and flags over the defaults, then validates.
// `config_path` may be empty (no file layer). `env` replaces the process
// environment when provided, which keeps precedence testable.
RunConfig load_run_config(
    const std::string& config_path,
    const std::map<std::string, std::string>& flag_overrides,
    const std::map<std::string, std::string>* env = nullptr);

// Canonical serialization of every key, used in run manifests.
std::string run_config_to_json(const RunConfig& config);

// Stable digest of the canonical serialization.
std::string config_digest(const RunConfig& config);

} // namespace doctorrag
