#pragma once

#include <memory>
#include <string>
#include <vector>

#include "doctorrag/config.hpp"
#include "doctorrag/error.hpp"
#include "doctorrag/gateway.hpp"
#include "doctorrag/templates.hpp"
#include "doctorrag/vocabulary.hpp"

namespace doctorrag {

// Process exit code for a failure category: config 2, input 3, backend 4,
// internal 5. Success is 0.
int exit_code_for(ErrorCategory category);

// Backend, gateway, templates, and vocabulary assembled from one config.
// The API key for the http backend is read from the environment variable
// named by api_key_env; it never passes through files or flags.
struct RunEnvironment {
    RunConfig config;
    std::shared_ptr<Backend> backend;
    std::shared_ptr<Gateway> gateway;
    TemplateCatalog templates;
    ConceptVocabulary vocabulary;
};

RunEnvironment make_environment(const RunConfig& config);

// Commands return an exit code instead of throwing. On failure a single-line
// JSON object naming the category and message is written to stderr. Outputs
// land under config.out_dir, written atomically. Primary outputs are fully
// deterministic under the mock backend; wall-clock timings are segregated
// into the timing.json sidecar.
int cmd_ingest(const RunConfig& config, const std::string& kind,
               const std::string& input_path,
               const std::string& mapping_path = "");
int cmd_retrieve(const RunConfig& config, const std::string& query_text);
int cmd_answer(const RunConfig& config, const std::string& query_text);
// Exactly one of query_text / task_path must be non-empty. A failed
// refinement still writes its partial trace, then exits with the failure's
// category.
int cmd_refine(const RunConfig& config, const std::string& query_text,
               const std::string& task_path = "");
int cmd_eval(const RunConfig& config, const std::string& task_path,
             const std::string& kind, const std::string& labels_path = "");
// Each variant file holds {"name": ..., "answers": [...]}; the queries file
// is line-delimited JSON records with a "query" field.
int cmd_compare(const RunConfig& config,
                const std::vector<std::string>& variant_paths,
                const std::string& queries_path);

} // namespace doctorrag
