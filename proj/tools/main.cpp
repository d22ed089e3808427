#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "doctorrag/cli.hpp"
#include "doctorrag/config.hpp"
#include "doctorrag/error.hpp"

namespace {

std::string flag_name(const std::string& key) {
    std::string out = "--";
    for (char c : key) {
        out += c == '_' ? '-' : c;
    }
    return out;
}

void print_error(doctorrag::ErrorCategory category, const std::string& message) {
    nlohmann::json doc{{"category", doctorrag::to_string(category)},
                       {"message", message}};
    std::cerr << doc.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DoctorRAG: dual-base concept-constrained retrieval with "
                 "iterative answer refinement"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file");

    // Every config key is also a flag; flags win over environment variables,
    // which win over the config file.
    std::map<std::string, std::string> flags;
    for (const auto& key : doctorrag::run_config_keys()) {
        app.add_option_function<std::string>(
            flag_name(key),
            [&flags, key](const std::string& value) { flags[key] = value; },
            "Override config key '" + key + "'");
    }

    auto* ingest = app.add_subcommand("ingest", "Build a store from raw data");
    std::string ingest_kind;
    std::string ingest_input;
    std::string ingest_mapping;
    ingest->add_option("kind", ingest_kind, "knowledge | patients")->required();
    ingest->add_option("input", ingest_input, "line-delimited JSON input")
        ->required();
    ingest->add_option("--mapping", ingest_mapping, "field-mapping JSON file");

    auto* retrieve = app.add_subcommand("retrieve", "Run retrieval for a query");
    std::string retrieve_query;
    retrieve->add_option("query", retrieve_query, "query text")->required();

    auto* answer = app.add_subcommand("answer", "Single-pass answer");
    std::string answer_query_text;
    answer->add_option("query", answer_query_text, "query text")->required();

    auto* refine = app.add_subcommand("refine", "Iteratively refined answer");
    std::string refine_query;
    std::string refine_task;
    refine->add_option("--query", refine_query, "query text");
    refine->add_option("--task", refine_task, "task file (one run per item)");

    auto* eval = app.add_subcommand("eval", "Score a task file");
    std::string eval_task;
    std::string eval_kind;
    std::string eval_labels;
    eval->add_option("task", eval_task, "task file")->required();
    eval->add_option("--kind", eval_kind,
                     "disease_diagnosis | question_answering | "
                     "treatment_recommendation | text_generation")
        ->required();
    eval->add_option("--labels", eval_labels, "label vocabulary file");

    auto* compare = app.add_subcommand("compare", "Pairwise-judge variants");
    std::vector<std::string> compare_variants;
    std::string compare_queries;
    compare->add_option("--variants", compare_variants, "variant answer files")
        ->expected(-2);
    compare->add_option("--queries", compare_queries, "query file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        doctorrag::RunConfig config =
            doctorrag::load_run_config(config_path, flags);
        if (ingest->parsed()) {
            return doctorrag::cmd_ingest(config, ingest_kind, ingest_input,
                                         ingest_mapping);
        }
        if (retrieve->parsed()) {
            return doctorrag::cmd_retrieve(config, retrieve_query);
        }
        if (answer->parsed()) {
            return doctorrag::cmd_answer(config, answer_query_text);
        }
        if (refine->parsed()) {
            return doctorrag::cmd_refine(config, refine_query, refine_task);
        }
        if (eval->parsed()) {
            return doctorrag::cmd_eval(config, eval_task, eval_kind,
                                       eval_labels);
        }
        if (compare->parsed()) {
            return doctorrag::cmd_compare(config, compare_variants,
                                          compare_queries);
        }
        print_error(doctorrag::ErrorCategory::config, "no command given");
        return 2;
    } catch (const doctorrag::Error& e) {
        print_error(e.category(), e.what());
        return doctorrag::exit_code_for(e.category());
    } catch (const std::exception& e) {
        print_error(doctorrag::ErrorCategory::internal, e.what());
        return 5;
    }
}
