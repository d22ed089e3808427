// Task loading, labeled and generation scoring, embedding export, and the
// layered run configuration.

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "doctorrag/config.hpp"
#include "doctorrag/embedding.hpp"
#include "doctorrag/error.hpp"
#include "doctorrag/gateway.hpp"
#include "doctorrag/metrics.hpp"
#include "doctorrag/mock_backend.hpp"
#include "doctorrag/store.hpp"
#include "doctorrag/tasks.hpp"
#include "doctorrag/templates.hpp"
#include "doctorrag/util.hpp"
#include "doctorrag/vocabulary.hpp"
#include "test_support.hpp"

using namespace doctorrag;

namespace {

constexpr int kDim = 8;

EmbeddingVector axis(std::size_t index, float scale = 1.0f) {
    std::vector<float> values(kDim, 0.0f);
    values[index] = scale;
    return EmbeddingVector(std::move(values));
}

KnowledgeStore make_knowledge(const ConceptVocabulary& vocabulary) {
    std::vector<KnowledgeEntry> entries;
    entries.push_back(
        {"k_resp", "Influenza causes fever and cough.", {"J00-J99"}, axis(0)});
    entries.push_back(
        {"k_circ", "Hypertension strains the heart.", {"I00-I99"}, axis(1)});
    return KnowledgeStore(kDim, vocabulary.hash(), std::move(entries));
}

PatientStore make_patients() {
    std::vector<PatientRecord> records;
    records.push_back(
        {"p1", "cough and fever for days", {}, {{"label", "Flu"}}, axis(2)});
    records.push_back({"p2", "chest pain on exertion", {}, {}, axis(3)});
    return PatientStore(kDim, std::move(records));
}

struct TaskFixture {
    std::shared_ptr<MockBackend> backend;
    Gateway gateway;
    TemplateCatalog templates;
    ConceptVocabulary vocabulary;
    KnowledgeStore knowledge;
    PatientStore patients;
    Pipeline pipeline;

    explicit TaskFixture(std::vector<MockRule> rules)
        : backend(std::make_shared<MockBackend>(kDim, std::move(rules))),
          gateway(backend, gateway_config()),
          templates(TemplateCatalog::builtin()),
          vocabulary(ConceptVocabulary::icd10_first_level()),
          knowledge(make_knowledge(vocabulary)), patients(make_patients()) {
        pipeline.gateway = &gateway;
        pipeline.templates = &templates;
        pipeline.vocabulary = &vocabulary;
        pipeline.knowledge = &knowledge;
        pipeline.patients = &patients;
        pipeline.retrieval.k = 4;
    }

    static GatewayConfig gateway_config() {
        GatewayConfig config;
        config.retry.max_attempts = 1;
        config.concurrency_cap = 8;
        config.dimension = kDim;
        return config;
    }
};

MockRule tag_all() { return {RoleTag::tagger, "", "J00-J99", 0}; }

std::string write_text(const TempDir& dir, const std::string& name,
                       const std::string& content) {
    std::string path = dir.sub(name);
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

std::string item_line(const std::string& query, const std::string& gold,
                      const std::string& source = "") {
    nlohmann::json record{{"query", query}, {"gold", gold}};
    if (!source.empty()) {
        record["source_record_id"] = source;
    }
    return record.dump();
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

} // namespace

TEST_SUITE("task_kinds") {

TEST_CASE("names round-trip and unknown names are rejected") {
    for (TaskKind kind :
         {TaskKind::disease_diagnosis, TaskKind::question_answering,
          TaskKind::treatment_recommendation, TaskKind::text_generation}) {
        CHECK(task_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(task_kind_from_string("diagnosis"), InputError);
    CHECK_THROWS_AS(task_kind_from_string(""), InputError);
}

TEST_CASE("only text generation is scored by overlap") {
    CHECK(is_labeled_kind(TaskKind::disease_diagnosis));
    CHECK(is_labeled_kind(TaskKind::question_answering));
    CHECK(is_labeled_kind(TaskKind::treatment_recommendation));
    CHECK_FALSE(is_labeled_kind(TaskKind::text_generation));
}

} // TEST_SUITE

TEST_SUITE("task_loading") {

TEST_CASE("items and labels load with trimming and case-insensitive checks") {
    TempDir dir("task_load");
    std::string labels = write_text(dir, "labels.txt", "Flu\n  Cold  \n\n");
    std::string items = write_text(
        dir, "items.jsonl",
        item_line("q one", "Flu", "p9") + "\n\n" + item_line("q two", "cold") +
            "\n" + item_line("q three", "FLU") + "\n");
    auto task = load_task(items, TaskKind::disease_diagnosis, labels);
    CHECK(task.kind == TaskKind::disease_diagnosis);
    CHECK(task.valid_labels == std::vector<std::string>({"Flu", "Cold"}));
    REQUIRE(task.items.size() == 3);
    CHECK(task.items[0].query == "q one");
    CHECK(task.items[0].gold == "Flu");
    CHECK(task.items[0].source_record_id == "p9");
    CHECK(task.items[1].source_record_id.empty());
    CHECK(task.items[2].gold == "FLU");
}

TEST_CASE("text generation needs no label vocabulary") {
    TempDir dir("task_gen");
    std::string items = write_text(
        dir, "items.jsonl",
        item_line("describe the case", "free reference text") + "\n");
    auto task = load_task(items, TaskKind::text_generation);
    CHECK(task.valid_labels.empty());
    REQUIRE(task.items.size() == 1);
    CHECK(task.items[0].gold == "free reference text");
}

TEST_CASE("structural problems are rejected with precise errors") {
    TempDir dir("task_bad");
    std::string labels = write_text(dir, "labels.txt", "Flu\n");

    SUBCASE("labeled kinds require a label file") {
        std::string items =
            write_text(dir, "items.jsonl", item_line("q", "Flu") + "\n");
        CHECK_THROWS_AS(load_task(items, TaskKind::disease_diagnosis),
                        InputError);
    }
    SUBCASE("an all-blank label file is empty") {
        std::string blank = write_text(dir, "blank.txt", "\n   \n");
        std::string items =
            write_text(dir, "items.jsonl", item_line("q", "Flu") + "\n");
        CHECK_THROWS_AS(load_task(items, TaskKind::disease_diagnosis, blank),
                        InputError);
    }
    SUBCASE("a gold label outside the vocabulary names the line") {
        std::string items = write_text(dir, "items.jsonl",
                                       item_line("q1", "Flu") + "\n" +
                                           item_line("q2", "Dengue") + "\n");
        try {
            load_task(items, TaskKind::disease_diagnosis, labels);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            std::string message = e.what();
            CHECK(message.find("gold label 'Dengue'") != std::string::npos);
            CHECK(message.find(":2:") != std::string::npos);
        }
    }
    SUBCASE("invalid JSON is a format error") {
        std::string items = write_text(dir, "items.jsonl", "{not json\n");
        CHECK_THROWS_AS(load_task(items, TaskKind::disease_diagnosis, labels),
                        FormatError);
    }
    SUBCASE("records need query and gold") {
        std::string items =
            write_text(dir, "items.jsonl", "{\"query\": \"q\"}\n");
        CHECK_THROWS_AS(load_task(items, TaskKind::disease_diagnosis, labels),
                        FormatError);
    }
    SUBCASE("an empty item file has no items") {
        std::string items = write_text(dir, "items.jsonl", "\n\n");
        CHECK_THROWS_AS(load_task(items, TaskKind::disease_diagnosis, labels),
                        InputError);
    }
    SUBCASE("a missing file cannot be opened") {
        CHECK_THROWS_AS(load_task(dir.sub("absent.jsonl"),
                                  TaskKind::disease_diagnosis, labels),
                        InputError);
    }
}

} // TEST_SUITE

TEST_SUITE("query_pipeline") {

TEST_CASE("prepare_query tags and embeds the raw text") {
    TaskFixture fx({{RoleTag::tagger, "", "  j00-j99 \n", 0}});
    auto query = prepare_query(fx.pipeline, "persistent dry cough");
    CHECK(query.id == "query");
    CHECK(query.text == "persistent dry cough");
    CHECK(query.tags == std::vector<std::string>({"J00-J99"}));
    CHECK(query.embedding == fx.gateway.embed("persistent dry cough"));

    auto named = prepare_query(fx.pipeline, "persistent dry cough", "item-3");
    CHECK(named.id == "item-3");
}

TEST_CASE("multi-tag mode returns the sorted deduplicated tag set") {
    TaskFixture fx({{RoleTag::tagger, "", "J00-J99, A00-B99\nJ00-J99", 0}});
    Pipeline pipeline = fx.pipeline;
    pipeline.multi_tag = true;
    auto query = prepare_query(pipeline, "fever with cough");
    CHECK(query.tags == std::vector<std::string>({"A00-B99", "J00-J99"}));
}

TEST_CASE("a wired but store-less pipeline is a contract violation") {
    Pipeline empty;
    CHECK_THROWS_AS(prepare_query(empty, "q"), ContractError);

    TaskFixture fx({tag_all()});
    Pipeline no_stores = fx.pipeline;
    no_stores.knowledge = nullptr;
    CHECK_THROWS_AS(answer_query(no_stores, "q"), ContractError);
    Pipeline no_patients = fx.pipeline;
    no_patients.patients = nullptr;
    CHECK_THROWS_AS(answer_query(no_patients, "q"), ContractError);
}

TEST_CASE("an open query renders the free-text prompt over the context") {
    TaskFixture fx({
        {RoleTag::generator, "", "generated answer", 0},
        tag_all(),
    });
    std::string q = "routing probe complaint";
    auto qe = fx.gateway.embed(q);
    KnowledgeStore ks(kDim, fx.vocabulary.hash(),
                      {{"k_hit", "Fact text.", {"J00-J99"}, qe}});
    PatientStore ps(kDim,
                    {{"p_hit", "matching complaint", {}, {{"label", "Flu"}}, qe}});
    Pipeline pipeline = fx.pipeline;
    pipeline.knowledge = &ks;
    pipeline.patients = &ps;

    auto run = answer_query(pipeline, q);
    CHECK(run.answer == "generated answer");
    REQUIRE(run.knowledge.hits.size() == 1);
    CHECK(run.knowledge.hits[0].id == "k_hit");
    CHECK(run.knowledge.hits[0].score == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(run.patients.hits.size() == 1);
    CHECK(run.patients.hits[0].id == "p_hit");
    CHECK(run.context.rendered.find("Fact text.") != std::string::npos);
    CHECK(run.context.rendered.find("Retrieved Patient Case (ID: p_hit):") !=
          std::string::npos);

    auto calls = fx.backend->calls();
    REQUIRE(calls.size() == 2);
    CHECK(calls[0].role == RoleTag::tagger);
    CHECK(calls[1].role == RoleTag::generator);
    CHECK(calls[1].system_message == fx.templates.text("system_generation"));
    CHECK(calls[1].user_message ==
          fx.templates.render(
              "answer", {{"query", q}, {"context", run.context.rendered}}));
}

TEST_CASE("options switch to the closed-label prompt") {
    TaskFixture fx({
        {RoleTag::generator, "", "Flu", 0},
        tag_all(),
    });
    auto run = answer_query(fx.pipeline, "which label fits", {"Flu", "Cold"});
    auto calls = fx.backend->calls();
    REQUIRE(calls.size() == 2);
    CHECK(calls[1].system_message == fx.templates.text("system_labeled"));
    CHECK(calls[1].user_message ==
          fx.templates.render("answer_labeled",
                              {{"query", "which label fits"},
                               {"context", run.context.rendered},
                               {"options", "Flu\nCold"}}));
}

} // TEST_SUITE

TEST_SUITE("labeled_scoring") {

TEST_CASE("accuracy counts normalized exact matches only") {
    TaskFixture fx({
        {RoleTag::generator, "case zero", "Flu", 0},
        {RoleTag::generator, "case one", "Cold", 0},
        {RoleTag::generator, "case two", "  FLU ", 0},
        {RoleTag::generator, "case three", "Dengue", 0},
        tag_all(),
    });
    TempDir dir("task_acc");
    std::string labels = write_text(dir, "labels.txt", "Flu\nCold\n");
    std::string items = write_text(
        dir, "items.jsonl",
        item_line("case zero presents with cough", "Flu") + "\n" +
            item_line("case one presents with cough", "Flu") + "\n" +
            item_line("case two presents with cough", "flu") + "\n" +
            item_line("case three presents with cough", "Cold") + "\n");
    auto task = load_task(items, TaskKind::disease_diagnosis, labels);

    auto result = run_labeled_task(task, fx.pipeline);
    CHECK(result.n_items == 4);
    CHECK(result.n_correct == 2);
    CHECK(result.accuracy == doctest::Approx(0.5).epsilon(1e-12));

    REQUIRE(result.items.size() == 4);
    const auto& logs = result.items;
    CHECK(logs[0].correct);
    CHECK_FALSE(logs[0].invalid_label);
    CHECK(logs[0].index == 0);
    CHECK(logs[0].query == "case zero presents with cough");
    CHECK(logs[0].gold == "Flu");

    CHECK_FALSE(logs[1].correct);
    CHECK_FALSE(logs[1].invalid_label); // wrong but within the vocabulary
    CHECK(logs[1].normalized_prediction == "cold");

    CHECK(logs[2].correct); // whitespace and case normalize away
    CHECK(logs[2].raw_prediction == "  FLU ");
    CHECK(logs[2].normalized_prediction == "flu");

    CHECK_FALSE(logs[3].correct);
    CHECK(logs[3].invalid_label);
    CHECK(logs[3].normalized_prediction == "dengue");

    // The generator was asked with the closed-label prompt.
    bool saw_options = false;
    for (const auto& call : fx.backend->calls()) {
        if (call.role == RoleTag::generator) {
            saw_options = call.user_message.find("Flu\nCold") !=
                          std::string::npos;
            CHECK(saw_options);
        }
    }
    CHECK(saw_options);
}

TEST_CASE("concurrent runs keep item order") {
    TaskFixture fx({
        {RoleTag::generator, "conc item", "Flu", 0},
        tag_all(),
    });
    TempDir dir("task_conc");
    std::string labels = write_text(dir, "labels.txt", "Flu\n");
    std::string lines;
    for (int i = 0; i < 8; ++i) {
        lines += item_line("conc item " + std::to_string(i), "Flu") + "\n";
    }
    std::string items = write_text(dir, "items.jsonl", lines);
    auto task = load_task(items, TaskKind::question_answering, labels);

    auto result = run_labeled_task(task, fx.pipeline, 4);
    CHECK(result.accuracy == doctest::Approx(1.0));
    REQUIRE(result.items.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(result.items[i].index == i);
        CHECK(result.items[i].query == "conc item " + std::to_string(i));
        CHECK(result.items[i].correct);
    }
}

TEST_CASE("an item failure surfaces after the batch finishes") {
    TaskFixture fx({
        {RoleTag::generator, "boom", "Flu", 1},
        {RoleTag::generator, "", "Flu", 0},
        tag_all(),
    });
    TempDir dir("task_fail");
    std::string labels = write_text(dir, "labels.txt", "Flu\n");
    std::string items = write_text(dir, "items.jsonl",
                                   item_line("ok one", "Flu") + "\n" +
                                       item_line("boom two", "Flu") + "\n" +
                                       item_line("ok three", "Flu") + "\n");
    auto task = load_task(items, TaskKind::disease_diagnosis, labels);
    CHECK_THROWS_AS(run_labeled_task(task, fx.pipeline, 2), TransportError);
}

TEST_CASE("the leakage guard is forced on and excludes the source record") {
    TaskFixture fx({
        {RoleTag::generator, "", "Flu", 0},
        tag_all(),
    });
    std::string q = "leak probe complaint";
    auto qe = fx.gateway.embed(q);
    // Fixture sanity: the axis embeddings must not look like near-duplicates.
    REQUIRE(cosine_similarity(qe, axis(2)) < 0.9);
    REQUIRE(cosine_similarity(qe, axis(3)) < 0.9);

    PatientStore ps(kDim, {
                              {"p_dup", "near duplicate", {}, {}, qe},
                              {"p_keep", "unrelated case", {}, {}, axis(3)},
                              {"p_self", "own source record", {}, {}, axis(2)},
                          });
    Pipeline pipeline = fx.pipeline;
    pipeline.patients = &ps;
    pipeline.retrieval.k = 5;
    CHECK_FALSE(pipeline.retrieval.leakage_guard); // off in the caller's config

    TempDir dir("task_leak");
    std::string labels = write_text(dir, "labels.txt", "Flu\n");
    std::string items =
        write_text(dir, "items.jsonl", item_line(q, "Flu", "p_self") + "\n");
    auto task = load_task(items, TaskKind::disease_diagnosis, labels);

    SUBCASE("near-duplicates and the source id are both shielded") {
        auto result = run_labeled_task(task, pipeline);
        REQUIRE(result.items.size() == 1);
        CHECK(result.items[0].patient_ids ==
              std::vector<std::string>({"p_keep"}));
    }
    SUBCASE("threshold 1.0 disables the similarity rule but not the id rule") {
        pipeline.retrieval.leakage_threshold = 1.0;
        auto result = run_labeled_task(task, pipeline);
        REQUIRE(result.items.size() == 1);
        CHECK(result.items[0].patient_ids ==
              std::vector<std::string>({"p_dup", "p_keep"}));
    }
    // The caller's pipeline config is never mutated.
    CHECK_FALSE(pipeline.retrieval.leakage_guard);
    CHECK(pipeline.retrieval.exclude_ids.empty());
}

TEST_CASE("kind mismatches are contract violations") {
    TaskFixture fx({tag_all()});
    LabeledTask generation;
    generation.kind = TaskKind::text_generation;
    generation.items.push_back({"q", "ref", ""});
    CHECK_THROWS_AS(run_labeled_task(generation, fx.pipeline), ContractError);

    LabeledTask labeled;
    labeled.kind = TaskKind::disease_diagnosis;
    labeled.valid_labels = {"Flu"};
    labeled.items.push_back({"q", "Flu", ""});
    CHECK_THROWS_AS(
        run_generation_task(labeled, fx.pipeline, TokenizerMode::words),
        ContractError);
}

} // TEST_SUITE

TEST_SUITE("generation_scoring") {

TEST_CASE("per-item overlap scores and their means") {
    TaskFixture fx({
        {RoleTag::generator, "gen zero", "the cat sat", 0},
        {RoleTag::generator, "gen one", "alpha beta gamma delta epsilon", 0},
        tag_all(),
    });
    TempDir dir("task_gen_scores");
    std::string items = write_text(
        dir, "items.jsonl",
        item_line("gen zero query", "the cat") + "\n" +
            item_line("gen one query", "alpha beta gamma delta epsilon") + "\n");
    auto task = load_task(items, TaskKind::text_generation);

    auto result = run_generation_task(task, fx.pipeline, TokenizerMode::words);
    CHECK(result.tokenizer == TokenizerMode::words);
    REQUIRE(result.items.size() == 2);

    CHECK(result.items[0].answer == "the cat sat");
    CHECK(result.items[0].reference == "the cat");
    CHECK(result.items[0].rouge.f1 == doctest::Approx(0.8).epsilon(1e-12));
    auto expect0 = bleu_4(tokenize("the cat sat", TokenizerMode::words),
                          {tokenize("the cat", TokenizerMode::words)});
    CHECK(result.items[0].bleu.value ==
          doctest::Approx(expect0.value).epsilon(1e-12));
    CHECK(result.items[0].bleu.raw == 0.0);

    CHECK(result.items[1].rouge.f1 == doctest::Approx(1.0));
    CHECK(result.items[1].bleu.value == doctest::Approx(1.0));
    CHECK(result.items[1].bleu.raw == doctest::Approx(1.0));

    CHECK(result.rouge_l_f1 == doctest::Approx((0.8 + 1.0) / 2).epsilon(1e-12));
    CHECK(result.bleu_4 ==
          doctest::Approx((expect0.value + 1.0) / 2).epsilon(1e-12));
    CHECK(result.bleu_4_raw == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("the character tokenizer is honored") {
    TaskFixture fx({
        {RoleTag::generator, "", "ab", 0},
        tag_all(),
    });
    TempDir dir("task_gen_chars");
    std::string items =
        write_text(dir, "items.jsonl", item_line("char query", "ab") + "\n");
    auto task = load_task(items, TaskKind::text_generation);
    auto result = run_generation_task(task, fx.pipeline, TokenizerMode::chars);
    CHECK(result.tokenizer == TokenizerMode::chars);
    CHECK(result.rouge_l_f1 == doctest::Approx(1.0));
}

TEST_CASE("externally modeled metrics are declared absent, not faked") {
    CHECK(absent_metrics() ==
          std::vector<std::string>({"BERTScore", "METEOR"}));
}

} // TEST_SUITE

TEST_SUITE("embedding_export") {

TEST_CASE("knowledge export is parseable CSV with bit-exact floats") {
    ConceptVocabulary vocabulary = ConceptVocabulary::icd10_first_level();
    std::vector<float> odd = {0.1f,    1.0f / 3.0f,   -2.5e-8f, 1.17549435e-38f,
                              3.3e38f, -0.0f,         16777215.0f, 0.25f};
    std::vector<KnowledgeEntry> entries;
    entries.push_back({"k,comma", "First fact.", {"A00-B99", "J00-J99"},
                       EmbeddingVector(odd)});
    entries.push_back({"k\"quote", "Second fact.", {"J00-J99"}, axis(1, -1.5f)});
    KnowledgeStore store(kDim, vocabulary.hash(), std::move(entries));

    TempDir dir("export_k");
    std::string path = dir.sub("knowledge.csv");
    export_knowledge_embeddings(store, path);

    auto lines = read_lines(path);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "id,label,e0,e1,e2,e3,e4,e5,e6,e7");

    auto row0 = split_csv_row(lines[1]);
    REQUIRE(row0.size() == 2 + kDim);
    CHECK(row0[0] == "k,comma");
    CHECK(row0[1] == "A00-B99;J00-J99");
    CHECK(lines[1].find("\"k,comma\"") == 0); // comma forces quoting
    for (int j = 0; j < kDim; ++j) {
        float parsed = std::strtof(row0[2 + j].c_str(), nullptr);
        CHECK(parsed == odd[static_cast<std::size_t>(j)]);
        CHECK(std::signbit(parsed) ==
              std::signbit(odd[static_cast<std::size_t>(j)]));
    }

    auto row1 = split_csv_row(lines[2]);
    CHECK(row1[0] == "k\"quote");
    CHECK(lines[2].find("\"k\"\"quote\"") == 0); // quote doubles inside quotes
    CHECK(row1[1] == "J00-J99");
    CHECK(std::strtof(row1[3].c_str(), nullptr) == -1.5f);
}

TEST_CASE("patient export uses the label metadata when present") {
    std::vector<PatientRecord> records;
    records.push_back(
        {"p1", "cough", {{"sex", "F"}}, {{"label", "Flu"}}, axis(0, 0.5f)});
    records.push_back({"p2", "pain", {}, {}, axis(1)});
    PatientStore store(kDim, std::move(records));

    TempDir dir("export_p");
    std::string path = dir.sub("patients.csv");
    export_patient_embeddings(store, path);

    auto lines = read_lines(path);
    REQUIRE(lines.size() == 3);
    auto row0 = split_csv_row(lines[1]);
    CHECK(row0[0] == "p1");
    CHECK(row0[1] == "Flu");
    CHECK(std::strtof(row0[2].c_str(), nullptr) == 0.5f);
    auto row1 = split_csv_row(lines[2]);
    CHECK(row1[0] == "p2");
    CHECK(row1[1] == "");
}

} // TEST_SUITE

TEST_SUITE("run_config") {

using EnvMap = std::map<std::string, std::string>;

TEST_CASE("defaults load and validate with no sources") {
    EnvMap env;
    RunConfig config = load_run_config("", {}, &env);
    CHECK(config.backend == "mock");
    CHECK(config.dimension == 16);
    CHECK(config.k == 4);
    CHECK_FALSE(config.leakage_guard);
    CHECK(config.leakage_threshold == doctest::Approx(0.99));
    CHECK(config.iterations == 3);
    CHECK(config.tokenizer == "words");
    CHECK(config.double_judging);
    CHECK(config.api_key_env == "DOCTORRAG_API_KEY");
    CHECK(config.out_dir == "out");
    CHECK(config.mock_seed == 0);
}

TEST_CASE("flag beats environment beats file beats default") {
    TempDir dir("config_prec");
    std::string path = write_text(dir, "config.json",
                                  "{\"k\": 7, \"leakage_guard\": true, "
                                  "\"temperature\": 0.25, \"out_dir\": "
                                  "\"runs\"}");
    EnvMap no_env;
    RunConfig from_file = load_run_config(path, {}, &no_env);
    CHECK(from_file.k == 7);
    CHECK(from_file.leakage_guard);
    CHECK(from_file.temperature == doctest::Approx(0.25));
    CHECK(from_file.out_dir == "runs");

    EnvMap env{{"DOCTORRAG_K", "9"}, {"DOCTORRAG_TOKENIZER", "chars"}};
    RunConfig from_env = load_run_config(path, {}, &env);
    CHECK(from_env.k == 9);            // env beats file
    CHECK(from_env.tokenizer == "chars");
    CHECK(from_env.leakage_guard);     // file survives where env is silent

    RunConfig from_flags = load_run_config(path, {{"k", "11"}}, &env);
    CHECK(from_flags.k == 11); // flag beats env
    CHECK(from_flags.tokenizer == "chars");

    // Unrelated environment variables are never read.
    EnvMap stray{{"DOCTORRAG_NOT_A_KEY", "zzz"}};
    CHECK(load_run_config("", {}, &stray).k == 4);
}

TEST_CASE("unknown keys are rejected wherever they appear") {
    TempDir dir("config_unknown");
    EnvMap env;
    std::string path = write_text(dir, "config.json", "{\"bogus\": 1}");
    CHECK_THROWS_AS(load_run_config(path, {}, &env), ConfigError);
    CHECK_THROWS_AS(load_run_config("", {{"bogus", "1"}}, &env), ConfigError);
}

TEST_CASE("file problems are config errors") {
    TempDir dir("config_file");
    EnvMap env;
    std::string broken = write_text(dir, "broken.json", "{oops");
    CHECK_THROWS_AS(load_run_config(broken, {}, &env), ConfigError);
    std::string array = write_text(dir, "array.json", "[]");
    CHECK_THROWS_AS(load_run_config(array, {}, &env), ConfigError);
    std::string nested = write_text(dir, "nested.json", "{\"k\": [1]}");
    CHECK_THROWS_AS(load_run_config(nested, {}, &env), ConfigError);
}

TEST_CASE("scalar parsing accepts common spellings and rejects junk") {
    RunConfig config;
    for (const char* yes : {"true", "1", "yes", "ON"}) {
        apply_config_value(config, "leakage_guard", yes);
        CHECK(config.leakage_guard);
    }
    for (const char* no : {"false", "0", "no", "off"}) {
        apply_config_value(config, "leakage_guard", no);
        CHECK_FALSE(config.leakage_guard);
    }
    CHECK_THROWS_AS(apply_config_value(config, "leakage_guard", "maybe"),
                    ConfigError);
    apply_config_value(config, "k", " 12 ");
    CHECK(config.k == 12);
    CHECK_THROWS_AS(apply_config_value(config, "k", "3.5"), ConfigError);
    CHECK_THROWS_AS(apply_config_value(config, "k", "5x"), ConfigError);
    apply_config_value(config, "mock_seed", "12345678901234567890");
    CHECK(config.mock_seed == 12345678901234567890ULL);
    CHECK_THROWS_AS(apply_config_value(config, "mock_seed", "-1"), ConfigError);
    apply_config_value(config, "leakage_threshold", "0.5");
    CHECK(config.leakage_threshold == doctest::Approx(0.5));
    CHECK_THROWS_AS(apply_config_value(config, "temperature", "abc"),
                    ConfigError);
}

TEST_CASE("validation catches every out-of-range value") {
    EnvMap env;
    auto rejects = [&](std::map<std::string, std::string> flags) {
        CHECK_THROWS_AS(load_run_config("", std::move(flags), &env),
                        ConfigError);
    };
    rejects({{"backend", "weird"}});
    rejects({{"backend", "http"}}); // missing base_url
    rejects({{"backend", "http"}, {"base_url", "http://x"}}); // missing model
    rejects({{"backend", "http"},
             {"base_url", "http://x"},
             {"model", "m"},
             {"api_key_env", ""}});
    rejects({{"dimension", "0"}}); // mock needs a concrete dimension
    rejects({{"backend", "http"},
             {"base_url", "http://x"},
             {"model", "m"},
             {"dimension", "-1"}});
    rejects({{"k", "0"}});
    rejects({{"leakage_threshold", "0"}});
    rejects({{"leakage_threshold", "1.5"}});
    rejects({{"iterations", "0"}});
    rejects({{"language", ""}});
    rejects({{"tokenizer", "bytes"}});
    rejects({{"concurrency", "0"}});
    rejects({{"max_attempts", "0"}});
    rejects({{"timeout_seconds", "0"}});
    rejects({{"temperature", "-0.5"}});
    rejects({{"out_dir", ""}});

    // The boundary cases that must pass.
    CHECK(load_run_config("", {{"leakage_threshold", "1.0"}}, &env)
              .leakage_threshold == doctest::Approx(1.0));
    RunConfig http = load_run_config(
        "",
        {{"backend", "http"}, {"base_url", "http://x"}, {"model", "m"},
         {"dimension", "0"}},
        &env);
    CHECK(http.dimension == 0); // http may defer to the backend
}

TEST_CASE("key listing and environment variable naming") {
    const auto& keys = run_config_keys();
    CHECK(keys.size() == 25);
    for (const char* expected :
         {"backend", "k", "leakage_threshold", "mock_seed", "out_dir",
          "double_judging", "api_key_env"}) {
        CHECK(std::find(keys.begin(), keys.end(), expected) != keys.end());
    }
    CHECK(env_var_for_key("leakage_threshold") ==
          "DOCTORRAG_LEAKAGE_THRESHOLD");
    CHECK(env_var_for_key("k") == "DOCTORRAG_K");
}

TEST_CASE("the canonical serialization covers every key and digests stably") {
    EnvMap env;
    RunConfig config = load_run_config("", {}, &env);
    std::string json = run_config_to_json(config);
    CHECK(json.back() == '\n');
    auto doc = nlohmann::json::parse(json);
    CHECK(doc.size() == run_config_keys().size());
    CHECK(doc.at("k") == "4");
    CHECK(doc.at("backend") == "mock");
    CHECK(doc.at("leakage_guard") == "false");
    CHECK(doc.at("double_judging") == "true");

    CHECK(config_digest(config) == config_digest(config));
    CHECK(config_digest(config).size() == 16);
    CHECK(config_digest(config) == hex64(fnv1a64(json)));
    RunConfig changed = config;
    changed.k = 5;
    CHECK(config_digest(changed) != config_digest(config));
}

} // TEST_SUITE
