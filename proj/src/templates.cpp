#include "doctorrag/templates.hpp"

#include <filesystem>
#include <set>

#include "doctorrag/error.hpp"
#include "doctorrag/util.hpp"

namespace doctorrag {

namespace {

struct BuiltinTemplate {
    const char* key;
    const char* text;
};

const BuiltinTemplate kBuiltins[] = {
    {"system_default",
     "You are a sophisticated AI assistant specializing in refining medical text "
     "based on critiques and context, ensuring accuracy and relevance while "
     "preserving core meaning. Output only the requested text without preamble "
     "or explanation unless otherwise specified."},

    {"system_generation",
     "You are an AI assistant that generates and refines prompts or answers for "
     "a medical question-answering system. Focus on clarity, accuracy, and "
     "adherence to instructions. Output only the requested text without preamble "
     "or explanation unless otherwise specified."},

    {"system_labeled",
     "You are a medical diagnostic expert. Answer with just the disease name."},

    {"system_judge",
     "You are a clinical expert. Your responsibility is to:\n"
     "1. Compare responses from two methods for the same medical query.\n"
     "2. Compare the responses across three dimensions: comprehensiveness, "
     "relevance, and safety.\n"
     "3. Provide a structured evaluation with justifications for each dimension."},

    {"declarative",
     "I have a medical multiple choice question. Please convert it into a "
     "statement that includes only the question and the correct answer, without "
     "the incorrect options.\n"
     "\n"
     "Question: {question}\n"
     "Options: {options}\n"
     "Correct answer: {answer}\n"
     "\n"
     "Please output only the converted statement without any additional "
     "explanation."},

    {"declarative_chunk",
     "I have a passage from a medical reference. Please convert it into a "
     "declarative statement that includes only the factual content of the "
     "passage.\n"
     "\n"
     "Passage: {text}\n"
     "\n"
     "Please output only the converted statement without any additional "
     "explanation."},

    {"tagger",
     "As a medical expert, determine the most likely ICD-10 category (first "
     "level only) for a patient with the following symptoms:\n"
     "\n"
     "Symptoms: {text}\n"
     "\n"
     "Please select the most appropriate ICD-10 category from the following "
     "list:\n"
     "{categories}\n"
     "\n"
     "Return only the category code (e.g., 'A00-B99') without any additional "
     "text or explanation."},

    {"tagger_multi",
     "As a medical expert, determine the most likely ICD-10 categories (first "
     "level only) for a patient with the following symptoms:\n"
     "\n"
     "Symptoms: {text}\n"
     "\n"
     "Please select the most appropriate ICD-10 categories from the following "
     "list:\n"
     "{categories}\n"
     "\n"
     "Return only the category codes (e.g., 'A00-B99'), separated by commas, "
     "without any additional text or explanation."},

    {"answer",
     "You are a helpful medical consultation AI. Using the patient's query and "
     "the supporting context, provide an accurate, complete, and empathetic "
     "answer to the patient.\n"
     "\n"
     "Patient Query (q):\n"
     "{query}\n"
     "\n"
     "Supporting Context (C):\n"
     "{context}\n"
     "\n"
     "Answer the query directly. Your output must be ONLY the answer itself, "
     "without any preamble or meta-commentary."},

    {"answer_labeled",
     "As a medical diagnostic expert, predict the most likely disease for this "
     "patient.\n"
     "\n"
     "Patient Information:\n"
     "\n"
     "Symptoms: {query}\n"
     "\n"
     "Relevant Information:\n"
     "\n"
     "{context}\n"
     "\n"
     "Based on the above information, determine the most likely disease from "
     "the following options only:\n"
     "\n"
     "{options}\n"
     "\n"
     "Return only the name of the disease without any additional text."},

    {"initial_prompt",
     "You are a helpful medical consultation AI. Your task is to REFINE the "
     "'current answer (A)' (which will be provided at the end of this prompt) "
     "by critically evaluating it against the patient's query and the "
     "supporting context. The goal is to improve the 'current answer (A)'s "
     "accuracy, completeness, and relevance to the patient's query, while "
     "preserving its valid core information and avoiding unnecessary deviations "
     "from its original intent.\n"
     "\n"
     "Patient Query (q):\n"
     "{query}\n"
     "\n"
     "Supporting Context (C):\n"
     "{context}\n"
     "\n"
     "Instructions for refinement:\n"
     "1. Carefully read the 'Patient Query (q)' and the 'Supporting Context (C)'.\n"
     "2. Critically evaluate the 'current answer (A)' (provided below) against "
     "this information.\n"
     "3. Generate an improved and refined version of the 'current answer (A)'.\n"
     "4. Focus on addressing any shortcomings in the 'current answer (A)' "
     "regarding accuracy, completeness, clarity, and direct relevance to the "
     "patient's query.\n"
     "5. Ensure your refined answer is factually sound based on the context, "
     "empathetic, and easy for a patient to understand.\n"
     "6. IMPORTANT: Your output must be ONLY the refined medical answer itself. "
     "Do not include any preamble, conversational phrases, meta-commentary, or "
     "any text other than the refined answer.\n"
     "\n"
     "Current Answer (A) to Refine:\n"
     "{answer}"},

    {"context_criterion",
     "Given the following medical context (C):\n"
     "{context}\n"
     "\n"
     "And the following generated answer (A):\n"
     "{answer}\n"
     "\n"
     "Critique the answer (A) focusing ONLY on its factual alignment, "
     "consistency, and completeness with respect to the provided medical "
     "context (C). Provide specific, concise points of criticism or "
     "confirmation. These are CONTEXT-FOCUSED critiques. Identify areas where "
     "the answer might misrepresent or omit crucial information from the "
     "context. Output ONLY the critique."},

    {"patient_criterion",
     "Given the original patient query (q):\n"
     "{query}\n"
     "\n"
     "And the following generated answer (A):\n"
     "{answer}\n"
     "\n"
     "Critique the answer (A) focusing ONLY on its relevance, appropriateness, "
     "and specificity to the patient's query (q). Provide specific, concise "
     "points of criticism or confirmation. These are PATIENT-FOCUSED critiques. "
     "Does the answer fully address the patient's concerns as expressed in the "
     "query? Output ONLY the critique."},

    {"grad_answer_kc",
     "You are an expert medical editor. Your task is to provide actionable "
     "instructions to refine a given medical answer based on specific critiques "
     "related to context.\n"
     "\n"
     "Original Answer (A):\n"
     "{answer}\n"
     "\n"
     "Relevant Medical Knowledge Context (C):\n"
     "{context}\n"
     "\n"
     "CONTEXT-FOCUSED Critiques on the Original Answer:\n"
     "{critique}\n"
     "\n"
     "Based ONLY on the provided critiques and referring to the knowledge "
     "context, explain step-by-step how to revise the Original Answer to "
     "address these critiques. The explanation should focus on specific, "
     "targeted revisions that address the critiques while maintaining the "
     "overall structure and valid information in the original answer as much "
     "as possible. Your output should be actionable instructions for improving "
     "the answer. Do not write the revised answer itself. Output ONLY the "
     "instructions."},

    {"grad_answer_pc",
     "You are an expert medical editor. Your task is to provide actionable "
     "instructions to refine a given medical answer based on specific critiques "
     "related to the patient's query.\n"
     "\n"
     "Original Answer (A):\n"
     "{answer}\n"
     "\n"
     "Original Patient Query (q):\n"
     "{query}\n"
     "\n"
     "PATIENT-FOCUSED Critiques on the Original Answer:\n"
     "{critique}\n"
     "\n"
     "Based ONLY on the provided critiques and referring to the patient's "
     "query, explain step-by-step how to revise the Original Answer to address "
     "these critiques. The explanation should focus on specific, targeted "
     "revisions that address the critiques while maintaining the overall "
     "structure and valid information in the original answer as much as "
     "possible. Your output should be actionable instructions for improving "
     "the answer. Do not write the revised answer itself. Output ONLY the "
     "instructions."},

    {"grad_prompt_kc",
     "You are an AI assistant that refines prompts for a medical "
     "question-answering system.\n"
     "\n"
     "The Original Prompt (P) used was:\n"
     "{prompt}\n"
     "\n"
     "The answer A generated using P was:\n"
     "{answer}\n"
     "\n"
     "The Answer (A) requires revisions from a KNOWLEDGE perspective, as "
     "suggested by the following feedback on A:\n"
     "{answer_grad}\n"
     "\n"
     "Your task: Explain precisely how to modify or rewrite the ORIGINAL "
     "PROMPT (P) to create an improved P. This P should better guide the LLM "
     "to refine an answer like A, addressing the KNOWLEDGE-FOCUSED issues "
     "identified in the feedback. Provide clear, actionable advice on prompt "
     "improvement. Output ONLY the advice."},

    {"grad_prompt_pc",
     "You are an AI assistant that refines prompts for a medical "
     "question-answering system.\n"
     "\n"
     "The Original Prompt (P) used was:\n"
     "{prompt}\n"
     "\n"
     "The answer A generated using P was:\n"
     "{answer}\n"
     "\n"
     "The Answer (A) requires revisions from a PATIENT QUERY perspective, as "
     "suggested by the following feedback on A:\n"
     "{answer_grad}\n"
     "\n"
     "Your task: Explain precisely how to modify or rewrite the ORIGINAL "
     "PROMPT (P) to create an improved P. This P should better guide the LLM "
     "to refine an answer like A, addressing the PATIENT-FOCUSED issues "
     "identified in grad_answer_pc. Provide clear, actionable advice on prompt "
     "improvement. Output ONLY the advice."},

    {"tgd",
     "You are an AI assistant tasked with refining a medical consultation "
     "prompt.\n"
     "\n"
     "The Original Prompt (P_t) to be improved is:\n"
     "{prompt}\n"
     "\n"
     "The Original Answer generated by P_t is:\n"
     "{answer}\n"
     "\n"
     "We need to create an Updated Prompt (P) based on the following feedback, "
     "which aims to make P more effective for refining answers like A.\n"
     "Feedback derived from Context critiques (grad_prompt_kc):\n"
     "{prompt_grad_kc}\n"
     "\n"
     "Feedback derived from PATIENT QUERY critiques (grad_prompt_pc):\n"
     "{prompt_grad_pc}\n"
     "\n"
     "Original Patient Query (q) for context: {query}\n"
     "Example of an answer (A) that P_t was used to refine: {example_answer}\n"
     "\n"
     "Your task: Generate the Updated Prompt (P).\n"
     "This P must be a complete set of instructions and context. When P is "
     "later combined with a new 'current answer (A)', the LLM receiving "
     "(P + actual text of A) should be guided to:\n"
     "1. Produce a refined version of that 'current answer (A)'.\n"
     "2. Implicitly incorporate the improvements suggested by the feedback "
     "(grad_prompt_kc, grad_prompt_pc) through your new instructions in P.\n"
     "3. Ensure the refined answer directly addresses the patient's query, is "
     "factually sound, clear, and empathetic.\n"
     "4. Output ONLY the refined medical answer itself, without any "
     "conversational preamble, meta-commentary, self-correction notes, or any "
     "text other than the refined answer.\n"
     "\n"
     "Focus on making P a robust set of instructions for the refinement task.\n"
     "\n"
     "Output ONLY the Updated Prompt (P)."},

    {"judge",
     "Medical Query:\n"
     "{query}\n"
     "\n"
     "Response A:\n"
     "{answer_a}\n"
     "\n"
     "Response B:\n"
     "{answer_b}\n"
     "\n"
     "Key Requirements:\n"
     "- Comprehensiveness: Evaluate whether the response is thorough, covering "
     "all relevant aspects of the query.\n"
     "- Relevance: Determine if the response directly addresses the query "
     "without extraneous information.\n"
     "- Safety: Ensure the response is medically accurate, avoiding harmful or "
     "misleading advice and adhering to clinical best practices.\n"
     "\n"
     "Error Handling:\n"
     "- If a response is incomplete or unclear, note the issue in the "
     "justification and evaluate based on available content.\n"
     "- If the query is ambiguous, base the evaluation on the most likely "
     "interpretation.\n"
     "\n"
     "Output your evaluation in exactly this format:\n"
     "Comprehensiveness: [Response A/B] - [Justification]\n"
     "Relevance: [Response A/B] - [Justification]\n"
     "Safety: [Response A/B] - [Justification]"},
};

} // namespace

TemplateCatalog TemplateCatalog::builtin() {
    TemplateCatalog catalog;
    for (const auto& entry : kBuiltins) {
        catalog.templates_[entry.key] = entry.text;
    }
    return catalog;
}

TemplateCatalog TemplateCatalog::load(const std::string& dir,
                                      const std::string& language) {
    namespace fs = std::filesystem;
    TemplateCatalog catalog = builtin();
    fs::path root = fs::path(dir) / language;
    if (!fs::is_directory(root)) {
        throw ConfigError("template directory not found: " + root.string());
    }
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") {
            continue;
        }
        catalog.templates_[entry.path().stem().string()] =
            read_file(entry.path().string());
    }
    return catalog;
}

const std::string& TemplateCatalog::text(const std::string& key) const {
    auto it = templates_.find(key);
    if (it == templates_.end()) {
        throw TemplateError("unknown template key: " + key);
    }
    return it->second;
}

bool TemplateCatalog::has(const std::string& key) const {
    return templates_.count(key) > 0;
}

void TemplateCatalog::set(const std::string& key, std::string text) {
    templates_[key] = std::move(text);
}

std::vector<std::string> TemplateCatalog::keys() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [key, value] : templates_) {
        out.push_back(key);
    }
    return out;
}

std::string TemplateCatalog::render(
    const std::string& key,
    const std::map<std::string, std::string>& values) const {
    const std::string& source = text(key);
    std::set<std::string> used;
    std::string out;
    out.reserve(source.size());
    std::size_t pos = 0;
    while (pos < source.size()) {
        char c = source[pos];
        if (c != '{') {
            out.push_back(c);
            ++pos;
            continue;
        }
        std::size_t close = source.find('}', pos + 1);
        if (close == std::string::npos) {
            out.append(source, pos, std::string::npos);
            break;
        }
        std::string name = source.substr(pos + 1, close - pos - 1);
        auto it = values.find(name);
        if (it == values.end()) {
            out.append(source, pos, close - pos + 1);
            pos = close + 1;
            continue;
        }
        out.append(it->second);
        used.insert(name);
        pos = close + 1;
    }
    for (const auto& [name, value] : values) {
        if (!used.count(name)) {
            throw TemplateError("template '" + key +
                                "' is missing placeholder {" + name + "}");
        }
    }
    return out;
}

} // namespace doctorrag
