#include "evomd/templates.hpp"

#include "evomd/errors.hpp"
#include "evomd/sha256.hpp"

namespace evomd {

std::string_view task_name(Task task) {
    switch (task) {
        case Task::forward_1: return "forward_1";
        case Task::forward_2: return "forward_2";
        case Task::backward: return "backward";
        case Task::potential_k: return "potential_k";
    }
    throw ValidationError("unknown task kind");
}

Task task_from_name(std::string_view name) {
    if (name == "forward_1" || name == "forward1") return Task::forward_1;
    if (name == "forward_2" || name == "forward2") return Task::forward_2;
    if (name == "backward") return Task::backward;
    if (name == "potential_k" || name == "potentialk") return Task::potential_k;
    throw ValidationError("unknown task \"" + std::string(name) +
                          "\" (expected forward_1, forward_2, backward, or potential_k)");
}

int target_count(Task task) { return task == Task::forward_2 ? 2 : 1; }

namespace templates {

const char* const kSystem =
    "You are an AI assistant to help me predict molecular sequence progression based on given "
    "molecular compositions and their existence durations and analysis. Each data point consists of "
    "a molecule and the duration it persists in the system, the unit of duration is ps. If the "
    "question is about predicting molecular sequences, format your answer as (molecule, time). "
    "Otherwise, answer normally.";

const char* const kForward1 =
    "The history sequence is {SEQUENCE_HISTORY}, What is the next element? Output ONLY the next "
    "element in the format: (molecule, time). No explanation. No code. No extra words!";

const char* const kForward2 =
    "The history sequence is {SEQUENCE_HISTORY}, What are the next two elements? Output ONLY the "
    "next two elements in the format: (molecule, time). No explanation. No code. No extra words!";

const char* const kBackward =
    "The history sequence is {SEQUENCE_HISTORY}, What is the previous element? Output ONLY the "
    "previous element in the format: (molecule, time). No explanation. No code. No extra words!";

const char* const kSystemSha256 = "17950d7616895decc8742fe756227e531438760840b6373d867d0deb593f7549";
const char* const kForward1Sha256 = "ecd2ef4bda018b21073479b957bd9b6b3c732a3e3f0cff1ffbd764ae6925170b";
const char* const kForward2Sha256 = "58aef8c8094cfef56c7f88d1bf7cf24e0816e59274ce3adaa2f121f4ee10376b";
const char* const kBackwardSha256 = "d042c60f8ca7cbfdabfedd5972ca2afdba63e279f0d7dd2e17c7e32a34237f9f";

const char* const kReasoningSystem =
    "You are an expert scientific simulator specializing in Reactive Molecular Dynamics (RMD) for "
    "Chemical Vapor Deposition (CVD) synthesis.\n"
    "\n"
    "System Context:\n"
    "The reaction system involves the sulfidation of Mo3O9 precursors by S2 gas. Key dynamics "
    "include Oxygen-Sulfur exchange, structural relaxation, and thermal decomposition.\n"
    "\n"
    "Task Definition:\n"
    "Your goal is to forecast the trajectory of chemical evolution. Each data point (Molecule, "
    "Duration) represents a distinct chemical state and its kinetic persistence (stability).\n"
    "- A short duration implies a transient intermediate or transition state.\n"
    "- A long duration implies a thermodynamically stable product or metastable trap.";

const char* const kReasoningInstruction =
    "Task: You are provided with a historical trajectory of molecular species and their durations.\n"
    "\n"
    "History Sequence: {history_seq}\n"
    "Your Model Prediction: ({predict_res})\n"
    "\n"
    "Instructions:\n"
    "Provide a scientific explanation for this transition. Your response must:\n"
    "1. Mechanism: Analyze the change in stoichiometry from the last history step to the predicted "
    "step. What specific chemical process drives this transformation?\n"
    "2. Stability: Analyze the predicted duration ({duration}). What does this specific timescale "
    "imply about the thermodynamic state or kinetic stability of the predicted molecule?\n"
    "3. Format: Write in strict, concise Academic English.\n"
    "Your answer must be in academic English, concise, and only include the reasoning (no extra "
    "content, no repetition).";

}  // namespace templates

void verify_template_hashes() {
    auto check = [](const char* name, const char* text, const char* pinned) {
        const std::string got = sha256_hex(text);
        if (got != pinned)
            throw ValidationError(std::string("template \"") + name + "\" drifted from its pinned hash: got " +
                                  got + ", pinned " + pinned);
    };
    check("system", templates::kSystem, templates::kSystemSha256);
    check("forward_1", templates::kForward1, templates::kForward1Sha256);
    check("forward_2", templates::kForward2, templates::kForward2Sha256);
    check("backward", templates::kBackward, templates::kBackwardSha256);
}

std::string serialize_history(const std::vector<std::pair<CanonicalFormula, std::int64_t>>& history) {
    std::string out;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i) out += "; ";
        out += "(" + history[i].first.render() + "," + std::to_string(history[i].second) + ")";
    }
    return out;
}

std::string serialize_tuple(const CanonicalFormula& formula, std::int64_t duration_ps) {
    return "(" + formula.render() + ", " + std::to_string(duration_ps) + ")";
}

std::string serialize_targets(const std::vector<std::pair<CanonicalFormula, std::int64_t>>& targets) {
    std::string out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (i) out += "; ";
        out += serialize_tuple(targets[i].first, targets[i].second);
    }
    return out;
}

const char* instruction_template(Task task) {
    switch (task) {
        case Task::forward_1: return templates::kForward1;
        case Task::forward_2: return templates::kForward2;
        case Task::backward: return templates::kBackward;
        case Task::potential_k: return templates::kForward1;  // same geometry, scored over candidates
    }
    throw ValidationError("unknown task kind");
}

std::string format_instruction(Task task,
                               const std::vector<std::pair<CanonicalFormula, std::int64_t>>& history) {
    if (history.empty()) throw ValidationError("format_instruction: empty history");
    const std::string tmpl = instruction_template(task);
    const std::string placeholder = "{SEQUENCE_HISTORY}";
    const auto pos = tmpl.find(placeholder);
    if (pos == std::string::npos) throw ValidationError("instruction template lacks {SEQUENCE_HISTORY}");
    return tmpl.substr(0, pos) + serialize_history(history) + tmpl.substr(pos + placeholder.size());
}

}  // namespace evomd
