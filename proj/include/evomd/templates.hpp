#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evomd/formula.hpp"
#include "evomd/task.hpp"

namespace evomd {

// Instruction templates. The texts are load-bearing: fine-tuned checkpoints
// are conditioned on these exact bytes, so each template's SHA-256 is pinned
// and checked by the test suite. Do not reflow or "fix" punctuation.
namespace templates {

extern const char* const kSystem;
extern const char* const kForward1;
extern const char* const kForward2;
extern const char* const kBackward;

extern const char* const kSystemSha256;
extern const char* const kForward1Sha256;
extern const char* const kForward2Sha256;
extern const char* const kBackwardSha256;

// Static reasoning-elicitation prompts (emitted verbatim via `evomd templates`;
// never instantiated into dataset records). Placeholders: {history_seq},
// {predict_res}, {duration}.
extern const char* const kReasoningSystem;
extern const char* const kReasoningInstruction;

}  // namespace templates

// Recomputes every pinned hash; throws ValidationError on any mismatch.
void verify_template_hashes();

// `(MoO,98); (MoOS2,3); (MoS,182)` — no space inside a tuple, "; " between.
std::string serialize_history(const std::vector<std::pair<CanonicalFormula, std::int64_t>>& history);

// Output/answer rendering: `(MoS3, 106)` — space after the comma, multiple
// targets joined with "; ".
std::string serialize_tuple(const CanonicalFormula& formula, std::int64_t duration_ps);
std::string serialize_targets(const std::vector<std::pair<CanonicalFormula, std::int64_t>>& targets);

// Task template with {SEQUENCE_HISTORY} substituted. potential_k shares the
// forward_1 template. Empty history is an error.
std::string format_instruction(Task task,
                               const std::vector<std::pair<CanonicalFormula, std::int64_t>>& history);

const char* instruction_template(Task task);

}  // namespace evomd
