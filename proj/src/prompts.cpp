#include "coa/prompts.hpp"

#include <array>

namespace coa {

namespace {

// Splits the template at its placeholders once and concatenates the literal
// segments with the values, so placeholder-looking text inside a value can
// never be rewritten.
std::string fill(std::string_view tmpl, std::array<std::string_view, 3> slots,
                 std::array<std::string_view, 3> values) {
    std::string out;
    size_t pos = 0;
    for (size_t k = 0; k < slots.size(); ++k) {
        size_t at = tmpl.find(slots[k], pos);
        out.append(tmpl.substr(pos, at - pos));
        out.append(values[k]);
        pos = at + slots[k].size();
    }
    out.append(tmpl.substr(pos));
    return out;
}

} // namespace

std::string render_worker_prompt(std::string_view chunk_text, std::string_view memory_summary,
                                 std::string_view query) {
    return fill(kWorkerPromptTemplate, {"{chunk}", "{summary_till}", "{query}"},
                {chunk_text, memory_summary, query});
}

std::string render_manager_prompt(std::string_view memory_summary, std::string_view query,
                                  std::string_view task_instruction) {
    return fill(kManagerPromptTemplate, {"{task_specific_inst}", "{summary}", "{query}"},
                {task_instruction, memory_summary, query});
}

} // namespace coa
