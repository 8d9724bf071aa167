#pragma once

#include <string>
#include <string_view>

namespace coa {

// Worker and manager prompt templates, reproduced verbatim. Substitution
// touches only the three placeholder slots; an empty memory substitutes the
// empty string.

inline constexpr std::string_view kWorkerPromptTemplate =
    "{chunk}\n"
    "Here is the summary of the previous source text: {summary_till}\n"
    "Question: {query}\n"
    "You need to read current source text and summary of previous source text (if any) and "
    "generate a summary to include them both. Later, this summary will be used for other agents "
    "to answer the Query, if any. So please write the summary that can include the evidence for "
    "answering the Query.";

inline constexpr std::string_view kManagerPromptTemplate =
    "{task_specific_inst}\n"
    "The following are given passages. However, the source text is too long and has been "
    "summarized. You need to answer based on the summary:\n"
    "{summary}\n"
    "\n"
    "Question: {query}\n"
    "Answer:";

inline constexpr std::string_view kDefaultTaskInstruction =
    "Answer the question based on the context provided. Provide a concise and direct answer to "
    "the question. Avoid unnecessary details, explanations, or context. Just the answer is "
    "enough.\n"
    "\n"
    "For example, if the query were \"What is the capital of France?\", you should answer with "
    "\"Paris\" and not something like \"Paris is the capital of France\".";

std::string render_worker_prompt(std::string_view chunk_text, std::string_view memory_summary,
                                 std::string_view query);

std::string render_manager_prompt(std::string_view memory_summary, std::string_view query,
                                  std::string_view task_instruction = kDefaultTaskInstruction);

} // namespace coa
