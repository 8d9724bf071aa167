#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "coa/tokens.hpp"

namespace coa {

// A contiguous token-bounded slice of a source document. Chunks of one
// document partition its text: concatenating chunk texts in seq_index order
// reproduces the document byte for byte.
struct Chunk {
    std::string chunk_id; // "<doc_id>#<seq_index>", stable across runs
    std::string doc_id;
    int seq_index = 0;
    std::string text;
    int token_count = 0;
};

// A whitespace-free run exceeds the limit and the estimator mode cannot
// subdivide it further. The caller has to lower granularity or switch modes.
struct TextUnsplittable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Greedy longest-fit splitter. Split points fall on whitespace boundaries
// whenever the window contains one; oversized whitespace-free runs are cut at
// codepoint boundaries for byte-based modes.
std::vector<Chunk> split_into_chunks(const std::string& doc_id, const std::string& text,
                                     int limit, const TokenEstimator& est);

} // namespace coa
