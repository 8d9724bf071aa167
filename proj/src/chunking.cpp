#include "coa/chunking.hpp"

#include <cctype>
#include <cstdint>

namespace coa {

namespace {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline bool is_utf8_continuation(char c) {
    return (static_cast<unsigned char>(c) & 0xC0u) == 0x80u;
}

// End positions of the maximal whitespace / non-whitespace runs. Every entry
// is a legal whitespace-boundary split point (or end of text).
std::vector<size_t> segment_bounds(const std::string& text) {
    std::vector<size_t> bounds;
    size_t i = 0;
    while (i < text.size()) {
        bool ws = is_space(text[i]);
        size_t j = i + 1;
        while (j < text.size() && is_space(text[j]) == ws) ++j;
        bounds.push_back(j);
        i = j;
    }
    return bounds;
}

} // namespace

std::vector<Chunk> split_into_chunks(const std::string& doc_id, const std::string& text,
                                     int limit, const TokenEstimator& est) {
    if (limit <= 0) throw std::invalid_argument("chunk token limit must be > 0");
    std::vector<Chunk> chunks;
    if (text.empty()) return chunks;

    const std::vector<size_t> bounds = segment_bounds(text);
    std::string_view view(text);

    auto fits = [&](size_t begin, size_t end) {
        return est.estimate(view.substr(begin, end - begin)) <= limit;
    };

    size_t pos = 0;
    size_t seg = 0; // first bound strictly past pos
    while (pos < text.size()) {
        while (seg < bounds.size() && bounds[seg] <= pos) ++seg;

        size_t end = 0;
        if (fits(pos, bounds[seg])) {
            // Greedy longest fit over whole segments; the estimate is
            // monotone under extension, so binary search is valid.
            size_t lo = seg, hi = bounds.size() - 1;
            while (lo < hi) {
                size_t mid = lo + (hi - lo + 1) / 2;
                if (fits(pos, bounds[mid]))
                    lo = mid;
                else
                    hi = mid - 1;
            }
            end = bounds[lo];
        } else {
            // Whitespace-free run too large for the window: cut at the
            // largest codepoint boundary that still fits.
            size_t run_end = bounds[seg];
            std::vector<size_t> cps;
            for (size_t p = pos + 1; p <= run_end; ++p) {
                if (p == run_end || !is_utf8_continuation(text[p])) cps.push_back(p);
            }
            size_t lo = 0, hi = cps.size() - 1, best = 0;
            bool any = false;
            while (lo <= hi) {
                size_t mid = lo + (hi - lo) / 2;
                if (fits(pos, cps[mid])) {
                    any = true;
                    best = mid;
                    lo = mid + 1;
                } else {
                    if (mid == 0) break;
                    hi = mid - 1;
                }
            }
            if (!any) {
                throw TextUnsplittable("single unit at byte " + std::to_string(pos) +
                                       " of doc '" + doc_id + "' exceeds token limit " +
                                       std::to_string(limit));
            }
            end = cps[best];
        }

        Chunk c;
        c.doc_id = doc_id;
        c.seq_index = static_cast<int>(chunks.size());
        c.chunk_id = doc_id + "#" + std::to_string(c.seq_index);
        c.text = text.substr(pos, end - pos);
        c.token_count = est.estimate(c.text);
        chunks.push_back(std::move(c));
        pos = end;
    }
    return chunks;
}

} // namespace coa
