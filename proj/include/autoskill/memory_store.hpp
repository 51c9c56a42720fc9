#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "autoskill/util.hpp"

namespace autoskill {

// One timestamped entry in an append-only Markdown memory file. The same
// format backs all three tiers: long-term (memory/long_term_memory/memory.md),
// session-scoped (<session>/memory.md), and per-skill (.memory.md).
struct MemoryBlock {
    std::chrono::system_clock::time_point timestamp{};
    std::string content;
    // Set when text precedes the first header (hand-edited file); such a
    // block has no meaningful timestamp.
    bool pre_header = false;
};

// Appends one block: header line `## YYYY-MM-DD HH:MM:SS UTC`, the content,
// then one blank separator line. The file is created lazily on first write;
// existing bytes are never touched. Appenders are serialized by an advisory
// lock on the file.
MemoryBlock append_block(const fs::path& file, const std::string& content, const TimeSource& clock);

// Reads the whole file back as blocks. Absent file yields an empty list.
// Content between headers is returned verbatim minus the trailing separator
// line. Junk before the first header becomes a leading pre_header block.
std::vector<MemoryBlock> read_blocks(const fs::path& file);

// Whole-file read used when surfacing memory verbatim; "" when absent.
std::string read_memory_text(const fs::path& file);

bool is_memory_header_line(const std::string& line);

}  // namespace autoskill
