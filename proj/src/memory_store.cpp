#include "autoskill/memory_store.hpp"

#include "autoskill/errors.hpp"

namespace autoskill {

bool is_memory_header_line(const std::string& line) {
    if (line.rfind("## ", 0) != 0) return false;
    return parse_utc_header(line.substr(3)).has_value();
}

MemoryBlock append_block(const fs::path& file, const std::string& content, const TimeSource& clock) {
    std::string trimmed = trim(content);
    if (trimmed.empty()) throw Error(ErrorCode::empty_content, "memory block content is empty");

    MemoryBlock block;
    block.timestamp = clock();
    block.content = trimmed;

    std::string chunk = "## " + format_utc_header(block.timestamp) + "\n" + trimmed + "\n\n";
    append_file_locked(file, chunk);
    return block;
}

std::vector<MemoryBlock> read_blocks(const fs::path& file) {
    std::vector<MemoryBlock> blocks;
    if (!fs::exists(file)) return blocks;

    std::string text;
    {
        ScopedFileLock lock(file, /*exclusive=*/false);
        text = read_file(file);
    }
    std::vector<std::string> lines = split_lines(text);

    auto flush = [&](std::vector<std::string>& content_lines, MemoryBlock block) {
        // drop the single trailing separator line the writer appended
        if (!content_lines.empty() && content_lines.back().empty()) content_lines.pop_back();
        std::string joined;
        for (size_t i = 0; i < content_lines.size(); ++i) {
            if (i) joined += '\n';
            joined += content_lines[i];
        }
        block.content = joined;
        if (block.pre_header && joined.empty()) return;  // pure whitespace prefix, not a block
        blocks.push_back(std::move(block));
    };

    MemoryBlock current;
    current.pre_header = true;
    std::vector<std::string> content_lines;
    bool in_block = false;

    for (const auto& line : lines) {
        if (is_memory_header_line(line)) {
            if (in_block || !content_lines.empty()) flush(content_lines, current);
            content_lines.clear();
            current = MemoryBlock{};
            current.timestamp = *parse_utc_header(line.substr(3));
            in_block = true;
        } else {
            content_lines.push_back(line);
        }
    }
    if (in_block || !content_lines.empty()) flush(content_lines, current);
    return blocks;
}

std::string read_memory_text(const fs::path& file) {
    if (!fs::exists(file)) return "";
    ScopedFileLock lock(file, /*exclusive=*/false);
    return read_file(file);
}

}  // namespace autoskill
