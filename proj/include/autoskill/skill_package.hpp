#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autoskill/util.hpp"

namespace autoskill {

// Parsed YAML-subset frontmatter of a SKILL.md. Only `name` and `description`
// are required; unrecognized keys are preserved in order. The raw frontmatter
// lines are kept so a parsed file can be re-rendered byte-identically.
struct SkillFrontmatter {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, std::string>> extra;  // order-stable unknown keys
    bool has_warnings = false;  // unknown/unparseable keys were present
    // Original lines between the `---` delimiters (no trailing newlines).
    // Empty for programmatically built frontmatter.
    std::vector<std::string> raw_lines;
};

struct ParsedSkillMd {
    SkillFrontmatter frontmatter;
    std::string body;  // verbatim bytes after the closing delimiter line
    bool closed_with_newline = true;
};

// Parses SKILL.md text. `dir_name` is the enclosing directory's basename and
// must equal the frontmatter name. Throws Error with codes MissingFrontmatter,
// MissingRequiredKey, MalformedName, NameMismatch.
ParsedSkillMd parse_skill_md(std::string_view text, std::string_view dir_name);

// Inverse of parse: for text that came from parse_skill_md this reproduces
// the input bytes exactly; for synthetic frontmatter it renders the canonical
// `key: value` form.
std::string render_skill_md(const ParsedSkillMd& parsed);

struct SkillPackage {
    fs::path root;  // empty for a package that only exists in memory
    SkillFrontmatter frontmatter;
    std::string body;
    bool closed_with_newline = true;
    bool has_scripts = false;
    bool has_tests = false;
    bool has_resources = false;
    bool has_references = false;
    // Relative paths (under root) of every file in the four subdirectories,
    // sorted. SKILL.md itself is not listed.
    std::vector<std::string> files;

    const std::string& name() const { return frontmatter.name; }
};

// Loads and parses a package directory. Throws on structural errors; use
// validate_package for a non-throwing report.
SkillPackage parse_package(const fs::path& root);

struct ValidationFinding {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationFinding> errors;    // blocking
    std::vector<ValidationFinding> warnings;  // non-blocking
    bool ok() const { return errors.empty(); }
    ojson to_json() const;
};

// Never throws: every finding lands in the report.
ValidationReport validate_package(const fs::path& root);

// Writes the package as a new directory `dest/<name>/`. SKILL.md is rendered
// from the parsed structure; listed files are copied from pkg.root.
// `.memory.md` is never written. Throws DestinationExists / IoFailure.
fs::path write_skill_package(const SkillPackage& pkg, const fs::path& dest);

struct CatalogEntry {
    std::string name;
    std::string description;
};

CatalogEntry catalog_entry(const SkillPackage& pkg);

struct SkillMemoryRef {
    fs::path path;
    bool exists = false;
};

// The lazily created sibling `.memory.md` of a skill directory.
SkillMemoryRef skill_memory_ref(const fs::path& root);

// Exportable file list: every file under root except any `.memory.md`,
// as sorted paths prefixed with the package name.
std::vector<std::string> export_file_list(const fs::path& root);

// Packs export_file_list into a ustar archive at tar_path.
void export_archive(const fs::path& root, const fs::path& tar_path);

// Entry names of a ustar archive (test/inspection helper).
std::vector<std::string> tar_entry_names(const fs::path& tar_path);

// Warn above this description length; the catalog is injected into every
// prompt and assumes short descriptions.
inline constexpr std::size_t kDescriptionWarnLength = 2000;

}  // namespace autoskill
