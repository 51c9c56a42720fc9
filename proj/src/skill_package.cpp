#include "autoskill/skill_package.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "autoskill/errors.hpp"

namespace autoskill {

namespace {

constexpr std::array<const char*, 4> kSubdirs = {"scripts", "tests", "resources", "references"};

bool is_known_subdir(const std::string& name) {
    return std::find(kSubdirs.begin(), kSubdirs.end(), name) != kSubdirs.end();
}

// `key: value` with a bare or double-quoted scalar. Returns false when the
// line does not introduce a key (continuation or junk).
bool split_key_value(const std::string& line, std::string& key, std::string& value) {
    if (line.empty() || std::isspace(static_cast<unsigned char>(line[0]))) return false;
    size_t colon = line.find(':');
    if (colon == std::string::npos) return false;
    key = trim(line.substr(0, colon));
    if (key.empty()) return false;
    for (char c : key) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    }
    value = trim(line.substr(colon + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
    return true;
}

}  // namespace

ParsedSkillMd parse_skill_md(std::string_view text, std::string_view dir_name) {
    std::vector<std::string> lines = split_lines(text);
    if (lines.empty() || lines[0] != "---")
        throw Error(ErrorCode::missing_frontmatter, "SKILL.md must open with a '---' line");

    size_t close = 0;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i] == "---") {
            close = i;
            break;
        }
    }
    if (close == 0)
        throw Error(ErrorCode::missing_frontmatter, "no closing '---' delimiter");

    ParsedSkillMd out;
    std::string* last_value = nullptr;
    for (size_t i = 1; i < close; ++i) {
        const std::string& line = lines[i];
        out.frontmatter.raw_lines.push_back(line);
        std::string key, value;
        if (split_key_value(line, key, value)) {
            if (key == "name") {
                out.frontmatter.name = value;
                last_value = &out.frontmatter.name;
            } else if (key == "description") {
                out.frontmatter.description = value;
                last_value = &out.frontmatter.description;
            } else {
                out.frontmatter.extra.emplace_back(key, value);
                out.frontmatter.has_warnings = true;
                last_value = &out.frontmatter.extra.back().second;
            }
        } else if (last_value && !trim(line).empty()) {
            // wrapped scalar: continuation lines fold into the previous value
            *last_value += " " + trim(line);
        } else if (!trim(line).empty()) {
            out.frontmatter.has_warnings = true;
        }
    }

    if (trim(out.frontmatter.name).empty())
        throw Error(ErrorCode::missing_required_key, "frontmatter key 'name' is required");
    if (trim(out.frontmatter.description).empty())
        throw Error(ErrorCode::missing_required_key, "frontmatter key 'description' is required");
    if (!is_kebab_case(out.frontmatter.name))
        throw Error(ErrorCode::malformed_name, "'" + out.frontmatter.name + "' is not kebab-case");
    if (out.frontmatter.name != dir_name)
        throw Error(ErrorCode::name_mismatch, "frontmatter name '" + out.frontmatter.name +
                                                  "' does not match directory '" +
                                                  std::string(dir_name) + "'");

    // body: bytes after the closing delimiter line
    size_t offset = 0;
    for (size_t i = 0; i <= close; ++i) offset += lines[i].size() + 1;  // +1 for '\n'
    if (offset > text.size()) {
        // closing '---' was the last line and had no trailing newline
        out.closed_with_newline = false;
        out.body.clear();
    } else {
        out.body = std::string(text.substr(offset));
    }
    return out;
}

std::string render_skill_md(const ParsedSkillMd& parsed) {
    std::string out = "---\n";
    if (!parsed.frontmatter.raw_lines.empty()) {
        for (const auto& line : parsed.frontmatter.raw_lines) {
            out += line;
            out += '\n';
        }
    } else {
        out += "name: " + parsed.frontmatter.name + "\n";
        out += "description: " + parsed.frontmatter.description + "\n";
        for (const auto& [key, value] : parsed.frontmatter.extra)
            out += key + ": " + value + "\n";
    }
    out += "---";
    if (parsed.closed_with_newline) out += '\n';
    out += parsed.body;
    return out;
}

SkillPackage parse_package(const fs::path& root) {
    if (!fs::is_directory(root))
        throw Error(ErrorCode::invalid_package, root.string() + " is not a directory");
    fs::path md = root / "SKILL.md";
    if (!fs::is_regular_file(md))
        throw Error(ErrorCode::invalid_package, "no SKILL.md in " + root.string());

    ParsedSkillMd parsed = parse_skill_md(read_file(md), root.filename().string());

    SkillPackage pkg;
    pkg.root = root;
    pkg.frontmatter = std::move(parsed.frontmatter);
    pkg.body = std::move(parsed.body);
    pkg.closed_with_newline = parsed.closed_with_newline;

    for (const char* sub : kSubdirs) {
        fs::path dir = root / sub;
        if (!fs::is_directory(dir)) continue;
        if (std::strcmp(sub, "scripts") == 0) pkg.has_scripts = true;
        if (std::strcmp(sub, "tests") == 0) pkg.has_tests = true;
        if (std::strcmp(sub, "resources") == 0) pkg.has_resources = true;
        if (std::strcmp(sub, "references") == 0) pkg.has_references = true;
        for (const auto& file : list_files_recursive(dir))
            pkg.files.push_back(std::string(sub) + "/" + file);
    }
    std::sort(pkg.files.begin(), pkg.files.end());
    return pkg;
}

ojson ValidationReport::to_json() const {
    ojson j;
    j["ok"] = ok();
    j["errors"] = ojson::array();
    for (const auto& f : errors) j["errors"].push_back({{"code", f.code}, {"message", f.message}});
    j["warnings"] = ojson::array();
    for (const auto& f : warnings) j["warnings"].push_back({{"code", f.code}, {"message", f.message}});
    return j;
}

ValidationReport validate_package(const fs::path& root) {
    ValidationReport report;
    auto err = [&](const std::string& code, const std::string& msg) {
        report.errors.push_back({code, msg});
    };
    auto warn = [&](const std::string& code, const std::string& msg) {
        report.warnings.push_back({code, msg});
    };

    if (!fs::is_directory(root)) {
        err("NotADirectory", root.string() + " does not exist or is not a directory");
        return report;
    }
    fs::path md = root / "SKILL.md";
    if (!fs::is_regular_file(md)) {
        err("MissingSkillMd", "package has no top-level SKILL.md");
        return report;
    }

    std::optional<ParsedSkillMd> parsed;
    try {
        parsed = parse_skill_md(read_file(md), root.filename().string());
    } catch (const Error& e) {
        err(to_string(e.code()), e.what());
    }
    if (parsed) {
        for (const auto& [key, value] : parsed->frontmatter.extra)
            warn("UnknownFrontmatterKey", "unrecognized frontmatter key '" + key + "'");
        if (parsed->frontmatter.description.size() > kDescriptionWarnLength)
            warn("LongDescription",
                 "description exceeds " + std::to_string(kDescriptionWarnLength) +
                     " characters; catalog cost grows with every prompt");
    }

    for (const auto& entry : fs::directory_iterator(root)) {
        std::string name = entry.path().filename().string();
        if (entry.is_directory()) {
            if (is_known_subdir(name)) {
                if (fs::is_empty(entry.path()))
                    warn("EmptySubdirectory", name + "/ present but empty");
            } else {
                warn("UnexpectedEntry", "unexpected directory '" + name + "/'");
            }
        } else {
            if (name != "SKILL.md" && name != ".memory.md")
                warn("UnexpectedEntry", "unexpected file '" + name + "'");
        }
    }
    return report;
}

fs::path write_skill_package(const SkillPackage& pkg, const fs::path& dest) {
    fs::path target = dest / pkg.name();
    if (fs::exists(target))
        throw Error(ErrorCode::destination_exists,
                    "destination already contains '" + pkg.name() + "'");
    try {
        fs::create_directories(target);
        ParsedSkillMd parsed{pkg.frontmatter, pkg.body, pkg.closed_with_newline};
        write_file(target / "SKILL.md", render_skill_md(parsed));
        for (const auto& rel : pkg.files) {
            if (fs::path(rel).filename() == ".memory.md") continue;
            if (pkg.root.empty())
                throw Error(ErrorCode::io_failure,
                            "package lists files but has no source root: " + rel);
            fs::path src = pkg.root / rel;
            if (!fs::is_regular_file(src))
                throw Error(ErrorCode::io_failure, "listed file missing on disk: " + rel);
            fs::create_directories((target / rel).parent_path());
            fs::copy_file(src, target / rel);
        }
    } catch (const Error&) {
        std::error_code ec;
        fs::remove_all(target, ec);
        throw;
    } catch (const fs::filesystem_error& e) {
        std::error_code ec;
        fs::remove_all(target, ec);
        throw Error(ErrorCode::io_failure, e.what());
    }
    return target;
}

CatalogEntry catalog_entry(const SkillPackage& pkg) {
    return {pkg.frontmatter.name, pkg.frontmatter.description};
}

SkillMemoryRef skill_memory_ref(const fs::path& root) {
    fs::path p = root / ".memory.md";
    return {p, fs::is_regular_file(p)};
}

std::vector<std::string> export_file_list(const fs::path& root) {
    std::vector<std::string> out;
    std::string prefix = root.filename().string();
    for (const auto& rel : list_files_recursive(root)) {
        if (fs::path(rel).filename() == ".memory.md") continue;
        out.push_back(prefix + "/" + rel);
    }
    return out;
}

// --- minimal ustar writer/reader ---------------------------------------------

namespace {

void octal_field(char* field, size_t width, unsigned long long value) {
    std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), value);
}

std::array<char, 512> tar_header(const std::string& name, size_t size) {
    std::array<char, 512> h{};
    if (name.size() >= 100) throw Error(ErrorCode::io_failure, "tar entry name too long: " + name);
    std::memcpy(h.data(), name.c_str(), name.size());
    octal_field(h.data() + 100, 8, 0644);       // mode
    octal_field(h.data() + 108, 8, 0);          // uid
    octal_field(h.data() + 116, 8, 0);          // gid
    octal_field(h.data() + 124, 12, size);      // size
    octal_field(h.data() + 136, 12, 0);         // mtime
    std::memset(h.data() + 148, ' ', 8);        // checksum placeholder
    h[156] = '0';                               // regular file
    std::memcpy(h.data() + 257, "ustar", 6);    // magic
    std::memcpy(h.data() + 263, "00", 2);       // version
    unsigned checksum = 0;
    for (unsigned char c : h) checksum += c;
    octal_field(h.data() + 148, 7, checksum);
    h[155] = ' ';
    return h;
}

}  // namespace

void export_archive(const fs::path& root, const fs::path& tar_path) {
    std::ofstream out(tar_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + tar_path.string());
    for (const auto& entry : export_file_list(root)) {
        fs::path src = root / fs::path(entry).lexically_relative(root.filename());
        std::string bytes = read_file(src);
        auto header = tar_header(entry, bytes.size());
        out.write(header.data(), 512);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        size_t pad = (512 - bytes.size() % 512) % 512;
        std::string zeros(pad, '\0');
        out.write(zeros.data(), static_cast<std::streamsize>(pad));
    }
    std::string end(1024, '\0');
    out.write(end.data(), 1024);
}

std::vector<std::string> tar_entry_names(const fs::path& tar_path) {
    std::vector<std::string> names;
    std::string data = read_file(tar_path);
    size_t off = 0;
    while (off + 512 <= data.size()) {
        const char* h = data.data() + off;
        if (h[0] == '\0') break;
        names.emplace_back(h, strnlen(h, 100));
        unsigned long long size = std::strtoull(data.substr(off + 124, 12).c_str(), nullptr, 8);
        off += 512 + ((size + 511) / 512) * 512;
    }
    return names;
}

}  // namespace autoskill
