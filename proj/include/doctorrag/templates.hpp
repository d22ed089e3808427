#pragma once

#include <map>
#include <string>
#include <vector>

namespace doctorrag {

// Prompt texts keyed by role, with named {placeholder} slots. The built-in
// catalog carries the default English texts; per-deployment overrides are
// plain text files in a directory tree <dir>/<language>/<key>.txt.
class TemplateCatalog {
public:
    // Compiled-in defaults; always complete.
    static TemplateCatalog builtin();

    // Builtin defaults with any file overrides applied on top. A missing
    // directory for the requested language is an error; individual files may
    // be absent, in which case the builtin text stays.
    static TemplateCatalog load(const std::string& dir, const std::string& language);

    const std::string& text(const std::string& key) const;
    bool has(const std::string& key) const;
    void set(const std::string& key, std::string text);
    std::vector<std::string> keys() const;

    // Substitutes each value into its {name} slot. Every provided name must
    // occur in the template at least once; a template missing one raises
    // TemplateError naming the placeholder. Unknown {tokens} are left
    // verbatim. Substitution is single-pass: braces inside values are never
    // re-expanded.
    std::string render(const std::string& key,
                       const std::map<std::string, std::string>& values) const;

private:
    std::map<std::string, std::string> templates_;
};

} // namespace doctorrag
