#pragma once

#include <string>
#include <utility>
#include <vector>

namespace spazer {

/// The five stage templates with {placeholder} slots. The builtin copies are
/// compiled in from prompts/*.txt; load_dir overrides them from disk.
struct PromptLibrary {
  std::string target_class;
  std::string view_selection;
  std::string candidate_screening;
  std::string joint_decision;
  std::string visual_fallback;

  static const PromptLibrary& builtin();
  static PromptLibrary load_dir(const std::string& dir);
};

/// Replaces every "{key}" occurrence for each substitution pair. Unknown
/// braces are left untouched.
std::string render_template(std::string tmpl,
                            const std::vector<std::pair<std::string, std::string>>& subs);

}  // namespace spazer
