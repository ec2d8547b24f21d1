#include "spazer/prompts.hpp"

#include "spazer/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace spazer {

namespace detail {
extern const char* const kPromptTargetClass;
extern const char* const kPromptViewSelection;
extern const char* const kPromptCandidateScreening;
extern const char* const kPromptJointDecision;
extern const char* const kPromptVisualFallback;
}  // namespace detail

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary lib{
      detail::kPromptTargetClass, detail::kPromptViewSelection,
      detail::kPromptCandidateScreening, detail::kPromptJointDecision,
      detail::kPromptVisualFallback};
  return lib;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open prompt template: " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

PromptLibrary PromptLibrary::load_dir(const std::string& dir) {
  const std::filesystem::path root(dir);
  PromptLibrary lib;
  lib.target_class = read_file(root / "target_class.txt");
  lib.view_selection = read_file(root / "view_selection.txt");
  lib.candidate_screening = read_file(root / "candidate_screening.txt");
  lib.joint_decision = read_file(root / "joint_decision.txt");
  lib.visual_fallback = read_file(root / "visual_fallback.txt");
  return lib;
}

std::string render_template(std::string tmpl,
                            const std::vector<std::pair<std::string, std::string>>& subs) {
  for (const auto& [key, value] : subs) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = tmpl.find(needle, pos)) != std::string::npos) {
      tmpl.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return tmpl;
}

}  // namespace spazer
