#include "modal/signature.hpp"

#include <algorithm>
#include <cctype>

#include "modal/error.hpp"

namespace modal {

bool valid_name(const std::string& name) {
  if (name.empty() || name == "T") return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0]))) return false;
  return std::all_of(name.begin() + 1, name.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

namespace {
void check_names(const std::vector<std::string>& names, const char* what) {
  if (names.empty()) throw PreconditionError(std::string("empty ") + what + " set");
  for (size_t i = 0; i < names.size(); ++i) {
    if (!valid_name(names[i]))
      throw PreconditionError(std::string("bad ") + what + " name '" + names[i] + "'");
    for (size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j])
        throw PreconditionError(std::string("duplicate ") + what + " '" + names[i] + "'");
  }
}
}  // namespace

Signature::Signature(std::vector<std::string> atoms, std::vector<std::string> agents)
    : atoms_(std::move(atoms)), agents_(std::move(agents)) {
  check_names(atoms_, "atom");
  check_names(agents_, "agent");
}

int Signature::atom_index(const std::string& name) const {
  auto it = std::find(atoms_.begin(), atoms_.end(), name);
  return it == atoms_.end() ? -1 : static_cast<int>(it - atoms_.begin());
}

int Signature::agent_index(const std::string& name) const {
  auto it = std::find(agents_.begin(), agents_.end(), name);
  return it == agents_.end() ? -1 : static_cast<int>(it - agents_.begin());
}

}  // namespace modal
