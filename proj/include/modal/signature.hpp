#pragma once

#include <string>
#include <vector>

namespace modal {

// Finite sets of atoms and agents. Order is significant: it fixes the
// canonical ordering used by valuations, characteristic formulas and type
// enumeration, so two signatures with the same names in a different order
// compare unequal.
class Signature {
 public:
  Signature(std::vector<std::string> atoms, std::vector<std::string> agents);

  const std::vector<std::string>& atoms() const { return atoms_; }
  const std::vector<std::string>& agents() const { return agents_; }

  // -1 when absent.
  int atom_index(const std::string& name) const;
  int agent_index(const std::string& name) const;

  bool operator==(const Signature& o) const {
    return atoms_ == o.atoms_ && agents_ == o.agents_;
  }
  bool operator!=(const Signature& o) const { return !(*this == o); }

 private:
  std::vector<std::string> atoms_;
  std::vector<std::string> agents_;
};

// [a-zA-Z][a-zA-Z0-9_]*, and not the reserved constant "T".
bool valid_name(const std::string& name);

}  // namespace modal
