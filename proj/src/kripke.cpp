#include "modal/kripke.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "modal/error.hpp"

namespace modal {

KripkeModel::KripkeModel(Signature sig, std::vector<std::string> states, const Relations& rel,
                         const Valuation& val)
    : sig_(std::move(sig)), states_(std::move(states)) {
  if (states_.empty()) throw PreconditionError("model has no states");
  if (states_.size() > kMaxStates) throw PreconditionError("model exceeds state cap");
  std::map<std::string, int> index;
  for (size_t i = 0; i < states_.size(); ++i) {
    if (!valid_name(states_[i])) throw PreconditionError("bad state name '" + states_[i] + "'");
    if (!index.emplace(states_[i], static_cast<int>(i)).second)
      throw PreconditionError("duplicate state '" + states_[i] + "'");
  }
  size_t n = states_.size();
  succ_.assign(sig_.agents().size(), std::vector<StateSet>(n, StateSet(n)));
  val_.assign(sig_.atoms().size(), StateSet(n));
  auto lookup = [&](const std::string& name, const char* what) {
    auto it = index.find(name);
    if (it == index.end())
      throw PreconditionError(std::string(what) + " mentions unknown state '" + name + "'");
    return it->second;
  };
  for (const auto& [agent, pairs] : rel) {
    int ai = sig_.agent_index(agent);
    if (ai < 0) throw PreconditionError("relation for undeclared agent '" + agent + "'");
    for (const auto& [from, to] : pairs)
      succ_[ai][lookup(from, "relation")].set(lookup(to, "relation"));
  }
  for (const auto& [atom, where] : val) {
    int pi = sig_.atom_index(atom);
    if (pi < 0) throw PreconditionError("valuation for undeclared atom '" + atom + "'");
    for (const auto& name : where) val_[pi].set(lookup(name, "valuation"));
  }
}

int KripkeModel::state_index(const std::string& name) const {
  auto it = std::find(states_.begin(), states_.end(), name);
  return it == states_.end() ? -1 : static_cast<int>(it - states_.begin());
}

PointedKripkeModel::PointedKripkeModel(std::shared_ptr<const KripkeModel> m, int pt)
    : model(std::move(m)), point(pt) {
  if (point < 0 || point >= model->num_states())
    throw PreconditionError("point out of range");
}

PointedKripkeModel::PointedKripkeModel(std::shared_ptr<const KripkeModel> m, const std::string& pt)
    : model(std::move(m)) {
  point = model->state_index(pt);
  if (point < 0) throw PreconditionError("point '" + pt + "' is not a state");
}

const StateSet& Evaluator::states_satisfying(const Formula& f) {
  if (auto it = memo_.find(f.node()); it != memo_.end()) return it->second;
  const KripkeModel& m = *m_;
  StateSet out(m.num_states());
  switch (f.op()) {
    case Op::Top:
      out.set();
      break;
    case Op::Atom: {
      int p = m.sig().atom_index(f.name());
      if (p < 0) throw PreconditionError("atom '" + f.name() + "' not in model signature");
      out = m.atom_states(p);
      break;
    }
    case Op::Neg:
      out = ~states_satisfying(f.child());
      break;
    case Op::And:
      out = states_satisfying(f.left()) & states_satisfying(f.right());
      break;
    case Op::Or:
      out = states_satisfying(f.left()) | states_satisfying(f.right());
      break;
    case Op::Implies:
      out = ~states_satisfying(f.left()) | states_satisfying(f.right());
      break;
    case Op::Box:
    case Op::Diamond: {
      int a = m.sig().agent_index(f.name());
      if (a < 0) throw PreconditionError("agent '" + f.name() + "' not in model signature");
      const StateSet& body = states_satisfying(f.child());
      for (int s = 0; s < m.num_states(); ++s) {
        const StateSet& succ = m.successors(a, s);
        bool hold = f.op() == Op::Box ? succ.is_subset_of(body) : succ.intersects(body);
        if (hold) out.set(s);
      }
      break;
    }
  }
  return memo_.emplace(f.node(), std::move(out)).first->second;
}

bool satisfies(const PointedKripkeModel& x, const Formula& f) {
  Evaluator ev(x.model);
  return ev.at(f, x.point);
}

std::vector<std::string> satisfying_states(const KripkeModel& m, const Formula& f) {
  // Evaluator wants shared ownership; alias without taking it.
  auto alias = std::shared_ptr<const KripkeModel>(&m, [](const KripkeModel*) {});
  Evaluator ev(alias);
  const StateSet& mask = ev.states_satisfying(f);
  std::vector<std::string> out;
  for (int s = 0; s < m.num_states(); ++s)
    if (mask.test(s)) out.push_back(m.state_names()[s]);
  return out;
}

PointedKripkeModel generated_submodel(const PointedKripkeModel& x) {
  const KripkeModel& m = *x.model;
  int agents = static_cast<int>(m.sig().agents().size());
  StateSet seen(m.num_states());
  seen.set(x.point);
  StateSet frontier = seen;
  while (frontier.any()) {
    StateSet next(m.num_states());
    for (auto s = frontier.find_first(); s != StateSet::npos; s = frontier.find_next(s))
      for (int a = 0; a < agents; ++a) next |= m.successors(a, static_cast<int>(s));
    frontier = next - seen;
    seen |= next;
  }
  std::vector<std::string> states;
  for (auto s = seen.find_first(); s != StateSet::npos; s = seen.find_next(s))
    states.push_back(m.state_names()[s]);
  KripkeModel::Relations rel;
  for (int a = 0; a < agents; ++a) {
    auto& pairs = rel[m.sig().agents()[a]];
    for (auto s = seen.find_first(); s != StateSet::npos; s = seen.find_next(s)) {
      StateSet succ = m.successors(a, static_cast<int>(s)) & seen;
      for (auto t = succ.find_first(); t != StateSet::npos; t = succ.find_next(t))
        pairs.emplace_back(m.state_names()[s], m.state_names()[t]);
    }
  }
  KripkeModel::Valuation val;
  for (size_t p = 0; p < m.sig().atoms().size(); ++p) {
    auto& where = val[m.sig().atoms()[p]];
    StateSet pos = m.atom_states(static_cast<int>(p)) & seen;
    for (auto s = pos.find_first(); s != StateSet::npos; s = pos.find_next(s))
      where.push_back(m.state_names()[s]);
  }
  auto sub = std::make_shared<KripkeModel>(m.sig(), std::move(states), rel, val);
  return PointedKripkeModel(sub, x.point_name());
}

namespace {

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

struct ModelLines {
  std::vector<std::string> atoms, agents, states;
  std::map<std::string, std::string> rel, val;
  std::string point;
  bool have_atoms = false, have_agents = false, have_states = false, have_point = false;
};

void parse_line(ModelLines& acc, const std::string& line, int lineno) {
  auto fail = [&](const std::string& msg) {
    throw ParseError("model line " + std::to_string(lineno) + ": " + msg);
  };
  size_t colon = line.find(':');
  if (colon == std::string::npos) fail("expected 'key: ...'");
  std::string key = line.substr(0, colon);
  std::string rest = line.substr(colon + 1);
  while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
  auto words = split_names(key);
  if (words.empty()) fail("empty key");
  if (words[0] == "sig" && words.size() == 2 && words[1] == "atoms") {
    if (acc.have_atoms) fail("duplicate 'sig atoms'");
    acc.atoms = split_names(rest);
    acc.have_atoms = true;
  } else if (words[0] == "sig" && words.size() == 2 && words[1] == "agents") {
    if (acc.have_agents) fail("duplicate 'sig agents'");
    acc.agents = split_names(rest);
    acc.have_agents = true;
  } else if (words[0] == "states" && words.size() == 1) {
    if (acc.have_states) fail("duplicate 'states'");
    acc.states = split_names(rest);
    acc.have_states = true;
  } else if (words[0] == "rel" && words.size() == 2) {
    if (!acc.rel.emplace(words[1], rest).second) fail("duplicate 'rel " + words[1] + "'");
  } else if (words[0] == "val" && words.size() == 2) {
    if (!acc.val.emplace(words[1], rest).second) fail("duplicate 'val " + words[1] + "'");
  } else if (words[0] == "point" && words.size() == 1) {
    if (acc.have_point) fail("duplicate 'point'");
    auto names = split_names(rest);
    if (names.size() != 1) fail("'point' wants exactly one state");
    acc.point = names[0];
    acc.have_point = true;
  } else {
    fail("unknown key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> parse_edges(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& tok : split_names(text)) {
    size_t arrow = tok.find("->");
    if (arrow == std::string::npos || arrow == 0 || arrow + 2 >= tok.size())
      throw ParseError("bad edge '" + tok + "' (want from->to)");
    out.emplace_back(tok.substr(0, arrow), tok.substr(arrow + 2));
  }
  return out;
}

ModelLines scan_lines(const std::string& text) {
  ModelLines acc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] == '#') continue;
    parse_line(acc, line, lineno);
  }
  if (!acc.have_atoms) throw ParseError("model is missing 'sig atoms:'");
  if (!acc.have_agents) throw ParseError("model is missing 'sig agents:'");
  if (!acc.have_states) throw ParseError("model is missing 'states:'");
  return acc;
}

}  // namespace

PointedKripkeModel parse_model(const std::string& text) {
  ModelLines acc = scan_lines(text);
  if (!acc.have_point) throw ParseError("model is missing 'point:'");
  try {
    Signature sig(acc.atoms, acc.agents);
    KripkeModel::Relations rel;
    for (const auto& [agent, body] : acc.rel) rel[agent] = parse_edges(body);
    KripkeModel::Valuation val;
    for (const auto& [atom, body] : acc.val) val[atom] = split_names(body);
    auto m = std::make_shared<KripkeModel>(sig, acc.states, rel, val);
    return PointedKripkeModel(m, acc.point);
  } catch (const PreconditionError& e) {
    throw ParseError(std::string("bad model: ") + e.what());
  }
}

std::string write_model(const PointedKripkeModel& x) {
  const KripkeModel& m = *x.model;
  std::ostringstream out;
  out << "sig atoms:";
  for (const auto& p : m.sig().atoms()) out << ' ' << p;
  out << "\nsig agents:";
  for (const auto& a : m.sig().agents()) out << ' ' << a;
  out << "\nstates:";
  for (const auto& s : m.state_names()) out << ' ' << s;
  out << '\n';
  for (size_t a = 0; a < m.sig().agents().size(); ++a) {
    out << "rel " << m.sig().agents()[a] << ':';
    for (int s = 0; s < m.num_states(); ++s) {
      const StateSet& succ = m.successors(static_cast<int>(a), s);
      for (auto t = succ.find_first(); t != StateSet::npos; t = succ.find_next(t))
        out << ' ' << m.state_names()[s] << "->" << m.state_names()[t];
    }
    out << '\n';
  }
  for (size_t p = 0; p < m.sig().atoms().size(); ++p) {
    out << "val " << m.sig().atoms()[p] << ':';
    for (int s = 0; s < m.num_states(); ++s)
      if (m.atom_at(static_cast<int>(p), s)) out << ' ' << m.state_names()[s];
    out << '\n';
  }
  out << "point: " << x.point_name() << '\n';
  return out.str();
}

std::vector<PointedKripkeModel> enumerate_pointed_models(const Signature& sig, int max_states,
                                                         long cap) {
  int na = static_cast<int>(sig.agents().size());
  int np = static_cast<int>(sig.atoms().size());
  long double total = 0;
  for (int n = 1; n <= max_states; ++n) {
    int bits = n * n * na + n * np;
    if (bits > 40) throw BudgetError("model enumeration space too large");
    total += std::ldexp(static_cast<long double>(n), bits);
  }
  if (total > static_cast<long double>(cap))
    throw BudgetError("model enumeration exceeds cap of " + std::to_string(cap));

  std::vector<PointedKripkeModel> out;
  out.reserve(static_cast<size_t>(total));
  for (int n = 1; n <= max_states; ++n) {
    std::vector<std::string> states;
    for (int s = 0; s < n; ++s) states.push_back("w" + std::to_string(s));
    uint64_t rel_combos = 1ULL << (n * n * na);
    uint64_t val_combos = 1ULL << (n * np);
    for (uint64_t rbits = 0; rbits < rel_combos; ++rbits) {
      KripkeModel::Relations rel;
      int bit = 0;
      for (int a = 0; a < na; ++a) {
        auto& pairs = rel[sig.agents()[a]];
        for (int s = 0; s < n; ++s)
          for (int t = 0; t < n; ++t, ++bit)
            if ((rbits >> bit) & 1) pairs.emplace_back(states[s], states[t]);
      }
      for (uint64_t vbits = 0; vbits < val_combos; ++vbits) {
        KripkeModel::Valuation val;
        int vb = 0;
        for (int p = 0; p < np; ++p) {
          auto& where = val[sig.atoms()[p]];
          for (int s = 0; s < n; ++s, ++vb)
            if ((vbits >> vb) & 1) where.push_back(states[s]);
        }
        auto m = std::make_shared<KripkeModel>(sig, states, rel, val);
        for (int pt = 0; pt < n; ++pt) out.emplace_back(m, pt);
      }
    }
  }
  return out;
}

}  // namespace modal
