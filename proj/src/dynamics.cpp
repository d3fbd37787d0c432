#include "modal/dynamics.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "modal/error.hpp"

namespace modal {

namespace {

void check_over_signature(const Formula& f, const Signature& sig) {
  std::set<const Formula::Node*> seen;
  std::function<void(const Formula&)> walk = [&](const Formula& g) {
    if (!seen.insert(g.node()).second) return;
    switch (g.op()) {
      case Op::Top:
        return;
      case Op::Atom:
        if (sig.atom_index(g.name()) < 0)
          throw PreconditionError("atom '" + g.name() + "' not in signature");
        return;
      case Op::Neg:
        walk(g.child());
        return;
      case Op::Box:
      case Op::Diamond:
        if (sig.agent_index(g.name()) < 0)
          throw PreconditionError("agent '" + g.name() + "' not in signature");
        walk(g.child());
        return;
      case Op::And:
      case Op::Or:
      case Op::Implies:
        walk(g.left());
        walk(g.right());
        return;
    }
  };
  walk(f);
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
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

}  // namespace

// --- Postcondition clauses

ConjunctiveClause ConjunctiveClause::from_formula(const Formula& f, const Signature& sig) {
  ConjunctiveClause out;
  std::set<std::string> used;
  std::function<void(const Formula&, bool)> walk = [&](const Formula& g, bool positive) {
    switch (g.op()) {
      case Op::Top:
        if (!positive) throw PreconditionError("postcondition literal '~T' is contradictory");
        return;
      case Op::Atom:
        if (sig.atom_index(g.name()) < 0)
          throw PreconditionError("postcondition atom '" + g.name() + "' not in signature");
        if (!used.insert(g.name()).second)
          throw PreconditionError("postcondition mentions '" + g.name() + "' twice");
        (positive ? out.set_true : out.set_false).push_back(g.name());
        return;
      case Op::Neg:
        if (!positive) throw PreconditionError("postcondition is not a conjunction of literals");
        walk(g.child(), false);
        return;
      case Op::And:
        if (!positive) throw PreconditionError("postcondition is not a conjunction of literals");
        walk(g.left(), true);
        walk(g.right(), true);
        return;
      default:
        throw PreconditionError("postcondition is not a conjunction of literals");
    }
  };
  walk(f, true);
  auto sig_order = [&](std::vector<std::string>& names) {
    std::sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
      return sig.atom_index(a) < sig.atom_index(b);
    });
  };
  sig_order(out.set_true);
  sig_order(out.set_false);
  return out;
}

ConjunctiveClause ConjunctiveClause::parse(std::string_view text, const Signature& sig) {
  Formula f = Formula::parse(text, sig);
  try {
    return from_formula(f, sig);
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
}

Formula ConjunctiveClause::to_formula() const {
  std::vector<Formula> parts;
  for (const auto& name : set_true) parts.push_back(Formula::atom(name));
  for (const auto& name : set_false) parts.push_back(Formula::neg(Formula::atom(name)));
  return Formula::conj_all(parts);
}

// --- Action models

ActionModel::ActionModel(Signature sig, std::vector<std::string> actions, const Relations& rel,
                         std::map<std::string, Formula> pre,
                         std::map<std::string, ConjunctiveClause> post,
                         const std::vector<std::string>& designated)
    : sig_(std::move(sig)), actions_(std::move(actions)) {
  if (actions_.empty()) throw PreconditionError("action model has no actions");
  std::map<std::string, int> index;
  for (size_t i = 0; i < actions_.size(); ++i) {
    if (!valid_name(actions_[i]))
      throw PreconditionError("bad action name '" + actions_[i] + "'");
    if (!index.emplace(actions_[i], static_cast<int>(i)).second)
      throw PreconditionError("duplicate action '" + actions_[i] + "'");
  }
  size_t n = actions_.size();
  succ_.assign(sig_.agents().size(), std::vector<StateSet>(n, StateSet(n)));
  for (const auto& [agent, pairs] : rel) {
    int ai = sig_.agent_index(agent);
    if (ai < 0) throw PreconditionError("relation for undeclared agent '" + agent + "'");
    for (const auto& [from, to] : pairs) {
      auto f = index.find(from), t = index.find(to);
      if (f == index.end()) throw PreconditionError("relation mentions unknown action '" + from + "'");
      if (t == index.end()) throw PreconditionError("relation mentions unknown action '" + to + "'");
      succ_[ai][f->second].set(t->second);
    }
  }
  pre_.assign(n, Formula::top());
  for (auto& [name, f] : pre) {
    auto it = index.find(name);
    if (it == index.end())
      throw PreconditionError("precondition for unknown action '" + name + "'");
    check_over_signature(f, sig_);
    pre_[it->second] = std::move(f);
  }
  post_.assign(n, ConjunctiveClause{});
  for (auto& [name, c] : post) {
    auto it = index.find(name);
    if (it == index.end())
      throw PreconditionError("postcondition for unknown action '" + name + "'");
    for (const auto& atom : c.set_true)
      if (sig_.atom_index(atom) < 0)
        throw PreconditionError("postcondition atom '" + atom + "' not in signature");
    for (const auto& atom : c.set_false) {
      if (sig_.atom_index(atom) < 0)
        throw PreconditionError("postcondition atom '" + atom + "' not in signature");
      if (std::find(c.set_true.begin(), c.set_true.end(), atom) != c.set_true.end())
        throw PreconditionError("postcondition sets '" + atom + "' both true and false");
    }
    post_[it->second] = std::move(c);
  }
  if (designated.empty()) throw PreconditionError("designated set is empty");
  std::set<int> des;
  for (const auto& name : designated) {
    auto it = index.find(name);
    if (it == index.end()) throw PreconditionError("designated unknown action '" + name + "'");
    des.insert(it->second);
  }
  designated_.assign(des.begin(), des.end());
}

int ActionModel::action_index(const std::string& name) const {
  auto it = std::find(actions_.begin(), actions_.end(), name);
  return it == actions_.end() ? -1 : static_cast<int>(it - actions_.begin());
}

bool ActionModel::is_designated(int action) const {
  return std::binary_search(designated_.begin(), designated_.end(), action);
}

std::vector<Formula> ActionModel::distinct_preconditions() const {
  std::vector<Formula> out;
  std::set<std::string> seen;
  for (const Formula& f : pre_)
    if (seen.insert(f.render()).second) out.push_back(f);
  return out;
}

namespace {

struct ActionLines {
  std::vector<std::string> atoms, agents, actions, designated;
  std::map<std::string, std::string> rel, pre, post;
  bool have_atoms = false, have_agents = false, have_actions = false, have_designated = false;
};

void parse_action_line(ActionLines& acc, const std::string& line, int lineno) {
  auto fail = [&](const std::string& msg) {
    throw ParseError("action model line " + std::to_string(lineno) + ": " + msg);
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
  } else if (words[0] == "actions" && words.size() == 1) {
    if (acc.have_actions) fail("duplicate 'actions'");
    acc.actions = split_names(rest);
    acc.have_actions = true;
  } else if (words[0] == "rel" && words.size() == 2) {
    if (!acc.rel.emplace(words[1], rest).second) fail("duplicate 'rel " + words[1] + "'");
  } else if (words[0] == "pre" && words.size() == 2) {
    if (!acc.pre.emplace(words[1], rest).second) fail("duplicate 'pre " + words[1] + "'");
  } else if (words[0] == "post" && words.size() == 2) {
    if (!acc.post.emplace(words[1], rest).second) fail("duplicate 'post " + words[1] + "'");
  } else if (words[0] == "designated" && words.size() == 1) {
    if (acc.have_designated) fail("duplicate 'designated'");
    acc.designated = split_names(rest);
    acc.have_designated = true;
  } else {
    fail("unknown key '" + key + "'");
  }
}

}  // namespace

ActionModel parse_action_model(const std::string& text) {
  ActionLines acc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] == '#') continue;
    parse_action_line(acc, line, lineno);
  }
  if (!acc.have_atoms) throw ParseError("action model is missing 'sig atoms:'");
  if (!acc.have_agents) throw ParseError("action model is missing 'sig agents:'");
  if (!acc.have_actions) throw ParseError("action model is missing 'actions:'");
  if (!acc.have_designated) throw ParseError("action model is missing 'designated:'");
  try {
    Signature sig(acc.atoms, acc.agents);
    ActionModel::Relations rel;
    for (const auto& [agent, body] : acc.rel) rel[agent] = parse_edges(body);
    std::map<std::string, Formula> pre;
    for (const auto& [action, body] : acc.pre) pre.emplace(action, Formula::parse(body, sig));
    std::map<std::string, ConjunctiveClause> post;
    for (const auto& [action, body] : acc.post)
      post.emplace(action, ConjunctiveClause::parse(body, sig));
    return ActionModel(sig, acc.actions, rel, std::move(pre), std::move(post), acc.designated);
  } catch (const PreconditionError& e) {
    throw ParseError(std::string("bad action model: ") + e.what());
  }
}

std::string write_action_model(const ActionModel& a) {
  std::ostringstream out;
  out << "sig atoms:";
  for (const auto& p : a.sig().atoms()) out << ' ' << p;
  out << "\nsig agents:";
  for (const auto& ag : a.sig().agents()) out << ' ' << ag;
  out << "\nactions:";
  for (const auto& s : a.action_names()) out << ' ' << s;
  out << '\n';
  for (size_t ag = 0; ag < a.sig().agents().size(); ++ag) {
    out << "rel " << a.sig().agents()[ag] << ':';
    for (int s = 0; s < a.num_actions(); ++s) {
      const StateSet& succ = a.successors(static_cast<int>(ag), s);
      for (auto t = succ.find_first(); t != StateSet::npos; t = succ.find_next(t))
        out << ' ' << a.action_names()[s] << "->" << a.action_names()[t];
    }
    out << '\n';
  }
  for (int s = 0; s < a.num_actions(); ++s) {
    out << "pre " << a.action_names()[s] << ": " << a.pre(s).render() << '\n';
    out << "post " << a.action_names()[s] << ": " << a.post(s).render() << '\n';
  }
  out << "designated:";
  for (int s : a.designated()) out << ' ' << a.action_names()[s];
  out << '\n';
  return out.str();
}

// --- Product update

namespace {

// Unique product-state name from the component names; numeric suffixes keep
// names apart when the plain join collides (e.g. states already containing
// underscores).
std::string fresh_name(const std::string& base, std::set<std::string>& taken) {
  std::string name = base;
  for (int k = 2; !taken.insert(name).second; ++k) name = base + "_" + std::to_string(k);
  return name;
}

}  // namespace

PointedKripkeModel product_update(const PointedKripkeModel& x, const ActionModel& a) {
  if (x.sig() != a.sig())
    throw PreconditionError("model and action model must share a signature");
  const KripkeModel& m = *x.model;
  Evaluator ev(x.model);

  std::vector<int> applicable;  // designated actions applicable at the point
  for (int s : a.designated())
    if (ev.at(a.pre(s), x.point)) applicable.push_back(s);
  if (applicable.empty())
    throw PreconditionError("no designated action applies at the point (exhaustivity failure)");
  if (applicable.size() > 1)
    throw PreconditionError("several designated actions apply at the point: '" +
                            a.action_names()[applicable[0]] + "' and '" +
                            a.action_names()[applicable[1]] + "' (determinism failure)");

  // States: every (state, action) pair whose precondition holds.
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::vector<int>> pair_at(m.num_states(), std::vector<int>(a.num_actions(), -1));
  for (int act = 0; act < a.num_actions(); ++act) {
    const StateSet& where = ev.states_satisfying(a.pre(act));
    for (auto s = where.find_first(); s != StateSet::npos; s = where.find_next(s)) {
      pair_at[s][act] = static_cast<int>(pairs.size());
      pairs.emplace_back(static_cast<int>(s), act);
    }
  }

  std::vector<std::string> names;
  std::set<std::string> taken;
  for (const auto& [s, act] : pairs)
    names.push_back(fresh_name(m.state_names()[s] + "_" + a.action_names()[act], taken));

  KripkeModel::Relations rel;
  for (size_t ag = 0; ag < a.sig().agents().size(); ++ag) {
    auto& edges = rel[a.sig().agents()[ag]];
    for (size_t i = 0; i < pairs.size(); ++i) {
      const auto& [s, act] = pairs[i];
      const StateSet& msucc = m.successors(static_cast<int>(ag), s);
      const StateSet& asucc = a.successors(static_cast<int>(ag), act);
      for (auto t = msucc.find_first(); t != StateSet::npos; t = msucc.find_next(t))
        for (auto tau = asucc.find_first(); tau != StateSet::npos; tau = asucc.find_next(tau))
          if (int j = pair_at[t][tau]; j >= 0) edges.emplace_back(names[i], names[j]);
    }
  }

  KripkeModel::Valuation val;
  for (size_t p = 0; p < a.sig().atoms().size(); ++p) {
    const std::string& atom = a.sig().atoms()[p];
    auto& where = val[atom];
    for (size_t i = 0; i < pairs.size(); ++i) {
      const auto& [s, act] = pairs[i];
      const ConjunctiveClause& c = a.post(act);
      bool forced_true =
          std::find(c.set_true.begin(), c.set_true.end(), atom) != c.set_true.end();
      bool forced_false =
          std::find(c.set_false.begin(), c.set_false.end(), atom) != c.set_false.end();
      if (forced_true || (!forced_false && m.atom_at(static_cast<int>(p), s)))
        where.push_back(names[i]);
    }
  }

  auto out = std::make_shared<KripkeModel>(a.sig(), names, rel, val);
  return PointedKripkeModel(out, names[pair_at[x.point][applicable[0]]]);
}

// --- Semantic conditions over a sample

ConditionsReport check_conditions(const ActionModel& a,
                                  const std::vector<PointedKripkeModel>& sample,
                                  long closing_depth) {
  if (closing_depth < 0) throw PreconditionError("negative closing depth");
  ConditionsReport report;
  report.closing_depth = closing_depth;
  report.approximate = true;
  report.distinct_preconditions = static_cast<int>(a.distinct_preconditions().size());
  report.deterministic = true;
  report.exhaustive = true;
  report.closing = true;
  for (size_t i = 0; i < sample.size(); ++i) {
    if (sample[i].sig() != a.sig())
      throw PreconditionError("sample and action model must share a signature");
    Evaluator ev(sample[i].model);
    std::vector<int> applicable;
    for (int s : a.designated())
      if (ev.at(a.pre(s), sample[i].point)) applicable.push_back(s);
    if (applicable.empty()) {
      report.exhaustive = false;
      report.notes.push_back("model " + std::to_string(i) + ": no designated action applies");
      continue;
    }
    if (applicable.size() > 1) {
      report.deterministic = false;
      report.notes.push_back("model " + std::to_string(i) + ": designated actions '" +
                             a.action_names()[applicable[0]] + "' and '" +
                             a.action_names()[applicable[1]] + "' both apply");
      continue;
    }
    PointedKripkeModel updated = product_update(sample[i], a);
    bool found = false;
    for (const auto& member : sample)
      if (are_n_bisimilar(updated, member, closing_depth)) {
        found = true;
        break;
      }
    if (!found) {
      report.closing = false;
      report.notes.push_back("model " + std::to_string(i) + ": update matches no sample member up to depth " +
                             std::to_string(closing_depth));
    }
  }
  return report;
}

// --- Disjointing normalization

ActionModel disjointify(const ActionModel& a, long budget) {
  std::vector<Formula> pres = a.distinct_preconditions();
  const size_t n = pres.size();
  if (n > 12)
    throw BudgetError("disjointing " + std::to_string(n) +
                      " distinct preconditions needs 2^" + std::to_string(n) +
                      " signed conjunctions");
  int depth = 0;
  for (const Formula& f : pres) depth = std::max(depth, f.modal_depth());
  TypeTable table(a.sig(), depth, budget);

  // All consistent signed conjunctions, with the sign pattern kept so that
  // "entails pre" is a sign lookup.
  std::vector<Formula> conjunctions;
  std::vector<uint32_t> sign_of;
  for (uint32_t mask = 0; mask < (uint32_t(1) << n); ++mask) {
    std::vector<Formula> parts;
    for (size_t k = 0; k < n; ++k)
      parts.push_back(mask >> k & 1 ? pres[k] : Formula::neg(pres[k]));
    Formula psi = Formula::conj_all(parts);
    if (table.sat_set(psi, depth).empty()) continue;
    conjunctions.push_back(psi);
    sign_of.push_back(mask);
  }

  std::map<std::string, size_t> pre_index;
  for (size_t k = 0; k < n; ++k) pre_index.emplace(pres[k].render(), k);

  // One copy of each action per consistent conjunction entailing its
  // precondition; relations and designation lift componentwise.
  std::vector<std::string> actions;
  std::set<std::string> taken;
  std::vector<std::vector<int>> copies(a.num_actions());  // indices into `actions`
  std::map<std::string, Formula> pre;
  std::map<std::string, ConjunctiveClause> post;
  std::vector<std::string> designated;
  for (int act = 0; act < a.num_actions(); ++act) {
    size_t k = pre_index.at(a.pre(act).render());
    for (size_t c = 0; c < conjunctions.size(); ++c) {
      if (!(sign_of[c] >> k & 1)) continue;
      std::string name =
          fresh_name(a.action_names()[act] + "_" + std::to_string(c), taken);
      copies[act].push_back(static_cast<int>(actions.size()));
      actions.push_back(name);
      pre.emplace(name, conjunctions[c]);
      post.emplace(name, a.post(act));
      if (a.is_designated(act)) designated.push_back(name);
    }
  }

  ActionModel::Relations rel;
  for (size_t ag = 0; ag < a.sig().agents().size(); ++ag) {
    auto& edges = rel[a.sig().agents()[ag]];
    for (int from = 0; from < a.num_actions(); ++from) {
      const StateSet& succ = a.successors(static_cast<int>(ag), from);
      for (auto to = succ.find_first(); to != StateSet::npos; to = succ.find_next(to))
        for (int cf : copies[from])
          for (int ct : copies[to]) edges.emplace_back(actions[cf], actions[ct]);
    }
  }

  return ActionModel(a.sig(), actions, rel, std::move(pre), std::move(post), designated);
}

// --- Clean maps

CleanMap::CleanMap(ActionModel a, std::vector<PointedKripkeModel> sample, long closing_depth)
    : action_model_(std::move(a)), sample_(std::move(sample)) {
  if (sample_.empty()) throw PreconditionError("clean map needs a non-empty sample");
  conditions_ = check_conditions(action_model_, sample_, closing_depth);
  if (!conditions_.deterministic || !conditions_.exhaustive || !conditions_.closing) {
    std::string msg = "action model is not clean over the sample:";
    for (const auto& note : conditions_.notes) msg += "\n  " + note;
    throw PreconditionError(msg);
  }
}

ModalSpacePoint apply_clean_map(const CleanMap& f, const ModalSpacePoint& x) {
  PointedKripkeModel updated = product_update(x.representative, f.action_model());
  ModalSpacePoint out;
  out.id = -1;
  out.representative = updated;
  for (size_t i = 0; i < f.sample().size(); ++i)
    if (are_bisimilar(updated, f.sample()[i])) {
      if (out.id < 0) out.id = static_cast<int>(i);
      out.members.push_back(static_cast<int>(i));
    }
  return out;
}

// --- Continuity modulus

namespace {

// Shared preparation: the modulus construction needs pairwise
// equivalent-or-inconsistent preconditions and their deepest modal depth.
struct ModulusSetup {
  std::vector<Formula> pres;
  int md_pre_max = 0;
};

ModulusSetup modulus_setup(const CleanMap& f, const Descriptor& d, const Rat& eps) {
  if (!(eps > 0)) throw PreconditionError("epsilon must be positive");
  if (d.sig() != f.action_model().sig())
    throw PreconditionError("descriptor and action model must share a signature");
  if (d.last_level() >= 0)
    throw PreconditionError("continuity modulus needs a leveled descriptor");
  ModulusSetup setup;
  setup.pres = f.action_model().distinct_preconditions();
  const Signature& sig = d.sig();
  for (size_t i = 0; i < setup.pres.size(); ++i)
    for (size_t j = i + 1; j < setup.pres.size(); ++j) {
      if (semantically_equivalent(setup.pres[i], setup.pres[j], sig)) continue;
      if (satisfiable(Formula::conj(setup.pres[i], setup.pres[j]), sig))
        throw PreconditionError("preconditions '" + setup.pres[i].render() + "' and '" +
                                setup.pres[j].render() +
                                "' overlap without being equivalent; disjointify first");
    }
  for (const Formula& g : setup.pres) setup.md_pre_max = std::max(setup.md_pre_max, g.modal_depth());
  return setup;
}

long materializable(const BigInt& level) {
  if (level > BigInt(std::numeric_limits<long>::max()))
    throw BudgetError("cutoff level too deep to materialize");
  return level.convert_to<long>();
}

// Structural recursion of the continuity proof, evaluated in closed form.
// Every minimum over a formula family collapses to the weight of the deepest
// level the family reaches, because descriptor entries at level n have modal
// depth n and level weights strictly decrease.
class ClosedFormModulus {
 public:
  ClosedFormModulus(const Descriptor& d, const ModulusSetup& setup)
      : d_(d), first_(d.first_level()), deepest_(first_), md_pre_(setup.md_pre_max) {
    pre_term_ = weight_at(BigInt(md_pre_));
  }

  // Weight of the level pinning a class of the given modal depth (Lemma
  // realization: the signed level conjunctions at that depth decide it).
  Rat weight_at(const BigInt& md) {
    BigInt level = md < first_ ? BigInt(first_) : md;
    if (level > deepest_) deepest_ = level;
    return d_.entry_weight(level);
  }

  Rat bound(const Formula& f) {
    if (auto it = memo_.find(f.node()); it != memo_.end()) return it->second;
    keep_.push_back(f);  // the memo is keyed by node address, so pin the node
    Rat v;
    switch (f.op()) {
      case Op::Neg:  // in NNF: a negated atom or negated T
        if (f.child().op() != Op::Atom && f.child().op() != Op::Top)
          throw PreconditionError("modulus recursion expects negation normal form");
        [[fallthrough]];
      case Op::Top:
      case Op::Atom:
        v = std::min(weight_at(BigInt(f.modal_depth())), pre_term_);
        break;
      case Op::And:
      case Op::Or:
        v = std::min(bound(f.left()), bound(f.right()));
        break;
      case Op::Box:
      case Op::Diamond: {
        // Partition refining the child bound: conjunctions over the levels
        // below N', whose deepest member has depth N'-1.
        Rat child = bound(f.child());
        BigInt np = d_.level_for_tail(child);
        BigInt md_chi = np > first_ ? np - 1 : BigInt(0);
        BigInt md_pre(md_pre_);
        BigInt inner = 1 + (md_pre > md_chi ? md_pre : md_chi);
        v = std::min(weight_at(inner), pre_term_);
        break;
      }
      case Op::Implies:
        throw PreconditionError("modulus recursion expects negation normal form");
    }
    memo_.emplace(f.node(), v);
    return v;
  }

  const BigInt& deepest() const { return deepest_; }

 private:
  const Descriptor& d_;
  long first_;
  BigInt deepest_;
  int md_pre_;
  Rat pre_term_;
  std::map<const Formula::Node*, Rat> memo_;
  std::vector<Formula> keep_;  // owners of the memoized nodes
};

ActionModel with_designated(const ActionModel& a, const std::vector<int>& designated) {
  ActionModel::Relations rel;
  for (size_t ag = 0; ag < a.sig().agents().size(); ++ag) {
    auto& edges = rel[a.sig().agents()[ag]];
    for (int from = 0; from < a.num_actions(); ++from) {
      const StateSet& succ = a.successors(static_cast<int>(ag), from);
      for (auto to = succ.find_first(); to != StateSet::npos; to = succ.find_next(to))
        edges.emplace_back(a.action_names()[from], a.action_names()[to]);
    }
  }
  std::map<std::string, Formula> pre;
  std::map<std::string, ConjunctiveClause> post;
  for (int s = 0; s < a.num_actions(); ++s) {
    pre.emplace(a.action_names()[s], a.pre(s));
    post.emplace(a.action_names()[s], a.post(s));
  }
  std::vector<std::string> names;
  for (int s : designated) names.push_back(a.action_names()[s]);
  return ActionModel(a.sig(), a.action_names(), rel, std::move(pre), std::move(post), names);
}

// The proof's diamond case swaps one designated action for a precondition
// twin; the swapped model keeps the precondition set, hence the same
// modulus, but its cleanness over the sample is only checked, not implied.
std::vector<std::string> swapped_designation_notes(const CleanMap& f) {
  const ActionModel& a = f.action_model();
  const Signature& sig = a.sig();
  std::vector<std::string> notes;
  for (int out : a.designated())
    for (int in = 0; in < a.num_actions(); ++in) {
      if (a.is_designated(in)) continue;
      bool twins;
      try {
        twins = semantically_equivalent(a.pre(out), a.pre(in), sig);
      } catch (const BudgetError&) {
        twins = a.pre(out) == a.pre(in);
      }
      if (!twins) continue;
      std::vector<int> swapped;
      for (int s : a.designated())
        if (s != out) swapped.push_back(s);
      swapped.push_back(in);
      std::sort(swapped.begin(), swapped.end());
      ConditionsReport r = check_conditions(with_designated(a, swapped), f.sample(),
                                            f.conditions().closing_depth);
      if (!r.deterministic || !r.exhaustive || !r.closing) {
        std::string broken = !r.deterministic ? "determinism"
                             : !r.exhaustive  ? "exhaustivity"
                                              : "closing";
        notes.push_back("designating '" + a.action_names()[in] + "' in place of '" +
                        a.action_names()[out] + "' breaks " + broken + " over the sample");
      }
    }
  return notes;
}

}  // namespace

ModulusResult continuity_modulus(const CleanMap& f, const Descriptor& d, const Rat& eps) {
  ModulusSetup setup = modulus_setup(f, d, eps);
  ClosedFormModulus rec(d, setup);

  ModulusResult out;
  out.cutoff_level = d.level_for_tail(eps);
  long stop = materializable(out.cutoff_level);
  bool have = false;
  Rat delta;
  for (long lvl = d.first_level(); lvl < stop; ++lvl)
    for (const Formula& entry : d.level(lvl).entries)
      for (const Formula& g : {entry.nnf(), Formula::neg(entry).nnf()}) {
        Rat b = rec.bound(g);
        if (!have || b < delta) delta = b;
        have = true;
      }
  if (!have) delta = rec.bound(Formula::top());  // empty partition: one class

  out.delta = delta;
  out.deepest_level = rec.deepest();
  out.swap_notes = swapped_designation_notes(f);
  return out;
}

Rat continuity_modulus_enumerated(const CleanMap& f, const Descriptor& d, const Rat& eps,
                                  long cap) {
  ModulusSetup setup = modulus_setup(f, d, eps);
  const std::vector<Formula>& pres = setup.pres;

  // Lemma realization, shared with the closed form: the weight of the level
  // whose signed conjunctions decide the formula.
  auto aux2 = [&](const Formula& g) {
    BigInt level = std::max<long>(d.first_level(), g.modal_depth());
    return d.entry_weight(level);
  };

  // All signed conjunctions of the descriptor entries below the cutoff for
  // the given tolerance, built literally.
  auto partition = [&](const Rat& tol) {
    long stop = materializable(d.level_for_tail(tol));
    std::vector<Formula> entries;
    for (long lvl = d.first_level(); lvl < stop; ++lvl)
      for (const Formula& e : d.level(lvl).entries) entries.push_back(e);
    if (entries.size() >= 8 * sizeof(long) - 1 ||
        (1L << entries.size()) > cap)
      throw BudgetError("signed-conjunction family exceeds the cap");
    std::vector<Formula> out;
    for (long mask = 0; mask < (1L << entries.size()); ++mask) {
      std::vector<Formula> parts;
      for (size_t k = 0; k < entries.size(); ++k)
        parts.push_back(mask >> k & 1 ? entries[k] : Formula::neg(entries[k]));
      out.push_back(Formula::conj_all(parts));
    }
    return out;
  };

  std::map<const Formula::Node*, Rat> memo;
  std::vector<Formula> keep;  // owners of the memoized nodes
  std::function<Rat(const Formula&)> bound = [&](const Formula& g) -> Rat {
    if (auto it = memo.find(g.node()); it != memo.end()) return it->second;
    keep.push_back(g);
    Rat v;
    switch (g.op()) {
      case Op::Top:
      case Op::Atom:
      case Op::Neg: {
        v = aux2(g);
        for (const Formula& p : pres) v = std::min(v, aux2(p));
        break;
      }
      case Op::And:
      case Op::Or:
        v = std::min(bound(g.left()), bound(g.right()));
        break;
      case Op::Box:
      case Op::Diamond: {
        Rat child = bound(g.child());
        std::vector<Formula> chis = partition(child);
        std::vector<Formula> family;
        if (g.op() == Op::Diamond) {
          for (const Formula& p : pres)
            for (const Formula& chi : chis)
              family.push_back(Formula::diamond(g.name(), Formula::conj(p, chi)));
        } else {
          std::vector<Formula> r;
          for (const Formula& p : pres)
            for (const Formula& chi : chis) r.push_back(Formula::conj(p, chi));
          if (r.size() >= 8 * sizeof(long) - 1 || (1L << r.size()) > cap)
            throw BudgetError("box-case subset family exceeds the cap");
          for (long mask = 0; mask < (1L << r.size()); ++mask) {
            std::vector<Formula> picked;
            for (size_t k = 0; k < r.size(); ++k)
              if (mask >> k & 1) picked.push_back(r[k]);
            family.push_back(Formula::box(g.name(), Formula::disj_all(picked)));
          }
        }
        for (const Formula& p : pres) family.push_back(p);
        if (static_cast<long>(family.size()) > cap)
          throw BudgetError("formula family exceeds the cap");
        v = aux2(family.front());
        for (const Formula& member : family) v = std::min(v, aux2(member));
        break;
      }
      case Op::Implies:
        throw PreconditionError("modulus recursion expects negation normal form");
    }
    memo.emplace(g.node(), v);
    return v;
  };

  std::vector<Formula> chis = partition(eps);
  if (static_cast<long>(chis.size()) > cap)
    throw BudgetError("top-level family exceeds the cap");
  Rat delta = bound(chis.front().nnf());
  for (const Formula& chi : chis) delta = std::min(delta, bound(chi.nnf()));
  return delta;
}

// --- Empirical probing

ProbeReport probe_continuity(const CleanMap& f, const Descriptor& d, const Rat& eps,
                             const Rat& delta,
                             const std::vector<std::pair<PointedKripkeModel, PointedKripkeModel>>& pairs,
                             Rat probe_tol) {
  if (!(eps > 0) || !(delta > 0)) throw PreconditionError("epsilon and delta must be positive");
  if (probe_tol <= 0) probe_tol = eps / 8;
  ProbeReport report;
  for (size_t i = 0; i < pairs.size(); ++i) {
    DistanceInterval din = distance(pairs[i].first, pairs[i].second, d, probe_tol);
    if (!(din.lower < delta)) continue;
    PointedKripkeModel fx, fy;
    try {
      fx = product_update(pairs[i].first, f.action_model());
      fy = product_update(pairs[i].second, f.action_model());
    } catch (const PreconditionError& e) {
      ++report.skipped;
      report.notes.push_back("pair " + std::to_string(i) + ": update undefined (" + e.what() + ")");
      continue;
    }
    ++report.probed;
    DistanceInterval dout = distance(fx, fy, d, probe_tol);
    if (dout.upper < eps) {
      ++report.passed;
    } else if (!(dout.lower < eps)) {
      ++report.violations;
      report.notes.push_back("pair " + std::to_string(i) + ": input distance at least " +
                             to_string(din.lower) + " < delta but output distance at least " +
                             to_string(dout.lower));
    } else {
      ++report.indeterminate;
    }
  }
  return report;
}

}  // namespace modal
