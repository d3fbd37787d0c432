#include "doctest.h"

#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "modal/bisim.hpp"
#include "modal/dynamics.hpp"
#include "modal/error.hpp"
#include "modal/metrics.hpp"
#include "testutil.hpp"

using namespace modal;
using testutil::model_a;
using testutil::model_b;
using testutil::model_c;
using testutil::random_formula;
using testutil::random_model;
using testutil::sig_pa;

namespace {

PointedKripkeModel no_p_single() {
  return parse_model(
      "sig atoms: p\nsig agents: a\nstates: s\nrel a:\nval p:\npoint: s\n");
}

bool sat(const PointedKripkeModel& x, const std::string& text) {
  return satisfies(x, Formula::parse(text, x.model->sig()));
}

// p-labeled chain of `length` states; the point is the chain's head.
PointedKripkeModel chain(int length, const char* name) {
  std::string text = "sig atoms: p\nsig agents: a\nstates:";
  for (int i = 1; i <= length; ++i) text += " " + std::string(name) + std::to_string(i);
  text += "\nrel a:";
  for (int i = 1; i < length; ++i)
    text += " " + std::string(name) + std::to_string(i) + "->" + name + std::to_string(i + 1);
  text += "\nval p:";
  for (int i = 1; i <= length; ++i) text += " " + std::string(name) + std::to_string(i);
  text += "\npoint: " + std::string(name) + "1\n";
  return parse_model(text);
}

// Truthful public announcement of p / of ~p, jointly exhaustive.
ActionModel announcement_pair() {
  return parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: keep drop\n"
      "rel a: keep->keep drop->drop\n"
      "pre keep: p\npre drop: ~p\n"
      "designated: keep drop\n");
}

ActionModel identity_action() {
  return parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: id\nrel a: id->id\ndesignated: id\n");
}

// Announcement of p alone: undefined on ~p points.
ActionModel announce_p_single() {
  return parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: ann\nrel a: ann->ann\n"
      "pre ann: p\ndesignated: ann\n");
}

// Adds unreachable states with arbitrary edges and valuation; the point's
// behavior is untouched, so the result is bisimilar to the input.
PointedKripkeModel padded(const PointedKripkeModel& x, std::mt19937& rng, int extra) {
  const KripkeModel& m = *x.model;
  const Signature& sig = m.sig();
  std::vector<std::string> states = m.state_names();
  const int n = m.num_states();
  for (int k = 0; k < extra; ++k) states.push_back("pad" + std::to_string(k));
  KripkeModel::Relations rel;
  for (size_t ag = 0; ag < sig.agents().size(); ++ag) {
    auto& pairs = rel[sig.agents()[ag]];
    for (int s = 0; s < n; ++s) {
      const StateSet& succ = m.successors(static_cast<int>(ag), s);
      for (auto t = succ.find_first(); t != StateSet::npos; t = succ.find_next(t))
        pairs.emplace_back(states[s], states[t]);
    }
    for (size_t s = n; s < states.size(); ++s)
      for (size_t t = 0; t < states.size(); ++t)
        if (rng() & 1) pairs.emplace_back(states[s], states[t]);
  }
  KripkeModel::Valuation val;
  for (size_t p = 0; p < sig.atoms().size(); ++p) {
    auto& where = val[sig.atoms()[p]];
    for (int s = 0; s < n; ++s)
      if (m.atom_at(static_cast<int>(p), s)) where.push_back(states[s]);
    for (size_t s = n; s < states.size(); ++s)
      if (rng() & 1) where.push_back(states[s]);
  }
  auto out = std::make_shared<KripkeModel>(sig, states, rel, val);
  return PointedKripkeModel(out, x.point);
}

// Two designated actions with complementary preconditions (always defined),
// plus a few bystanders with random structure.
ActionModel random_action_model(std::mt19937& rng, const Signature& sig) {
  const int extra = std::uniform_int_distribution<int>(0, 2)(rng);
  std::vector<std::string> actions = {"yes", "no"};
  for (int k = 0; k < extra; ++k) actions.push_back("e" + std::to_string(k));
  Formula phi = random_formula(rng, sig, 2);
  std::map<std::string, Formula> pre;
  pre.emplace("yes", phi);
  pre.emplace("no", Formula::neg(phi));
  for (int k = 0; k < extra; ++k)
    pre.emplace("e" + std::to_string(k), random_formula(rng, sig, 1));
  auto random_clause = [&]() -> ConjunctiveClause {
    switch (rng() % 3) {
      case 0:
        return ConjunctiveClause{};
      case 1:
        return ConjunctiveClause{{"p"}, {}};
      default:
        return ConjunctiveClause{{}, {"p"}};
    }
  };
  std::map<std::string, ConjunctiveClause> post;
  for (const auto& name : actions)
    if (rng() & 1) post.emplace(name, random_clause());
  ActionModel::Relations rel;
  auto& edges = rel["a"];
  for (const auto& from : actions)
    for (const auto& to : actions)
      if (rng() & 1) edges.emplace_back(from, to);
  return ActionModel(sig, actions, rel, std::move(pre), std::move(post), {"yes", "no"});
}

// Single-entry levels p, []p, <a>[]p, ...: the entry of level n has modal
// depth exactly n and weight 1/2^(n+2), so tail(N) = 1/2^(N+1). Small enough
// for the literal family enumeration to stay under its cap at eps >= 1/4.
class TowerDescriptor : public Descriptor {
 public:
  TowerDescriptor() : sig_(sig_pa()) {}

  const Signature& sig() const override { return sig_; }
  long first_level() const override { return 0; }
  long last_level() const override { return -1; }

  Rat tail_bound(const BigInt& n) const override {
    if (n <= 0) return Rat(1, 2);
    return Rat(1, pow2(n.convert_to<unsigned long>() + 1));
  }
  BigInt level_for_tail(const Rat& tol) const override {
    if (tol <= 0) throw PreconditionError("tolerance must be positive");
    BigInt n = 0;
    while (tail_bound(n) >= tol) ++n;
    return n;
  }
  Rat entry_weight(const BigInt& n) const override {
    if (n < 0) throw PreconditionError("levels start at 0");
    if (n > 4096) throw BudgetError("tower weight out of test range");
    return Rat(1, pow2(n.convert_to<unsigned long>() + 2));
  }

 protected:
  DescriptorLevel materialize(long n) const override {
    Formula f = Formula::atom("p");
    for (long i = 1; i <= n; ++i)
      f = i % 2 ? Formula::box("a", f) : Formula::diamond("a", f);
    DescriptorLevel out;
    out.entries.push_back(f);
    out.weights.push_back(entry_weight(n));
    return out;
  }

 private:
  Signature sig_;
};

}  // namespace

TEST_CASE("postcondition clauses parse and validate") {
  Signature sig2({"p", "q"}, {"a"});

  ConjunctiveClause t = ConjunctiveClause::parse("T", sig2);
  CHECK(t.trivial());
  CHECK(t.render() == "T");

  ConjunctiveClause c = ConjunctiveClause::parse("(p & ~q)", sig2);
  CHECK(c.set_true == std::vector<std::string>{"p"});
  CHECK(c.set_false == std::vector<std::string>{"q"});
  CHECK(c.render() == "(p & ~q)");

  CHECK(ConjunctiveClause::parse("p", sig2).set_true == std::vector<std::string>{"p"});
  CHECK(ConjunctiveClause::parse("~p", sig2).set_false == std::vector<std::string>{"p"});

  // Atoms come out in signature order regardless of how they were written.
  ConjunctiveClause swapped = ConjunctiveClause::parse("(q & p)", sig2);
  CHECK(swapped.set_true == std::vector<std::string>{"p", "q"});

  CHECK_THROWS_AS(ConjunctiveClause::parse("(p | q)", sig2), ParseError);
  CHECK_THROWS_AS(ConjunctiveClause::parse("(p & p)", sig2), ParseError);
  CHECK_THROWS_AS(ConjunctiveClause::parse("(p & ~p)", sig2), ParseError);
  CHECK_THROWS_AS(ConjunctiveClause::parse("<a>p", sig2), ParseError);
  CHECK_THROWS_AS(ConjunctiveClause::parse("~~p", sig2), ParseError);
  CHECK_THROWS_AS(ConjunctiveClause::parse("(p -> q)", sig2), ParseError);
  CHECK_THROWS_AS(ConjunctiveClause::parse("~T", sig2), ParseError);

  CHECK_THROWS_AS(ConjunctiveClause::from_formula(Formula::diamond("a", Formula::atom("p")), sig2),
                  PreconditionError);

  // Round-trip through the formula view.
  ConjunctiveClause back = ConjunctiveClause::from_formula(c.to_formula(), sig2);
  CHECK(back.set_true == c.set_true);
  CHECK(back.set_false == c.set_false);
}

TEST_CASE("action models validate structure") {
  ActionModel pair = announcement_pair();
  CHECK(pair.num_actions() == 2);
  CHECK(pair.action_index("keep") == 0);
  CHECK(pair.action_index("drop") == 1);
  CHECK(pair.action_index("ghost") == -1);
  CHECK(pair.pre(0).render() == "p");
  CHECK(pair.pre(1).render() == "~p");
  CHECK(pair.post(0).trivial());
  CHECK(pair.designated() == std::vector<int>{0, 1});
  CHECK(pair.is_designated(0));
  CHECK(pair.is_designated(1));
  CHECK(pair.distinct_preconditions().size() == 2);
  CHECK(pair.successors(0, 0).test(0));
  CHECK_FALSE(pair.successors(0, 0).test(1));

  // Defaults: missing pre/post lines mean T.
  ActionModel id = identity_action();
  CHECK(id.pre(0) == Formula::top());
  CHECK(id.post(0).trivial());

  Signature sig = sig_pa();
  ActionModel::Relations none;
  CHECK_THROWS_AS(ActionModel(sig, {}, none, {}, {}, {}), PreconditionError);
  CHECK_THROWS_AS(ActionModel(sig, {"x", "x"}, none, {}, {}, {"x"}), PreconditionError);
  CHECK_THROWS_AS(ActionModel(sig, {"2x"}, none, {}, {}, {"2x"}), PreconditionError);
  CHECK_THROWS_AS(ActionModel(sig, {"T"}, none, {}, {}, {"T"}), PreconditionError);
  CHECK_THROWS_AS(ActionModel(sig, {"x"}, none, {}, {}, {}), PreconditionError);
  CHECK_THROWS_AS(ActionModel(sig, {"x"}, none, {}, {}, {"y"}), PreconditionError);
  CHECK_THROWS_AS(ActionModel(sig, {"x"}, {{"b", {{"x", "x"}}}}, {}, {}, {"x"}),
                  PreconditionError);
  CHECK_THROWS_AS(ActionModel(sig, {"x"}, {{"a", {{"x", "y"}}}}, {}, {}, {"x"}),
                  PreconditionError);

  std::map<std::string, Formula> ghost_pre;
  ghost_pre.emplace("y", Formula::top());
  CHECK_THROWS_AS(ActionModel(sig, {"x"}, none, std::move(ghost_pre), {}, {"x"}),
                  PreconditionError);

  std::map<std::string, ConjunctiveClause> bad_atom;
  bad_atom.emplace("x", ConjunctiveClause{{"q"}, {}});
  CHECK_THROWS_AS(ActionModel(sig, {"x"}, none, {}, std::move(bad_atom), {"x"}),
                  PreconditionError);

  std::map<std::string, ConjunctiveClause> both_signs;
  both_signs.emplace("x", ConjunctiveClause{{"p"}, {"p"}});
  CHECK_THROWS_AS(ActionModel(sig, {"x"}, none, {}, std::move(both_signs), {"x"}),
                  PreconditionError);
}

TEST_CASE("action model files round-trip") {
  ActionModel pair = announcement_pair();
  ActionModel back = parse_action_model(write_action_model(pair));
  CHECK(back.action_names() == pair.action_names());
  CHECK(back.designated() == pair.designated());
  for (int s = 0; s < pair.num_actions(); ++s) {
    CHECK(back.pre(s).render() == pair.pre(s).render());
    CHECK(back.post(s).set_true == pair.post(s).set_true);
    CHECK(back.post(s).set_false == pair.post(s).set_false);
    CHECK(back.successors(0, s) == pair.successors(0, s));
  }

  // Comments and blank lines are ignored.
  ActionModel commented = parse_action_model(
      "# public announcement\n\nsig atoms: p\nsig agents: a\n"
      "actions: ann\n  # reflexive\nrel a: ann->ann\npre ann: p\ndesignated: ann\n");
  CHECK(commented.num_actions() == 1);

  const char* base =
      "sig atoms: p\nsig agents: a\nactions: x\ndesignated: x\n";
  CHECK_NOTHROW(parse_action_model(base));
  CHECK_THROWS_AS(parse_action_model("sig atoms: p\nsig agents: a\nactions: x\n"),
                  ParseError);  // no designated
  CHECK_THROWS_AS(parse_action_model("sig atoms: p\nsig agents: a\ndesignated: x\n"),
                  ParseError);  // no actions
  CHECK_THROWS_AS(parse_action_model(std::string(base) + "pre ghost: p\n"), ParseError);
  CHECK_THROWS_AS(parse_action_model(std::string(base) + "rel b: x->x\n"), ParseError);
  CHECK_THROWS_AS(parse_action_model(std::string(base) + "post x: (p | p)\n"), ParseError);
  CHECK_THROWS_AS(parse_action_model(std::string(base) + "pre x: p\npre x: ~p\n"), ParseError);
  CHECK_THROWS_AS(parse_action_model(std::string(base) + "rel a: xránge\n"), ParseError);
  CHECK_THROWS_AS(parse_action_model(std::string(base) + "stray line\n"), ParseError);
  CHECK_THROWS_AS(parse_action_model(std::string(base) + "designated: x\n"), ParseError);
}

TEST_CASE("product update follows the definition") {
  ActionModel id = identity_action();
  for (const auto& x : {model_a(), model_b(), model_c(), no_p_single()})
    CHECK(are_bisimilar(product_update(x, id), x));

  // Announcing p deletes the refuting state: M_c collapses to M_a's class.
  PointedKripkeModel cut = product_update(model_c(), announce_p_single());
  CHECK(cut.model->num_states() == 1);
  CHECK(sat(cut, "p"));
  CHECK(sat(cut, "[a]~T"));
  CHECK(are_bisimilar(cut, model_a()));

  // Ontic change: the postcondition overrides the old valuation.
  ActionModel make_p = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: set\nrel a: set->set\n"
      "post set: p\ndesignated: set\n");
  CHECK(sat(product_update(no_p_single(), make_p), "p"));

  ActionModel wipe_p = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: wipe\nrel a: wipe->wipe\n"
      "post wipe: ~p\ndesignated: wipe\n");
  CHECK(sat(product_update(model_a(), wipe_p), "~p"));

  // Untouched atoms keep their old value while forced ones flip.
  Signature sig2({"p", "q"}, {"a"});
  PointedKripkeModel w = parse_model(
      "sig atoms: p q\nsig agents: a\nstates: w\nrel a:\nval p: w\nval q:\npoint: w\n");
  ActionModel flip = parse_action_model(
      "sig atoms: p q\nsig agents: a\nactions: f\npost f: (q & ~p)\ndesignated: f\n");
  PointedKripkeModel flipped = product_update(w, flip);
  CHECK(sat(flipped, "q"));
  CHECK(sat(flipped, "~p"));

  // Edges exist only when both components are related.
  ActionModel no_loop = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: cut\ndesignated: cut\n");
  CHECK(are_bisimilar(product_update(model_b(), no_loop), model_a()));

  ActionModel link = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: one two\nrel a: one->two\n"
      "pre one: p\npre two: ~p\ndesignated: one\n");
  CHECK(sat(product_update(model_c(), link), "<a>~p"));

  // Failure modes of the designated set at the point.
  CHECK_THROWS_WITH_AS(product_update(no_p_single(), announce_p_single()),
                       doctest::Contains("no designated action applies"), PreconditionError);
  ActionModel clash = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: all some\npre some: p\ndesignated: all some\n");
  CHECK_THROWS_WITH_AS(product_update(model_a(), clash),
                       doctest::Contains("determinism"), PreconditionError);

  PointedKripkeModel pq = parse_model(
      "sig atoms: p q\nsig agents: a\nstates: s\nrel a:\nval p: s\nval q:\npoint: s\n");
  CHECK_THROWS_AS(product_update(pq, id), PreconditionError);

  // Product state names stay distinct even when the plain joins collide.
  PointedKripkeModel tricky = parse_model(
      "sig atoms: p\nsig agents: a\nstates: s s_a\nrel a:\nval p: s s_a\npoint: s\n");
  ActionModel tricky_acts = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: act a_act\ndesignated: act\n");
  PointedKripkeModel prod = product_update(tricky, tricky_acts);
  CHECK(prod.model->num_states() == 4);
  std::set<std::string> names(prod.model->state_names().begin(),
                              prod.model->state_names().end());
  CHECK(names.size() == 4);
}

TEST_CASE("product update preserves bisimilarity") {
  std::mt19937 rng(7501);
  Signature sig = sig_pa();
  for (int round = 0; round < 100; ++round) {
    PointedKripkeModel x = random_model(rng, sig, 4);
    PointedKripkeModel x2 = padded(x, rng, 1 + static_cast<int>(rng() % 3));
    REQUIRE(are_bisimilar(x, x2));
    ActionModel a = random_action_model(rng, sig);
    PointedKripkeModel u = product_update(x, a);
    PointedKripkeModel u2 = product_update(x2, a);
    CHECK(are_bisimilar(u, u2));
  }
}

TEST_CASE("condition reports cover determinism, exhaustivity, closing") {
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), model_c(), no_p_single()};

  ConditionsReport good = check_conditions(announcement_pair(), sample);
  CHECK(good.deterministic);
  CHECK(good.exhaustive);
  CHECK(good.closing);
  CHECK(good.approximate);
  CHECK(good.closing_depth == 3);
  CHECK(good.distinct_preconditions == 2);
  CHECK(good.notes.empty());

  ConditionsReport gap = check_conditions(announce_p_single(), sample);
  CHECK_FALSE(gap.exhaustive);
  CHECK(gap.deterministic);
  CHECK(gap.notes.size() == 1);
  CHECK(gap.notes[0].find("3") != std::string::npos);  // no_p_single is sample[3]

  ActionModel clash = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: all some\npre some: p\ndesignated: all some\n");
  ConditionsReport over = check_conditions(clash, {model_a()});
  CHECK_FALSE(over.deterministic);
  CHECK(over.notes.size() == 1);

  ActionModel wipe = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: wipe\nrel a: wipe->wipe\n"
      "post wipe: ~p\ndesignated: wipe\n");
  ConditionsReport open = check_conditions(wipe, {model_a()});
  CHECK_FALSE(open.closing);  // the all-p sample cannot absorb a ~p output
  ConditionsReport closed = check_conditions(wipe, {model_a(), no_p_single()});
  CHECK(closed.closing);

  CHECK_THROWS_AS(check_conditions(wipe, sample, -1), PreconditionError);
}

TEST_CASE("clean maps verify their sample once") {
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), no_p_single()};
  CleanMap f(announcement_pair(), sample);
  CHECK(f.sample().size() == 3);
  CHECK(f.conditions().deterministic);
  CHECK(f.conditions().exhaustive);
  CHECK(f.conditions().closing);

  CHECK_THROWS_AS(CleanMap(announcement_pair(), {}), PreconditionError);
  CHECK_THROWS_WITH_AS(CleanMap(announce_p_single(), {no_p_single()}),
                       doctest::Contains("not clean"), PreconditionError);
  ActionModel wipe = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: wipe\nrel a: wipe->wipe\n"
      "post wipe: ~p\ndesignated: wipe\n");
  CHECK_THROWS_AS(CleanMap(wipe, {model_a()}), PreconditionError);
}

TEST_CASE("applying a clean map locates the output class") {
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), no_p_single(), model_c()};
  CleanMap announce(announcement_pair(), sample);

  // The class of M_c announces into the class of M_a.
  ModalSpacePoint xc{3, model_c(), {3}, {}};
  ModalSpacePoint out = apply_clean_map(announce, xc);
  CHECK(out.id == 0);
  CHECK(out.members == std::vector<int>{0});
  CHECK(are_bisimilar(out.representative, model_a()));

  // The identity action fixes every class.
  CleanMap id(identity_action(), sample);
  for (int i = 0; i < 4; ++i) {
    ModalSpacePoint x{i, sample[i], {i}, {}};
    ModalSpacePoint y = apply_clean_map(id, x);
    CHECK(y.id == i);
    CHECK(y.members == std::vector<int>{i});
  }

  // Closing is only checked to a depth; an output may still leave the
  // sample up to full bisimilarity, reported as a created class (id -1).
  ActionModel step = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: step\nrel a: step->step\n"
      "pre step: <a>T\ndesignated: step\n");
  CleanMap trim(step, {chain(5, "c")});  // chain(4) is 3-bisimilar to chain(5)
  ModalSpacePoint deep{0, chain(5, "c"), {0}, {}};
  ModalSpacePoint created = apply_clean_map(trim, deep);
  CHECK(created.id == -1);
  CHECK(created.members.empty());
  CHECK(are_bisimilar(created.representative, chain(4, "d")));

  // Well-definedness: bisimilar representatives land in the same class.
  std::mt19937 rng(7502);
  Signature sig = sig_pa();
  for (int round = 0; round < 50; ++round) {
    PointedKripkeModel x = random_model(rng, sig, 4);
    PointedKripkeModel u = product_update(x, announcement_pair());
    CleanMap f(announcement_pair(), {x, u});
    ModalSpacePoint via_x = apply_clean_map(f, ModalSpacePoint{0, x, {0}, {}});
    ModalSpacePoint via_pad =
        apply_clean_map(f, ModalSpacePoint{0, padded(x, rng, 1 + static_cast<int>(rng() % 3)), {0}, {}});
    CHECK(via_x.id == via_pad.id);
    CHECK(via_x.members == via_pad.members);
  }
}

TEST_CASE("disjointify separates preconditions") {
  Signature sig = sig_pa();
  ActionModel am = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: left right\nrel a: left->right\n"
      "pre left: p\ndesignated: right\n");

  ActionModel dj = disjointify(am);
  CHECK(dj.num_actions() == 3);  // left entails p; right splits over p / ~p
  CHECK(dj.designated().size() == 2);
  for (int i = 0; i < dj.num_actions(); ++i)
    for (int j = i + 1; j < dj.num_actions(); ++j) {
      bool equiv = semantically_equivalent(dj.pre(i), dj.pre(j), sig);
      bool joint = satisfiable(Formula::conj(dj.pre(i), dj.pre(j)), sig);
      CHECK((equiv || !joint));
    }

  // The split copies of the T-action cover p and ~p.
  int on_p = 0, on_not_p = 0, left_copy = -1;
  for (int i = 0; i < dj.num_actions(); ++i) {
    if (!dj.is_designated(i)) left_copy = i;
    if (dj.is_designated(i) && semantically_equivalent(dj.pre(i), Formula::parse("p", sig), sig))
      ++on_p;
    if (dj.is_designated(i) && semantically_equivalent(dj.pre(i), Formula::parse("~p", sig), sig))
      ++on_not_p;
  }
  CHECK(on_p == 1);
  CHECK(on_not_p == 1);
  REQUIRE(left_copy >= 0);
  CHECK(semantically_equivalent(dj.pre(left_copy), Formula::parse("p", sig), sig));

  // Relations lift to every copy pair: left's copy sees both right copies.
  CHECK(dj.successors(0, left_copy).count() == 2);

  // An already-disjoint model keeps its preconditions up to equivalence.
  ActionModel pair_dj = disjointify(announcement_pair());
  CHECK(pair_dj.num_actions() == 2);
  CHECK(semantically_equivalent(pair_dj.pre(0), Formula::parse("p", sig), sig));
  CHECK(semantically_equivalent(pair_dj.pre(1), Formula::parse("~p", sig), sig));

  // Modal preconditions go through the same type-set consistency check.
  ActionModel modal = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: look leap\npre look: <a>p\ndesignated: leap\n");
  ActionModel modal_dj = disjointify(modal);
  CHECK(modal_dj.num_actions() == 3);

  // The induced map is unchanged.
  ActionModel overlap = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: one two\nrel a: one->two two->one\n"
      "pre two: p\npost two: ~p\ndesignated: one\n");
  ActionModel overlap_dj = disjointify(overlap);
  std::mt19937 rng(7503);
  for (int round = 0; round < 60; ++round) {
    PointedKripkeModel x = random_model(rng, sig, 4);
    CHECK(are_bisimilar(product_update(x, overlap), product_update(x, overlap_dj)));
  }

  // Too many distinct preconditions to enumerate signed conjunctions.
  std::vector<std::string> many;
  std::map<std::string, Formula> many_pre;
  const char* texts[] = {"T",     "p",     "~p",    "~~p",   "<a>p",   "[a]p",  "<a>~p",
                         "[a]~p", "<a>T",  "[a]T",  "(p & p)", "(p | p)", "~T"};
  for (int i = 0; i < 13; ++i) {
    many.push_back("x" + std::to_string(i));
    many_pre.emplace("x" + std::to_string(i), Formula::parse(texts[i], sig));
  }
  ActionModel wide(sig, many, {}, std::move(many_pre), {}, {"x0"});
  CHECK_THROWS_AS(disjointify(wide), BudgetError);
}

TEST_CASE("continuity modulus follows the construction") {
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), no_p_single()};
  CleanMap f(announcement_pair(), sample);
  BisimDescriptor d(sig_pa(), sample);

  // eps = 1: cutoff 2, only the depth-1 entries; their box/diamond steps
  // land on level 1 + (5 - 1) = 5 with weight 1/(2*5*6).
  ModulusResult r1 = continuity_modulus(f, d, Rat(1));
  CHECK(r1.delta == Rat(1, 60));
  CHECK(r1.cutoff_level == 2);
  CHECK(r1.deepest_level == 5);
  CHECK(r1.swap_notes.empty());

  // eps = 1/2: cutoff 3; the depth-2 entries chain two box steps, reaching
  // level 1 + (61 - 1) = 61 with weight 1/(2*61*62) = 1/7564.
  ModulusResult r2 = continuity_modulus(f, d, Rat(1, 2));
  CHECK(r2.delta == Rat(1, 7564));
  CHECK(r2.cutoff_level == 3);
  CHECK(r2.deepest_level == 61);
  CHECK(r2.swap_notes.empty());

  // The identity map shares the precondition depth (0), hence the recursion.
  CleanMap id(identity_action(), sample);
  CHECK(continuity_modulus(id, d, Rat(1, 2)).delta > 0);

  // Monotone in eps: tighter targets never loosen the modulus.
  Rat prev;
  bool have = false;
  for (const Rat& eps : {Rat(1), Rat(1, 2), Rat(1, 4), Rat(1, 8), Rat(1, 16)}) {
    Rat delta = continuity_modulus(f, d, eps).delta;
    CHECK(delta > 0);
    if (have) CHECK(delta <= prev);
    prev = delta;
    have = true;
  }

  // Level-0 depth-weighted entries are modal-free, so the recursion stops
  // at the literal case: delta = the level-0 weight 1/4.
  DepthWeightedDescriptor dw(sig_pa());
  ModulusResult flat = continuity_modulus(f, dw, Rat(1, 2));
  CHECK(flat.delta == Rat(1, 4));
  CHECK(flat.cutoff_level == 1);
  // eps = 1/8 reaches the depth-1 entries; their box steps land on the
  // level-2 weight, astronomically small yet positive and exactly computed.
  ModulusResult steep = continuity_modulus(f, dw, Rat(1, 8));
  CHECK(steep.delta > 0);
  CHECK(steep.delta < flat.delta);
  CHECK(steep.cutoff_level == 2);
  // Once eps dips to the level-1 tail bound the cutoff crosses level 2,
  // whose entry count exceeds any sane materialization budget.
  CHECK_THROWS_AS(continuity_modulus(f, dw, Rat(1, 2016)), BudgetError);

  CHECK_THROWS_AS(continuity_modulus(f, d, Rat(0)), PreconditionError);
  CHECK_THROWS_AS(continuity_modulus(f, d, Rat(-1, 2)), PreconditionError);

  // Finite descriptors have no tail structure to recurse on.
  FiniteDescriptor fin(sig_pa(), {Formula::parse("p", sig_pa())}, {Rat(1)});
  CHECK_THROWS_AS(continuity_modulus(f, fin, Rat(1, 2)), PreconditionError);

  // Overlapping preconditions must be disjointified first.
  ActionModel overlap = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: one two\npre two: p\npost two: ~p\n"
      "designated: one\n");
  CleanMap g(overlap, {model_a(), no_p_single()});
  CHECK_THROWS_WITH_AS(continuity_modulus(g, d, Rat(1, 2)),
                       doctest::Contains("disjointify"), PreconditionError);
}

TEST_CASE("designation swaps are checked, not assumed") {
  // 'mark' is a precondition twin of 'keep' that erases p behind a loop;
  // designating it instead of 'keep' drives model_b's class out of the
  // sample, which only closing can see.
  ActionModel shadow = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: keep drop mark\n"
      "rel a: keep->keep drop->drop mark->mark\n"
      "pre keep: p\npre drop: ~p\npre mark: p\npost mark: ~p\n"
      "designated: keep drop\n");
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), no_p_single()};
  CleanMap f(shadow, sample);
  BisimDescriptor d(sig_pa(), sample);

  ModulusResult r = continuity_modulus(f, d, Rat(1, 2));
  CHECK(r.delta == Rat(1, 7564));  // 'mark' duplicates a precondition: same set
  REQUIRE(r.swap_notes.size() == 1);
  CHECK(r.swap_notes[0].find("mark") != std::string::npos);
  CHECK(r.swap_notes[0].find("closing") != std::string::npos);
}

TEST_CASE("enumerated transcription matches the closed form") {
  TowerDescriptor tower;
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), no_p_single()};
  CleanMap f(announcement_pair(), sample);

  // eps = 1/2: only the level-0 entry p; the literal case gives the level-0
  // weight capped by the precondition term, both 1/4.
  CHECK(continuity_modulus(f, tower, Rat(1, 2)).delta == Rat(1, 4));
  CHECK(continuity_modulus_enumerated(f, tower, Rat(1, 2)) == Rat(1, 4));

  // eps = 1/4: levels 0..1; the box step over the level-1 entry reaches
  // level 2 with weight 1/16.
  CHECK(continuity_modulus(f, tower, Rat(1, 4)).delta == Rat(1, 16));
  CHECK(continuity_modulus_enumerated(f, tower, Rat(1, 4)) == Rat(1, 16));

  CleanMap id(identity_action(), sample);
  CHECK(continuity_modulus(id, tower, Rat(1, 4)).delta ==
        continuity_modulus_enumerated(id, tower, Rat(1, 4)));

  // eps = 1/8 needs a box-subset family over 2 * 16 members: 2^32 subsets
  // trip the cap while the closed form strolls on.
  CHECK(continuity_modulus(f, tower, Rat(1, 8)).delta == Rat(1, 64));
  CHECK_THROWS_AS(continuity_modulus_enumerated(f, tower, Rat(1, 8)), BudgetError);

  // The literal transcription hits the same wall on the realistic
  // descriptor even at eps = 1/2: its inner partitions are already huge.
  BisimDescriptor d(sig_pa(), sample);
  CHECK_THROWS_AS(continuity_modulus_enumerated(f, d, Rat(1, 2)), BudgetError);
}

TEST_CASE("probing reports the epsilon-delta implication") {
  std::mt19937 rng(7504);
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), no_p_single()};
  CleanMap f(announcement_pair(), sample);
  BisimDescriptor d(sig_pa(), sample);
  Rat delta = continuity_modulus(f, d, Rat(1, 2)).delta;

  // Same-class pairs are probed and pass; distant pairs miss the trigger.
  std::vector<std::pair<PointedKripkeModel, PointedKripkeModel>> pairs = {
      {model_a(), padded(model_a(), rng, 2)},
      {model_a(), model_b()},
  };
  ProbeReport r = probe_continuity(f, d, Rat(1, 2), delta, pairs);
  CHECK(r.probed == 1);
  CHECK(r.passed == 1);
  CHECK(r.violations == 0);
  CHECK(r.indeterminate == 0);
  CHECK(r.skipped == 0);

  // An oversized delta on a separated pair is caught as a violation.
  ProbeReport bad = probe_continuity(f, d, Rat(1, 8), Rat(1), {{model_a(), model_b()}});
  CHECK(bad.probed == 1);
  CHECK(bad.violations == 1);
  REQUIRE(bad.notes.size() == 1);
  CHECK(bad.notes[0].find("output distance") != std::string::npos);

  // Pairs outside the map's domain are skipped with a note.
  CleanMap partial(announce_p_single(), {model_a()});
  BisimDescriptor da(sig_pa(), {model_a()});
  ProbeReport skip = probe_continuity(partial, da, Rat(1, 2), Rat(1),
                                      {{model_a(), no_p_single()}});
  CHECK(skip.probed == 0);
  CHECK(skip.skipped == 1);
  REQUIRE(skip.notes.size() == 1);
  CHECK(skip.notes[0].find("update undefined") != std::string::npos);

  // A coarse probe tolerance can leave the verdict open.
  std::vector<PointedKripkeModel> chains = {chain(2, "c"), chain(3, "e")};
  CleanMap fc(announcement_pair(), chains);
  BisimDescriptor dc(sig_pa(), chains);
  ProbeReport open = probe_continuity(fc, dc, Rat(1, 2), Rat(1),
                                      {{chain(2, "c"), chain(3, "e")}}, Rat(1, 2));
  CHECK(open.probed == 1);
  CHECK(open.indeterminate == 1);
  CHECK(open.passed == 0);
  CHECK(open.violations == 0);

  CHECK_THROWS_AS(probe_continuity(f, d, Rat(0), Rat(1), pairs), PreconditionError);
  CHECK_THROWS_AS(probe_continuity(f, d, Rat(1, 2), Rat(0), pairs), PreconditionError);
}

TEST_CASE("the modulus certifies probes across an epsilon grid") {
  std::mt19937 rng(7505);
  std::vector<PointedKripkeModel> sample = {model_a(), model_b(), no_p_single()};
  BisimDescriptor d(sig_pa(), sample);

  ActionModel make_p = parse_action_model(
      "sig atoms: p\nsig agents: a\nactions: set\nrel a: set->set\n"
      "post set: p\ndesignated: set\n");
  for (const ActionModel& a : {announcement_pair(), make_p}) {
    CleanMap f(a, sample);
    for (const Rat& eps : {Rat(1, 2), Rat(1, 4), Rat(1, 8)}) {
      Rat delta = continuity_modulus(f, d, eps).delta;
      REQUIRE(delta > 0);
      std::vector<std::pair<PointedKripkeModel, PointedKripkeModel>> pairs;
      std::uniform_int_distribution<size_t> pick(0, sample.size() - 1);
      std::uniform_int_distribution<int> extra(0, 3);
      for (int i = 0; i < 20; ++i)
        pairs.emplace_back(padded(sample[pick(rng)], rng, extra(rng)),
                           padded(sample[pick(rng)], rng, extra(rng)));
      ProbeReport r = probe_continuity(f, d, eps, delta, pairs);
      CHECK(r.violations == 0);
      CHECK(r.indeterminate == 0);
      CHECK(r.skipped == 0);
      CHECK(r.passed == r.probed);
      CHECK(r.probed > 0);  // same-class draws occur at this seed
    }
  }
}
