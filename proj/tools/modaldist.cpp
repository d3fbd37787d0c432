// Batch front end for the modal distance toolkit: formula checks, model
// distances, product updates, bisimilarity probes, quotient topologies,
// continuity moduli, and finite-space embeddings, over plain text files.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "modal/bisim.hpp"
#include "modal/dynamics.hpp"
#include "modal/error.hpp"
#include "modal/formula.hpp"
#include "modal/kripke.hpp"
#include "modal/metrics.hpp"
#include "modal/rational.hpp"
#include "modal/topology.hpp"

namespace {

using namespace modal;

struct RunConfig {
  Rat tolerance = Rat(1, 1024);
  long budget = 10000;
  long depth = 3;
  bool structured = false;
};

// Ordered key/value report. Structured mode prints the fields verbatim, one
// "key: value" per line; text mode prefers the free-form lines when a command
// set any, falling back to the fields.
struct Report {
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<std::string> text;

  void add(std::string key, std::string value) {
    fields.emplace_back(std::move(key), std::move(value));
  }
  void line(std::string s) { text.push_back(std::move(s)); }

  void print(const RunConfig& cfg) const {
    if (!cfg.structured && !text.empty()) {
      for (const std::string& s : text) std::cout << s << "\n";
      return;
    }
    for (const auto& [key, value] : fields) std::cout << key << ": " << value << "\n";
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PointedKripkeModel read_model(const std::string& path) {
  try {
    return parse_model(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

ActionModel read_action_model(const std::string& path) {
  try {
    return parse_action_model(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Every regular file in the directory, in filename order, parsed as a model.
std::vector<PointedKripkeModel> read_model_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.is_regular_file()) paths.push_back(entry.path());
  if (ec) throw ParseError("cannot read directory '" + dir + "': " + ec.message());
  std::sort(paths.begin(), paths.end());
  std::vector<PointedKripkeModel> models;
  for (const auto& p : paths) models.push_back(read_model(p.string()));
  if (models.empty()) throw ParseError("no model files in '" + dir + "'");
  for (const auto& m : models)
    if (m.sig() != models.front().sig())
      throw PreconditionError("models in '" + dir + "' disagree on the signature");
  return models;
}

void require_same_signature(const PointedKripkeModel& x, const PointedKripkeModel& y) {
  if (x.sig() != y.sig()) throw PreconditionError("models disagree on the signature");
}

// --- metric specs: hamming:<n> | bisim | goranko | depth | custom:<file>

bool exact_metric(const std::string& spec) { return spec == "bisim" || spec == "goranko"; }

Rat exact_distance(const std::string& spec, const PointedKripkeModel& x,
                   const PointedKripkeModel& y) {
  return spec == "bisim" ? bisimulation_distance(x, y) : goranko_distance(x, y);
}

int hamming_width(const std::string& spec) {
  std::string num = spec.substr(8);
  try {
    size_t used = 0;
    int n = std::stoi(num, &used);
    if (used != num.size()) throw std::invalid_argument(num);
    return n;
  } catch (const std::exception&) {
    throw ParseError("bad metric spec '" + spec + "'");
  }
}

// Descriptors hold memoization state and cannot be moved off the stack, so
// the chosen one is built in place and handed down by reference.
template <class Body>
void with_descriptor(const std::string& spec, const Signature& sig,
                     const std::vector<PointedKripkeModel>& sample, const RunConfig& cfg,
                     Body&& body) {
  if (spec == "bisim") {
    BisimDescriptor d(sig, sample);
    body(d);
    return;
  }
  if (spec == "goranko")
    throw PreconditionError("'goranko' is an exact metric, not a descriptor");
  if (spec == "depth") {
    DepthWeightedDescriptor d(sig, cfg.budget);
    body(d);
    return;
  }
  if (spec.rfind("hamming:", 0) == 0) {
    FiniteDescriptor d = hamming_descriptor(sig, hamming_width(spec));
    body(d);
    return;
  }
  if (spec.rfind("custom:", 0) == 0) {
    std::string path = spec.substr(7);
    DescriptorFile file = parse_descriptor_file(read_file(path), sig);
    if (!file.metric.empty() && file.metric != "custom") {
      if (!file.entries.empty())
        throw ParseError(path + ": names the built-in '" + file.metric +
                         "' and lists entries; pick one");
      if (file.metric.rfind("custom", 0) == 0)
        throw ParseError(path + ": a descriptor file cannot defer to another custom file");
      with_descriptor(file.metric, sig, sample, cfg, std::forward<Body>(body));
      return;
    }
    if (file.entries.empty()) throw ParseError(path + ": no descriptor entries");
    FiniteDescriptor d(sig, file.entries, file.weights, cfg.budget);
    body(d);
    return;
  }
  throw ParseError("unknown metric spec '" + spec + "'");
}

// Same idea, restricted to descriptors with finitely many entries (the only
// kind a quotient topology is defined over).
template <class Body>
void with_finite_descriptor(const std::string& path, const Signature& sig, const RunConfig& cfg,
                            Body&& body) {
  DescriptorFile file = parse_descriptor_file(read_file(path), sig);
  if (!file.metric.empty() && file.metric != "custom") {
    if (file.metric.rfind("hamming:", 0) != 0)
      throw PreconditionError("topology needs a finite descriptor; '" + file.metric +
                              "' is not one");
    if (!file.entries.empty())
      throw ParseError(path + ": names the built-in '" + file.metric +
                       "' and lists entries; pick one");
    FiniteDescriptor d = hamming_descriptor(sig, hamming_width(file.metric));
    body(d);
    return;
  }
  if (file.entries.empty()) throw ParseError(path + ": no descriptor entries");
  FiniteDescriptor d(sig, file.entries, file.weights, cfg.budget);
  body(d);
}

// --- space files: "points: x y z" then one "d x y: <rational>" per pair

struct SpaceFile {
  std::vector<std::string> ids;
  std::vector<std::vector<Rat>> d;
};

SpaceFile parse_space_file(const std::string& text) {
  SpaceFile out;
  std::map<std::string, int> index;
  std::vector<std::vector<bool>> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "points:") {
      if (!out.ids.empty())
        throw ParseError("space line " + std::to_string(lineno) + ": duplicate points header");
      for (std::string id; ls >> id;) {
        if (!index.emplace(id, static_cast<int>(out.ids.size())).second)
          throw ParseError("space line " + std::to_string(lineno) + ": duplicate point '" + id + "'");
        out.ids.push_back(id);
      }
      if (out.ids.empty())
        throw ParseError("space line " + std::to_string(lineno) + ": empty point list");
      out.d.assign(out.ids.size(), std::vector<Rat>(out.ids.size(), Rat(0)));
      seen.assign(out.ids.size(), std::vector<bool>(out.ids.size(), false));
      continue;
    }
    if (head != "d")
      throw ParseError("space line " + std::to_string(lineno) + ": expected 'points:' or 'd'");
    if (out.ids.empty())
      throw ParseError("space line " + std::to_string(lineno) + ": distances before points header");
    // The tail after 'd' reads "<a> <b>: <rational>".
    std::string a, b, value;
    std::string tail = line.substr(first + 1);
    size_t colon = tail.find(':');
    if (colon == std::string::npos)
      throw ParseError("space line " + std::to_string(lineno) + ": missing ':'");
    std::istringstream names(tail.substr(0, colon));
    if (!(names >> a >> b) || (names >> value))
      throw ParseError("space line " + std::to_string(lineno) + ": expected 'd <x> <y>: <value>'");
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end() || ib == index.end())
      throw ParseError("space line " + std::to_string(lineno) + ": unknown point");
    std::string rat = tail.substr(colon + 1);
    size_t l = rat.find_first_not_of(" \t");
    size_t r = rat.find_last_not_of(" \t\r");
    if (l == std::string::npos)
      throw ParseError("space line " + std::to_string(lineno) + ": missing value");
    Rat v = parse_rational(std::string_view(rat).substr(l, r - l + 1));
    int i = ia->second, j = ib->second;
    if (i == j) throw ParseError("space line " + std::to_string(lineno) + ": distance of a point to itself");
    if (seen[i][j])
      throw ParseError("space line " + std::to_string(lineno) + ": pair set twice");
    seen[i][j] = seen[j][i] = true;
    out.d[i][j] = out.d[j][i] = v;
  }
  if (out.ids.empty()) throw ParseError("space file has no points header");
  for (size_t i = 0; i < out.ids.size(); ++i)
    for (size_t j = i + 1; j < out.ids.size(); ++j)
      if (!seen[i][j])
        throw ParseError("space file misses the distance between '" + out.ids[i] + "' and '" +
                         out.ids[j] + "'");
  return out;
}

// --- subcommands

void cmd_check(const RunConfig& cfg, const std::string& model_file, const std::string& formula) {
  PointedKripkeModel x = read_model(model_file);
  Formula f = Formula::parse(formula, x.sig());
  bool verdict = satisfies(x, f);
  Report r;
  r.add("verdict", verdict ? "true" : "false");
  r.line(verdict ? "true" : "false");
  r.print(cfg);
}

void cmd_dist(const RunConfig& cfg, const std::string& left, const std::string& right,
              const std::string& metric) {
  PointedKripkeModel x = read_model(left);
  PointedKripkeModel y = read_model(right);
  require_same_signature(x, y);
  Rat lower, upper;
  if (exact_metric(metric)) {
    lower = upper = exact_distance(metric, x, y);
  } else {
    with_descriptor(metric, x.sig(), {x, y}, cfg, [&](const Descriptor& d) {
      DistanceInterval iv = distance(x, y, d, cfg.tolerance);
      lower = iv.lower;
      upper = iv.upper;
    });
  }
  Report r;
  r.add("lower", to_string(lower));
  r.add("upper", to_string(upper));
  r.add("width", to_string(upper - lower));
  r.line(to_string(lower) + " " + to_string(upper));
  r.print(cfg);
}

void cmd_update(const RunConfig& cfg, const std::string& model_file,
                const std::string& action_file, const std::string& out_file) {
  PointedKripkeModel x = read_model(model_file);
  ActionModel a = read_action_model(action_file);
  PointedKripkeModel u = product_update(x, a);
  std::ofstream out(out_file, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + out_file + "'");
  out << write_model(u);
  if (!out.flush()) throw ParseError("cannot write '" + out_file + "'");
  Report r;
  r.add("out", out_file);
  r.add("states", std::to_string(u.model->num_states()));
  r.add("point", u.model->state_names()[u.point]);
  r.line("wrote " + out_file + " (" + std::to_string(u.model->num_states()) +
         " states, point " + u.model->state_names()[u.point] + ")");
  r.print(cfg);
}

void cmd_bisim(const RunConfig& cfg, const std::string& left, const std::string& right) {
  PointedKripkeModel x = read_model(left);
  PointedKripkeModel y = read_model(right);
  require_same_signature(x, y);
  Report r;
  if (are_bisimilar(x, y)) {
    r.add("bisimilar", "yes");
    r.add("agree_depth", "all");
    r.line("bisimilar");
  } else {
    long agree = -1;
    for (long n = 0; n <= cfg.depth && are_n_bisimilar(x, y, n); ++n) agree = n;
    r.add("bisimilar", "no");
    r.add("agree_depth", std::to_string(agree));
    if (agree == cfg.depth)
      r.line(std::to_string(agree) + "-bisimilar");
    else if (agree >= 0)
      r.line("not " + std::to_string(agree + 1) + "-bisimilar; " + std::to_string(agree) +
             "-bisimilar");
    else
      r.line("not 0-bisimilar");
  }
  r.add("checked_depth", std::to_string(cfg.depth));
  r.print(cfg);
}

void cmd_topology(const RunConfig& cfg, const std::string& models_dir,
                  const std::string& descriptor_file) {
  std::vector<PointedKripkeModel> models = read_model_dir(models_dir);
  const Signature& sig = models.front().sig();
  with_finite_descriptor(descriptor_file, sig, cfg, [&](const FiniteDescriptor& fd) {
    std::vector<ModalSpacePoint> space = quotient(models, fd);
    const int n = static_cast<int>(space.size());
    std::vector<std::vector<Rat>> dist_matrix(n, std::vector<Rat>(n, Rat(0)));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        Rat v = distance(space[i].representative, space[j].representative, fd, cfg.tolerance).lower;
        dist_matrix[i][j] = dist_matrix[j][i] = v;
      }

    FiniteTopology stone = stone_topology(space, fd);
    FiniteTopology metric = metric_topology(space, dist_matrix);
    DefinabilityReport def = definable_check(stone, space, fd);

    Report r;
    r.add("models", std::to_string(models.size()));
    r.add("points", std::to_string(n));
    r.add("opens", std::to_string(stone.opens().size()));
    r.add("metric_topology_agrees", stone == metric ? "yes" : "no");
    r.add("hausdorff", is_hausdorff(stone) ? "yes" : "no");
    r.add("totally_disconnected", is_totally_disconnected(stone) ? "yes" : "no");
    r.add("compact", is_compact(stone) ? "yes" : "no");
    r.add("clopens", std::to_string(clopen_sets(stone).size()));
    r.add("clopens_definable", def.all_definable ? "yes" : "no");
    r.print(cfg);
  });
}

void cmd_continuity(const RunConfig& cfg, const std::string& action_file,
                    const std::string& metric, const std::string& epsilon,
                    const std::string& samples_dir) {
  ActionModel a = read_action_model(action_file);
  std::vector<PointedKripkeModel> samples = read_model_dir(samples_dir);
  if (samples.front().sig() != a.sig())
    throw PreconditionError("sample models and action model disagree on the signature");
  Rat eps = parse_rational(epsilon);
  with_descriptor(metric, a.sig(), samples, cfg, [&](const Descriptor& d) {
    CleanMap f(a, samples, cfg.depth);
    ModulusResult m = continuity_modulus(f, d, eps);

    Report r;
    r.add("samples", std::to_string(samples.size()));
    r.add("epsilon", to_string(eps));
    r.add("delta", to_string(m.delta));
    r.add("cutoff_level", to_string(m.cutoff_level));
    r.add("deepest_level", to_string(m.deepest_level));
    const ConditionsReport& c = f.conditions();
    r.add("deterministic", c.deterministic ? "yes" : "no");
    r.add("exhaustive", c.exhaustive ? "yes" : "no");
    r.add("closing", c.closing ? "yes" : "no");
    r.add("closing_depth", std::to_string(c.closing_depth));
    r.add("distinct_preconditions", std::to_string(c.distinct_preconditions));
    for (const std::string& note : m.swap_notes) r.add("swap_note", note);
    r.print(cfg);
  });
}

void cmd_embed(const RunConfig& cfg, const std::string& space_file) {
  SpaceFile space = parse_space_file(read_file(space_file));
  Embedding e = embed_finite_space(space.ids, space.d);
  Report r;
  const size_t n = space.ids.size();
  for (size_t i = 0; i < n; ++i)
    r.add("point " + space.ids[i], to_string(e.point_weight[i]));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      r.add("pair " + space.ids[i] + " " + space.ids[j], to_string(e.pair_weight[i][j]));
  r.add("c", to_string(e.c));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      r.add("verify " + space.ids[i] + " " + space.ids[j],
            "dw=" + to_string(e.dw[i][j]) + " d=" + to_string(space.d[i][j]) +
                " diff=" + to_string(e.dw[i][j] - space.d[i][j]));
  r.print(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distances, topologies, and update dynamics for pointed relational models"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string tol_text = "1/1024";
  std::string format = "text";
  app.add_option("--tol", tol_text, "Interval tolerance for leveled distances (rational)")
      ->capture_default_str();
  app.add_option("--budget", cfg.budget, "Enumeration budget for type-set computations")
      ->capture_default_str();
  app.add_option("--depth", cfg.depth, "Bisimilarity check depth")->capture_default_str();
  app.add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();

  std::string model_file, formula, left, right, metric, action_file, out_file;
  std::string models_dir, descriptor_file, epsilon, samples_dir, space_file;

  CLI::App* check = app.add_subcommand("check", "Evaluate a formula at a model's point");
  check->add_option("model", model_file, "Model file")->required();
  check->add_option("formula", formula, "Formula text")->required();

  CLI::App* dist = app.add_subcommand("dist", "Distance between two pointed models");
  dist->add_option("left", left, "Left model file")->required();
  dist->add_option("right", right, "Right model file")->required();
  dist->add_option("--metric", metric, "hamming:<n> | bisim | goranko | depth | custom:<file>")
      ->required();

  CLI::App* update = app.add_subcommand("update", "Apply an action model by product update");
  update->add_option("model", model_file, "Input model file")->required();
  update->add_option("action", action_file, "Action model file")->required();
  update->add_option("out", out_file, "Output model file")->required();

  CLI::App* bisim = app.add_subcommand("bisim", "Compare two models up to bisimilarity");
  bisim->add_option("left", left, "Left model file")->required();
  bisim->add_option("right", right, "Right model file")->required();

  CLI::App* topology = app.add_subcommand("topology", "Quotient topology of a model family");
  topology->add_option("models", models_dir, "Directory of model files")->required();
  topology->add_option("descriptor", descriptor_file, "Descriptor file")->required();

  CLI::App* continuity = app.add_subcommand("continuity", "Continuity modulus of an update map");
  continuity->add_option("action", action_file, "Action model file")->required();
  continuity->add_option("metric", metric, "bisim | depth | hamming:<n> | custom:<file>")
      ->required();
  continuity->add_option("epsilon", epsilon, "Output tolerance (rational)")->required();
  continuity->add_option("samples", samples_dir, "Directory of sample model files")->required();

  CLI::App* embed = app.add_subcommand("embed", "Realize a finite metric space as weights");
  embed->add_option("space", space_file, "Space file: 'points:' then 'd x y: <r>' lines")
      ->required();

  try {
    app.parse(argc, argv);
    cfg.tolerance = parse_rational(tol_text);
    if (!(cfg.tolerance > 0)) throw PreconditionError("tolerance must be positive");
    if (cfg.budget < 1) throw PreconditionError("budget must be at least 1");
    if (cfg.depth < 0) throw PreconditionError("depth must be non-negative");
    cfg.structured = format == "structured";

    if (check->parsed()) cmd_check(cfg, model_file, formula);
    if (dist->parsed()) cmd_dist(cfg, left, right, metric);
    if (update->parsed()) cmd_update(cfg, model_file, action_file, out_file);
    if (bisim->parsed()) cmd_bisim(cfg, left, right);
    if (topology->parsed()) cmd_topology(cfg, models_dir, descriptor_file);
    if (continuity->parsed()) cmd_continuity(cfg, action_file, metric, epsilon, samples_dir);
    if (embed->parsed()) cmd_embed(cfg, space_file);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const modal::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const modal::BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return 4;
  } catch (const modal::PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const modal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
