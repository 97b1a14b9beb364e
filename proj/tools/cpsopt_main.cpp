// Command-line driver: analyze | graph | opt | run over a surface (.mml)
// or CPS IR (.cps) program.
//
// Exit codes: 0 success, 1 bad input (parse/scope/runtime/usage),
// 2 internal error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpsopt/cfa.hpp"
#include "cpsopt/interp.hpp"
#include "cpsopt/ir.hpp"
#include "cpsopt/opt.hpp"
#include "cpsopt/reflow.hpp"
#include "cpsopt/surface.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string input;
  std::string input_kind = "auto";
  int depth_limit = cpsopt::kDefaultDepthLimit;
};

std::string read_all(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

cpsopt::Program load_program(const CommonOpts& o) {
  std::string text = read_all(o.input);
  std::string kind = o.input_kind;
  if (kind == "auto") {
    if (o.input.ends_with(".mml"))
      kind = "surface";
    else if (o.input.ends_with(".cps"))
      kind = "ir";
    else
      throw std::runtime_error(
          "cannot infer language of '" + o.input +
          "' from its extension; pass --input-kind surface|ir");
  }
  cpsopt::Program p = kind == "surface"
                          ? cpsopt::cps_convert(*cpsopt::parse_surface(text))
                          : cpsopt::parse_text(text);
  std::vector<cpsopt::Violation> bad = cpsopt::check_well_formed(p);
  if (!bad.empty())
    throw std::runtime_error("ill-formed program: " + bad.front().message);
  return p;
}

std::vector<cpsopt::PassKind> parse_passes(const std::string& csv) {
  std::vector<cpsopt::PassKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto k = cpsopt::pass_kind_from(item);
    if (!k)
      throw std::runtime_error(
          "unknown pass '" + item +
          "' (expected branch-elim, copy-prop, inline, uve)");
    out.push_back(*k);
  }
  return out;
}

int cmd_analyze(const CommonOpts& o) {
  cpsopt::Program p = load_program(o);
  cpsopt::CfaOptions co;
  co.depth_limit = o.depth_limit;
  cpsopt::CfaResult r = cpsopt::analyze(p, co);
  cpsopt::ProgramIndex index = cpsopt::build_index(p);

  json j;
  j["depth-limit"] = r.depth_limit;
  j["iterations"] = r.iterations;
  j["escaping"] = json::array();
  for (cpsopt::VarId v : r.escaping) j["escaping"].push_back(p.ctx->name(v));
  // Ids disambiguate variables whose display names collide.
  j["flow"] = json::object();
  for (const auto& [v, av] : r.flow) {
    if (av.is_bot()) continue;
    j["flow"][p.ctx->name(v) + "#" + std::to_string(v.raw)] =
        av.to_string(*p.ctx);
  }
  j["sites"] = json::array();
  for (const auto& [pt, ct] : r.targets) {
    const cpsopt::Expr* e = index.points.at(pt);
    const char* what = "throw";
    cpsopt::VarId target{};
    if (auto* a = std::get_if<cpsopt::Apply>(&e->term)) {
      what = "apply";
      target = a->target;
    } else {
      target = std::get<cpsopt::Throw>(e->term).target;
    }
    json site;
    site["point"] = pt.raw;
    site["kind"] = what;
    site["target-var"] = p.ctx->name(target);
    switch (ct.kind) {
      case cpsopt::CallTargets::Kind::Bot:
        site["targets"] = "unreachable";
        break;
      case cpsopt::CallTargets::Kind::Top:
        site["targets"] = "unknown";
        break;
      case cpsopt::CallTargets::Kind::Known: {
        json funs = json::array();
        for (cpsopt::VarId f : ct.funs) funs.push_back(p.ctx->name(f));
        site["targets"] = std::move(funs);
        break;
      }
    }
    j["sites"].push_back(std::move(site));
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_graph(const CommonOpts& o, const std::string& emit) {
  cpsopt::Program p = load_program(o);
  cpsopt::CfaOptions co;
  co.depth_limit = o.depth_limit;
  cpsopt::CfaResult r = cpsopt::analyze(p, co);
  cpsopt::FlowGraph g = cpsopt::build_graph(p, r);
  if (emit == "dot") {
    std::cout << cpsopt::to_dot(g, *p.ctx);
    return 0;
  }
  // emit == "scc"
  cpsopt::SccResult scc = cpsopt::tarjan_scc(g);
  std::cout << "nodes: " << g.nodes.size() << "\n";
  std::cout << "components: " << scc.count << "\n";
  std::vector<std::vector<cpsopt::NodeId>> members(scc.count);
  for (cpsopt::NodeId n = 0; n < g.nodes.size(); n++)
    members[scc.comp[n]].push_back(n);
  for (uint32_t c = 0; c < scc.count; c++) {
    std::cout << "comp " << c << (scc.cyclic[c] ? " (cyclic):" : ":");
    for (cpsopt::NodeId n : members[c]) std::cout << " " << n;
    std::cout << "\n";
  }
  return 0;
}

int cmd_opt(const CommonOpts& o, const std::string& passes_csv,
            int inline_limit, const std::string& stats_mode,
            const std::string& out_path) {
  cpsopt::Program p = load_program(o);
  std::vector<cpsopt::PassKind> passes = parse_passes(passes_csv);
  cpsopt::PipelineOptions po;
  po.depth_limit = o.depth_limit;
  po.inline_size_limit = inline_limit;
  cpsopt::PassStats s = cpsopt::run_pipeline(p, passes, po);

  std::string ir = cpsopt::print_text(p);
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + out_path + "'");
    f << ir;
  }

  if (stats_mode == "json") {
    json j;
    j["branches-eliminated"] = s.branches_eliminated;
    j["copies-propagated"] = s.copies_propagated;
    j["functions-inlined"] = s.functions_inlined;
    j["params-removed"] = s.params_removed;
    j["branch-sites"] = json::array();
    for (const auto& [pt, tag] : s.branch_sites)
      j["branch-sites"].push_back({{"point", pt.raw}, {"kept-tag", tag}});
    j["copy-sites"] = json::array();
    for (cpsopt::ProgPoint pt : s.copy_sites)
      j["copy-sites"].push_back(pt.raw);
    j["inline-sites"] = json::array();
    for (cpsopt::ProgPoint pt : s.inline_sites)
      j["inline-sites"].push_back(pt.raw);
    std::cout << j.dump(2) << "\n";
  } else if (stats_mode == "text") {
    std::cout << "branches-eliminated: " << s.branches_eliminated << "\n"
              << "copies-propagated: " << s.copies_propagated << "\n"
              << "functions-inlined: " << s.functions_inlined << "\n"
              << "params-removed: " << s.params_removed << "\n";
    for (const auto& [pt, tag] : s.branch_sites)
      std::cout << "branch site " << pt.raw << " kept tag " << tag << "\n";
    for (cpsopt::ProgPoint pt : s.copy_sites)
      std::cout << "copy site " << pt.raw << "\n";
    for (cpsopt::ProgPoint pt : s.inline_sites)
      std::cout << "inline site " << pt.raw << "\n";
  } else if (out_path.empty()) {
    std::cout << ir;
  }
  return 0;
}

int cmd_run(const CommonOpts& o, uint64_t fuel, const std::string& trace) {
  cpsopt::Program p = load_program(o);
  try {
    cpsopt::EvalResult r = cpsopt::eval(p, fuel);
    bool halted = r.outcome == cpsopt::EvalResult::Outcome::Halted;
    if (trace == "json") {
      json j;
      j["outcome"] = halted ? "halted" : "out-of-fuel";
      if (halted) j["value"] = cpsopt::value_to_string(r.value, *p.ctx);
      j["calls"] = json::array();
      for (const cpsopt::CallEvent& c : r.trace.calls)
        j["calls"].push_back(
            {{"site", c.site.raw}, {"callee", p.ctx->name(c.callee)}});
      j["arms"] = json::array();
      for (const cpsopt::ArmEvent& a : r.trace.arms)
        j["arms"].push_back({{"site", a.site.raw}, {"tag", a.tag}});
      std::cout << j.dump(2) << "\n";
    } else if (halted) {
      std::cout << cpsopt::value_to_string(r.value, *p.ctx) << "\n";
    } else {
      std::cout << "out-of-fuel\n";
    }
    return 0;
  } catch (const cpsopt::EvalError& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"whole-program optimizer for a small CPS language"};
  app.require_subcommand(1);

  CommonOpts common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("input", common.input, "program file (.mml or .cps)")
        ->required();
    sub->add_option("--input-kind", common.input_kind,
                    "surface or ir (default: by extension)")
        ->check(CLI::IsMember({"auto", "surface", "ir"}));
    sub->add_option("--cfa-depth-limit", common.depth_limit,
                    "tuple nesting depth the analysis tracks")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* analyze = app.add_subcommand(
      "analyze", "run the control-flow analysis and print call targets");
  add_common(analyze);

  CLI::App* graph = app.add_subcommand(
      "graph", "build the rebinding-flow graph");
  add_common(graph);
  std::string emit = "dot";
  graph->add_option("--emit", emit, "dot or scc")
      ->check(CLI::IsMember({"dot", "scc"}));

  CLI::App* opt = app.add_subcommand("opt", "optimize and print the program");
  add_common(opt);
  std::string passes = "branch-elim,copy-prop,inline,uve";
  std::string stats_mode;
  std::string out_path;
  int inline_limit = cpsopt::kDefaultInlineSizeLimit;
  opt->add_option("--passes", passes,
                  "comma-separated pass list (branch-elim, copy-prop, "
                  "inline, uve)");
  opt->add_option("--inline-size-limit", inline_limit,
                  "max body size the inliner will copy");
  opt->add_option("--stats", stats_mode,
                  "print stats (json or text) instead of the program")
      ->check(CLI::IsMember({"json", "text"}));
  opt->add_option("--out", out_path, "write the optimized program here");
  std::string opt_emit = "ir";  // accepted for interface symmetry with graph
  opt->add_option("--emit", opt_emit, "output format (ir)")
      ->check(CLI::IsMember({"ir"}));

  CLI::App* run = app.add_subcommand("run", "interpret the program");
  add_common(run);
  uint64_t fuel = 1000000;
  std::string trace;
  run->add_option("--fuel", fuel, "closure-call budget");
  run->add_option("--trace", trace, "json: dump call/arm trace")
      ->check(CLI::IsMember({"json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);  // prints help or the usage error
    return rc == 0 ? 0 : 1;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(common);
    if (graph->parsed()) return cmd_graph(common, emit);
    if (opt->parsed())
      return cmd_opt(common, passes, inline_limit, stats_mode, out_path);
    if (run->parsed()) return cmd_run(common, fuel, trace);
  } catch (const cpsopt::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
