// sgdd command-line tool: generate synthetic graphs, condense them, evaluate
// condensed graphs across architectures, and compare spectral profiles.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "manifest.hpp"
#include "sgdd/condenser.hpp"
#include "sgdd/config.hpp"
#include "sgdd/errors.hpp"
#include "sgdd/eval.hpp"
#include "sgdd/graph_io.hpp"
#include "sgdd/sbm.hpp"
#include "sgdd/spectral.hpp"
#include "sgdd/textio.hpp"

namespace fs = std::filesystem;
using namespace sgdd;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(const char* category, const std::string& msg, int code) {
  std::cerr << "error: category=" << category << " message=" << one_line(msg) << "\n";
  return code;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// --seed flag wins, then the config file, then SGDD_SEED, then zero.
uint64_t resolve_seed(bool flag_set, uint64_t flag_seed, bool cfg_set, uint64_t cfg_seed) {
  if (flag_set) return flag_seed;
  if (cfg_set) return cfg_seed;
  if (const char* env = std::getenv("SGDD_SEED")) return std::strtoull(env, nullptr, 10);
  return 0;
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out.empty() ? "." : out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string report_json(const CondenseReport& r) {
  std::ostringstream out;
  auto trace = [&](const char* key, const std::vector<double>& v, bool last = false) {
    out << "  \"" << key << "\": [";
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out << ", ";
      out << io::fmt_double(v[i]);
    }
    out << "]" << (last ? "\n" : ",\n");
  };
  out << "{\n";
  out << "  \"seed\": " << r.seed << ",\n";
  out << "  \"epochs_run\": " << r.epochs_run << ",\n";
  out << "  \"diverged\": " << (r.diverged ? "true" : "false") << ",\n";
  out << "  \"final_sc\": " << io::fmt_double(r.final_sc) << ",\n";
  out << "  \"warnings\": [";
  for (size_t i = 0; i < r.warnings.size(); ++i) {
    if (i) out << ", ";
    out << "\"" << one_line(r.warnings[i]) << "\"";
  }
  out << "],\n";
  trace("feature_trace", r.feature_trace);
  trace("structure_trace", r.structure_trace);
  trace("regularizer_trace", r.regularizer_trace);
  trace("total_trace", r.total_trace, true);
  out << "}\n";
  return out.str();
}

std::string profile_json(const LedProfile& p, const std::string& indent) {
  std::ostringstream out;
  auto arr = [&](const char* key, const std::vector<double>& v, bool last = false) {
    out << indent << "  \"" << key << "\": [";
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out << ", ";
      out << io::fmt_double(v[i]);
    }
    out << "]" << (last ? "\n" : ",\n");
  };
  out << "{\n";
  out << indent << "  \"bandwidth\": " << io::fmt_double(p.bandwidth) << ",\n";
  arr("eta", p.eta);
  arr("samples", p.samples);
  arr("grid", p.grid);
  arr("density", p.density, true);
  out << indent << "}";
  return out.str();
}

// ---------------------------------------------------------------------------

struct SbmArgs {
  SbmSpec spec{100, 5, 0.8, 0.1, 0};
  bool seed_set = false;
  std::string out = ".";
};

int run_sbm(const SbmArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  SbmSpec spec = a.spec;
  spec.seed = resolve_seed(a.seed_set, spec.seed, false, 0);
  try {
    spec.validate();
  } catch (const InputError& e) {
    return fail("config", e.what(), kExitConfig);
  }
  try {
    const fs::path dir = ensure_out_dir(a.out);
    Graph g = sbm_generate(spec);
    const std::string graph_path = (dir / "graph.graph.json").string();
    save_graph(g, graph_path);

    tool::Manifest m;
    m.command = "sbm";
    m.seed = spec.seed;
    m.outputs.emplace_back(graph_path, tool::sha256_file_hex(graph_path));
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tool::write_manifest(m, (dir / "manifest.json").string());
    std::cout << "wrote " << graph_path << "\n";
    return 0;
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), kExitNumerical);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitIo);
  }
}

// ---------------------------------------------------------------------------

struct CondenseArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string graph_path;
  std::string out = ".";
  uint64_t seed = 0;
  bool seed_set = false;
};

int run_condense(const CondenseArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  CondenseRunConfig rc;
  try {
    TomlDoc doc = a.config_path.empty() ? TomlDoc::parse("", "<defaults>")
                                        : TomlDoc::parse_file(a.config_path);
    const bool cfg_has_seed = doc.contains("condense.seed");
    for (const auto& o : a.overrides) doc.apply_override(o, "condense");
    const bool seed_in_doc = cfg_has_seed || doc.contains("condense.seed");
    rc = parse_condense_config(doc);
    if (!a.graph_path.empty()) rc.graph_path = a.graph_path;
    rc.condense.seed = resolve_seed(a.seed_set, a.seed, seed_in_doc, rc.condense.seed);
    if (rc.graph_path.empty())
      throw InputError("no input graph: pass --graph or set [io] graph in the config");
    rc.condense.validate();
  } catch (const ParseError& e) {
    return fail("config", e.what(), kExitConfig);
  } catch (const InputError& e) {
    return fail("config", e.what(), kExitConfig);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitIo);
  }

  try {
    const fs::path dir = ensure_out_dir(a.out);
    std::vector<std::string> warnings;
    Graph g = load_graph(rc.graph_path, &warnings);
    print_warnings(warnings);

    auto [condensed, report] = condense(g, rc.condense);
    print_warnings(report.warnings);

    const std::string cond_path = (dir / "condensed.graph.json").string();
    const std::string report_path = (dir / "report.json").string();
    const std::string config_path = (dir / "config.toml").string();
    save_condensed(condensed, cond_path);
    io::write_file(report_path, report_json(report));
    io::write_file(config_path, render_condense_config(rc));

    tool::Manifest m;
    m.command = "condense";
    m.seed = rc.condense.seed;
    m.inputs.emplace_back(rc.graph_path, tool::sha256_file_hex(rc.graph_path));
    if (!a.config_path.empty())
      m.inputs.emplace_back(a.config_path, tool::sha256_file_hex(a.config_path));
    for (const auto& p : {cond_path, report_path, config_path})
      m.outputs.emplace_back(p, tool::sha256_file_hex(p));
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tool::write_manifest(m, (dir / "manifest.json").string());

    if (report.diverged)
      return fail("numerical", "condensation diverged; outputs hold the last finite state",
                  kExitNumerical);
    std::cout << "wrote " << cond_path << " (final SC " << io::fmt_double(report.final_sc)
              << ")\n";
    return 0;
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), kExitNumerical);
  } catch (const ParseError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const InputError& e) {
    return fail("config", e.what(), kExitConfig);
  }
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string condensed_path;
  std::string original_path;
  std::string archs = "gcn,sgc,mlp,cheby";
  std::string method = "sgdd";
  std::string condense_arch = "gcn";
  EvalSettings settings;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out = ".";
};

int run_eval(const EvalArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Arch> archs;
  try {
    std::stringstream ss(a.archs);
    std::string tag;
    while (std::getline(ss, tag, ',')) archs.push_back(arch_from_string(tag));
    if (archs.empty()) throw InputError("--archs parsed to an empty list");
    if (a.settings.seeds < 1 || a.settings.epochs < 0 || a.settings.jobs < 1)
      throw InputError("--seeds/--epochs/--jobs out of range");
  } catch (const InputError& e) {
    return fail("config", e.what(), kExitConfig);
  }
  const uint64_t seed = resolve_seed(a.seed_set, a.seed, false, 0);

  try {
    const fs::path dir = ensure_out_dir(a.out);
    std::vector<std::string> warnings;
    CondensedGraph s = load_condensed(a.condensed_path, &warnings);
    Graph g = load_graph(a.original_path, &warnings);
    print_warnings(warnings);

    const double sc = shift_coefficient(g, s, g.features, s.features).sc;
    CrossArchTable table = cross_architecture(s, g, archs, a.settings, seed);

    std::vector<MetricsRow> rows;
    for (size_t ai = 0; ai < archs.size(); ++ai) {
      const EvalResult& cell = table.cells[ai];
      for (int si = 0; si < a.settings.seeds; ++si) {
        MetricsRow row;
        row.method = a.method;
        row.condense_arch = a.condense_arch;
        row.test_arch = arch_name(archs[ai]);
        row.ratio = s.ratio;
        row.seed = static_cast<uint64_t>(si);
        row.accuracy = cell.per_seed[si];
        row.sc = sc;
        row.wallclock_s = cell.per_seed_wallclock_s[si];
        rows.push_back(std::move(row));
      }
    }
    const std::string csv_path = (dir / "metrics.csv").string();
    append_metrics_csv(csv_path, rows);

    tool::Manifest m;
    m.command = "eval";
    m.seed = seed;
    m.inputs.emplace_back(a.condensed_path, tool::sha256_file_hex(a.condensed_path));
    m.inputs.emplace_back(a.original_path, tool::sha256_file_hex(a.original_path));
    m.outputs.emplace_back(csv_path, tool::sha256_file_hex(csv_path));
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tool::write_manifest(m, (dir / "manifest.json").string());

    std::cout << "appended " << rows.size() << " rows to " << csv_path << " (sc "
              << io::fmt_double(sc) << ")\n";
    for (size_t ai = 0; ai < archs.size(); ++ai)
      std::cout << "  " << arch_name(archs[ai]) << ": mean " << table.cells[ai].mean << " std "
                << table.cells[ai].stddev << "\n";
    return 0;
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), kExitNumerical);
  } catch (const ParseError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const InputError& e) {
    return fail("config", e.what(), kExitConfig);
  }
}

// ---------------------------------------------------------------------------

struct SpectralArgs {
  std::string a_path;
  std::string b_path;
  std::string mode = "masses";
  std::string out = ".";
};

int run_spectral(const SpectralArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  LedKdeMode mode;
  if (a.mode == "masses") {
    mode = LedKdeMode::Masses;
  } else if (a.mode == "eigenvalues") {
    mode = LedKdeMode::EnergyWeightedEigenvalues;
  } else {
    return fail("config", "--mode must be 'masses' or 'eigenvalues', got '" + a.mode + "'",
                kExitConfig);
  }

  try {
    const fs::path dir = ensure_out_dir(a.out);
    std::vector<std::string> warnings;
    Graph ga = load_graph(a.a_path, &warnings);
    Graph gb = load_graph(a.b_path, &warnings);
    print_warnings(warnings);

    const ScResult r = shift_coefficient_matrices(normalized_laplacian(ga), ga.features,
                                                  normalized_laplacian(gb), gb.features, mode);

    std::ostringstream out;
    out << "{\n";
    out << "  \"mode\": \"" << a.mode << "\",\n";
    out << "  \"sc\": " << io::fmt_double(r.sc) << ",\n";
    out << "  \"a\": " << profile_json(r.a, "  ") << ",\n";
    out << "  \"b\": " << profile_json(r.b, "  ") << "\n";
    out << "}\n";
    const std::string json_path = (dir / "spectral.json").string();
    io::write_file(json_path, out.str());

    tool::Manifest m;
    m.command = "spectral";
    m.inputs.emplace_back(a.a_path, tool::sha256_file_hex(a.a_path));
    m.inputs.emplace_back(a.b_path, tool::sha256_file_hex(a.b_path));
    m.outputs.emplace_back(json_path, tool::sha256_file_hex(json_path));
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tool::write_manifest(m, (dir / "manifest.json").string());

    std::cout << "sc " << io::fmt_double(r.sc) << " -> " << json_path << "\n";
    return 0;
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), kExitNumerical);
  } catch (const ParseError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const InputError& e) {
    return fail("config", e.what(), kExitConfig);
  }
}

// ---------------------------------------------------------------------------

struct BaselineArgs {
  std::string method;
  std::string original_path;
  double ratio = 0.1;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = ".";
};

int run_baseline(const BaselineArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const uint64_t seed = resolve_seed(a.seed_set, a.seed, false, 0);

  try {
    const fs::path dir = ensure_out_dir(a.out);
    std::vector<std::string> warnings;
    Graph g = load_graph(a.original_path, &warnings);
    print_warnings(warnings);

    CondensedGraph s;
    bool wrote_report = false;
    if (a.method == "random") {
      s = baseline_random(g, a.ratio, seed);
    } else if (a.method == "herding") {
      s = baseline_herding(g, a.ratio);
    } else if (a.method == "kcenter") {
      s = baseline_kcenter(g, a.ratio, seed);
    } else if (a.method == "feature_similarity") {
      TomlDoc doc = a.config_path.empty() ? TomlDoc::parse("", "<defaults>")
                                          : TomlDoc::parse_file(a.config_path);
      for (const auto& o : a.overrides) doc.apply_override(o, "condense");
      CondenseRunConfig rc = parse_condense_config(doc);
      rc.condense.ratio = a.ratio;
      rc.condense.seed = seed;
      auto [graph, report] = baseline_feature_similarity(g, rc.condense);
      print_warnings(report.warnings);
      s = std::move(graph);
      io::write_file((dir / "report.json").string(), report_json(report));
      wrote_report = true;
    } else {
      return fail("config",
                  "--method must be random/herding/kcenter/feature_similarity, got '" + a.method +
                      "'",
                  kExitConfig);
    }

    const std::string cond_path = (dir / "condensed.graph.json").string();
    save_condensed(s, cond_path);

    tool::Manifest m;
    m.command = "baseline:" + a.method;
    m.seed = seed;
    m.inputs.emplace_back(a.original_path, tool::sha256_file_hex(a.original_path));
    m.outputs.emplace_back(cond_path, tool::sha256_file_hex(cond_path));
    if (wrote_report) {
      const std::string rp = (dir / "report.json").string();
      m.outputs.emplace_back(rp, tool::sha256_file_hex(rp));
    }
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tool::write_manifest(m, (dir / "manifest.json").string());

    std::cout << "wrote " << cond_path << "\n";
    return 0;
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), kExitNumerical);
  } catch (const ParseError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const InputError& e) {
    return fail("config", e.what(), kExitConfig);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sgdd: graph dataset distillation with spectral structure matching"};
  app.require_subcommand(1);

  SbmArgs sbm_args;
  CLI::App* sbm = app.add_subcommand("sbm", "Generate a stochastic block model graph");
  sbm->add_option("--n", sbm_args.spec.n, "Node count")->capture_default_str();
  sbm->add_option("--c", sbm_args.spec.c, "Community count")->capture_default_str();
  sbm->add_option("--p", sbm_args.spec.p, "Intra-community edge probability")
      ->capture_default_str();
  sbm->add_option("--q", sbm_args.spec.q, "Inter-community edge probability")
      ->capture_default_str();
  sbm->add_option("--seed", sbm_args.spec.seed, "Root seed (falls back to SGDD_SEED)")
      ->trigger_on_parse()
      ->each([&](const std::string&) { sbm_args.seed_set = true; });
  sbm->add_option("--out", sbm_args.out, "Output directory")->capture_default_str();

  CondenseArgs condense_args;
  CLI::App* cond = app.add_subcommand("condense", "Condense a graph into a small synthetic one");
  cond->add_option("--config", condense_args.config_path, "TOML config file");
  cond->add_option("--override", condense_args.overrides,
                   "Config override key=value (repeatable; bare keys go to [condense])");
  cond->add_option("--graph", condense_args.graph_path, "Input .graph.json (overrides [io] graph)");
  cond->add_option("--seed", condense_args.seed, "Root seed (falls back to SGDD_SEED)")
      ->trigger_on_parse()
      ->each([&](const std::string&) { condense_args.seed_set = true; });
  cond->add_option("--out", condense_args.out, "Output directory")->capture_default_str();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Train architectures on a condensed graph");
  eval->add_option("--condensed", eval_args.condensed_path, "Condensed .graph.json")->required();
  eval->add_option("--original", eval_args.original_path, "Original .graph.json")->required();
  eval->add_option("--archs", eval_args.archs, "Comma-separated architecture tags")
      ->capture_default_str();
  eval->add_option("--seeds", eval_args.settings.seeds, "Evaluation seeds per architecture")
      ->capture_default_str();
  eval->add_option("--epochs", eval_args.settings.epochs, "Training epochs")
      ->capture_default_str();
  eval->add_option("--lr", eval_args.settings.lr, "Learning rate")->capture_default_str();
  eval->add_option("--hidden", eval_args.settings.hidden, "Hidden width")->capture_default_str();
  eval->add_option("--jobs", eval_args.settings.jobs, "Worker threads across (arch, seed) runs")
      ->capture_default_str();
  eval->add_option("--method", eval_args.method, "Method label for the metrics CSV")
      ->capture_default_str();
  eval->add_option("--condense-arch", eval_args.condense_arch,
                   "Condense architecture label for the metrics CSV")
      ->capture_default_str();
  eval->add_option("--seed", eval_args.seed, "Root seed (falls back to SGDD_SEED)")
      ->trigger_on_parse()
      ->each([&](const std::string&) { eval_args.seed_set = true; });
  eval->add_option("--out", eval_args.out, "Output directory")->capture_default_str();

  SpectralArgs spectral_args;
  CLI::App* spectral = app.add_subcommand("spectral", "LED profiles and shift coefficient");
  spectral->add_option("--a", spectral_args.a_path, "First .graph.json")->required();
  spectral->add_option("--b", spectral_args.b_path, "Second .graph.json")->required();
  spectral->add_option("--mode", spectral_args.mode, "KDE samples: masses or eigenvalues")
      ->capture_default_str();
  spectral->add_option("--out", spectral_args.out, "Output directory")->capture_default_str();

  BaselineArgs baseline_args;
  CLI::App* baseline = app.add_subcommand("baseline", "Coreset and similarity baselines");
  baseline->add_option("--method", baseline_args.method,
                       "random | herding | kcenter | feature_similarity")
      ->required();
  baseline->add_option("--original", baseline_args.original_path, "Original .graph.json")
      ->required();
  baseline->add_option("--ratio", baseline_args.ratio, "Condensing ratio")->capture_default_str();
  baseline->add_option("--seed", baseline_args.seed, "Root seed (falls back to SGDD_SEED)")
      ->trigger_on_parse()
      ->each([&](const std::string&) { baseline_args.seed_set = true; });
  baseline->add_option("--config", baseline_args.config_path,
                       "TOML config (feature_similarity only)");
  baseline->add_option("--override", baseline_args.overrides,
                       "Config override key=value (feature_similarity only)");
  baseline->add_option("--out", baseline_args.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail("config", e.what(), kExitConfig);
  }

  if (sbm->parsed()) return run_sbm(sbm_args);
  if (cond->parsed()) return run_condense(condense_args);
  if (eval->parsed()) return run_eval(eval_args);
  if (spectral->parsed()) return run_spectral(spectral_args);
  if (baseline->parsed()) return run_baseline(baseline_args);
  return fail("config", "no subcommand given", kExitConfig);
}
