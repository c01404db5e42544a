// supkde command-line front end: selection and fitting on user data,
// constant reports, kernel checks, and simulation campaigns.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "supkde/constants.hpp"
#include "supkde/dataset.hpp"
#include "supkde/errors.hpp"
#include "supkde/harness.hpp"
#include "supkde/kernel.hpp"
#include "supkde/partition.hpp"
#include "supkde/selection.hpp"
#include "supkde/synthetic.hpp"
#include "supkde/version.hpp"

namespace {

using nlohmann::json;
using namespace supkde;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return j;
}

// Outputs are staged and renamed so failures never leave partial files.
void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp);
    out << text;
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

Kernel resolve_kernel(const std::string& kernel_arg, int moment_order) {
  if (kernel_arg.empty() || kernel_arg == "default") {
    return Kernel::polynomial(moment_order);
  }
  return Kernel::from_json(load_json_file(kernel_arg));
}

Dataset resolve_dataset(const std::string& path) {
  if (path.ends_with(".bin")) return Dataset::from_binary(path);
  return Dataset::from_csv(path);
}

PartitionFamily resolve_family(const std::string& arg, int d) {
  if (arg.empty() || arg == "auto") return default_family(d);
  if (arg == "all") return enumerate_all(d);
  if (arg == "trivial") return PartitionFamily(d, {});
  if (arg == "singletons") {
    return PartitionFamily(d, {Partition::singletons(d)});
  }
  if (arg.starts_with("capped:")) {
    const int cap = std::stoi(arg.substr(7));
    return restricted_family(d, cap);
  }
  // Otherwise a JSON file: either a family object or a list of partitions.
  const json j = load_json_file(arg);
  if (j.is_array()) {
    std::vector<Partition> members;
    for (const auto& jp : j) {
      auto p = Partition::from_json(jp);
      members.push_back(Partition(p.blocks(), d));
    }
    return PartitionFamily(d, std::move(members));
  }
  return PartitionFamily::from_json(j);
}

SyntheticDensity resolve_density(const std::string& arg) {
  if (arg.starts_with("gauss:")) {
    std::vector<double> sigma;
    std::stringstream ss(arg.substr(6));
    std::string tok;
    while (std::getline(ss, tok, ',')) sigma.push_back(std::stod(tok));
    return SyntheticDensity::product_gaussian(sigma);
  }
  if (arg.starts_with("corr:")) {
    const double rho = std::stod(arg.substr(5));
    SyntheticDensity::GaussianBlockSpec spec;
    spec.axes = {0, 1};
    spec.cov = {1.0, rho, rho, 1.0};
    return SyntheticDensity::custom_product(2, {spec});
  }
  return SyntheticDensity::from_json(load_json_file(arg));
}

std::vector<double> parse_double_list(const std::string& arg) {
  std::vector<double> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "inf" || tok == "Inf") {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      out.push_back(std::stod(tok));
    }
  }
  if (out.empty()) throw ArgumentError("empty numeric list");
  return out;
}

struct CommonOptions {
  std::string kernel = "default";
  int moment_order = 1;
  std::string mode = "calibrated";
  double kappa = 1.0;
  double floor = 1.0;
  double q = 1.0;
  std::string family = "auto";
  double grid_res = 0.0;
  int threads = 0;
  std::size_t budget = 0;
  int profile_nodes = 2049;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kernel", kernel,
                    "'default' or a kernel JSON file path");
    cmd->add_option("--moment-order", moment_order,
                    "vanishing-moment order of the default kernel");
    cmd->add_option("--mode", mode, "'calibrated' or 'theoretical'")
        ->check(CLI::IsMember({"calibrated", "theoretical"}));
    cmd->add_option("--kappa", kappa, "calibrated-mode penalty multiplier");
    cmd->add_option("--floor", floor,
                    "calibrated-mode bandwidth-grid threshold");
    cmd->add_option("--q", q, "risk exponent (>= 1)");
    cmd->add_option("--family", family,
                    "auto | all | trivial | singletons | capped:K | file");
    cmd->add_option("--grid-res", grid_res,
                    "evaluation-grid resolution (0 = min bandwidth / 4)");
    cmd->add_option("--threads", threads,
                    "worker threads (0 = SUPKDE_THREADS env or hardware)");
    cmd->add_option("--budget", budget,
                    "subsample the inner eta-comparisons to this many "
                    "candidates (0 = full rule)");
    cmd->add_option("--profile-nodes", profile_nodes,
                    "convolution table nodes per axis");
  }

  constants::Context context(int d, const Kernel& k) const {
    constants::Context ctx;
    ctx.q = q;
    ctx.d = d;
    ctx.k_inf = k.sup_norm();
    ctx.k_lip = k.lipschitz();
    ctx.mode = mode == "theoretical" ? constants::Mode::theoretical
                                     : constants::Mode::calibrated;
    ctx.kappa = kappa;
    ctx.candidate_floor = floor;
    return ctx;
  }

  SelectionOptions selection() const {
    SelectionOptions opt;
    opt.grid_resolution = grid_res;
    opt.threads = threads;
    opt.eta_budget = budget;
    opt.profile_nodes = profile_nodes;
    return opt;
  }

  json echo() const {
    return json{{"kernel", kernel},       {"moment_order", moment_order},
                {"mode", mode},           {"kappa", kappa},
                {"floor", floor},         {"q", q},
                {"family", family},       {"grid_res", grid_res},
                {"threads", threads},     {"budget", budget},
                {"profile_nodes", profile_nodes}};
  }
};

json run_config_json(const std::string& command, const CommonOptions& common,
                     const json& extra) {
  json j{{"version", kVersion}, {"command", command}};
  j["options"] = common.echo();
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    j["options"][it.key()] = it.value();
  }
  return j;
}

int cmd_select(const std::string& data_path, const CommonOptions& common,
               const std::string& out_path) {
  const auto data = resolve_dataset(data_path);
  const auto kernel = resolve_kernel(common.kernel, common.moment_order);
  const auto family = resolve_family(common.family, data.dim());
  SelectionEngine engine(data, kernel, common.context(data.dim(), kernel),
                         family, common.selection());
  const auto& res = engine.run();
  json out = res.to_json(engine.candidates(), *engine.grid());
  out["config"] =
      run_config_json("select", common, json{{"data", data_path}});
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json_atomic(out_path, out);
  }
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& h_arg,
            const std::string& partition_arg, const CommonOptions& common,
            const std::string& out_path, const std::string& csv_path) {
  const auto data = resolve_dataset(data_path);
  const auto kernel = resolve_kernel(common.kernel, common.moment_order);
  const BandwidthVector h(parse_double_list(h_arg));
  if (h.dim() != data.dim()) {
    throw ArgumentError("fit: bandwidth dimension differs from data");
  }
  Partition p = partition_arg.empty() || partition_arg == "trivial"
                    ? Partition::trivial(data.dim())
                : partition_arg == "singletons"
                    ? Partition::singletons(data.dim())
                    : Partition(
                          Partition::from_json(json::parse(partition_arg))
                              .blocks(),
                          data.dim());
  const double res =
      common.grid_res > 0.0 ? common.grid_res : h.max_component() / 8.0;
  auto grid = std::make_shared<const EvaluationGrid>(
      EvaluationGrid::cover(data, h.max_component(), res));
  std::vector<BlockTablePtr> tables;
  json jblocks = json::array();
  for (const auto& block : p.blocks()) {
    auto t = fit_marginal(data, kernel, block, h.restrict_to(block), grid);
    json jb;
    json axes = json::array();
    for (int a : block) axes.push_back(a + 1);
    jb["axes"] = axes;
    jb["values"] = t->values();
    jb["riemann_mass"] = t->riemann_mass();
    jblocks.push_back(std::move(jb));
    tables.push_back(std::move(t));
  }
  const FittedEstimator est(grid, tables);
  json out{{"grid", grid->to_json()},
           {"partition", p.to_json()},
           {"h", h.h},
           {"blocks", jblocks}};
  out["config"] = run_config_json(
      "fit", common,
      json{{"data", data_path}, {"h", h_arg}, {"partition", p.to_string()}});
  if (!csv_path.empty()) {
    if (data.dim() > 2) {
      throw ArgumentError("fit: CSV export supports d <= 2");
    }
    std::ostringstream csv;
    csv.precision(17);
    if (data.dim() == 1) {
      csv << "x1,estimate\n";
      for (std::size_t i = 0; i < grid->nodes(0); ++i) {
        const std::size_t idx[1] = {i};
        csv << grid->node(0, i) << ','
            << est.value(std::span<const std::size_t>(idx, 1)) << '\n';
      }
    } else {
      csv << "x1,x2,estimate\n";
      for (std::size_t i = 0; i < grid->nodes(0); ++i) {
        for (std::size_t j = 0; j < grid->nodes(1); ++j) {
          const std::size_t idx[2] = {i, j};
          csv << grid->node(0, i) << ',' << grid->node(1, j) << ','
              << est.value(std::span<const std::size_t>(idx, 2)) << '\n';
        }
      }
    }
    write_text_atomic(csv_path, csv.str());
  }
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json_atomic(out_path, out);
  }
  return 0;
}

int cmd_constants(int s, int d, const CommonOptions& common,
                  const std::string& out_path) {
  const auto kernel = resolve_kernel(common.kernel, common.moment_order);
  if (d <= 0) d = s;
  const double p = 2.0 * common.q;
  json out{{"version", kVersion},
           {"q", common.q},
           {"s", s},
           {"d", d},
           {"k_inf", kernel.sup_norm()},
           {"k_lip", kernel.lipschitz()},
           {"log_base", "natural"},
           {"delta_star", constants::delta_star()},
           {"C_s", constants::big_C(s)},
           {"tau", constants::tau_p(p, s, kernel.sup_norm())},
           {"gamma", constants::gamma_p(p, s, kernel.sup_norm(),
                                        kernel.lipschitz())},
           {"pi", constants::pi_const(s, kernel.sup_norm(),
                                      kernel.lipschitz())}};
  constants::Context ctx = common.context(d, kernel);
  ctx.mode = constants::Mode::theoretical;
  const auto pen = constants::lambda_and_threshold(ctx, 1.0);
  out["Lambda"] = pen.Lambda;
  out["a_star"] = pen.a_star;
  out["lambda_at_fbar_1"] = pen.lambda;
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json_atomic(out_path, out);
  }
  return 0;
}

int cmd_kernel_check(const CommonOptions& common,
                     const std::string& out_path) {
  const auto kernel = resolve_kernel(common.kernel, common.moment_order);
  const auto report = check_assumptions(kernel);
  json out = report.to_json();
  out["version"] = kVersion;
  if (kernel.is_polynomial()) out["kernel"] = kernel.to_json();
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json_atomic(out_path, out);
  }
  return report.all_ok() ? 0 : 7;
}

std::string replicate_csv(std::span<const ReplicateRecord> records) {
  std::ostringstream csv;
  csv.precision(17);
  csv << "replicate,sup_error_selected,sup_error_best,ratio,criterion,"
         "p_hat,h_hat\n";
  for (const auto& r : records) {
    csv << r.replicate << ',' << r.sup_error_selected << ','
        << r.sup_error_best << ',' << r.ratio << ',' << r.criterion << ",\""
        << r.p_hat << "\",\"";
    for (std::size_t i = 0; i < r.h_hat.size(); ++i) {
      if (i) csv << ';';
      csv << r.h_hat[i];
    }
    csv << "\"\n";
  }
  return csv.str();
}

PipelineConfig pipeline_config(const SyntheticDensity& density,
                               const CommonOptions& common) {
  const auto kernel = resolve_kernel(common.kernel, common.moment_order);
  return PipelineConfig{kernel, common.context(density.dim(), kernel),
                        resolve_family(common.family, density.dim()),
                        common.selection()};
}

int cmd_simulate(const std::string& density_arg, std::size_t n, int reps,
                 std::uint64_t seed, const CommonOptions& common,
                 const std::string& out_json, const std::string& out_csv) {
  const auto density = resolve_density(density_arg);
  const auto cfg = pipeline_config(density, common);
  const auto records =
      run_replicates(density, cfg, n, reps, seed, common.threads);
  const auto risk = aggregate_risk(records, common.q);
  double ratio_sum = 0.0;
  for (const auto& r : records) ratio_sum += r.ratio;
  json out{{"risk", risk.risk},
           {"stderr", risk.stderr_},
           {"reps", risk.reps},
           {"q", risk.q},
           {"mean_oracle_ratio", ratio_sum / records.size()},
           {"structure_frequencies", structure_histogram(records)}};
  out["config"] = run_config_json(
      "simulate", common,
      json{{"density", density_arg}, {"n", n}, {"reps", reps},
           {"seed", seed}});
  if (!out_csv.empty()) write_text_atomic(out_csv, replicate_csv(records));
  if (out_json.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json_atomic(out_json, out);
  }
  return 0;
}

int cmd_rates(const std::string& density_arg, const std::string& n_list_arg,
              int reps, std::uint64_t seed, const std::string& beta_arg,
              const std::string& p_arg, const CommonOptions& common,
              const std::string& out_json, const std::string& out_csv) {
  const auto density = resolve_density(density_arg);
  const auto cfg = pipeline_config(density, common);
  std::vector<std::size_t> n_list;
  for (double v : parse_double_list(n_list_arg)) {
    n_list.push_back(static_cast<std::size_t>(v));
  }
  SmoothnessSpec spec{parse_double_list(beta_arg), parse_double_list(p_arg),
                      std::vector<double>(density.dim(), 1.0),
                      density.true_partition()};
  const auto fit = rate_experiment(density, spec, cfg, n_list, reps,
                                   common.q, seed, common.threads);
  json out = fit.to_json();
  out["upsilon"] = upsilon(spec);
  out["config"] = run_config_json(
      "rates", common,
      json{{"density", density_arg}, {"n_list", n_list_arg}, {"reps", reps},
           {"seed", seed}, {"beta", beta_arg}, {"p", p_arg}});
  if (!out_csv.empty()) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "n,risk,stderr,reps,q\n";
    for (const auto& pt : fit.points) {
      csv << pt.n << ',' << pt.risk.risk << ',' << pt.risk.stderr_ << ','
          << pt.risk.reps << ',' << pt.risk.q << '\n';
    }
    write_text_atomic(out_csv, csv.str());
  }
  if (out_json.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json_atomic(out_json, out);
  }
  return 0;
}

int cmd_structure(const std::string& density_arg, std::size_t n, int reps,
                  std::uint64_t seed, const CommonOptions& common,
                  const std::string& out_json, const std::string& out_csv) {
  const auto density = resolve_density(density_arg);
  const auto cfg = pipeline_config(density, common);
  const auto records =
      run_replicates(density, cfg, n, reps, seed, common.threads);
  const auto hist = structure_histogram(records);
  json out{{"frequencies", hist},
           {"true_partition", density.true_partition().to_json()},
           {"reps", reps}};
  out["config"] = run_config_json(
      "structure", common,
      json{{"density", density_arg}, {"n", n}, {"reps", reps},
           {"seed", seed}});
  if (!out_csv.empty()) {
    std::ostringstream csv;
    csv << "partition,count,frequency\n";
    for (const auto& [p, c] : hist) {
      csv << '"' << p << "\"," << c << ','
          << static_cast<double>(c) / reps << '\n';
    }
    write_text_atomic(out_csv, csv.str());
  }
  if (out_json.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json_atomic(out_json, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supkde: sup-norm kernel density estimation with joint "
               "bandwidth and independence-structure selection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions common;

  auto* sel = app.add_subcommand(
      "select", "run the pairwise-comparison selection rule on a dataset");
  std::string data_path, out_path, csv_path;
  sel->add_option("--data", data_path, "CSV or .bin dataset")->required();
  sel->add_option("--out", out_path, "result JSON path (default: stdout)");
  common.attach(sel);

  auto* fit = app.add_subcommand(
      "fit", "fit one product estimator for a given h and partition");
  std::string h_arg, partition_arg;
  fit->add_option("--data", data_path, "CSV or .bin dataset")->required();
  fit->add_option("--bandwidth", h_arg, "comma-separated bandwidths")
      ->required();
  fit->add_option("--partition", partition_arg,
                  "trivial | singletons | JSON like [[1,2],[3]]");
  fit->add_option("--out", out_path, "result JSON path (default: stdout)");
  fit->add_option("--csv", csv_path, "grid CSV path (d <= 2)");
  common.attach(fit);

  auto* con = app.add_subcommand("constants",
                                 "report the selection-rule constants");
  int s_arg = 1;
  int d_arg = 0;
  con->add_option("--s", s_arg, "block size s")->required();
  con->add_option("--d", d_arg, "dimension (default: s)");
  con->add_option("--out", out_path, "JSON path (default: stdout)");
  common.attach(con);

  auto* kc = app.add_subcommand("kernel-check",
                                "verify kernel admissibility assumptions");
  kc->add_option("--out", out_path, "JSON path (default: stdout)");
  common.attach(kc);

  auto* sim = app.add_subcommand("simulate",
                                 "Monte Carlo sup-norm risk campaign");
  std::string density_arg = "gauss:1.0";
  std::size_t n_arg = 500;
  int reps_arg = 32;
  std::uint64_t seed_arg = 1;
  std::string out_json_arg, out_csv_arg;
  sim->add_option("--density", density_arg,
                  "gauss:s1,s2,... | corr:rho | density JSON file");
  sim->add_option("--n", n_arg, "sample size")->required();
  sim->add_option("--reps", reps_arg, "Monte Carlo replicates");
  sim->add_option("--seed", seed_arg, "RNG seed");
  sim->add_option("--out", out_json_arg, "summary JSON (default: stdout)");
  sim->add_option("--out-csv", out_csv_arg, "per-replicate CSV");
  common.attach(sim);

  auto* rates = app.add_subcommand("rates",
                                   "risk-vs-n sweep with a log-log slope fit");
  std::string n_list_arg = "250,500,1000,2000,4000";
  std::string beta_arg = "2";
  std::string p_arg = "inf";
  rates->add_option("--density", density_arg,
                    "gauss:s1,... | corr:rho | density JSON file");
  rates->add_option("--n-list", n_list_arg, "comma-separated sample sizes");
  rates->add_option("--reps", reps_arg, "replicates per sample size");
  rates->add_option("--seed", seed_arg, "RNG seed");
  rates->add_option("--beta", beta_arg, "per-axis smoothness exponents");
  rates->add_option("--p", p_arg, "per-axis norm indices ('inf' allowed)");
  rates->add_option("--out", out_json_arg, "summary JSON (default: stdout)");
  rates->add_option("--out-csv", out_csv_arg, "per-n CSV");
  common.attach(rates);

  auto* str = app.add_subcommand(
      "structure", "frequency table of the selected partitions");
  str->add_option("--density", density_arg,
                  "gauss:s1,... | corr:rho | density JSON file");
  str->add_option("--n", n_arg, "sample size")->required();
  str->add_option("--reps", reps_arg, "Monte Carlo replicates");
  str->add_option("--seed", seed_arg, "RNG seed");
  str->add_option("--out", out_json_arg, "summary JSON (default: stdout)");
  str->add_option("--out-csv", out_csv_arg, "per-partition CSV");
  common.attach(str);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sel->parsed()) return cmd_select(data_path, common, out_path);
    if (fit->parsed()) {
      return cmd_fit(data_path, h_arg, partition_arg, common, out_path,
                     csv_path);
    }
    if (con->parsed()) return cmd_constants(s_arg, d_arg, common, out_path);
    if (kc->parsed()) return cmd_kernel_check(common, out_path);
    if (sim->parsed()) {
      return cmd_simulate(density_arg, n_arg, reps_arg, seed_arg, common,
                          out_json_arg, out_csv_arg);
    }
    if (rates->parsed()) {
      return cmd_rates(density_arg, n_list_arg, reps_arg, seed_arg, beta_arg,
                       p_arg, common, out_json_arg, out_csv_arg);
    }
    if (str->parsed()) {
      return cmd_structure(density_arg, n_arg, reps_arg, seed_arg, common,
                           out_json_arg, out_csv_arg);
    }
  } catch (const Error& e) {
    const json err{{"error",
                    {{"kind", e.kind()},
                     {"message", e.what()},
                     {"exit_code", e.exit_code()}}}};
    std::cerr << err.dump(2) << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    const json err{{"error",
                    {{"kind", "internal"}, {"message", e.what()},
                     {"exit_code", 1}}}};
    std::cerr << err.dump(2) << "\n";
    return 1;
  }
  return 0;
}
