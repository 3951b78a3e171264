// shyvote: offline simulation, import/export and analysis, plus the HTTP server.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "shyvote/pipeline.hpp"
#include "shyvote/service/config.hpp"
#include "shyvote/service/http_api.hpp"
#include "shyvote/service/simulate.hpp"
#include "shyvote/service/study_service.hpp"

using namespace shyvote;
using namespace shyvote::service;

namespace {

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    std::stringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_argument, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_argument, "cannot write " + path);
  out << text;
}

struct AnalysisFlags {
  std::vector<std::string> schemes;
  int k_outliers = -1;
  std::uint64_t seed = 0;
  std::string grid;
  std::string layout = "grid";
  std::string variant = "simple";
  int restarts = -1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--scheme", schemes,
                    "weighting scheme: uniform, variance, revdev, manual, custom:w1,w2,..., optimized[:pearson]")
        ->take_all();
    cmd->add_option("--k-outliers", k_outliers, "respondents dropped in the excluding-outliers rows");
    cmd->add_option("--seed", seed, "seed for the optimizer's random restarts");
    cmd->add_option("--grid", grid, "optimizer weight grid, comma separated");
    cmd->add_option("--restarts", restarts, "optimizer random restarts");
    cmd->add_option("--layout", layout, "grid or six_row")->check(CLI::IsMember({"grid", "six_row"}));
    cmd->add_option("--variant", variant, "simple or improved")->check(CLI::IsMember({"simple", "improved"}));
  }

  AnalysisRequest request(int default_k) const {
    AnalysisRequest r;
    if (!schemes.empty()) r.schemes = schemes;
    r.k_outliers = k_outliers >= 0 ? k_outliers : default_k;
    r.layout = layout == "six_row" ? ReportLayout::six_row : ReportLayout::grid;
    r.variant = variant == "improved" ? ScoringVariant::improved : ScoringVariant::simple;
    if (!grid.empty()) r.search.grid = parse_number_list(grid);
    if (restarts >= 0) r.search.restarts = restarts;
    r.search.seed = seed;
    return r;
  }
};

ServiceOptions store_options(const ServerConfig& cfg, const std::string& data_dir) {
  ServiceOptions o;
  o.data_dir = data_dir.empty() ? cfg.data_dir : data_dir;
  o.sync_writes = cfg.sync_writes;
  return o;
}

std::string render_report(const StoredReport& r, const std::string& format) {
  if (format == "json") return report_json(r).dump(2) + "\n";
  std::string out = format_report_csv(r.report);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shyvote: IAT and questionnaire study tooling"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (SHYVOTE_* variables override it)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic study bundle");
  CohortConfig cohort_cfg;
  std::string sim_out, sim_study = "simulated", sim_trials;
  sim->add_option("--n", cohort_cfg.n, "respondents")->capture_default_str();
  sim->add_option("--seed", cohort_cfg.seed, "cohort seed")->capture_default_str();
  sim->add_option("--prevalence", cohort_cfg.sdr_prevalence, "share of shy respondents")
      ->capture_default_str();
  sim->add_option("--sdr-min", cohort_cfg.sdr_delta_min, "smallest answer shift")->capture_default_str();
  sim->add_option("--sdr-max", cohort_cfg.sdr_delta_max, "largest answer shift")->capture_default_str();
  sim->add_option("--effect", cohort_cfg.iat.effect_ms_per_theta, "latency effect at |theta| = 1 (ms)")
      ->capture_default_str();
  sim->add_option("--trial-counts", sim_trials, "five block sizes, comma separated");
  sim->add_option("--study", sim_study, "study id in the bundle")->capture_default_str();
  sim->add_option("--out", sim_out, "output file (default stdout)");
  std::string sim_stimuli, sim_bank;
  sim->add_option("--stimuli", sim_stimuli, "stimulus set file (default: built-in set)");
  sim->add_option("--bank", sim_bank, "question bank file (default: built-in bank)");

  // import
  auto* imp = app.add_subcommand("import", "load a bundle (jsonl) or questionnaire table (csv) into the data directory");
  std::string imp_in, imp_format = "jsonl", imp_study, imp_dir;
  imp->add_option("input", imp_in, "input file, - for stdin")->required();
  imp->add_option("--format", imp_format)->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  imp->add_option("--study", imp_study, "target study (required for csv; renames a jsonl bundle)");
  imp->add_option("--data-dir", imp_dir, "event log directory");

  // export
  auto* exp = app.add_subcommand("export", "write a study as a bundle or questionnaire table");
  std::string exp_study, exp_format = "jsonl", exp_out, exp_dir;
  exp->add_option("--study", exp_study)->required();
  exp->add_option("--format", exp_format)->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  exp->add_option("--out", exp_out, "output file (default stdout)");
  exp->add_option("--data-dir", exp_dir, "event log directory");

  // analyze
  auto* ana = app.add_subcommand("analyze", "score and correlate a study");
  std::string ana_in, ana_study, ana_dir, ana_out, ana_format = "csv";
  AnalysisFlags ana_flags;
  ana->add_option("input", ana_in, "bundle file to analyze offline (omit to use --study in the data directory)");
  ana->add_option("--study", ana_study, "stored study to analyze; the report is saved with it");
  ana->add_option("--data-dir", ana_dir, "event log directory");
  ana->add_option("--out", ana_out, "output file (default stdout)");
  ana->add_option("--format", ana_format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  ana_flags.add_to(ana);

  // report
  auto* rep = app.add_subcommand("report", "print the last stored report of a study");
  std::string rep_study, rep_dir, rep_out, rep_format = "csv";
  rep->add_option("--study", rep_study)->required();
  rep->add_option("--data-dir", rep_dir, "event log directory");
  rep->add_option("--out", rep_out, "output file (default stdout)");
  rep->add_option("--format", rep_format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  // serve
  auto* srv = app.add_subcommand("serve", "run the HTTP API");
  std::string srv_host, srv_dir;
  int srv_port = -1;
  srv->add_option("--host", srv_host);
  srv->add_option("--port", srv_port);
  srv->add_option("--data-dir", srv_dir, "event log directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load_config(config_path);

    if (sim->parsed()) {
      if (!sim_trials.empty()) cohort_cfg.trial_counts = shyvote::service::detail::parse_trial_counts(sim_trials);
      const auto stimuli = sim_stimuli.empty() ? demo_stimulus_set() : parse_stimulus_set(read_input(sim_stimuli));
      const auto bank = sim_bank.empty() ? default_question_bank() : parse_question_bank(read_input(sim_bank));
      const auto cohort = generate_cohort(cohort_cfg, stimuli, bank);
      StudyService svc(ServiceOptions{{}, false, stepping_clock(), cohort_cfg.seed, {}});
      const auto id = populate_study(svc, cohort, cohort_cfg, sim_study);
      write_output(sim_out, svc.export_study(id, ExportFormat::jsonl));
      std::cerr << "simulated " << cohort.respondents.size() << " respondents (" << cohort.shy_count()
                << " shy) into study " << id << "\n";
    } else if (imp->parsed()) {
      StudyService svc(store_options(cfg, imp_dir));
      const auto format = parse_export_format(imp_format);
      if (format == ExportFormat::csv && imp_study.empty()) {
        throw Error(ErrorKind::invalid_argument, "--study is required for csv imports");
      }
      const auto summary = svc.import_study(imp_study, format, read_input(imp_in));
      std::cerr << "imported " << summary.respondents << " respondents into " << summary.study_id
                << " (" << summary.events << " events)\n";
    } else if (exp->parsed()) {
      StudyService svc(store_options(cfg, exp_dir));
      write_output(exp_out, svc.export_study(exp_study, parse_export_format(exp_format)));
    } else if (ana->parsed()) {
      const auto request = ana_flags.request(cfg.k_outliers);
      StoredReport stored;
      if (!ana_in.empty()) {
        StudyService svc(ServiceOptions{{}, false, stepping_clock(), 0, {}});
        const auto summary = svc.import_study({}, ExportFormat::jsonl, read_input(ana_in));
        stored = svc.run_analysis(summary.study_id, request);
      } else if (!ana_study.empty()) {
        StudyService svc(store_options(cfg, ana_dir));
        stored = svc.run_analysis(ana_study, request);
      } else {
        throw Error(ErrorKind::invalid_argument, "give a bundle file or --study");
      }
      if (!stored.unscored.empty()) {
        std::cerr << stored.unscored.size() << " respondents could not be scored and were left out\n";
      }
      write_output(ana_out, render_report(stored, ana_format));
    } else if (rep->parsed()) {
      StudyService svc(store_options(cfg, rep_dir));
      const auto stored = svc.report(rep_study);
      if (!stored) throw Error(ErrorKind::not_found, "study " + rep_study + " has no report yet");
      write_output(rep_out, render_report(*stored, rep_format));
    } else if (srv->parsed()) {
      auto server_cfg = cfg;
      if (!srv_host.empty()) server_cfg.host = srv_host;
      if (srv_port >= 0) server_cfg.port = srv_port;
      StudyService svc(store_options(server_cfg, srv_dir));
      httplib::Server server;
      mount_routes(server, svc, server_cfg.study_defaults, server_cfg.k_outliers);
      static httplib::Server* running = &server;
      std::signal(SIGINT, [](int) { running->stop(); });
      std::signal(SIGTERM, [](int) { running->stop(); });
      std::cerr << "listening on " << server_cfg.host << ":" << server_cfg.port << "\n";
      if (!server.listen(server_cfg.host, server_cfg.port)) {
        throw Error(ErrorKind::invalid_config, "cannot listen on " + server_cfg.host + ":" +
                                                   std::to_string(server_cfg.port));
      }
    }
  } catch (const Error& e) {
    std::cerr << "shyvote: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
