// Command-line front end: dataset generation, training, transfer, evaluation,
// condition validation, and one-off solves over the raqos library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "raqos/config.hpp"
#include "raqos/eval.hpp"
#include "raqos/transfer.hpp"

using namespace raqos;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> users;
  std::optional<std::string> ratio;
  std::optional<int> n_antennas;
  std::optional<int> n_max;
};

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (const char* env = std::getenv("RAQOS_SEED"); env && !cfg.explicit_keys.count("seed"))
    cfg.seed = std::strtoull(env, nullptr, 10);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.users) cfg.users_total = *o.users;
  if (o.ratio) cfg.service_ratio = *o.ratio;
  if (o.n_antennas) cfg.n_antennas = *o.n_antennas;
  if (o.n_max) cfg.n_max = *o.n_max;
  return cfg;
}

GenSpec make_genspec(const RunConfig& cfg, int count, bool frozen) {
  GenSpec g;
  g.cfg = cfg.to_system_config();
  g.chan = cfg.to_channel_params();
  g.tmpl = cfg.to_template();
  g.ranges = cfg.to_ranges();
  g.count = count;
  g.seed = cfg.seed;
  g.label_draws = cfg.label_draws;
  g.bisect_rel_width = cfg.bisect_rel_width;
  g.frozen_gain = frozen;
  g.threads = cfg.threads;
  return g;
}

UserSpec user_from_cli_json(const json& j) {
  UserSpec u;
  u.service = service_from_name(j.at("svc").get<std::string>());
  u.alpha = j.at("alpha").get<double>();
  const json& t = j.at("traffic");
  switch (u.service) {
    case Service::tolerant:
      u.traffic = TolerantTraffic{t.at("rate_bps").get<double>()};
      break;
    case Service::sensitive:
      u.traffic = SensitiveTraffic{t.at("arrival_pps").get<double>(),
                                   t.at("inv_packet_bits").get<double>(),
                                   t.value("delay_s", 0.05), t.value("violation", 1e-2)};
      break;
    case Service::urllc:
      u.traffic =
          UrllcTraffic{t.at("packet_bits").get<double>(), t.value("error_bound", 5e-8)};
      break;
  }
  u.validate();
  return u;
}

void check_digest(const CascadedModel& m, const Dataset& ds, bool force) {
  auto it = m.meta.find("cfg_digest");
  if (it == m.meta.end()) return;
  if (it->second != ds.header.cfg_digest && !force)
    throw std::runtime_error(
        "model was trained under a different system configuration than this dataset (digest " +
        it->second + " vs " + ds.header.cfg_digest + "); pass --force to override");
}

std::vector<int> test_indices(const Dataset& ds) {
  auto [train, test] = ds.split_indices();
  return test.empty() ? train : test;
}

Predictor predictor_for(const CascadedModel& model, const Dataset& ds) {
  if (model.meta.count("model") && model.meta.at("model") == "fnn")
    return fnn_predictor(model.phi1, ds.header.tmpl, ds.header.cfg.n_max,
                         ds.header.cfg.p_max_w);
  return cascaded_predictor(model, ds.header.tmpl, ds.header.cfg.n_max,
                            ds.header.cfg.p_max_w);
}

int cmd_generate(const CommonOpts& common, int count, const std::string& out, bool frozen) {
  RunConfig cfg = resolve_config(common);
  Dataset ds = generate_dataset(make_genspec(cfg, count, frozen));
  save_dataset(out, ds);
  int feasible = 0;
  for (const auto& r : ds.records) feasible += r.feasible;
  std::printf("wrote %s: %d records (%d feasible), digest %s\n", out.c_str(), ds.header.count,
              feasible, ds.header.cfg_digest.c_str());
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& dataset_path, const std::string& out,
              const std::string& kind, std::optional<int> epochs, int seeds) {
  RunConfig cfg = resolve_config(common);
  Dataset ds = load_dataset(dataset_path);
  TrainConfig tc = cfg.to_train_config();
  if (epochs) tc.epochs = *epochs;
  if (kind != "cascaded" && kind != "fnn") throw std::runtime_error("unknown model kind: " + kind);

  CascadedModel model;
  if (seeds > 1) {
    SelectedModel sel = train_selected(
        ds, kind == "fnn", parse_hidden(kind == "fnn" ? cfg.fnn_hidden : cfg.phi1_hidden),
        parse_hidden(cfg.phi2_hidden), tc, seeds);
    std::printf("selected seed %llu with validation eta %.4f\n",
                static_cast<unsigned long long>(sel.seed), sel.val_eta);
    model = std::move(sel.model);
  } else {
    std::vector<TrainingSample> train;
    for (int i : ds.split_indices().first) train.push_back(ds.records[i].sample);
    if (train.empty()) throw std::runtime_error("dataset has no feasible training records");
    if (kind == "cascaded") {
      model = train_cascaded(train, ds.header.tmpl, parse_hidden(cfg.phi1_hidden),
                             parse_hidden(cfg.phi2_hidden), tc);
    } else {
      model.phi1 = train_fnn(train, ds.header.tmpl, parse_hidden(cfg.fnn_hidden), tc);
    }
    model.meta["train_records"] = std::to_string(train.size());
  }
  model.meta["cfg_digest"] = ds.header.cfg_digest;
  model.meta["model"] = kind;
  save_model_file(out, model);

  double eta = accuracy_eta(predictor_for(model, ds), ds, test_indices(ds));
  std::printf("wrote %s (kind=%s), held-out eta = %.4f\n", out.c_str(), kind.c_str(), eta);
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& report, const std::string& out, bool force, bool use_labels) {
  Dataset ds = load_dataset(dataset_path);
  CascadedModel model;
  Predictor pred;
  if (use_labels) {
    pred = labels_predictor();
  } else {
    model = load_model_file(model_path);
    check_digest(model, ds, force);
    pred = predictor_for(model, ds);
  }
  std::vector<int> idx = test_indices(ds);

  if (report == "eta") {
    double eta = accuracy_eta(pred, ds, idx);
    EvalConfig ec;
    ec.margin_axis_w = {0.0};
    auto curves = qos_violation_curve(pred, ds, idx, ec);
    std::printf("eta = %.6f over %zu records\n", eta, idx.size());
    for (const auto& c : curves)
      std::printf("violations at zero margin, %s: %.4f\n", service_name(c.service),
                  c.violation[0]);
    return 0;
  }
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  if (report == "fig4") {
    EvalConfig ec;
    ec.margin_axis_w = EvalConfig::default_grid(ds.header.cfg.p_max_w);
    auto curves = qos_violation_curve(pred, ds, idx, ec);
    os << "# fig4: probability without QoS guarantee vs reserved transmit power\n";
    os << "service\tusers\tmargin_w\tviolation\n";
    for (const auto& c : curves)
      for (std::size_t m = 0; m < c.margin_axis_w.size(); ++m)
        os << service_name(c.service) << '\t' << c.users << '\t' << c.margin_axis_w[m] << '\t'
           << c.violation[m] << '\n';
  } else if (report == "fig5") {
    std::vector<int> ks;
    for (int k = 0; k <= ds.header.tmpl.width(); ++k) ks.push_back(k);
    auto rows = power_vs_users(pred, ds, idx, ks);
    os << "# fig5: total power vs user count\n";
    os << "k\toptimal_w\tmodel_w\n";
    for (const auto& r : rows) os << r.k << '\t' << r.optimal_w << '\t' << r.model_w << '\n';
  } else {
    throw std::runtime_error("unknown report: " + report);
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_validate_conditions(const CommonOpts& common, const std::vector<int>& nts,
                            int packet_bytes, double distance_m, const std::string& out,
                            std::optional<int> draws) {
  RunConfig cfg = resolve_config(common);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << "# fig3: URLLC required power and marginal saving vs bandwidth\n";
  os << "nt\tn\tpower_w\tdelta_p_w\tstderr_w\tcond1\tcond2\n";
  int total_viol = 0;
  for (int nt : nts) {
    RunConfig rc = cfg;
    rc.n_antennas = nt;
    SystemConfig sys = rc.to_system_config();
    SolverConfig sol = rc.to_solver_config();
    if (draws) sol.oracle_draws = *draws;
    ChannelParams chan = rc.to_channel_params();
    chan.shadowing_sigma_db = 0.0;
    RngStream rng(rc.seed);
    UserSpec u;
    u.service = Service::urllc;
    u.alpha = large_scale_gain(distance_m, chan, rng);
    u.traffic = UrllcTraffic{8.0 * packet_bytes, rc.urllc_error_bound};
    int n_hi = std::min(urllc_closed_form_minimizer(u, sys, sys.n_max), sys.n_max - 1);
    ConditionReport rep = validate_conditions(u, 1, n_hi, sys, sol, GainModel::gamma(nt), rng);
    for (const auto& row : rep.rows)
      os << nt << '\t' << row.n << '\t' << row.power_w << '\t' << row.delta_p_w << '\t'
         << row.stderr_w << '\t' << (row.cond1_ok ? 1 : 0) << '\t' << (row.cond2_ok ? 1 : 0)
         << '\n';
    total_viol += rep.violations_cond1 + rep.violations_cond2;
    std::printf("nt=%d: %zu rows, %d cond-1 violations, %d cond-2 violations\n", nt,
                rep.rows.size(), rep.violations_cond1, rep.violations_cond2);
  }
  std::printf("wrote %s (%d total violations)\n", out.c_str(), total_viol);
  return total_viol == 0 ? 0 : 3;
}

int cmd_solve(const CommonOpts& common, const std::string& scenario_path, int random_users,
              bool frozen, bool run_oracle) {
  RunConfig cfg = resolve_config(common);
  Scenario scn;
  scn.cfg = cfg.to_system_config();
  if (!scenario_path.empty()) {
    std::ifstream is(scenario_path);
    if (!is) throw std::runtime_error("cannot read " + scenario_path);
    json j = json::parse(is);
    for (const auto& ju : j) scn.users.push_back(user_from_cli_json(ju));
  } else {
    RunConfig rc = cfg;
    rc.users_total = random_users;
    DatasetRecord rec = generate_record(make_genspec(rc, 1, frozen), 0);
    scn.users = rec.users;
  }

  std::optional<std::vector<double>> frozen_gains;
  if (frozen)
    frozen_gains =
        std::vector<double>(scn.users.size(), static_cast<double>(scn.cfg.n_antennas));
  PowerCache cache(scn, frozen ? 1 : cfg.label_draws, cfg.seed, frozen_gains,
                   cfg.bisect_rel_width);
  AllocationResult res = greedy_min_total(scn, cache);

  json out;
  out["feasible"] = res.feasible;
  out["total_power_w"] = res.total_power_w;
  out["sum_transmit_w"] = res.sum_transmit_w;
  out["n"] = res.alloc.n;
  out["p_w"] = res.alloc.p;
  if (!res.limit.empty()) out["limit"] = res.limit;
  if (run_oracle) {
    AllocationResult oracle = exhaustive_oracle(scn, Objective::total, cache);
    out["oracle_total_power_w"] = oracle.total_power_w;
    out["oracle_n"] = oracle.alloc.n;
    out["matches_oracle"] = std::abs(res.total_power_w - oracle.total_power_w) < 1e-6;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_transfer(const CommonOpts& common, const std::string& source_path,
                 const std::string& mode, const std::string& dataset_path,
                 const std::string& out, const std::string& trace_path,
                 std::optional<int> epochs, std::optional<int> frozen_layers, bool baseline,
                 const std::vector<std::string>& stack_sources) {
  RunConfig cfg = resolve_config(common);
  Dataset ds = load_dataset(dataset_path);
  TransferPlan plan;
  plan.tune = cfg.to_train_config();
  if (epochs) plan.tune.epochs = *epochs;
  if (frozen_layers) plan.phi1_frozen_layers = *frozen_layers;

  Metric metric = [&ds](const CascadedModel& m) {
    return accuracy_eta(
        cascaded_predictor(m, ds.header.tmpl, ds.header.cfg.n_max, ds.header.cfg.p_max_w), ds,
        test_indices(ds));
  };
  std::vector<TrainingSample> train;
  for (int i : ds.split_indices().first) train.push_back(ds.records[i].sample);

  FineTuneResult result;
  if (mode == "channel") {
    CascadedModel source = load_model_file(source_path);
    result = fine_tune(source, plan, train, ds.header.tmpl, metric);
  } else if (mode.rfind("retarget:", 0) == 0) {
    CascadedModel source = load_model_file(source_path);
    plan.fresh_phi2 = true;
    result = retarget_service(source, service_from_name(mode.substr(9)), plan, train,
                              ds.header.tmpl, metric);
  } else if (mode == "stack") {
    std::map<Service, CascadedModel> sources;
    for (const auto& spec : stack_sources) {
      auto pos = spec.find('=');
      if (pos == std::string::npos)
        throw std::runtime_error("--stack-source needs service=model.txt");
      sources[service_from_name(spec.substr(0, pos))] = load_model_file(spec.substr(pos + 1));
    }
    result = stack_multi_service(sources, plan, train, ds.header.tmpl, metric);
  } else {
    throw std::runtime_error("unknown transfer mode: " + mode);
  }
  result.model.meta["cfg_digest"] = ds.header.cfg_digest;
  save_model_file(out, result.model);

  std::vector<double> base_trace;
  if (baseline) {
    CascadedModel fresh = init_cascaded(train, ds.header.tmpl, parse_hidden(cfg.phi1_hidden),
                                        parse_hidden(cfg.phi2_hidden), plan.tune);
    TransferPlan base_plan = plan;
    base_plan.phi1_frozen_layers = 0;
    base_plan.fresh_phi2 = false;
    base_trace = fine_tune(fresh, base_plan, train, ds.header.tmpl, metric).eta_trace;
  }

  if (!trace_path.empty()) {
    std::ofstream os(trace_path);
    if (!os) throw std::runtime_error("cannot write " + trace_path);
    os << "# transfer accuracy trace; epoch 0 is the accuracy before tuning\n";
    os << (baseline ? "epoch\teta_transfer\teta_random\n" : "epoch\teta_transfer\n");
    for (std::size_t e = 0; e < result.eta_trace.size(); ++e) {
      os << e << '\t' << result.eta_trace[e];
      if (baseline && e < base_trace.size()) os << '\t' << base_trace[e];
      os << '\n';
    }
    std::printf("wrote %s\n", trace_path.c_str());
  }
  std::printf("wrote %s, final eta = %.4f\n", out.c_str(),
              result.eta_trace.empty() ? 0.0 : result.eta_trace.back());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "QoS-constrained bandwidth/power allocation: optimizer, datasets, and neural policy "
      "approximation"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  CommonOpts common;
  app.add_option("--config", common.config_path, "key = value configuration document");
  std::uint64_t seed_opt = 0;
  auto* seed_flag = app.add_option("--seed", seed_opt, "override the run seed");
  int threads_opt = 0;
  auto* threads_flag = app.add_option("--threads", threads_opt, "worker threads (0 = auto)");
  int users_opt = 0;
  auto* users_flag = app.add_option("--users", users_opt, "total user slots");
  std::string ratio_opt;
  auto* ratio_flag = app.add_option("--ratio", ratio_opt, "service ratio, e.g. 1:1:1");
  int nt_opt = 0;
  auto* nt_flag = app.add_option("--nt", nt_opt, "antenna count");
  int nmax_opt = 0;
  auto* nmax_flag = app.add_option("--nmax", nmax_opt, "subcarrier budget");

  auto* generate = app.add_subcommand("generate", "label scenarios with the optimizer");
  int gen_count = 100;
  std::string gen_out = "dataset.jsonl";
  bool gen_frozen = false;
  generate->add_option("--count", gen_count, "records to generate");
  generate->add_option("--out", gen_out, "output JSONL path")->required();
  generate->add_flag("--frozen-gain", gen_frozen, "deterministic channel at the mean gain");

  auto* train = app.add_subcommand("train", "train a policy approximation");
  std::string train_ds, train_out = "model.txt", train_kind = "cascaded";
  int train_epochs = -1;
  train->add_option("--dataset", train_ds, "labeled dataset")->required();
  train->add_option("--out", train_out, "model output path");
  train->add_option("--model", train_kind, "cascaded | fnn");
  train->add_option("--epochs", train_epochs, "training epochs");
  int train_seeds = 1;
  train->add_option("--seeds", train_seeds, "candidate seeds for restart selection");

  auto* transfer = app.add_subcommand("transfer", "fine-tune a trained model");
  std::string tr_source, tr_mode = "channel", tr_ds, tr_out = "model_tuned.txt", tr_trace;
  int tr_epochs = -1, tr_frozen = -2;
  bool tr_baseline = false;
  std::vector<std::string> tr_stack;
  transfer->add_option("--source", tr_source, "source model path");
  transfer->add_option("--mode", tr_mode, "channel | retarget:<service> | stack");
  transfer->add_option("--dataset", tr_ds, "target-domain dataset")->required();
  transfer->add_option("--out", tr_out, "tuned model output path");
  transfer->add_option("--trace", tr_trace, "per-epoch accuracy TSV (fig6/7/8 data)");
  transfer->add_option("--epochs", tr_epochs, "fine-tuning epochs");
  transfer->add_option("--frozen-layers", tr_frozen, "frozen phi_I layers (-1 = default)");
  transfer->add_flag("--baseline", tr_baseline, "also trace a random-init baseline");
  transfer->add_option("--stack-source", tr_stack, "service=model.txt (repeatable)");

  auto* eval = app.add_subcommand("eval", "evaluate a model against a labeled dataset");
  std::string ev_model, ev_ds, ev_report = "eta", ev_out = "report.tsv";
  bool ev_force = false, ev_labels = false;
  eval->add_option("--model", ev_model, "model path");
  eval->add_option("--dataset", ev_ds, "labeled dataset")->required();
  eval->add_option("--report", ev_report, "eta | fig4 | fig5");
  eval->add_option("--out", ev_out, "TSV output path for fig reports");
  eval->add_flag("--force", ev_force, "ignore configuration digest mismatches");
  eval->add_flag("--labels", ev_labels, "use the optimal labels as the predictor");

  auto* valid = app.add_subcommand("validate-conditions",
                                   "check the greedy optimality conditions for URLLC");
  std::vector<int> vc_nts{4, 8, 16};
  int vc_bytes = 20, vc_draws = -1;
  double vc_distance = 200.0;
  std::string vc_out = "fig3.tsv";
  valid->add_option("--nt-list", vc_nts, "antenna counts to sweep");
  valid->add_option("--packet-bytes", vc_bytes, "URLLC packet size");
  valid->add_option("--distance", vc_distance, "user distance in meters");
  valid->add_option("--draws", vc_draws, "Monte Carlo depth");
  valid->add_option("--out", vc_out, "TSV output path");

  auto* solve = app.add_subcommand("solve", "allocate one scenario");
  std::string sv_scn;
  int sv_random = 3;
  bool sv_frozen = false, sv_oracle = false;
  solve->add_option("--scenario", sv_scn, "JSON array of users");
  solve->add_option("--random", sv_random, "draw this many random users instead");
  solve->add_flag("--frozen-gain", sv_frozen, "deterministic channel at the mean gain");
  solve->add_flag("--oracle", sv_oracle, "also run the exhaustive oracle");

  CLI11_PARSE(app, argc, argv);

  if (*seed_flag) common.seed = seed_opt;
  if (*threads_flag) common.threads = threads_opt;
  if (*users_flag) common.users = users_opt;
  if (*ratio_flag) common.ratio = ratio_opt;
  if (*nt_flag) common.n_antennas = nt_opt;
  if (*nmax_flag) common.n_max = nmax_opt;

  try {
    if (*generate) return cmd_generate(common, gen_count, gen_out, gen_frozen);
    if (*train)
      return cmd_train(common, train_ds, train_out, train_kind,
                       train_epochs >= 0 ? std::optional<int>(train_epochs) : std::nullopt,
                       train_seeds);
    if (*transfer)
      return cmd_transfer(common, tr_source, tr_mode, tr_ds, tr_out, tr_trace,
                          tr_epochs >= 0 ? std::optional<int>(tr_epochs) : std::nullopt,
                          tr_frozen >= -1 ? std::optional<int>(tr_frozen) : std::nullopt,
                          tr_baseline, tr_stack);
    if (*eval) return cmd_eval(ev_model, ev_ds, ev_report, ev_out, ev_force, ev_labels);
    if (*valid)
      return cmd_validate_conditions(common, vc_nts, vc_bytes, vc_distance, vc_out,
                                     vc_draws > 0 ? std::optional<int>(vc_draws) : std::nullopt);
    if (*solve) return cmd_solve(common, sv_scn, sv_random, sv_frozen, sv_oracle);
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
