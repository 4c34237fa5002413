// bagcn: train/evaluate biaffine graph models, run ablation and label-budget
// studies, inspect learned shortcuts, and generate synthetic bundles.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bagcn/analysis.hpp"
#include "bagcn/baseline.hpp"
#include "bagcn/checkpoint.hpp"
#include "bagcn/report.hpp"
#include "bagcn/text.hpp"
#include "bagcn/trainer.hpp"

namespace fs = std::filesystem;
using bagcn::Mat;
using ordered_json = nlohmann::ordered_json;

namespace {

// pinned gradcheck contract: six variants on a fixed small fixture
constexpr double kGradTol = 1e-5;
constexpr double kGradStep = 1e-6;
constexpr int kGradN = 12, kGradF = 7, kGradD = 5, kGradC = 3;

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << content;
  f.flush();
  if (!f) throw std::runtime_error(path + ": write failed");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Created only after every input has loaded and validated, so a bad flag or
// missing bundle never leaves a half-written directory behind.
void ensure_out_dir(const std::string& out, bool force) {
  const fs::path p(out);
  if (fs::exists(p)) {
    if (!fs::is_directory(p)) throw std::runtime_error(out + ": exists and is not a directory");
    if (!force) {
      throw std::runtime_error(out + ": output directory exists (pass --force to overwrite)");
    }
    return;
  }
  fs::create_directories(p);
}

bagcn::Graph load_data(const std::string& path, bool row_normalize) {
  bagcn::Graph g = bagcn::load_bundle(path);
  if (row_normalize) bagcn::l1_normalize_rows(g.features);
  return g;
}

// Model hyperparameter flags shared by train/ablate/budget. Values resolve
// in three layers: built-in defaults, then --config JSON, then explicit
// flags (flags win).
struct ModelFlags {
  std::string model, fusion, biaffine, norm, consistency;
  int hidden = 0, epochs = 0;
  double dropout = 0, lambda = 0, temperature = 0, lr = 0, weight_decay = 0;
  std::uint64_t seed = 0;
  bool row_normalize = false;
  std::string config_path;

  CLI::Option *o_model = nullptr, *o_fusion = nullptr, *o_biaffine = nullptr, *o_norm = nullptr,
              *o_consistency = nullptr, *o_hidden = nullptr, *o_epochs = nullptr,
              *o_dropout = nullptr, *o_lambda = nullptr, *o_temperature = nullptr,
              *o_lr = nullptr, *o_weight_decay = nullptr, *o_seed = nullptr,
              *o_row_normalize = nullptr;

  void attach(CLI::App* cmd) {
    o_model = cmd->add_option("--model", model, "model kind: bagcn|gcn2|mlp2");
    o_fusion = cmd->add_option("--fusion", fusion, "fusion: add|mul");
    o_biaffine =
        cmd->add_option("--biaffine", biaffine, "biaffine mode: ego_local|ego_ego|local_local|none");
    o_norm = cmd->add_option("--norm", norm, "post-fusion normalizer: batch|row_l2");
    o_consistency =
        cmd->add_option("--consistency", consistency, "consistency loss: average|pairwise");
    o_hidden = cmd->add_option("--hidden", hidden, "hidden width d");
    o_epochs = cmd->add_option("--epochs", epochs, "training epochs");
    o_dropout = cmd->add_option("--dropout", dropout, "dropout probability");
    o_lambda = cmd->add_option("--lambda", lambda, "consistency loss weight");
    o_temperature = cmd->add_option("--temperature", temperature, "sharpening temperature");
    o_lr = cmd->add_option("--lr", lr, "Adam learning rate");
    o_weight_decay = cmd->add_option("--weight-decay", weight_decay, "L2 weight decay");
    o_seed = cmd->add_option("--seed", seed, "base random seed");
    o_row_normalize =
        cmd->add_flag("--row-normalize", row_normalize, "L1-normalize feature rows at load");
    cmd->add_option("--config", config_path, "JSON config file (explicit flags win)")
        ->check(CLI::ExistingFile);
  }

  bagcn::ModelConfig resolve() const {
    bagcn::ModelConfig cfg;
    if (!config_path.empty()) apply_overlay(cfg);
    if (o_model->count()) cfg.kind = bagcn::parse_model_kind(model);
    if (o_fusion->count()) cfg.fusion = bagcn::parse_fusion(fusion);
    if (o_biaffine->count()) cfg.biaffine_mode = bagcn::parse_biaffine_mode(biaffine);
    if (o_norm->count()) cfg.norm_kind = bagcn::parse_norm_kind(norm);
    if (o_consistency->count()) cfg.consistency = bagcn::parse_consistency_mode(consistency);
    if (o_hidden->count()) cfg.hidden_dim = hidden;
    if (o_epochs->count()) cfg.epochs = epochs;
    if (o_dropout->count()) cfg.dropout = dropout;
    if (o_lambda->count()) cfg.lambda = lambda;
    if (o_temperature->count()) cfg.temperature = temperature;
    if (o_lr->count()) cfg.lr = lr;
    if (o_weight_decay->count()) cfg.weight_decay = weight_decay;
    if (o_seed->count()) cfg.seed = seed;
    if (o_row_normalize->count()) cfg.row_normalize = row_normalize;
    cfg.validate();
    return cfg;
  }

 private:
  // partial overlay: only keys present in the file apply
  void apply_overlay(bagcn::ModelConfig& cfg) const {
    ordered_json j;
    try {
      j = ordered_json::parse(read_text(config_path));
    } catch (const std::exception& e) {
      throw std::runtime_error(config_path + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error(config_path + ": config must be a JSON object");
    for (const auto& [key, val] : j.items()) {
      if (key == "kind") cfg.kind = bagcn::parse_model_kind(val.get<std::string>());
      else if (key == "hidden_dim") cfg.hidden_dim = val.get<int>();
      else if (key == "fusion") cfg.fusion = bagcn::parse_fusion(val.get<std::string>());
      else if (key == "biaffine_mode")
        cfg.biaffine_mode = bagcn::parse_biaffine_mode(val.get<std::string>());
      else if (key == "norm_kind") cfg.norm_kind = bagcn::parse_norm_kind(val.get<std::string>());
      else if (key == "dropout") cfg.dropout = val.get<double>();
      else if (key == "lambda") cfg.lambda = val.get<double>();
      else if (key == "temperature") cfg.temperature = val.get<double>();
      else if (key == "sharpen") cfg.sharpen = val.get<bool>();
      else if (key == "consistency")
        cfg.consistency = bagcn::parse_consistency_mode(val.get<std::string>());
      else if (key == "lr") cfg.lr = val.get<double>();
      else if (key == "weight_decay") cfg.weight_decay = val.get<double>();
      else if (key == "epochs") cfg.epochs = val.get<int>();
      else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
      else if (key == "stopgrad_target") cfg.stopgrad_target = val.get<bool>();
      else if (key == "row_normalize") cfg.row_normalize = val.get<bool>();
      else throw std::runtime_error(config_path + ": unknown config key '" + key + "'");
    }
  }
};

ordered_json manifest_base(const std::string& command, const std::string& data,
                           const std::string& out, const std::vector<std::uint64_t>& seeds) {
  ordered_json m;
  m["command"] = command;
  m["data"] = data.empty() ? ordered_json(nullptr) : ordered_json(data);
  m["out"] = out;
  m["seeds"] = seeds;
  return m;
}

void write_manifest(const std::string& out, const ordered_json& m) {
  write_text((fs::path(out) / "manifest.json").string(), m.dump(2) + "\n");
}

ordered_json config_as_json(const bagcn::ModelConfig& cfg) {
  return ordered_json::parse(bagcn::config_to_json(cfg));
}

void print_progress(int epoch, int total_epochs, const bagcn::EpochStats& es) {
  const int stride = std::max(1, total_epochs / 10);
  if (epoch != 1 && epoch != total_epochs && epoch % stride != 0) return;
  std::printf("epoch %d/%d total %.6f ce %.6f consistency %.6f train_acc %.4f val_acc %.4f\n",
              epoch, total_epochs, es.total, es.ce, es.consistency, es.train_acc, es.val_acc);
}

// --- subcommand runners -----------------------------------------------------

struct TrainArgs {
  std::string data, out;
  bool force = false, save_attention = false;
  ModelFlags flags;
};

int run_train(const TrainArgs& a) {
  const bagcn::ModelConfig cfg = a.flags.resolve();
  if (a.save_attention &&
      (cfg.kind != bagcn::ModelKind::bagcn || cfg.biaffine_mode == bagcn::BiaffineMode::none)) {
    throw std::runtime_error("--save-attention requires a biaffine model");
  }
  const bagcn::Graph g = load_data(a.data, cfg.row_normalize);

  ensure_out_dir(a.out, a.force);
  ordered_json m = manifest_base("train", a.data, a.out, {cfg.seed});
  m["flags"] = config_as_json(cfg);
  m["flags"]["save_attention"] = a.save_attention;
  write_manifest(a.out, m);

  bagcn::ParamSet best;
  const bagcn::TrainReport rep = bagcn::train(
      g, cfg, nullptr,
      [&](int epoch, const bagcn::ParamSet&, const bagcn::EpochStats& es) {
        print_progress(epoch, cfg.epochs, es);
      },
      &best);

  write_text((fs::path(a.out) / "report.json").string(), bagcn::train_report_to_json(rep));
  bagcn::save_checkpoint((fs::path(a.out) / "checkpoint.bin").string(), cfg, best);
  if (a.save_attention) {
    bagcn::ParamSet ps = best;
    const auto a_hat = bagcn::normalize_adjacency(g);
    const bagcn::EvalOutputs eo = bagcn::eval_forward(g, a_hat, ps, cfg);
    bagcn::save_matrix((fs::path(a.out) / "s1.bin").string(), eo.s1);
    bagcn::save_matrix((fs::path(a.out) / "s2.bin").string(), eo.s2);
  }

  std::printf("best_val_epoch %d\n", rep.best_val_epoch);
  std::printf("best_val_acc %s\n", bagcn::format_double(rep.best_val_acc).c_str());
  std::printf("wall_seconds %.2f\n", rep.wall_seconds);
  std::printf("test_acc %s\n", bagcn::format_double(rep.test_acc).c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, split = "test", out;
  bool force = false;
};

// checkpoint may be the .bin file or a train output directory; in the latter
// case the recorded manifest supplies the data path unless --data overrides
std::string resolve_checkpoint(const std::string& arg, std::string* data_path) {
  fs::path p(arg);
  if (fs::is_directory(p)) {
    const fs::path mpath = p / "manifest.json";
    if (data_path->empty() && fs::exists(mpath)) {
      const ordered_json m = ordered_json::parse(read_text(mpath.string()));
      if (m.contains("data") && m["data"].is_string()) *data_path = m["data"].get<std::string>();
    }
    p /= "checkpoint.bin";
  }
  if (!fs::exists(p)) throw std::runtime_error(p.string() + ": checkpoint not found");
  return p.string();
}

int run_eval(const EvalArgs& a) {
  std::string data = a.data;
  const std::string ck_path = resolve_checkpoint(a.checkpoint, &data);
  if (data.empty()) {
    throw std::runtime_error("no data path: pass --data or a checkpoint directory whose "
                             "manifest records one");
  }
  bagcn::Checkpoint ck = bagcn::load_checkpoint(ck_path);
  const bagcn::Graph g = load_data(data, ck.config.row_normalize);
  const auto a_hat = bagcn::normalize_adjacency(g);
  const std::vector<int>* mask = nullptr;
  if (a.split == "train") mask = &g.masks.train;
  else if (a.split == "val") mask = &g.masks.val;
  else if (a.split == "test") mask = &g.masks.test;
  else throw std::runtime_error("--split must be train, val, or test");
  if (mask->empty()) throw std::runtime_error("split '" + a.split + "' is empty in this bundle");

  const double acc = bagcn::evaluate(g, a_hat, ck.params, ck.config, *mask);
  std::printf("split %s nodes %zu accuracy %s\n", a.split.c_str(), mask->size(),
              bagcn::format_double(acc).c_str());

  if (!a.out.empty()) {
    ensure_out_dir(a.out, a.force);
    ordered_json m = manifest_base("eval", data, a.out, {ck.config.seed});
    m["flags"] = {{"checkpoint", a.checkpoint}, {"split", a.split}};
    write_manifest(a.out, m);
    ordered_json r;
    r["split"] = a.split;
    r["nodes"] = mask->size();
    r["accuracy"] = acc;
    write_text((fs::path(a.out) / "eval.json").string(), r.dump(2) + "\n");
  }
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string fault;  // "inject" corrupts the backward pass on purpose
  std::string out;
  bool force = false;
};

int run_gradcheck(const GradcheckArgs& a) {
  const bool inject = a.fault == "inject";
  bool all_ok = true;
  ordered_json results = ordered_json::array();
  for (const bagcn::Fusion fusion : {bagcn::Fusion::add, bagcn::Fusion::mul}) {
    for (const bagcn::BiaffineMode mode : {bagcn::BiaffineMode::ego_local,
                                           bagcn::BiaffineMode::ego_ego,
                                           bagcn::BiaffineMode::local_local}) {
      bagcn::ModelConfig cfg;
      cfg.hidden_dim = kGradD;
      cfg.fusion = fusion;
      cfg.biaffine_mode = mode;
      cfg.seed = a.seed;
      const double err =
          bagcn::model_grad_check(cfg, kGradN, kGradF, kGradC, a.seed, kGradStep, inject);
      const bool ok = err < kGradTol;
      all_ok = all_ok && ok;
      std::printf("fusion=%s biaffine=%s max_rel_err=%.3e %s\n", to_string(fusion),
                  to_string(mode), err, ok ? "[ok]" : "[FAIL]");
      ordered_json row;
      row["fusion"] = to_string(fusion);
      row["biaffine"] = to_string(mode);
      row["max_rel_err"] = err;
      row["ok"] = ok;
      results.push_back(std::move(row));
    }
  }
  if (!a.out.empty()) {
    ensure_out_dir(a.out, a.force);
    ordered_json m = manifest_base("gradcheck", "", a.out, {a.seed});
    m["flags"] = {{"seed", a.seed}, {"fault", a.fault}, {"tolerance", kGradTol},
                  {"step", kGradStep}};
    write_manifest(a.out, m);
    write_text((fs::path(a.out) / "gradcheck.json").string(), results.dump(2) + "\n");
  }
  return all_ok ? 0 : 2;
}

struct AblateArgs {
  std::string data, out;
  int repeats = 10, workers = 0;
  bool force = false;
  ModelFlags flags;
};

int run_ablate(const AblateArgs& a) {
  const bagcn::ModelConfig cfg = a.flags.resolve();
  if (cfg.kind != bagcn::ModelKind::bagcn) {
    throw std::runtime_error("ablate varies the full model; --model must be bagcn");
  }
  const bagcn::Graph g = load_data(a.data, cfg.row_normalize);
  const auto rows = bagcn::run_ablation(g, cfg, a.repeats, a.workers);

  ensure_out_dir(a.out, a.force);
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < a.repeats; ++r) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(r));
  ordered_json m = manifest_base("ablate", a.data, a.out, seeds);
  m["flags"] = config_as_json(cfg);
  m["flags"]["repeats"] = a.repeats;
  write_manifest(a.out, m);
  write_text((fs::path(a.out) / "ablation.tsv").string(), bagcn::ablation_table_tsv(rows));
  const std::string table = bagcn::ablation_table_text(rows);
  write_text((fs::path(a.out) / "ablation.txt").string(), table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

struct BudgetArgs {
  std::string data, out;
  std::vector<int> budgets;
  int repeats = 10, val_size = 500, test_size = 1000, workers = 0;
  bool force = false;
  ModelFlags flags;
};

int run_budget(const BudgetArgs& a) {
  const bagcn::ModelConfig cfg = a.flags.resolve();
  if (cfg.kind != bagcn::ModelKind::bagcn) {
    throw std::runtime_error("budget compares the full model against gcn2; --model must be bagcn");
  }
  const bagcn::Graph g = load_data(a.data, cfg.row_normalize);
  const auto rows = bagcn::label_budget_study(g, a.budgets, a.repeats, cfg, a.val_size,
                                              a.test_size, a.workers);

  ensure_out_dir(a.out, a.force);
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < a.repeats; ++r) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(r));
  ordered_json m = manifest_base("budget", a.data, a.out, seeds);
  m["flags"] = config_as_json(cfg);
  m["flags"]["budgets"] = a.budgets;
  m["flags"]["repeats"] = a.repeats;
  m["flags"]["val_size"] = a.val_size;
  m["flags"]["test_size"] = a.test_size;
  write_manifest(a.out, m);
  write_text((fs::path(a.out) / "budget.tsv").string(), bagcn::budget_table_tsv(rows));
  const std::string table = bagcn::budget_table_text(rows);
  write_text((fs::path(a.out) / "budget.txt").string(), table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

struct AnalyzeArgs {
  std::string checkpoint, data, out;
  std::vector<int> nodes;
  int topk = 5, exclude_hops = 3, hops = 3;
  double eps = -1.0;  // <0 means the 1/(10n) default
  bool force = false;
};

int run_analyze(const AnalyzeArgs& a) {
  std::string data = a.data;
  const std::string ck_path = resolve_checkpoint(a.checkpoint, &data);
  if (data.empty()) {
    throw std::runtime_error("no data path: pass --data or a checkpoint directory whose "
                             "manifest records one");
  }
  bagcn::Checkpoint ck = bagcn::load_checkpoint(ck_path);
  if (ck.config.kind != bagcn::ModelKind::bagcn ||
      ck.config.biaffine_mode == bagcn::BiaffineMode::none) {
    throw std::runtime_error("analyze needs a model with biaffine attention (this checkpoint "
                             "has none)");
  }
  const bagcn::Graph g = load_data(data, ck.config.row_normalize);
  const auto a_hat = bagcn::normalize_adjacency(g);
  const bagcn::EvalOutputs eo = bagcn::eval_forward(g, a_hat, ck.params, ck.config);

  std::vector<bagcn::ShortcutSet> sets;
  for (int node : a.nodes) {
    sets.push_back(bagcn::topk_shortcuts(eo.s1, node, a.topk, a.exclude_hops, g));
  }
  const double eps = a.eps >= 0.0 ? a.eps : bagcn::default_support_eps(g.n);
  const bagcn::ReceptiveFieldStats rf = bagcn::receptive_field_stats(eo.s1, g, eps);
  const auto [homo_before, homo_after] = bagcn::shortcut_homophily_delta(g, sets);

  ensure_out_dir(a.out, a.force);
  ordered_json m = manifest_base("analyze", data, a.out, {ck.config.seed});
  m["flags"] = {{"checkpoint", a.checkpoint}, {"nodes", a.nodes},       {"topk", a.topk},
                {"exclude_hops", a.exclude_hops}, {"hops", a.hops},     {"eps", eps}};
  write_manifest(a.out, m);

  write_text((fs::path(a.out) / "shortcuts.json").string(),
             bagcn::shortcut_sets_to_json(sets, g));
  for (const bagcn::ShortcutSet& s : sets) {
    write_text((fs::path(a.out) / ("ego_" + std::to_string(s.target) + ".dot")).string(),
               bagcn::export_ego_graph(g, s.target, a.hops, s));
  }
  std::vector<std::vector<std::string>> rf_rows;
  rf_rows.push_back({"node", "degree", "m", "m_prime"});
  for (int i = 0; i < g.n; ++i) {
    rf_rows.push_back({std::to_string(i), std::to_string(g.adj[i].size()),
                       std::to_string(rf.m[i]), std::to_string(rf.m_prime[i])});
  }
  write_text((fs::path(a.out) / "receptive.tsv").string(), bagcn::render_tsv(rf_rows));
  ordered_json summary;
  summary["eps"] = rf.eps;
  summary["mean_m"] = rf.mean_m;
  summary["mean_m_prime"] = rf.mean_m_prime;
  summary["homophily_before"] = homo_before;
  summary["homophily_after"] = homo_after;
  write_text((fs::path(a.out) / "analysis.json").string(), summary.dump(2) + "\n");

  std::printf("eps %s mean_m %.3f mean_m_prime %.3f\n", bagcn::format_double(rf.eps).c_str(),
              rf.mean_m, rf.mean_m_prime);
  std::printf("homophily before %.4f after %.4f delta %.4f\n", homo_before, homo_after,
              homo_after - homo_before);
  return 0;
}

struct GensynthArgs {
  std::string preset = "barbell", out;
  bagcn::SyntheticSpec spec;
  bool force = false;
};

int run_gensynth(const GensynthArgs& a) {
  const bagcn::Graph g = bagcn::gen_synthetic_clusters(a.spec);
  ensure_out_dir(a.out, a.force);
  bagcn::save_bundle(g, a.out);
  ordered_json m = manifest_base("gensynth", "", a.out, {a.spec.seed});
  m["flags"] = {{"preset", a.preset},
                {"clusters", a.spec.clusters},
                {"nodes_per_cluster", a.spec.nodes_per_cluster},
                {"classes", a.spec.classes},
                {"feature_dim", a.spec.feature_dim},
                {"intra_edge_prob", a.spec.intra_edge_prob},
                {"feature_noise", a.spec.feature_noise}};
  write_manifest(a.out, m);
  std::printf("wrote bundle '%s': n=%d classes=%d features=%d edges=%zu\n", g.name.c_str(), g.n,
              g.num_classes, g.feature_dim(), g.edges.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biaffine graph networks: training, baselines, ablations, shortcut analysis"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* cmd_train = app.add_subcommand("train", "train one model on a bundle");
  cmd_train->add_option("--data", train_args.data, "graph bundle directory")->required();
  cmd_train->add_option("--out", train_args.out, "output directory")->required();
  cmd_train->add_flag("--force", train_args.force, "overwrite an existing output directory");
  cmd_train->add_flag("--save-attention", train_args.save_attention,
                      "dump s1.bin/s2.bin at the best-val parameters");
  train_args.flags.attach(cmd_train);

  EvalArgs eval_args;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  cmd_eval->add_option("--checkpoint", eval_args.checkpoint,
                       "checkpoint file or train output directory")
      ->required();
  cmd_eval->add_option("--data", eval_args.data, "graph bundle (defaults to the train manifest)");
  cmd_eval->add_option("--split", eval_args.split, "train|val|test (default test)");
  cmd_eval->add_option("--out", eval_args.out, "optional output directory for eval.json");
  cmd_eval->add_flag("--force", eval_args.force, "overwrite an existing output directory");

  GradcheckArgs grad_args;
  auto* cmd_grad = app.add_subcommand(
      "gradcheck", "finite-difference check of all six architecture variants");
  cmd_grad->add_option("--seed", grad_args.seed, "fixture seed");
  cmd_grad->add_option("--fault", grad_args.fault, "'inject' corrupts backward to prove detection")
      ->check(CLI::IsMember({"inject"}));
  cmd_grad->add_option("--out", grad_args.out, "optional output directory for gradcheck.json");
  cmd_grad->add_flag("--force", grad_args.force, "overwrite an existing output directory");

  AblateArgs ablate_args;
  auto* cmd_ablate = app.add_subcommand("ablate", "run the six-variant ablation battery");
  cmd_ablate->add_option("--data", ablate_args.data, "graph bundle directory")->required();
  cmd_ablate->add_option("--out", ablate_args.out, "output directory")->required();
  cmd_ablate->add_option("--repeats", ablate_args.repeats, "seeds per variant (default 10)");
  cmd_ablate->add_option("--workers", ablate_args.workers, "parallel runs (0 = auto)");
  cmd_ablate->add_flag("--force", ablate_args.force, "overwrite an existing output directory");
  ablate_args.flags.attach(cmd_ablate);

  BudgetArgs budget_args;
  auto* cmd_budget = app.add_subcommand("budget", "training-set-size study vs the gcn2 baseline");
  cmd_budget->add_option("--data", budget_args.data, "graph bundle directory")->required();
  cmd_budget->add_option("--out", budget_args.out, "output directory")->required();
  cmd_budget->add_option("--budgets", budget_args.budgets, "labeled nodes per class, e.g. 1,5,20")
      ->required()
      ->delimiter(',');
  cmd_budget->add_option("--repeats", budget_args.repeats, "splits per budget (default 10)");
  cmd_budget->add_option("--val-size", budget_args.val_size, "validation nodes per split");
  cmd_budget->add_option("--test-size", budget_args.test_size, "test nodes per split");
  cmd_budget->add_option("--workers", budget_args.workers, "parallel runs (0 = auto)");
  cmd_budget->add_flag("--force", budget_args.force, "overwrite an existing output directory");
  budget_args.flags.attach(cmd_budget);

  AnalyzeArgs analyze_args;
  auto* cmd_analyze =
      app.add_subcommand("analyze", "extract shortcuts and receptive-field statistics");
  cmd_analyze
      ->add_option("--checkpoint", analyze_args.checkpoint,
                   "checkpoint file or train output directory")
      ->required();
  cmd_analyze->add_option("--data", analyze_args.data,
                          "graph bundle (defaults to the train manifest)");
  cmd_analyze->add_option("--out", analyze_args.out, "output directory")->required();
  cmd_analyze->add_option("--node", analyze_args.nodes, "target node (repeatable)")
      ->required()
      ->delimiter(',');
  cmd_analyze->add_option("--topk", analyze_args.topk, "shortcuts per node (default 5)");
  cmd_analyze->add_option("--exclude-hops", analyze_args.exclude_hops,
                          "exclude sources within this BFS radius (default 3)");
  cmd_analyze->add_option("--hops", analyze_args.hops, "ego-graph radius for DOT (default 3)");
  cmd_analyze->add_option("--eps", analyze_args.eps,
                          "effective-support threshold (default 1/(10n))");
  cmd_analyze->add_flag("--force", analyze_args.force, "overwrite an existing output directory");

  GensynthArgs gensynth_args;
  auto* cmd_gensynth = app.add_subcommand("gensynth", "generate a synthetic cluster bundle");
  cmd_gensynth->add_option("--preset", gensynth_args.preset, "preset: barbell")
      ->check(CLI::IsMember({"barbell"}));
  cmd_gensynth->add_option("--out", gensynth_args.out, "bundle output directory")->required();
  cmd_gensynth->add_option("--clusters", gensynth_args.spec.clusters, "cluster count");
  cmd_gensynth->add_option("--per-cluster", gensynth_args.spec.nodes_per_cluster,
                           "nodes per cluster");
  cmd_gensynth->add_option("--classes", gensynth_args.spec.classes, "class count");
  cmd_gensynth->add_option("--feature-dim", gensynth_args.spec.feature_dim, "feature width");
  cmd_gensynth->add_option("--intra-p", gensynth_args.spec.intra_edge_prob,
                           "intra-cluster edge probability");
  cmd_gensynth->add_option("--noise", gensynth_args.spec.feature_noise,
                           "feature noise standard deviation");
  cmd_gensynth->add_option("--seed", gensynth_args.spec.seed, "generator seed");
  cmd_gensynth->add_flag("--force", gensynth_args.force, "overwrite an existing output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the usage text / error
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_train) return run_train(train_args);
    if (*cmd_eval) return run_eval(eval_args);
    if (*cmd_grad) return run_gradcheck(grad_args);
    if (*cmd_ablate) return run_ablate(ablate_args);
    if (*cmd_budget) return run_budget(budget_args);
    if (*cmd_analyze) return run_analyze(analyze_args);
    if (*cmd_gensynth) return run_gensynth(gensynth_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
