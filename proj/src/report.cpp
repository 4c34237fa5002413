#include "bagcn/report.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "bagcn/text.hpp"

namespace bagcn {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json config_json(const ModelConfig& cfg) {
  ordered_json j;
  j["kind"] = to_string(cfg.kind);
  j["hidden_dim"] = cfg.hidden_dim;
  j["fusion"] = to_string(cfg.fusion);
  j["biaffine_mode"] = to_string(cfg.biaffine_mode);
  j["norm_kind"] = to_string(cfg.norm_kind);
  j["dropout"] = cfg.dropout;
  j["lambda"] = cfg.lambda;
  j["temperature"] = cfg.temperature;
  j["sharpen"] = cfg.sharpen;
  j["consistency"] = to_string(cfg.consistency);
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["stopgrad_target"] = cfg.stopgrad_target;
  j["row_normalize"] = cfg.row_normalize;
  return j;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

ModelConfig config_from_json_text(const std::string& text, const std::string& where) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": invalid JSON: " + e.what());
  }
  try {
    ModelConfig cfg;
    cfg.kind = parse_model_kind(j.at("kind").get<std::string>());
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.fusion = parse_fusion(j.at("fusion").get<std::string>());
    cfg.biaffine_mode = parse_biaffine_mode(j.at("biaffine_mode").get<std::string>());
    cfg.norm_kind = parse_norm_kind(j.at("norm_kind").get<std::string>());
    cfg.dropout = j.at("dropout").get<double>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.temperature = j.at("temperature").get<double>();
    cfg.sharpen = j.at("sharpen").get<bool>();
    cfg.consistency = parse_consistency_mode(j.at("consistency").get<std::string>());
    cfg.lr = j.at("lr").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.stopgrad_target = j.at("stopgrad_target").get<bool>();
    cfg.row_normalize = j.at("row_normalize").get<bool>();
    cfg.validate();
    return cfg;
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": bad config: " + e.what());
  }
}

std::string train_report_to_json(const TrainReport& rep) {
  ordered_json j;
  j["config"] = config_json(rep.config);
  j["graph"] = rep.graph_name;
  j["seed"] = rep.config.seed;
  ordered_json epochs = ordered_json::array();
  for (const EpochStats& e : rep.epochs) {
    ordered_json row;
    row["total"] = e.total;
    row["ce"] = e.ce;
    row["consistency"] = e.consistency;
    row["train_acc"] = e.train_acc;
    row["val_acc"] = e.val_acc;
    epochs.push_back(std::move(row));
  }
  j["epochs"] = std::move(epochs);
  j["best_val_epoch"] = rep.best_val_epoch;
  j["best_val_acc"] = rep.best_val_acc;
  j["test_acc"] = rep.test_acc;
  j["wall_seconds"] = rep.wall_seconds;
  return j.dump(2) + "\n";
}

std::string ablation_table_tsv(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"variant", "runs", "mean", "std"});
  for (const AblationRow& r : rows) {
    cells.push_back({r.name, std::to_string(r.test_accs.size()), format_double(r.mean),
                     format_double(r.stddev)});
  }
  return render_tsv(cells);
}

std::string ablation_table_text(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"variant", "runs", "test acc"});
  for (const AblationRow& r : rows) {
    cells.push_back({r.name, std::to_string(r.test_accs.size()),
                     fixed4(r.mean) + " +/- " + fixed4(r.stddev)});
  }
  return render_aligned(cells);
}

std::string budget_table_tsv(const std::vector<BudgetRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"per_class", "runs", "bagcn_mean", "bagcn_std", "gcn2_mean", "gcn2_std"});
  for (const BudgetRow& r : rows) {
    cells.push_back({std::to_string(r.per_class), std::to_string(r.bagcn_accs.size()),
                     format_double(r.bagcn_mean), format_double(r.bagcn_std),
                     format_double(r.gcn2_mean), format_double(r.gcn2_std)});
  }
  return render_tsv(cells);
}

std::string budget_table_text(const std::vector<BudgetRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"per-class", "runs", "bagcn", "gcn2"});
  for (const BudgetRow& r : rows) {
    cells.push_back({std::to_string(r.per_class), std::to_string(r.bagcn_accs.size()),
                     fixed4(r.bagcn_mean) + " +/- " + fixed4(r.bagcn_std),
                     fixed4(r.gcn2_mean) + " +/- " + fixed4(r.gcn2_std)});
  }
  return render_aligned(cells);
}

std::string shortcut_sets_to_json(const std::vector<ShortcutSet>& sets, const Graph& g) {
  ordered_json arr = ordered_json::array();
  for (const ShortcutSet& s : sets) {
    ordered_json j;
    j["target"] = s.target;
    j["degree"] = g.adj[static_cast<std::size_t>(s.target)].size();
    j["k"] = s.k;
    ordered_json entries = ordered_json::array();
    for (const ShortcutEntry& e : s.entries) {
      ordered_json row;
      row["source"] = e.source;
      row["weight"] = e.weight;
      entries.push_back(std::move(row));
    }
    j["entries"] = std::move(entries);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace bagcn
