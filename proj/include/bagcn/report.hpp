#pragma once

#include <string>
#include <vector>

#include "bagcn/analysis.hpp"
#include "bagcn/trainer.hpp"

namespace bagcn {

// JSON artifacts (2-space indent, trailing LF). Doubles serialize in
// shortest round-trip form, so parse(dump(x)) == x.
std::string config_to_json(const ModelConfig& cfg);

// Strict parse: every field must be present with the right type. `where`
// prefixes error messages (a path, usually).
ModelConfig config_from_json_text(const std::string& text, const std::string& where);

std::string train_report_to_json(const TrainReport& rep);

// Result tables: TSV for machines (canonical floats), aligned text for eyes
// (four decimals, mean +/- std).
std::string ablation_table_tsv(const std::vector<AblationRow>& rows);
std::string ablation_table_text(const std::vector<AblationRow>& rows);
std::string budget_table_tsv(const std::vector<BudgetRow>& rows);
std::string budget_table_text(const std::vector<BudgetRow>& rows);

// Shortcut dump with the target's graph degree alongside (degree statistics
// ride along with shortcut counts; no correlation is asserted).
std::string shortcut_sets_to_json(const std::vector<ShortcutSet>& sets, const Graph& g);

}  // namespace bagcn
