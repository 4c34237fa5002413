#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bagcn/model.hpp"
#include "bagcn/objective.hpp"

namespace bagcn {

struct AdamState {
  struct Slot {
    Mat m, v;
  };
  std::vector<Slot> slots;  // aligned with ParamSet::params
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const ParamSet& ps);
};

// Standard Adam with bias correction. Weight decay is L2-coupled (added to
// the gradient) and applies only to parameters flagged `decay`, i.e. weight
// matrices, never biases or norm affine parameters.
void adam_step(ParamSet& ps, const std::vector<Mat>& grads, AdamState& state, double lr,
               double weight_decay);

struct EpochStats {
  double total = 0.0;
  double ce = 0.0;
  double consistency = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainReport {
  ModelConfig config;
  std::string graph_name;
  std::vector<EpochStats> epochs;
  int best_val_epoch = 0;  // 1-based; earliest epoch wins ties; 0 if no val set
  double best_val_acc = 0.0;
  double test_acc = 0.0;  // measured with the best-validation parameters
  double wall_seconds = 0.0;
};

// Called once per epoch after the optimizer step and evaluation, with the
// updated parameters and that epoch's bookkeeping (1-based epoch).
using EpochObserver = std::function<void(int epoch, const ParamSet& ps, const EpochStats& stats)>;

// Full-batch training. Loss/accuracy bookkeeping per epoch, best-val
// snapshotting, test accuracy at the best-val parameters. `masks_override`
// substitutes the graph's stored split (used by the label-budget study).
// When `out_params` is non-null it receives the best-val parameters.
TrainReport train(const Graph& g, const ModelConfig& cfg,
                  const SplitMasks* masks_override = nullptr,
                  const EpochObserver& observer = nullptr, ParamSet* out_params = nullptr);

struct AblationRow {
  std::string name;
  ModelConfig config;
  std::vector<double> test_accs;  // one per seed
  double mean = 0.0;
  double stddev = 0.0;  // population
};

// The six architecture/objective variants, each trained `repeats` times with
// seeds base.seed .. base.seed+repeats-1. Rows in fixed order:
// ego-to-ego, loc-to-loc, w/o CL (lambda=0), w/o BA (biaffine none),
// w/o S (temperature 1), CL2 (pairwise consistency).
std::vector<AblationRow> run_ablation(const Graph& g, const ModelConfig& base, int repeats,
                                      int workers = 0);

struct BudgetRow {
  int per_class = 0;
  std::vector<double> bagcn_accs, gcn2_accs;
  double bagcn_mean = 0.0, bagcn_std = 0.0;
  double gcn2_mean = 0.0, gcn2_std = 0.0;
};

// Training-set-size study: for each budget, `repeats` fresh random splits
// (per_class labeled nodes per class) shared between the configured model
// and the 2-layer GCN baseline.
std::vector<BudgetRow> label_budget_study(const Graph& g, const std::vector<int>& budgets,
                                          int repeats, const ModelConfig& base, int val_size,
                                          int test_size, int workers = 0);

// Mean over `repeats` seeds of the test accuracy (convenience used by the
// acceptance experiments and the CLI's multi-seed mode).
struct MultiSeedResult {
  std::vector<double> test_accs;
  double mean = 0.0;
  double stddev = 0.0;
};
MultiSeedResult train_seeds(const Graph& g, const ModelConfig& base, int repeats,
                            const SplitMasks* masks_override = nullptr, int workers = 0);

// Worker cap for seed fan-out: min(BAGCN_THREADS if set, hardware threads).
int default_workers();

}  // namespace bagcn
