#include "bagcn/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "bagcn/text.hpp"

namespace bagcn {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// population standard deviation (the run set is the whole population here)
double pop_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Runs fn(0..num_tasks-1) on up to `workers` threads. Tasks must be
// independent; the first exception wins and is rethrown after join.
void run_parallel(int num_tasks, int workers, const std::function<void(int)>& fn) {
  const int cap = default_workers();  // BAGCN_THREADS caps even explicit requests
  workers = workers <= 0 ? cap : std::min(workers, cap);
  if (workers > num_tasks) workers = num_tasks;
  if (workers <= 1) {
    for (int i = 0; i < num_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= num_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

int default_workers() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("BAGCN_THREADS")) {
    const long cap = parse_long(env, "BAGCN_THREADS");
    if (cap < 1) throw std::invalid_argument("BAGCN_THREADS must be >= 1");
    if (cap < hw) hw = static_cast<int>(cap);
  }
  return hw;
}

AdamState::AdamState(const ParamSet& ps) {
  slots.reserve(ps.params.size());
  for (const Param& p : ps.params) {
    Slot s;
    s.m = Mat::Zero(p.value.rows(), p.value.cols());
    s.v = Mat::Zero(p.value.rows(), p.value.cols());
    slots.push_back(std::move(s));
  }
}

void adam_step(ParamSet& ps, const std::vector<Mat>& grads, AdamState& state, double lr,
               double weight_decay) {
  if (grads.size() != ps.params.size() || state.slots.size() != ps.params.size()) {
    throw std::invalid_argument("adam_step: gradient/slot count does not match parameter count");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < ps.params.size(); ++i) {
    Param& p = ps.params[i];
    const Mat& g = grads[i];
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + p.name);
    }
    AdamState::Slot& s = state.slots[i];
    if (weight_decay != 0.0 && p.decay) {
      Mat gd = g + weight_decay * p.value;
      s.m = state.beta1 * s.m + (1.0 - state.beta1) * gd;
      s.v = state.beta2 * s.v + (1.0 - state.beta2) * gd.cwiseProduct(gd);
    } else {
      s.m = state.beta1 * s.m + (1.0 - state.beta1) * g;
      s.v = state.beta2 * s.v + (1.0 - state.beta2) * g.cwiseProduct(g);
    }
    p.value.array() -= lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + state.eps);
  }
}

TrainReport train(const Graph& g, const ModelConfig& cfg, const SplitMasks* masks_override,
                  const EpochObserver& observer, ParamSet* out_params) {
  cfg.validate();
  const SplitMasks& masks = masks_override ? *masks_override : g.masks;
  if (masks.train.empty()) throw std::invalid_argument("train: training mask is empty");
  const auto t0 = std::chrono::steady_clock::now();

  const SparseMatrix a_hat = normalize_adjacency(g);
  ParamSet ps = init_params(g, cfg);
  AdamState adam(ps);
  DropoutStreams streams(cfg.seed);

  TrainReport rep;
  rep.config = cfg;
  rep.graph_name = g.name;
  rep.epochs.reserve(static_cast<std::size_t>(cfg.epochs));

  ParamSet best = ps;
  double best_val = -1.0;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // anything that dies mid-epoch (divergence detected by the tape, a
    // throwing observer) gets the epoch number and the last recorded losses
    try {
      Tape tape;
      const BoundParams bound = bind_params(tape, ps);
      ForwardOptions opt;
      opt.training = true;
      opt.track_running = true;
      const ForwardResult fwd = model_forward(tape, g, a_hat, bound, ps, cfg, opt, &streams);
      const LossNodes loss = build_total_loss(tape, fwd, g, masks.train, cfg);
      tape.backward(loss.total);

      std::vector<Mat> grads(ps.params.size());
      for (std::size_t i = 0; i < ps.params.size(); ++i) {
        grads[i] = tape.grad(bound.node_ids[i]);
      }
      adam_step(ps, grads, adam, cfg.lr, cfg.weight_decay);

      EpochStats es;
      const LossBreakdown bd = read_breakdown(tape, loss, cfg.lambda);
      es.total = bd.total;
      es.ce = bd.ce;
      es.consistency = bd.consistency;
      const EvalOutputs eo = eval_forward(g, a_hat, ps, cfg);
      es.train_acc = accuracy(eo.probs, g.labels, masks.train);
      es.val_acc = masks.val.empty() ? 0.0 : accuracy(eo.probs, g.labels, masks.val);
      rep.epochs.push_back(es);
      if (observer) observer(epoch, ps, es);

      // strict improvement only, so ties resolve to the earliest epoch
      if (!masks.val.empty() && es.val_acc > best_val) {
        best_val = es.val_acc;
        best = ps;
        best_epoch = epoch;
      }
    } catch (const std::exception& e) {
      std::string msg = "epoch " + std::to_string(epoch) + ": " + e.what();
      if (!rep.epochs.empty()) {
        const EpochStats& last = rep.epochs.back();
        msg += " (last finite losses: total=" + format_double(last.total) +
               " ce=" + format_double(last.ce) +
               " consistency=" + format_double(last.consistency) + ")";
      }
      throw std::runtime_error(msg);
    }
  }

  if (masks.val.empty()) {
    best = ps;  // no model selection signal: keep the final parameters
    best_epoch = 0;
    best_val = 0.0;
  }
  rep.best_val_epoch = best_epoch;
  rep.best_val_acc = best_val;
  rep.test_acc = masks.test.empty() ? 0.0 : evaluate(g, a_hat, best, cfg, masks.test);
  if (out_params) *out_params = std::move(best);

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

MultiSeedResult train_seeds(const Graph& g, const ModelConfig& base, int repeats,
                            const SplitMasks* masks_override, int workers) {
  if (repeats < 1) throw std::invalid_argument("train_seeds: repeats must be >= 1");
  MultiSeedResult res;
  res.test_accs.assign(static_cast<std::size_t>(repeats), 0.0);
  run_parallel(repeats, workers, [&](int r) {
    ModelConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(r);
    res.test_accs[static_cast<std::size_t>(r)] = train(g, cfg, masks_override).test_acc;
  });
  res.mean = mean_of(res.test_accs);
  res.stddev = pop_std(res.test_accs);
  return res;
}

std::vector<AblationRow> run_ablation(const Graph& g, const ModelConfig& base, int repeats,
                                      int workers) {
  if (repeats < 1) throw std::invalid_argument("run_ablation: repeats must be >= 1");
  std::vector<AblationRow> rows;
  auto add = [&](const char* name, auto tweak) {
    AblationRow r;
    r.name = name;
    r.config = base;
    tweak(r.config);
    r.config.validate();
    r.test_accs.assign(static_cast<std::size_t>(repeats), 0.0);
    rows.push_back(std::move(r));
  };
  add("Ego to Ego", [](ModelConfig& c) { c.biaffine_mode = BiaffineMode::ego_ego; });
  add("Loc. to Loc.", [](ModelConfig& c) { c.biaffine_mode = BiaffineMode::local_local; });
  add("w/o CL", [](ModelConfig& c) { c.lambda = 0.0; });
  add("w/o BA", [](ModelConfig& c) { c.biaffine_mode = BiaffineMode::none; });
  add("w/o S", [](ModelConfig& c) { c.temperature = 1.0; });
  add("CL2", [](ModelConfig& c) { c.consistency = ConsistencyMode::pairwise; });

  const int num_rows = static_cast<int>(rows.size());
  run_parallel(num_rows * repeats, workers, [&](int task) {
    const int row = task / repeats;
    const int r = task % repeats;
    ModelConfig cfg = rows[static_cast<std::size_t>(row)].config;
    cfg.seed = base.seed + static_cast<std::uint64_t>(r);
    rows[static_cast<std::size_t>(row)].test_accs[static_cast<std::size_t>(r)] =
        train(g, cfg).test_acc;
  });
  for (AblationRow& r : rows) {
    r.mean = mean_of(r.test_accs);
    r.stddev = pop_std(r.test_accs);
  }
  return rows;
}

std::vector<BudgetRow> label_budget_study(const Graph& g, const std::vector<int>& budgets,
                                          int repeats, const ModelConfig& base, int val_size,
                                          int test_size, int workers) {
  if (budgets.empty()) throw std::invalid_argument("label_budget_study: no budgets given");
  if (repeats < 1) throw std::invalid_argument("label_budget_study: repeats must be >= 1");
  std::vector<BudgetRow> rows(budgets.size());
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    rows[i].per_class = budgets[i];
    rows[i].bagcn_accs.assign(static_cast<std::size_t>(repeats), 0.0);
    rows[i].gcn2_accs.assign(static_cast<std::size_t>(repeats), 0.0);
  }
  // one task per (budget, repeat); both models inside share the split
  run_parallel(static_cast<int>(budgets.size()) * repeats, workers, [&](int task) {
    const int bi = task / repeats;
    const int r = task % repeats;
    const std::uint64_t seed = base.seed + static_cast<std::uint64_t>(r);
    const SplitMasks masks =
        make_split(g, budgets[static_cast<std::size_t>(bi)], val_size, test_size, seed);
    ModelConfig mcfg = base;
    mcfg.seed = seed;
    ModelConfig gcfg = base;
    gcfg.kind = ModelKind::gcn2;
    gcfg.seed = seed;
    rows[static_cast<std::size_t>(bi)].bagcn_accs[static_cast<std::size_t>(r)] =
        train(g, mcfg, &masks).test_acc;
    rows[static_cast<std::size_t>(bi)].gcn2_accs[static_cast<std::size_t>(r)] =
        train(g, gcfg, &masks).test_acc;
  });
  for (BudgetRow& r : rows) {
    r.bagcn_mean = mean_of(r.bagcn_accs);
    r.bagcn_std = pop_std(r.bagcn_accs);
    r.gcn2_mean = mean_of(r.gcn2_accs);
    r.gcn2_std = pop_std(r.gcn2_accs);
  }
  return rows;
}

}  // namespace bagcn
