#pragma once

// Per-timestamp topology suggestion: beam search over unitary actions, a
// clipped policy-gradient single-step agent (SSA) and a tree-search agent
// acting over the hours of a day (AZA).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gridplan/actions.hpp"
#include "gridplan/environment.hpp"
#include "gridplan/error.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/nn.hpp"
#include "gridplan/scenario.hpp"
#include "gridplan/targets.hpp"

namespace gridplan {

struct PolicySuggestion {
  TopologyConfig topology;
  std::vector<UnitaryAction> trace;
};

struct TrainingConfig {
  double gamma = 1.0;
  double learning_rate = 1e-3;
  double clip = 0.2;
  int batch_episodes = 128;
  int iterations = 300;
  std::uint64_t seed = 1;

  int epochs = 4;
  int minibatch = 64;
  double entropy_coef = 0.03;
  double value_coef = 0.5;
  int hidden = 64;
  int eval_interval = 10;
  int divergence_patience = 5;
  int monitored_lines = 32;
  int nearest = 64;
  TargetGenerationParams targets{};
  // Start hours where the reference topology is N-1 insecure are drawn this
  // many times more often than secure ones.
  double insecure_start_weight = 8.0;

  // Tree-search agent.
  int simulations = 16;
  int candidates = 16;
  double c_puct = 1.5;
  int days_per_iteration = 4;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("discount must lie in [0, 1]");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(clip > 0.0)) throw ValidationError("clip parameter must be positive");
    if (batch_episodes < 1 || iterations < 0 || epochs < 1 || minibatch < 1 || hidden < 1 || eval_interval < 1 ||
        divergence_patience < 1 || monitored_lines < 1 || nearest < 1 || simulations < 0 || candidates < 2 ||
        days_per_iteration < 1)
      throw ValidationError("training counts must be positive");
    if (entropy_coef < 0.0 || value_coef < 0.0 || c_puct < 0.0) throw ValidationError("negative loss coefficient");
    if (!(insecure_start_weight > 0.0)) throw ValidationError("start weight must be positive");
  }
};

enum class PolicyKind { Ssa, Aza };

inline std::string to_string(PolicyKind k) { return k == PolicyKind::Ssa ? "ssa" : "aza"; }

/// A frozen agent. SSA: `actor` maps state features to action logits.
/// AZA: `actor` scores (state, candidate topology) pairs. `critic` is the
/// value estimate of either.
struct Policy {
  PolicyKind kind = PolicyKind::Ssa;
  std::shared_ptr<const ActionSpace> space;
  FeatureConfig features;
  Mlp actor;
  Mlp critic;
  int candidates = 16;
  RewardWeights weights = RewardWeights::ssa();
};

struct CurvePoint {
  int iteration = 0;
  int episodes = 0;
  double eval_reward = 0.0;       // greedy policy, mean over the evaluation set
  double reference_reward = 0.0;  // doing nothing, same set
  double batch_reward = 0.0;      // mean sampled-episode reward since the last point
};

struct TrainingResult {
  Policy policy;
  std::vector<CurvePoint> curve;
};

namespace detail {

inline std::vector<double> observe(const Policy& p, ScreeningCache& cache, const EnvState& s, const DayScenario& day) {
  const auto n1 = cache.get(s.topo)->line_worst_loading(s.topo, day.at(s.hour));
  return state_features(*p.space, p.features, s, n1);
}

inline std::optional<UnitaryAction> to_action(const ActionSpace& space, int a) {
  if (a == space.terminate_index()) return std::nullopt;
  return UnitaryAction{space.action(a)};
}

inline int masked_argmax(const Eigen::VectorXd& logits, const std::vector<int>& valid) {
  int best = valid.front();
  for (int a : valid)
    if (logits(a) > logits(best)) best = a;
  return best;
}

/// Softmax over the valid entries; invalid entries get probability 0.
inline std::vector<double> masked_softmax(const Eigen::VectorXd& logits, const std::vector<int>& valid) {
  std::vector<double> p(logits.size(), 0.0);
  double hi = -std::numeric_limits<double>::infinity();
  for (int a : valid) hi = std::max(hi, logits(a));
  double z = 0.0;
  for (int a : valid) z += (p[a] = std::exp(logits(a) - hi));
  for (int a : valid) p[a] /= z;
  return p;
}

inline std::vector<const DayScenario*> pointers(const std::vector<DayScenario>& days) {
  std::vector<const DayScenario*> out;
  for (const auto& d : days) out.push_back(&d);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Beam search

/// Beam search over at most three unitary actions from the reference
/// topology, scoring every node by the reward of terminating there. Ties keep
/// the shallower node and the lower action index.
inline PolicySuggestion greedy_suggest(const ActionSpace& space, ScreeningCache& cache, const DayScenario& day,
                                       int hour, int beam, RewardWeights weights = RewardWeights::ssa()) {
  if (beam < 1) throw ValidationError("beam width must be at least 1");
  const Environment env(cache, weights);
  struct Node {
    EnvState state;
    double score;
    TopologyConfig outcome;
  };
  auto score = [&](EnvState s) {
    const auto out = env.terminal_outcome(s, day);
    return Node{std::move(s), out.reward, out.topo};
  };
  Node best = score(env.reset(day, hour));
  std::vector<Node> frontier{best};
  std::vector<TopologyConfig> seen{best.state.topo};
  for (int depth = 1; depth <= kMaxDepth && !frontier.empty(); ++depth) {
    std::vector<Node> children;
    for (const auto& node : frontier) {
      for (int a : space.valid_actions(node.state.topo, node.state.actions_taken)) {
        if (a == space.terminate_index()) continue;
        EnvState next = env.step(node.state, UnitaryAction{space.action(a)}, day);
        if (std::find(seen.begin(), seen.end(), next.topo) != seen.end()) continue;
        seen.push_back(next.topo);
        children.push_back(score(std::move(next)));
      }
    }
    std::stable_sort(children.begin(), children.end(), [](const Node& a, const Node& b) { return a.score > b.score; });
    if (static_cast<int>(children.size()) > beam) children.resize(beam);
    for (const auto& c : children)
      if (c.score > best.score) best = c;
    frontier = std::move(children);
  }
  return {best.outcome, best.state.trace};
}

// ---------------------------------------------------------------------------
// Single-step agent

namespace detail {

/// Greedy rollout of an SSA policy from the reference at `hour`.
inline EnvState ssa_greedy_episode(const Policy& p, ScreeningCache& cache, const Environment& env,
                                   const DayScenario& day, int hour) {
  EnvState s = env.reset(day, hour);
  while (!s.terminal) {
    const auto valid = p.space->valid_actions(s.topo, s.actions_taken);
    const auto logits = p.actor.forward_one(observe(p, cache, s, day));
    s = env.step(s, to_action(*p.space, masked_argmax(logits, valid)), day);
  }
  return s;
}

struct EvalSet {
  std::vector<std::pair<const DayScenario*, int>> states;
};

inline double mean_greedy_reward(const Policy& p, ScreeningCache& cache, const Environment& env, const EvalSet& set) {
  double total = 0.0;
  for (auto [day, hour] : set.states)
    total += env.terminal_outcome(ssa_greedy_episode(p, cache, env, *day, hour), *day).reward;
  return set.states.empty() ? 0.0 : total / static_cast<double>(set.states.size());
}

inline double mean_reference_reward(const Environment& env, const EvalSet& set) {
  double total = 0.0;
  for (auto [day, hour] : set.states) total += env.terminal_outcome(env.reset(*day, hour), *day).reward;
  return set.states.empty() ? 0.0 : total / static_cast<double>(set.states.size());
}

/// Divergence: once the greedy policy has matched the do-nothing reference,
/// `patience` consecutive evaluations below it.
class DivergenceDetector {
 public:
  explicit DivergenceDetector(int patience) : patience_(patience) {}
  bool update(double eval, double reference) {
    const bool below = eval < reference - 1e-9;
    if (!below) armed_ = true;
    run_ = armed_ && below ? run_ + 1 : 0;
    return run_ >= patience_;
  }

 private:
  int patience_;
  bool armed_ = false;
  int run_ = 0;
};

inline std::string curve_diagnostics(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "evaluations (iteration: greedy / reference):";
  for (const auto& c : curve) os << ' ' << c.iteration << ": " << c.eval_reward << " / " << c.reference_reward << ';';
  return os.str();
}

}  // namespace detail

inline TrainingResult train_ssa_policy(ScreeningCache& cache, const std::vector<const DayScenario*>& train_days,
                                       const TrainingConfig& cfg, std::shared_ptr<const ActionSpace> space = nullptr,
                                       const std::function<void(const CurvePoint&)>& log = {}) {
  cfg.validate();
  if (train_days.empty()) throw ValidationError("training set is empty");
  const Grid& grid = cache.grid();
  if (!space) space = std::make_shared<const ActionSpace>(grid, cfg.targets, cfg.nearest);
  std::mt19937_64 rng(cfg.seed);

  Policy p;
  p.kind = PolicyKind::Ssa;
  p.space = space;
  p.weights = RewardWeights::ssa();
  p.features = select_monitored_lines(cache, train_days, cfg.monitored_lines);
  const int n_in = feature_size(*space, p.features);
  const int n_act = space->size();
  p.actor = Mlp({n_in, cfg.hidden, cfg.hidden, n_act}, rng, 0.01);
  p.critic = Mlp({n_in, cfg.hidden, cfg.hidden, 1}, rng, 1.0);
  Adam actor_opt(p.actor, cfg.learning_rate), critic_opt(p.critic, cfg.learning_rate);
  const Environment env(cache, p.weights);
  constexpr double kValueScale = 10.0;

  detail::EvalSet eval;
  for (const auto* d : train_days)
    for (int h = 1; h <= kHours; ++h) eval.states.emplace_back(d, h);
  const double reference = detail::mean_reference_reward(env, eval);

  TrainingResult result;
  detail::DivergenceDetector divergence(cfg.divergence_patience);
  double batch_total = 0.0;
  int batch_count = 0, episodes = 0;
  auto evaluate = [&](int iteration) {
    CurvePoint c{iteration, episodes, detail::mean_greedy_reward(p, cache, env, eval), reference,
                 batch_count ? batch_total / batch_count : 0.0};
    batch_total = 0.0;
    batch_count = 0;
    result.curve.push_back(c);
    if (log) log(c);
    if (divergence.update(c.eval_reward, c.reference_reward))
      throw TrainingDivergedError("policy reward collapsed below the do-nothing reference; " +
                                  detail::curve_diagnostics(result.curve));
  };
  evaluate(0);

  struct Sample {
    std::vector<double> x;
    std::vector<int> valid;
    int action;
    double logp;
    double target;
    double advantage;
  };
  std::vector<double> start_weight;
  for (auto [day, hour] : eval.states)
    start_weight.push_back(env.reset(*day, hour).max_rho >= 1.0 ? cfg.insecure_start_weight : 1.0);
  std::discrete_distribution<std::size_t> pick_start(start_weight.begin(), start_weight.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<Sample> batch;
    std::vector<double> values;
    for (int e = 0; e < cfg.batch_episodes; ++e) {
      const auto [day_ptr, hour] = eval.states[pick_start(rng)];
      const DayScenario& day = *day_ptr;
      EnvState s = env.reset(day, hour);
      // Doing nothing from the same state is an action-independent baseline.
      const double baseline = env.terminal_outcome(s, day).reward;
      const std::size_t first = batch.size();
      while (!s.terminal) {
        Sample smp;
        smp.x = detail::observe(p, cache, s, day);
        smp.valid = space->valid_actions(s.topo, s.actions_taken);
        const auto probs = detail::masked_softmax(p.actor.forward_one(smp.x), smp.valid);
        double u = unit(rng);
        smp.action = smp.valid.back();
        for (int a : smp.valid)
          if ((u -= probs[a]) < 0.0) {
            smp.action = a;
            break;
          }
        smp.logp = std::log(probs[smp.action]);
        values.push_back(p.critic.forward_one(smp.x)(0));
        s = env.step(s, detail::to_action(*space, smp.action), day);
        batch.push_back(std::move(smp));
      }
      const double reward = env.terminal_outcome(s, day).reward;
      batch_total += reward;
      ++batch_count;
      ++episodes;
      const std::size_t steps = batch.size() - first;
      for (std::size_t t = 0; t < steps; ++t)
        batch[first + t].target =
            (reward * std::pow(cfg.gamma, static_cast<double>(steps - 1 - t)) - baseline) / kValueScale;
    }
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch[i].advantage = batch[i].target - values[i];
      mean += batch[i].advantage;
    }
    mean /= static_cast<double>(batch.size());
    for (const auto& s : batch) sq += (s.advantage - mean) * (s.advantage - mean);
    const double sd = std::sqrt(sq / static_cast<double>(batch.size())) + 1e-8;
    for (auto& s : batch) s.advantage = (s.advantage - mean) / sd;

    std::vector<std::size_t> order(batch.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch));
        const auto B = static_cast<Eigen::Index>(end - start);
        Eigen::MatrixXd X(n_in, B);
        for (Eigen::Index c = 0; c < B; ++c)
          X.col(c) = Eigen::Map<const Eigen::VectorXd>(batch[order[start + c]].x.data(), n_in);
        Mlp::Tape at, ct;
        const Eigen::MatrixXd logits = p.actor.forward(X, &at);
        const Eigen::MatrixXd v = p.critic.forward(X, &ct);
        Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(n_act, B);
        Eigen::MatrixXd d_v(1, B);
        for (Eigen::Index c = 0; c < B; ++c) {
          const Sample& s = batch[order[start + c]];
          const auto probs = detail::masked_softmax(logits.col(c), s.valid);
          const double ratio = std::exp(std::log(probs[s.action]) - s.logp);
          const bool active = s.advantage >= 0.0 ? ratio <= 1.0 + cfg.clip : ratio >= 1.0 - cfg.clip;
          const double d_logp = active ? -ratio * s.advantage : 0.0;
          double entropy = 0.0;
          for (int a : s.valid) entropy -= probs[a] > 0.0 ? probs[a] * std::log(probs[a]) : 0.0;
          for (int a : s.valid) {
            const double lp = probs[a] > 0.0 ? std::log(probs[a]) : 0.0;
            d_logits(a, c) = d_logp * ((a == s.action ? 1.0 : 0.0) - probs[a]) +
                             cfg.entropy_coef * probs[a] * (lp + entropy);
          }
          d_v(0, c) = 2.0 * cfg.value_coef * (v(0, c) - s.target);
        }
        d_logits /= static_cast<double>(B);
        d_v /= static_cast<double>(B);
        auto ga = p.actor.zero_gradients();
        p.actor.backward(at, d_logits, ga);
        actor_opt.step(p.actor, std::move(ga));
        auto gc = p.critic.zero_gradients();
        p.critic.backward(ct, d_v, gc);
        critic_opt.step(p.critic, std::move(gc));
      }
    }
    if (it % cfg.eval_interval == 0) evaluate(it);
  }
  result.policy = std::move(p);
  return result;
}

// ---------------------------------------------------------------------------
// Tree-search day agent

namespace detail {

/// Search over the topology held at each hour of one day. Candidates at an
/// hour are: keep the active topology, return to the reference, or move to
/// one of the nearest targets; a new topology gets its injection placement
/// optimised for the hour it is switched in.
class DaySearch {
 public:
  DaySearch(const Policy& p, ScreeningCache& cache, const DayScenario& day, double gamma = 1.0)
      : p_(&p), cache_(&cache), day_(&day), gamma_(gamma), ref_(TopologyConfig::reference(cache.grid())) {}

  struct Candidates {
    std::vector<int> ids;  // -2 keep, -1 reference, otherwise target index
    std::vector<std::vector<double>> inputs;
    std::vector<double> prior;
  };

  /// Features of holding `active` into `hour`.
  std::vector<double> state_input(int hour, const TopologyConfig& active) const {
    EnvState s;
    s.topo = active;
    s.hour = hour;
    const auto screener = cache_->get(active);
    const auto f = screener->flows(active, day_->at(hour));
    s.loadings.resize(f.size());
    for (std::size_t l = 0; l < f.size(); ++l)
      s.loadings[l] = std::abs(f[l]) / cache_->grid().line(static_cast<int>(l)).p_max;
    return state_features(*p_->space, p_->features, s, screener->line_worst_loading(active, day_->at(hour)));
  }

  Candidates candidates(int hour, const TopologyConfig& active) const {
    Candidates c;
    const auto& space = *p_->space;
    c.ids.push_back(-2);
    const auto sig = space.signature(active);
    const bool at_ref = sig && std::all_of(sig->begin(), sig->end(), [](auto v) { return v < 0; });
    if (!at_ref) c.ids.push_back(-1);
    const int room = p_->candidates - static_cast<int>(c.ids.size());
    for (int t : space.nearest_targets(active, room)) c.ids.push_back(t);
    const auto x = state_input(hour, active);
    Eigen::MatrixXd X(p_->actor.input_size(), static_cast<Eigen::Index>(c.ids.size()));
    for (std::size_t i = 0; i < c.ids.size(); ++i) {
      std::vector<double> in = x;
      const auto enc = topology_encoding(space, branch_of(c.ids[i], active));
      in.insert(in.end(), enc.begin(), enc.end());
      in.push_back(c.ids[i] == -2 ? 1.0 : 0.0);
      X.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(in.data(), X.rows());
      c.inputs.push_back(std::move(in));
    }
    const Eigen::MatrixXd logits = p_->actor.forward(X);
    std::vector<int> all(c.ids.size());
    std::iota(all.begin(), all.end(), 0);
    c.prior = masked_softmax(logits.row(0).transpose(), all);
    return c;
  }

  double value(int hour, const TopologyConfig& active) const {
    if (hour > kHours) return 0.0;
    return p_->critic.forward_one(state_input(hour, active))(0) * remaining(hour);
  }

  /// Topology in force at `hour` after choosing candidate `id`.
  const TopologyConfig& realise(int hour, int id, const TopologyConfig& active) {
    if (id == -2) return active;
    auto key = std::make_pair(hour, id);
    auto it = realised_.find(key);
    if (it == realised_.end())
      it = realised_.emplace(key, optimize_injection_topology(*cache_, branch_of(id, active), day_->at(hour))).first;
    return it->second;
  }

  double reward(int hour, const TopologyConfig& prev, const TopologyConfig& cur) const {
    return aza_step_reward(prev, cur, cache_->screen(cur, day_->at(hour)), p_->weights);
  }

  static double remaining(int hour) { return static_cast<double>(kHours - hour + 1); }
  double gamma() const { return gamma_; }

 private:
  const TopologyConfig& branch_of(int id, const TopologyConfig& active) const {
    if (id == -2) return active;
    if (id == -1) return ref_;
    return p_->space->targets()[id].config;
  }

  const Policy* p_;
  ScreeningCache* cache_;
  const DayScenario* day_;
  double gamma_;
  TopologyConfig ref_;
  std::map<std::pair<int, int>, TopologyConfig> realised_;
};

struct SearchResult {
  DaySearch::Candidates root;
  std::vector<int> visits;
};

/// Monte-Carlo tree search from (hour, active) with `simulations` leaf
/// expansions; each simulation adds one visit to exactly one root edge.
inline SearchResult tree_search(DaySearch& ds, int hour, const TopologyConfig& active, int simulations,
                                double c_puct) {
  struct Node {
    int hour;
    TopologyConfig active;
    bool expanded = false;
    DaySearch::Candidates cand;
    std::vector<int> child, visits;
    std::vector<double> total, reward;
    std::vector<char> known;
    double value_per_hour = 0.0;
  };
  std::vector<Node> nodes;
  auto expand = [&](std::size_t n) {
    Node& node = nodes[n];
    node.cand = ds.candidates(node.hour, node.active);
    const std::size_t k = node.cand.ids.size();
    node.child.assign(k, -1);
    node.visits.assign(k, 0);
    node.total.assign(k, 0.0);
    node.reward.assign(k, 0.0);
    node.known.assign(k, 0);
    node.expanded = true;
    const double v = ds.value(node.hour, node.active);
    node.value_per_hour = v / DaySearch::remaining(node.hour);
    return v;
  };
  nodes.push_back(Node{hour, active, false, {}, {}, {}, {}, {}, {}, 0.0});
  expand(0);
  for (int sim = 0; sim < simulations; ++sim) {
    std::vector<std::pair<std::size_t, int>> path;
    std::size_t n = 0;
    double leaf = 0.0;
    while (true) {
      if (nodes[n].hour > kHours) break;
      if (!nodes[n].expanded) {
        leaf = expand(n);
        break;
      }
      Node& node = nodes[n];
      int total_visits = 0;
      for (int v : node.visits) total_visits += v;
      const double explore = c_puct * std::sqrt(static_cast<double>(total_visits) + 1.0);
      const double rem = DaySearch::remaining(node.hour);
      int best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < node.visits.size(); ++a) {
        const double q = node.visits[a] ? node.total[a] / node.visits[a] / rem : node.value_per_hour;
        const double score = q + explore * node.cand.prior[a] / (1.0 + node.visits[a]);
        if (score > best_score) {
          best_score = score;
          best = static_cast<int>(a);
        }
      }
      if (!node.known[best]) {
        const TopologyConfig& cur = ds.realise(node.hour, node.cand.ids[best], node.active);
        node.reward[best] = ds.reward(node.hour, node.active, cur);
        node.known[best] = 1;
      }
      path.emplace_back(n, best);
      if (node.child[best] < 0) {
        const int next_hour = node.hour + 1;
        TopologyConfig next = ds.realise(node.hour, node.cand.ids[best], node.active);
        node.child[best] = static_cast<int>(nodes.size());
        nodes.push_back(Node{next_hour, std::move(next), false, {}, {}, {}, {}, {}, {}, 0.0});
      }
      n = static_cast<std::size_t>(nodes[n].child[best]);
    }
    double g = leaf;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      Node& node = nodes[it->first];
      g = node.reward[it->second] + ds.gamma() * g;
      node.visits[it->second] += 1;
      node.total[it->second] += g;
    }
  }
  return {std::move(nodes[0].cand), std::move(nodes[0].visits)};
}

/// Root choice: most visits, then highest prior, then lowest index. With
/// no simulations this is the prior argmax.
inline int best_root_choice(const SearchResult& r) {
  int best = 0;
  for (std::size_t a = 1; a < r.visits.size(); ++a) {
    const auto b = static_cast<std::size_t>(best);
    if (r.visits[a] > r.visits[b] || (r.visits[a] == r.visits[b] && r.root.prior[a] > r.root.prior[b]))
      best = static_cast<int>(a);
  }
  return best;
}

struct DayStep {
  std::vector<double> state;
  std::vector<std::vector<double>> inputs;
  std::vector<double> target_prior;
  double reward = 0.0;
};

struct DayRollout {
  std::vector<TopologyConfig> active;  // topology in force per hour
  std::vector<DayStep> steps;
  double utility = 0.0;
};

/// Plays one day from the reference topology. With `rng` the hourly choice
/// is sampled from the visit distribution, otherwise it is the best root
/// choice.
inline DayRollout run_day(const Policy& p, ScreeningCache& cache, const DayScenario& day, int simulations,
                          double c_puct, double gamma, std::mt19937_64* rng) {
  DaySearch ds(p, cache, day, gamma);
  DayRollout out;
  TopologyConfig active = TopologyConfig::reference(cache.grid());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int hour = 1; hour <= kHours; ++hour) {
    auto r = tree_search(ds, hour, active, simulations, c_puct);
    int choice = best_root_choice(r);
    std::vector<double> pi(r.visits.size());
    for (std::size_t a = 0; a < pi.size(); ++a)
      pi[a] = simulations > 0 ? static_cast<double>(r.visits[a]) / simulations : r.root.prior[a];
    if (rng) {
      double u = unit(*rng);
      for (std::size_t a = 0; a < pi.size(); ++a)
        if ((u -= pi[a]) < 0.0) {
          choice = static_cast<int>(a);
          break;
        }
    }
    TopologyConfig next = ds.realise(hour, r.root.ids[choice], active);
    DayStep step;
    step.reward = ds.reward(hour, active, next);
    if (rng) {
      step.state = ds.state_input(hour, active);
      step.inputs = std::move(r.root.inputs);
      step.target_prior = std::move(pi);
    }
    out.utility += step.reward;
    out.steps.push_back(std::move(step));
    out.active.push_back(next);
    active = std::move(next);
  }
  return out;
}

inline double reference_day_utility(ScreeningCache& cache, const DayScenario& day, const RewardWeights& w) {
  const auto ref = TopologyConfig::reference(cache.grid());
  double total = 0.0;
  for (int hour = 1; hour <= kHours; ++hour) total += aza_step_reward(ref, ref, cache.screen(ref, day.at(hour)), w);
  return total;
}

}  // namespace detail

/// Mean daily utility of the prior-argmax day rollout.
inline double mean_day_utility(const Policy& p, ScreeningCache& cache, const std::vector<const DayScenario*>& days,
                               int simulations = 0, double c_puct = 1.5) {
  double total = 0.0;
  for (const auto* d : days) total += detail::run_day(p, cache, *d, simulations, c_puct, 1.0, nullptr).utility;
  return days.empty() ? 0.0 : total / static_cast<double>(days.size());
}

/// An untrained tree-search policy (random prior and value model).
inline Policy make_aza_policy(ScreeningCache& cache, const std::vector<const DayScenario*>& train_days,
                              const TrainingConfig& cfg, std::shared_ptr<const ActionSpace> space = nullptr) {
  cfg.validate();
  if (train_days.empty()) throw ValidationError("training set is empty");
  if (!space) space = std::make_shared<const ActionSpace>(cache.grid(), cfg.targets, cfg.nearest);
  std::mt19937_64 rng(cfg.seed);
  Policy p;
  p.kind = PolicyKind::Aza;
  p.space = space;
  p.weights = RewardWeights::aza();
  p.candidates = cfg.candidates;
  p.features = select_monitored_lines(cache, train_days, cfg.monitored_lines);
  const int n_state = feature_size(*space, p.features);
  const int n_topo = static_cast<int>(topology_encoding(*space, TopologyConfig::reference(cache.grid())).size());
  p.actor = Mlp({n_state + n_topo + 1, cfg.hidden, cfg.hidden, 1}, rng, 0.01);
  p.critic = Mlp({n_state, cfg.hidden, cfg.hidden, 1}, rng, 0.01);
  return p;
}

inline TrainingResult train_aza_mcts(ScreeningCache& cache, const std::vector<const DayScenario*>& train_days,
                                     const TrainingConfig& cfg, std::shared_ptr<const ActionSpace> space = nullptr,
                                     const std::function<void(const CurvePoint&)>& log = {}) {
  Policy p = make_aza_policy(cache, train_days, cfg, std::move(space));
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam prior_opt(p.actor, cfg.learning_rate), value_opt(p.critic, cfg.learning_rate);

  double reference = 0.0;
  for (const auto* d : train_days) reference += detail::reference_day_utility(cache, *d, p.weights);
  reference /= static_cast<double>(train_days.size());

  TrainingResult result;
  detail::DivergenceDetector divergence(cfg.divergence_patience);
  double batch_total = 0.0;
  int batch_count = 0, episodes = 0;
  auto evaluate = [&](int iteration) {
    CurvePoint c{iteration, episodes, mean_day_utility(p, cache, train_days), reference,
                 batch_count ? batch_total / batch_count : 0.0};
    batch_total = 0.0;
    batch_count = 0;
    result.curve.push_back(c);
    if (log) log(c);
    if (divergence.update(c.eval_reward, c.reference_reward))
      throw TrainingDivergedError("day utility collapsed below the reference topology; " +
                                  detail::curve_diagnostics(result.curve));
  };
  evaluate(0);

  std::uniform_int_distribution<std::size_t> pick_day(0, train_days.size() - 1);
  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<detail::DayStep> steps;
    std::vector<double> targets;
    for (int e = 0; e < cfg.days_per_iteration; ++e) {
      const DayScenario& day = *train_days[pick_day(rng)];
      auto roll = detail::run_day(p, cache, day, cfg.simulations, cfg.c_puct, cfg.gamma, &rng);
      batch_total += roll.utility;
      ++batch_count;
      ++episodes;
      double g = 0.0;
      std::vector<double> per_hour(kHours);
      for (int h = kHours; h >= 1; --h) {
        g = roll.steps[h - 1].reward + cfg.gamma * g;
        per_hour[h - 1] = g / detail::DaySearch::remaining(h);
      }
      for (int h = 1; h <= kHours; ++h) {
        steps.push_back(std::move(roll.steps[h - 1]));
        targets.push_back(per_hour[h - 1]);
      }
    }
    std::vector<std::size_t> order(steps.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch));
        const auto B = static_cast<Eigen::Index>(end - start);
        // Prior: cross-entropy to the search distribution over each step's candidates.
        Eigen::Index cols = 0;
        for (std::size_t i = start; i < end; ++i) cols += static_cast<Eigen::Index>(steps[order[i]].inputs.size());
        Eigen::MatrixXd X(p.actor.input_size(), cols);
        Eigen::Index col = 0;
        for (std::size_t i = start; i < end; ++i)
          for (const auto& in : steps[order[i]].inputs)
            X.col(col++) = Eigen::Map<const Eigen::VectorXd>(in.data(), X.rows());
        Mlp::Tape pt;
        const Eigen::MatrixXd logits = p.actor.forward(X, &pt);
        Eigen::MatrixXd d_logits(1, cols);
        col = 0;
        for (std::size_t i = start; i < end; ++i) {
          const auto& s = steps[order[i]];
          const auto k = static_cast<Eigen::Index>(s.inputs.size());
          std::vector<int> all(static_cast<std::size_t>(k));
          std::iota(all.begin(), all.end(), 0);
          const auto probs = detail::masked_softmax(logits.block(0, col, 1, k).transpose(), all);
          for (Eigen::Index a = 0; a < k; ++a) d_logits(0, col + a) = (probs[a] - s.target_prior[a]) / B;
          col += k;
        }
        auto gp = p.actor.zero_gradients();
        p.actor.backward(pt, d_logits, gp);
        prior_opt.step(p.actor, std::move(gp));

        Eigen::MatrixXd S(p.critic.input_size(), B);
        for (Eigen::Index c = 0; c < B; ++c)
          S.col(c) = Eigen::Map<const Eigen::VectorXd>(steps[order[start + c]].state.data(), S.rows());
        Mlp::Tape vt;
        const Eigen::MatrixXd v = p.critic.forward(S, &vt);
        Eigen::MatrixXd d_v(1, B);
        for (Eigen::Index c = 0; c < B; ++c) d_v(0, c) = 2.0 * cfg.value_coef * (v(0, c) - targets[order[start + c]]) / B;
        auto gv = p.critic.zero_gradients();
        p.critic.backward(vt, d_v, gv);
        value_opt.step(p.critic, std::move(gv));
      }
    }
    if (it % cfg.eval_interval == 0) evaluate(it);
  }
  result.policy = std::move(p);
  return result;
}

// ---------------------------------------------------------------------------
// Deployment

/// Suggestions for all 24 hours of a day. SSA: greedy episode from the
/// reference at each hour. AZA: the topology held at each hour by the
/// prior-argmax day rollout. Injection placement is optimised per hour.
inline std::vector<PolicySuggestion> policy_suggest_day(const Policy& p, ScreeningCache& cache,
                                                        const DayScenario& day) {
  std::vector<PolicySuggestion> out;
  const auto ref = TopologyConfig::reference(cache.grid());
  if (p.kind == PolicyKind::Ssa) {
    const Environment env(cache, p.weights);
    for (int h = 1; h <= kHours; ++h) {
      const auto s = detail::ssa_greedy_episode(p, cache, env, day, h);
      out.push_back({optimize_injection_topology(cache, s.topo, day.at(h)), s.trace});
    }
  } else {
    const auto roll = detail::run_day(p, cache, day, 0, 0.0, 1.0, nullptr);
    for (int h = 1; h <= kHours; ++h) {
      auto topo = optimize_injection_topology(cache, roll.active[h - 1], day.at(h));
      auto trace = decompose_target(cache.grid(), ref, topo);
      out.push_back({std::move(topo), std::move(trace)});
    }
  }
  return out;
}

inline PolicySuggestion policy_suggest(const Policy& p, ScreeningCache& cache, const DayScenario& day, int hour) {
  if (hour < 1 || hour > kHours) throw ValidationError("timestamp out of range");
  if (p.kind == PolicyKind::Ssa) {
    const Environment env(cache, p.weights);
    const auto s = detail::ssa_greedy_episode(p, cache, env, day, hour);
    return {optimize_injection_topology(cache, s.topo, day.at(hour)), s.trace};
  }
  return policy_suggest_day(p, cache, day)[hour - 1];
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json policy_to_json(const Policy& p) {
  const auto& t = p.space->target_params();
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = to_string(p.kind);
  j["grid_fingerprint"] = p.space->grid().fingerprint();
  j["action_set"] = {{"substations", t.substations},
                     {"cap", t.cap},
                     {"min_ends_per_bus", t.min_ends_per_bus},
                     {"max_depth", t.max_depth},
                     {"nearest", p.space->nearest()},
                     {"actions", p.space->size()},
                     {"targets", p.space->targets().size()}};
  j["features"] = {{"monitored_lines", p.features.monitored_lines}};
  j["weights"] = {p.weights.w1, p.weights.w2, p.weights.w3};
  j["candidates"] = p.candidates;
  j["actor"] = p.actor.to_json();
  j["critic"] = p.critic.to_json();
  return j;
}

inline Policy policy_from_json(const Grid& grid, const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointVersion) throw ValidationError("unsupported checkpoint version");
    if (j.at("grid_fingerprint").get<std::uint64_t>() != grid.fingerprint()) throw GridMismatchError();
    Policy p;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "ssa" && kind != "aza") throw ValidationError("unknown policy kind '" + kind + "'");
    p.kind = kind == "ssa" ? PolicyKind::Ssa : PolicyKind::Aza;
    const auto& a = j.at("action_set");
    TargetGenerationParams t;
    t.substations = a.at("substations").get<int>();
    t.cap = a.at("cap").get<std::size_t>();
    t.min_ends_per_bus = a.at("min_ends_per_bus").get<int>();
    t.max_depth = a.at("max_depth").get<int>();
    p.space = std::make_shared<const ActionSpace>(grid, t, a.at("nearest").get<int>());
    if (p.space->size() != a.at("actions").get<int>() || p.space->targets().size() != a.at("targets").get<std::size_t>())
      throw ValidationError("checkpoint action set does not match the grid");
    p.features.monitored_lines = j.at("features").at("monitored_lines").get<std::vector<int>>();
    for (int l : p.features.monitored_lines)
      if (l < 0 || l >= grid.line_count()) throw ValidationError("checkpoint monitors an unknown line");
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 3) throw ValidationError("checkpoint reward weights must have three entries");
    p.weights = {w[0], w[1], w[2]};
    p.candidates = j.at("candidates").get<int>();
    p.actor = Mlp::from_json(j.at("actor"));
    p.critic = Mlp::from_json(j.at("critic"));
    const int n_state = feature_size(*p.space, p.features);
    const int expect_actor = p.kind == PolicyKind::Ssa
                                 ? n_state
                                 : n_state + static_cast<int>(topology_encoding(*p.space, TopologyConfig::reference(grid)).size()) + 1;
    if (p.actor.input_size() != expect_actor || p.critic.input_size() != n_state ||
        (p.kind == PolicyKind::Ssa && p.actor.output_size() != p.space->size()))
      throw ValidationError("checkpoint network shapes do not match the feature layout");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace gridplan
